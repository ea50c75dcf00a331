from .base import (
    Backend,
    Completion,
    FinetuneJob,
    ImageArtifact,
    SamplingParams,
    chat,
    count_tokens,
    embed,
    execute_finetune,
)
from .http import HttpBackend
from .mock import MockBackend

from ..config import EngineConfig


def build_backend(config: EngineConfig) -> Backend:
    """Instantiate the configured backend with the engine's media directory."""
    media_dir = config.data_dir / "media"
    if config.backend == "http":
        return HttpBackend(
            base_url=config.base_url,
            api_key=config.api_key,
            models=config.models,
            media_dir=media_dir,
        )
    return MockBackend(
        seed=config.mock.seed,
        delay_ms=config.mock.delay_ms,
        embed_dim=config.mock.embed_dim,
        media_dir=media_dir,
    )


__all__ = [
    "Backend",
    "Completion",
    "FinetuneJob",
    "HttpBackend",
    "ImageArtifact",
    "MockBackend",
    "SamplingParams",
    "build_backend",
    "chat",
    "count_tokens",
    "embed",
    "execute_finetune",
]
