"""Engine configuration: backend selection, per-role model ids, data directory.

Sources, in increasing precedence: built-in defaults, a JSON config file,
environment variables (BACKEND_BASE_URL, BACKEND_API_KEY, BACKEND_MODEL,
DATA_DIR, PORT).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ValidationError


@dataclass
class RoleModels:
    """Model id serving each pipeline role."""

    chat: str = "defect-llm"
    vision: str = "defect-vision"
    text_to_image: str = "defect-tti"
    judge: str = "defect-judge"
    embed: str = "defect-embed"


@dataclass
class MockSettings:
    seed: int = 7
    delay_ms: int = 0
    embed_dim: int = 64


@dataclass
class EngineConfig:
    backend: str = "mock"  # "mock" or "http"
    base_url: str = ""
    api_key: str = ""
    models: RoleModels = field(default_factory=RoleModels)
    mock: MockSettings = field(default_factory=MockSettings)
    data_dir: Path = Path("data")
    port: int = 8787

    def with_data_dir(self, data_dir: Path | str) -> "EngineConfig":
        return replace(self, data_dir=Path(data_dir))


def _from_dict(raw: dict[str, Any]) -> EngineConfig:
    cfg = EngineConfig()
    if "backend" in raw:
        cfg.backend = str(raw["backend"])
    if "base_url" in raw:
        cfg.base_url = str(raw["base_url"])
    if "api_key" in raw:
        cfg.api_key = str(raw["api_key"])
    if "data_dir" in raw:
        cfg.data_dir = Path(raw["data_dir"])
    if "port" in raw:
        cfg.port = int(raw["port"])
    models = raw.get("models", {})
    for role in ("chat", "vision", "text_to_image", "judge", "embed"):
        if role in models:
            setattr(cfg.models, role, str(models[role]))
    mock = raw.get("mock", {})
    for key in ("seed", "delay_ms", "embed_dim"):
        if key in mock:
            setattr(cfg.mock, key, int(mock[key]))
    return cfg


def load_config(path: Optional[Path | str] = None, env: Optional[dict[str, str]] = None) -> EngineConfig:
    """Load configuration from an optional JSON file, then apply env overrides."""
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ValidationError(f"config file not found: {p}")
        raw = json.loads(p.read_text(encoding="utf-8"))
    cfg = _from_dict(raw)
    if env.get("BACKEND_BASE_URL"):
        cfg.base_url = env["BACKEND_BASE_URL"]
        if "backend" not in raw:
            cfg.backend = "http"
    if env.get("BACKEND_API_KEY"):
        cfg.api_key = env["BACKEND_API_KEY"]
    if env.get("BACKEND_MODEL"):
        cfg.models.chat = env["BACKEND_MODEL"]
    if env.get("DATA_DIR"):
        cfg.data_dir = Path(env["DATA_DIR"])
    if env.get("PORT"):
        cfg.port = int(env["PORT"])
    if cfg.backend not in ("mock", "http"):
        raise ValidationError(f"unknown backend kind: {cfg.backend!r}")
    if cfg.backend == "http" and not cfg.base_url:
        raise ValidationError("http backend requires base_url (or BACKEND_BASE_URL)")
    return cfg
