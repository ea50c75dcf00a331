"""Model-backend abstraction: chat, vision captioning, text-to-image,
embeddings, fine-tune jobs. Every call reports latency and token usage."""

from __future__ import annotations

import json
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..errors import FinetuneTimeoutError, ValidationError
from ..prompts import ComposedPrompt
from ..text import fallback_token_count


@dataclass(frozen=True)
class SamplingParams:
    top_p: float = 0.9
    top_k: int = 40
    temperature: float = 0.7

    def validate(self) -> None:
        if not (0.0 < self.top_p <= 1.0):
            raise ValidationError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {self.top_k}")
        if self.temperature < 0.0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")

    def to_dict(self) -> dict:
        return {"top_p": self.top_p, "top_k": self.top_k, "temperature": self.temperature}

    @classmethod
    def from_dict(cls, raw: dict) -> "SamplingParams":
        return cls(
            top_p=float(raw.get("top_p", 0.9)),
            top_k=int(raw.get("top_k", 40)),
            temperature=float(raw.get("temperature", 0.7)),
        )


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: int
    model_id: str


@dataclass(frozen=True)
class ImageArtifact:
    """Output of a text-to-image call: a media locator plus usage."""

    locator: str
    prompt_tokens: int
    latency_ms: int
    model_id: str


JOB_STATUSES = ("queued", "running", "succeeded", "failed")


@dataclass
class FinetuneJob:
    job_id: str
    base_model_id: str
    dataset_ref: str
    params: SamplingParams
    status: str = "queued"
    result_model_id: Optional[str] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.status not in JOB_STATUSES:
            raise ValidationError(f"unknown job status: {self.status!r}")
        if (self.status == "succeeded") != (self.result_model_id is not None):
            raise ValidationError("result_model_id must be present iff status == succeeded")

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "base_model_id": self.base_model_id,
            "dataset_ref": self.dataset_ref,
            "params": self.params.to_dict(),
            "status": self.status,
            "result_model_id": self.result_model_id,
            "error": self.error,
        }


class Backend(ABC):
    """A model provider. Handles are safe to share across concurrent callers."""

    @abstractmethod
    def complete(
        self,
        messages: Sequence[dict[str, str]],
        params: SamplingParams,
        role: str = "chat",
        media: Sequence[str] = (),
    ) -> Completion:
        """Run a chat/vision completion over role/content messages."""

    @abstractmethod
    def generate_image(self, prompt: str, params: SamplingParams) -> ImageArtifact:
        """Render an image for the prompt and return its locator."""

    @abstractmethod
    def embed_text(self, text: str) -> list[float]:
        """Fixed-dimension embedding vector."""

    @abstractmethod
    def submit_finetune(
        self, base_model_id: str, dataset_ref: str, params: SamplingParams
    ) -> FinetuneJob:
        """Submit a fine-tune job; returns the job in its initial status."""

    @abstractmethod
    def poll_finetune(self, job_id: str) -> FinetuneJob:
        """Fetch the current job status."""

    def token_count(self, text: str) -> Optional[int]:
        """Backend tokenizer count, or None to use the fallback rule."""
        return None


def count_tokens(text: str, backend: Optional[Backend] = None) -> int:
    """Backend tokenizer count when available, else the documented fallback:
    maximal word-character runs plus non-space punctuation marks."""
    if backend is not None:
        counted = backend.token_count(text)
        if counted is not None:
            return counted
    return fallback_token_count(text)


def chat(prompt: ComposedPrompt, params: SamplingParams, backend: Backend) -> Completion:
    """Send a composed prompt to the backend's chat (or vision) model."""
    params.validate()
    role = "vision" if prompt.media else "chat"
    return backend.complete(prompt.to_messages(), params, role=role, media=prompt.media)


def embed(text: str, backend: Backend) -> list[float]:
    if not text.strip():
        raise ValidationError("cannot embed empty text")
    return backend.embed_text(text)


def _dataset_entry_count(dataset_ref: str) -> int:
    path = Path(dataset_ref)
    if not path.exists():
        raise ValidationError(f"dataset not found: {dataset_ref}")
    count = 0
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            json.loads(line)
            count += 1
    return count


def execute_finetune(
    base_model_id: str,
    dataset_ref: str,
    params: SamplingParams,
    backend: Backend,
    poll_interval: float = 0.05,
    timeout: float = 60.0,
) -> FinetuneJob:
    """Submit a fine-tune job and poll until a terminal status or timeout.

    A backend rejection comes back as a job with status "failed" rather than
    an exception, so batch callers can record it and move on.
    """
    params.validate()
    if _dataset_entry_count(dataset_ref) < 1:
        raise ValidationError(f"dataset is empty: {dataset_ref}")
    job = backend.submit_finetune(base_model_id, dataset_ref, params)
    deadline = time.monotonic() + timeout
    while job.status not in ("succeeded", "failed"):
        job = backend.poll_finetune(job.job_id)
        if job.status in ("succeeded", "failed"):
            break
        if time.monotonic() >= deadline:
            raise FinetuneTimeoutError(
                f"fine-tune job {job.job_id} still {job.status} after {timeout}s",
                last_status=job.status,
            )
        time.sleep(poll_interval)
    if job.status == "succeeded" and job.result_model_id == base_model_id:
        job = FinetuneJob(
            job_id=job.job_id,
            base_model_id=base_model_id,
            dataset_ref=dataset_ref,
            params=params,
            status="failed",
            error="backend returned the base model as the fine-tune result",
        )
    return job
