"""Chat-completion-style HTTP backend client.

Speaks the de-facto interoperable JSON wire shape (messages array with
role/content, usage block) so any hosted or local server can serve the tuned
defect model. Retries transport and rate-limit failures up to three times
with exponential backoff; validation errors are never retried.
"""

from __future__ import annotations

import base64
import logging
import mimetypes
import time
from pathlib import Path
from typing import Any, Optional, Sequence

import httpx

from ..config import RoleModels
from ..errors import MalformedResponseError, RateLimitError, TransportError
from ..text import fallback_token_count
from .base import Backend, Completion, FinetuneJob, ImageArtifact, SamplingParams

logger = logging.getLogger(__name__)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def _media_part(ref: str) -> dict[str, Any]:
    path = Path(ref)
    if path.exists():
        mime = mimetypes.guess_type(ref)[0] or "image/png"
        payload = base64.b64encode(path.read_bytes()).decode("ascii")
        url = f"data:{mime};base64,{payload}"
    else:
        url = ref
    return {"type": "image_url", "image_url": {"url": url}}


class HttpBackend(Backend):
    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        models: Optional[RoleModels] = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        media_dir: Path | str = Path("data") / "media",
        client: Optional[httpx.Client] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.models = models or RoleModels()
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.media_dir = Path(media_dir)
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        return self._request("POST", path, payload)

    def _request(self, method: str, path: str, payload: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        url = f"{self.base_url}{path}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_base * (2 ** (attempt - 1))
                logger.debug("retrying %s %s in %.2fs (attempt %d)", method, path, delay, attempt)
                time.sleep(delay)
            try:
                response = self._client.request(method, url, json=payload)
            except httpx.HTTPError as exc:
                last_error = TransportError(f"{method} {url} failed: {exc}")
                continue
            if response.status_code in _RETRYABLE_STATUS:
                kind = RateLimitError if response.status_code == 429 else TransportError
                last_error = kind(f"{method} {url} returned {response.status_code}")
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"{method} {url} returned {response.status_code}",
                    detail=response.text[:500],
                )
            try:
                return response.json()
            except ValueError as exc:
                raise MalformedResponseError(f"{method} {url}: body is not JSON: {exc}")
        assert last_error is not None
        raise last_error

    def _wire_messages(
        self, messages: Sequence[dict[str, str]], media: Sequence[str]
    ) -> list[dict[str, Any]]:
        wire: list[dict[str, Any]] = []
        for msg in messages:
            role = msg["role"]
            # "context" is an internal role; most servers only accept
            # system/user/assistant.
            if role == "context":
                role = "system"
            wire.append({"role": role, "content": msg["content"]})
        if media and wire and wire[-1]["role"] == "user":
            text = wire[-1]["content"]
            parts: list[dict[str, Any]] = [{"type": "text", "text": text}]
            parts.extend(_media_part(ref) for ref in media)
            wire[-1]["content"] = parts
        return wire

    def complete(
        self,
        messages: Sequence[dict[str, str]],
        params: SamplingParams,
        role: str = "chat",
        media: Sequence[str] = (),
    ) -> Completion:
        params.validate()
        model = getattr(self.models, role, None) or self.models.chat
        payload = {
            "model": model,
            "messages": self._wire_messages(messages, media),
            "top_p": params.top_p,
            "top_k": params.top_k,
            "temperature": params.temperature,
        }
        started = time.monotonic()
        body = self._post("/chat/completions", payload)
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected completion shape: {exc}", detail=body)
        if not isinstance(text, str):
            raise MalformedResponseError("completion content is not a string", detail=body)
        usage = body.get("usage") or {}
        prompt_text = "\n".join(m.get("content", "") for m in messages)
        return Completion(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", fallback_token_count(prompt_text))),
            completion_tokens=int(usage.get("completion_tokens", fallback_token_count(text))),
            latency_ms=latency_ms,
            model_id=str(body.get("model", model)),
        )

    def generate_image(self, prompt: str, params: SamplingParams) -> ImageArtifact:
        params.validate()
        started = time.monotonic()
        body = self._post(
            "/images/generations",
            {"model": self.models.text_to_image, "prompt": prompt, "n": 1},
        )
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            item = body["data"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected image response shape: {exc}", detail=body)
        if item.get("url"):
            locator = str(item["url"])
        elif item.get("b64_json"):
            self.media_dir.mkdir(parents=True, exist_ok=True)
            locator_path = self.media_dir / f"tti-{int(started * 1000)}.png"
            locator_path.write_bytes(base64.b64decode(item["b64_json"]))
            locator = str(locator_path)
        else:
            raise MalformedResponseError("image response has neither url nor b64_json", detail=body)
        return ImageArtifact(
            locator=locator,
            prompt_tokens=fallback_token_count(prompt),
            latency_ms=latency_ms,
            model_id=self.models.text_to_image,
        )

    def embed_text(self, text: str) -> list[float]:
        body = self._post("/embeddings", {"model": self.models.embed, "input": text})
        try:
            return [float(v) for v in body["data"][0]["embedding"]]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected embedding shape: {exc}", detail=body)

    def submit_finetune(
        self, base_model_id: str, dataset_ref: str, params: SamplingParams
    ) -> FinetuneJob:
        body = self._post(
            "/fine_tuning/jobs",
            {
                "model": base_model_id,
                "training_file": dataset_ref,
                "hyperparameters": params.to_dict(),
            },
        )
        return self._job_from_body(body, base_model_id, dataset_ref, params)

    def poll_finetune(self, job_id: str) -> FinetuneJob:
        body = self._request("GET", f"/fine_tuning/jobs/{job_id}")
        return self._job_from_body(
            body,
            str(body.get("model", "")),
            str(body.get("training_file", "")),
            SamplingParams(),
        )

    def _job_from_body(
        self, body: dict[str, Any], base_model_id: str, dataset_ref: str, params: SamplingParams
    ) -> FinetuneJob:
        status_map = {
            "queued": "queued",
            "validating_files": "queued",
            "running": "running",
            "succeeded": "succeeded",
            "failed": "failed",
            "cancelled": "failed",
        }
        raw_status = str(body.get("status", ""))
        status = status_map.get(raw_status)
        if status is None or "id" not in body:
            raise MalformedResponseError(f"unexpected fine-tune job shape (status={raw_status!r})", detail=body)
        return FinetuneJob(
            job_id=str(body["id"]),
            base_model_id=base_model_id,
            dataset_ref=dataset_ref,
            params=params,
            status=status,
            result_model_id=body.get("fine_tuned_model") if status == "succeeded" else None,
            error=(body.get("error") or {}).get("message") if isinstance(body.get("error"), dict) else body.get("error"),
        )
