"""Seeded deterministic backend for offline runs and tests.

Contract: identical (seed, request content) yields byte-identical output,
token counts, and latency. Latency is simulated (``latency_ms`` equals the
configured delay, no real sleep) so end-to-end replays stay byte-identical
and fast.

The embedding scheme is fixed and documented because tests reproduce it
independently: for each lowercased word w with count c, let
``h = sha256(f"{seed}:{w}")`` as a big-endian integer; the vector slot is
``h % dim``, the sign is +1 if ``(h >> 64) % 2 == 0`` else -1, and the slot
accumulates ``sign * c``. The final vector is L2-normalized.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
from pathlib import Path
from typing import Callable, Optional, Sequence

from ..errors import GenerationError, TransportError
from ..text import fallback_token_count, words
from .base import Backend, Completion, FinetuneJob, ImageArtifact, SamplingParams

_CAPTION_IN_PROMPT = re.compile(r'initial description:\s*"([^"]+)"', re.IGNORECASE)

_SIZES = ("3 inches", "2 mm", "5 inches", "a quarter inch", "12 cm", "8 mm", "two inches", "30 cm")
_LOCATIONS = (
    "rail surface",
    "rail head",
    "fishplate joint",
    "wheel flange",
    "bolt seat",
    "sleeper fastening",
    "gauge corner",
    "web of the rail",
)
_ORIENTATIONS = (
    "perpendicular to the track direction",
    "running along the rail track",
    "at a shallow diagonal to the running edge",
    "radiating from the bolt hole",
    "parallel to the rolling surface",
    "curving toward the joint gap",
)
_TRAITS = (
    "with visible oxidation around the edges",
    "with fine branching at one end",
    "exposing bright metal underneath",
    "surrounded by crushed ballast dust",
    "with progressive widening toward the centre",
    "showing repeated impact marks nearby",
)
_DEFECTS = ("crack", "corrosion", "missing bolt", "wheel flat", "rust patch", "surface spall")
_SEVERITIES = ("low", "medium", "high")


class MockBackend(Backend):
    """Deterministic stand-in for every model role."""

    def __init__(
        self,
        seed: int = 7,
        delay_ms: int = 0,
        embed_dim: int = 64,
        media_dir: Path | str = Path("data") / "media",
        model_prefix: str = "mock",
        chat_responses: Optional[Sequence[str]] = None,
        fail_when: Optional[Callable[[str], bool]] = None,
        finetune_result: str = "succeed",
    ):
        self.seed = seed
        self.delay_ms = delay_ms
        self.embed_dim = embed_dim
        self.media_dir = Path(media_dir)
        self.model_prefix = model_prefix
        self.chat_responses = list(chat_responses) if chat_responses is not None else None
        self.fail_when = fail_when
        self.finetune_result = finetune_result
        self._lock = threading.Lock()
        self._script_cursor = 0
        self._finetune_counter = 0
        self._jobs: dict[str, FinetuneJob] = {}

    # -- helpers ---------------------------------------------------------

    def _rng(self, *parts: str) -> random.Random:
        key = hashlib.sha256("|".join((str(self.seed), *parts)).encode("utf-8")).digest()
        return random.Random(int.from_bytes(key[:8], "big"))

    def _digest8(self, *parts: str) -> str:
        return hashlib.sha256("|".join((str(self.seed), *parts)).encode("utf-8")).hexdigest()[:8]

    def _completion(self, text: str, prompt_text: str, role: str) -> Completion:
        return Completion(
            text=text,
            prompt_tokens=fallback_token_count(prompt_text),
            completion_tokens=fallback_token_count(text),
            latency_ms=self.delay_ms,
            model_id=f"{self.model_prefix}-{role}",
        )

    # -- Backend interface -----------------------------------------------

    def complete(
        self,
        messages: Sequence[dict[str, str]],
        params: SamplingParams,
        role: str = "chat",
        media: Sequence[str] = (),
    ) -> Completion:
        params.validate()
        prompt_text = "\n".join(m.get("content", "") for m in messages)
        if self.fail_when is not None and self.fail_when(prompt_text):
            raise TransportError("injected mock transport failure")
        if self.chat_responses is not None:
            with self._lock:
                text = self.chat_responses[self._script_cursor % len(self.chat_responses)]
                self._script_cursor += 1
            return self._completion(text, prompt_text, role)
        rng = self._rng(role, json.dumps(list(messages), sort_keys=True))
        lowered = prompt_text.lower()
        if "initial description:" in lowered:
            text = self._rephrase(prompt_text, rng)
        elif "scale of 1 to 10" in lowered:
            text = f"Score: {rng.randint(6, 9)}/10. The response covers the defect adequately."
        elif "```findings" in lowered:
            text = self._analysis_with_findings(rng)
        elif role == "vision" and "defect type" in lowered and "location" in lowered:
            text = self._template_caption(rng)
        elif role == "vision":
            defect, location, trait = rng.choice(_DEFECTS), rng.choice(_LOCATIONS), rng.choice(_TRAITS)
            text = f"Frame view ({self._digest8(prompt_text)}): {defect} visible near the {location}, {trait}."
        else:
            defect, location = rng.choice(_DEFECTS), rng.choice(_LOCATIONS)
            text = (
                f"Assessment ({self._digest8(prompt_text)}): the input suggests a {defect} "
                f"around the {location}; recommend closer inspection and scheduled maintenance."
            )
        return self._completion(text, prompt_text, role)

    def _rephrase(self, prompt_text: str, rng: random.Random) -> str:
        match = _CAPTION_IN_PROMPT.search(prompt_text)
        caption = match.group(1) if match else prompt_text.splitlines()[0]
        caption = caption.rstrip(".")
        size = rng.choice(_SIZES)
        location = rng.choice(_LOCATIONS)
        orientation = rng.choice(_ORIENTATIONS)
        trait = rng.choice(_TRAITS)
        # Keeping the full caption as the stem guarantees the rephrasing is at
        # least as complex as its source.
        return f"{caption}, {size} long on the {location}, {orientation}, {trait}."

    def _template_caption(self, rng: random.Random) -> str:
        defect = rng.choice(_DEFECTS)
        location = rng.choice(_LOCATIONS)
        trait = rng.choice(_TRAITS)
        return f"Defect type: {defect}; location: {location}. The area shows a {defect} {trait}."

    def _analysis_with_findings(self, rng: random.Random) -> str:
        n_rows = rng.randint(1, 3)
        rows = []
        seen = set()
        while len(rows) < n_rows:
            defect = rng.choice(_DEFECTS)
            if defect in seen:
                continue
            seen.add(defect)
            rows.append(f"{defect} | {rng.choice(_LOCATIONS)} | {rng.choice(_SEVERITIES)}")
        summary = (
            f"The inspected component shows {len(rows)} notable defect"
            f"{'s' if len(rows) != 1 else ''}. Immediate monitoring is advised."
        )
        block = "\n".join(rows)
        return f"{summary}\n\n```findings\n{block}\n```"

    def generate_image(self, prompt: str, params: SamplingParams) -> ImageArtifact:
        params.validate()
        if self.fail_when is not None and self.fail_when(prompt):
            raise TransportError("injected mock transport failure")
        if not prompt.strip():
            raise GenerationError("empty text-to-image prompt")
        from PIL import Image

        digest = self._digest8("tti", prompt)
        rng = self._rng("tti", prompt)
        self.media_dir.mkdir(parents=True, exist_ok=True)
        path = self.media_dir / f"tti-{digest}.png"
        if not path.exists():
            img = Image.new("RGB", (48, 48))
            img.putdata([
                (rng.randrange(256), rng.randrange(256), rng.randrange(256))
                for _ in range(48 * 48)
            ])
            img.save(path, format="PNG")
        return ImageArtifact(
            locator=str(path),
            prompt_tokens=fallback_token_count(prompt),
            latency_ms=self.delay_ms,
            model_id=f"{self.model_prefix}-tti",
        )

    def embed_text(self, text: str) -> list[float]:
        vec = [0.0] * self.embed_dim
        counts: dict[str, int] = {}
        for w in words(text):
            counts[w] = counts.get(w, 0) + 1
        for w, c in counts.items():
            h = int(hashlib.sha256(f"{self.seed}:{w}".encode("utf-8")).hexdigest(), 16)
            sign = 1.0 if (h >> 64) % 2 == 0 else -1.0
            vec[h % self.embed_dim] += sign * c
        norm = sum(v * v for v in vec) ** 0.5
        if norm == 0.0:
            return vec
        return [v / norm for v in vec]

    def submit_finetune(
        self, base_model_id: str, dataset_ref: str, params: SamplingParams
    ) -> FinetuneJob:
        params.validate()
        with self._lock:
            self._finetune_counter += 1
            counter = self._finetune_counter
        job_id = f"ftjob-{self._digest8(base_model_id, str(counter))}"
        job = FinetuneJob(
            job_id=job_id,
            base_model_id=base_model_id,
            dataset_ref=dataset_ref,
            params=params,
            status="running",
        )
        with self._lock:
            self._jobs[job_id] = job
        return job

    def poll_finetune(self, job_id: str) -> FinetuneJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise TransportError(f"unknown fine-tune job: {job_id}")
        if job.status == "running":
            if self.finetune_result == "fail":
                job = FinetuneJob(
                    job_id=job.job_id,
                    base_model_id=job.base_model_id,
                    dataset_ref=job.dataset_ref,
                    params=job.params,
                    status="failed",
                    error="injected mock fine-tune failure",
                )
            else:
                # Naming contract: base model id + "-ft-" + counter. The
                # counter is the chain depth derived from the base id itself,
                # so chains stay stable across process restarts.
                number = job.base_model_id.count("-ft-") + 1
                job = FinetuneJob(
                    job_id=job.job_id,
                    base_model_id=job.base_model_id,
                    dataset_ref=job.dataset_ref,
                    params=job.params,
                    status="succeeded",
                    result_model_id=f"{job.base_model_id}-ft-{number}",
                )
            with self._lock:
                self._jobs[job.job_id] = job
        return job
