"""Operator-facing engine service shared by the CLI and the HTTP API.

Owns run bookkeeping, the single-writer discipline for the feedback loop, and
idempotent request handling (duplicate request ids return the original
result).
"""

from __future__ import annotations

import hashlib
import logging
import threading
import time
import uuid
from pathlib import Path
from typing import Any, Optional

from .backends import Backend, build_backend
from .config import EngineConfig
from .dataset import (
    CaptionRecord,
    DatasetBuild,
    GenerationPolicy,
    compile_dataset,
    load_captions_jsonl,
    write_dataset_jsonl,
    write_objectives_json,
)
from .errors import NotFoundError, ValidationError
from .feedback import (
    LoopConfig,
    LoopDeps,
    LoopState,
    new_loop_state,
    parse_feedback,
    step,
)
from .inference import ConsumableResponse, MultimodalInput, infer, process, route
from .metrics import LatencyRecord, latency_report_rows
from .prompts import DEFAULT_VPI_RULES, VpiRule, load_rules, match_vpi
from .store import (
    ModelRegistryEntry,
    RunRecord,
    append_record,
    init_data_dir,
    latest_snapshot,
    load_records,
    record_run,
    register_model,
    restore_state,
    snapshot_state,
)

logger = logging.getLogger(__name__)


class EngineService:
    def __init__(
        self,
        config: EngineConfig,
        backend: Optional[Backend] = None,
        loop_config: Optional[LoopConfig] = None,
        policy: Optional[GenerationPolicy] = None,
    ):
        self.config = config
        self.data_dir = init_data_dir(config.data_dir)
        self.backend = backend or build_backend(config)
        self.loop_config = loop_config or LoopConfig()
        self.policy = policy or GenerationPolicy()
        self.feedback_log = self.data_dir / "feedback" / "events.jsonl"
        self.runs_log = self.data_dir / "runs" / "runs.jsonl"
        self.latency_log = self.data_dir / "runs" / "latency.jsonl"
        self.registry_log = self.data_dir / "registry" / "models.jsonl"
        self.jobs_log = self.data_dir / "registry" / "jobs.jsonl"
        self.snapshots_dir = self.data_dir / "snapshots"
        self.datasets_dir = self.data_dir / "datasets"
        self.vpi_rules = self._load_vpi_rules()
        self._loop_lock = threading.Lock()
        self._request_cache: dict[str, Any] = {}
        self._cache_lock = threading.Lock()
        self.state = self._restore_or_new_state()
        self.loop_deps = LoopDeps(
            backend=self.backend,
            policy=self.policy,
            datasets_dir=self.datasets_dir,
            on_finetune=self._record_finetune,
        )

    # -- wiring ---------------------------------------------------------

    def _load_vpi_rules(self) -> list[VpiRule]:
        rules_path = self.data_dir / "vpi_rules.json"
        if rules_path.exists():
            return load_rules(rules_path)
        return list(DEFAULT_VPI_RULES)

    def _restore_or_new_state(self) -> LoopState:
        snapshot = latest_snapshot(self.snapshots_dir)
        if snapshot is not None:
            logger.info("restoring loop state from %s", snapshot)
            return restore_state(snapshot)
        return new_loop_state(self.config.models.chat)

    def _record_finetune(self, job, dataset_path: Path, build: DatasetBuild) -> None:
        append_record(self.jobs_log, job.to_dict())
        if job.status == "succeeded":
            register_model(
                self.registry_log,
                ModelRegistryEntry(
                    model_id=job.result_model_id,
                    parent_model_id=job.base_model_id,
                    created_at=time.time(),
                    dataset_ref=str(dataset_path),
                    params=job.params,
                ),
            )

    def _idempotent(self, request_id: Optional[str], compute):
        if request_id is None:
            return compute()
        with self._cache_lock:
            if request_id in self._request_cache:
                return self._request_cache[request_id]
        result = compute()
        with self._cache_lock:
            self._request_cache.setdefault(request_id, result)
        return result

    # -- inference --------------------------------------------------------

    def infer(
        self,
        text: Optional[str] = None,
        image_refs: tuple[str, ...] = (),
        video_ref: Optional[str] = None,
        intent: str = "analyze",
        fps: float = 1.0,
        request_id: Optional[str] = None,
    ) -> dict[str, Any]:
        def compute() -> dict[str, Any]:
            request = MultimodalInput(
                text=text, images=tuple(image_refs), video=video_ref, intent=intent
            )
            with self._loop_lock:
                sm_text = self.state.sm.text
                params = self.state.params
            injections = match_vpi(text or "", self.vpi_rules)
            plan = route(request, fps=fps)
            raw = infer(
                request,
                plan,
                self.backend,
                system_message=sm_text,
                injections=injections,
                params=params,
            )
            response = process(raw, request, expected_output=plan.expected_output)
            frames = 0
            for step_result in raw.steps:
                if step_result.role == "sample_frames":
                    frames = len(step_result.media)
            if frames == 0:
                frames = len(image_refs)
            append_record(
                self.latency_log,
                LatencyRecord(
                    frames=frames,
                    tokens=response.usage.tokens,
                    latency_ms=response.usage.latency_ms,
                    task=intent,
                ).__dict__,
            )
            record_run(
                self.runs_log,
                RunRecord(
                    run_id=f"run-{uuid.uuid4().hex[:10]}",
                    kind="inference",
                    config={"intent": intent, "frames": frames, "model_id": self.state.model_id},
                    artifacts=list(response.media),
                    status="partial" if raw.failed else "succeeded",
                ),
            )
            return self._response_payload(response)

        return self._idempotent(request_id, compute)

    def _response_payload(self, response: ConsumableResponse) -> dict[str, Any]:
        payload = response.to_dict()
        media_root = self.data_dir / "media"
        served = []
        for locator in payload["media"]:
            path = Path(locator)
            try:
                served.append(f"/media/{path.relative_to(media_root)}")
            except ValueError:
                served.append(locator)
        payload["media"] = served
        return payload

    # -- feedback loop -----------------------------------------------------

    def feedback(
        self,
        text: Optional[str] = None,
        score: Optional[int] = None,
        request_id: Optional[str] = None,
    ) -> dict[str, Any]:
        def compute() -> dict[str, Any]:
            with self._loop_lock:
                event = parse_feedback(text, score, timestamp=time.time())
                action = step(self.state, event, self.loop_config, self.loop_deps)
                append_record(
                    self.feedback_log,
                    {
                        "kind": event.kind,
                        "text": event.text,
                        "score": event.score,
                        "timestamp": event.timestamp,
                        "satisfaction_after": self.state.satisfaction.value,
                        "action": action,
                        "ft_count_after": self.state.ft_count,
                        "iteration": self.state.iteration,
                    },
                )
                snapshot_state(self.state, self.snapshots_dir)
                return {
                    "action": action,
                    "kind": event.kind,
                    "satisfaction": self.state.satisfaction.value,
                    "ft_count": self.state.ft_count,
                    "counter": self.state.counter,
                    "iteration": self.state.iteration,
                    "model_id": self.state.model_id,
                }

        return self._idempotent(request_id, compute)

    def loop_state_snapshot(self) -> dict[str, Any]:
        """Latest persisted snapshot; served without taking the write lock."""
        snapshot = latest_snapshot(self.snapshots_dir)
        if snapshot is not None:
            return restore_state(snapshot).to_dict()
        return self.state.to_dict()

    def loop_report(self) -> dict[str, Any]:
        rows = load_records(self.feedback_log)
        return {
            "iterations": rows[-1]["iteration"] if rows else 0,
            "ft_count": self.state.ft_count,
            "satisfaction_trace": [r["satisfaction_after"] for r in rows],
            "actions": [r["action"] for r in rows],
            "model_chain": list(self.state.model_chain),
        }

    # -- datasets ------------------------------------------------------------

    def dataset_generate(
        self,
        captions: list[dict[str, Any]],
        k_max: Optional[int] = None,
        similarity_threshold: Optional[float] = None,
        lambda_: Optional[float] = None,
        request_id: Optional[str] = None,
    ) -> dict[str, Any]:
        def compute() -> dict[str, Any]:
            if not captions:
                raise ValidationError("captions must be a non-empty list")
            records = []
            for index, raw in enumerate(captions):
                records.append(
                    CaptionRecord(
                        id=str(raw.get("id") or f"c{index + 1}"),
                        text=str(raw.get("text", "")),
                        template_id=str(raw.get("template_id", "defect-v1")),
                        source_image_ref=raw.get("source_image_ref"),
                        tags=[str(t) for t in raw.get("tags", [])],
                    )
                )
            policy = GenerationPolicy(
                k_max=self.policy.k_max if k_max is None else k_max,
                similarity_threshold=(
                    self.policy.similarity_threshold
                    if similarity_threshold is None
                    else similarity_threshold
                ),
                lambda_=self.policy.lambda_ if lambda_ is None else lambda_,
            )
            build = compile_dataset(records, policy, self.backend)
            digest = hashlib.sha1(
                "|".join(r.text for r in records).encode("utf-8")
            ).hexdigest()[:10]
            dataset_id = f"ds-{digest}"
            dataset_path = write_dataset_jsonl(build.entries, self.datasets_dir / f"{dataset_id}.jsonl")
            objectives_path = write_objectives_json(
                build.objectives, self.datasets_dir / f"{dataset_id}.objectives.json"
            )
            record_run(
                self.runs_log,
                RunRecord(
                    run_id=f"run-{uuid.uuid4().hex[:10]}",
                    kind="dataset_gen",
                    config={"k_max": policy.k_max, "captions": len(records)},
                    artifacts=[str(dataset_path), str(objectives_path)],
                ),
            )
            return {
                "dataset_id": dataset_id,
                "entries": len(build.entries),
                "path": str(dataset_path),
                "objectives_path": str(objectives_path),
                "warnings": build.warnings,
                "failures": [{"caption_id": c, "error": e} for c, e in build.failures],
            }

        return self._idempotent(request_id, compute)

    def dataset_rows(self, dataset_id: str) -> list[dict[str, Any]]:
        path = self.datasets_dir / f"{dataset_id}.jsonl"
        if not path.exists():
            raise NotFoundError(f"dataset not found: {dataset_id}")
        import json

        rows = []
        with path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    rows.append(json.loads(line))
        return rows

    # -- metrics ----------------------------------------------------------------

    def latency_rows(self) -> list[dict[str, Any]]:
        rows = load_records(self.latency_log)
        if not rows:
            return []
        records = [
            LatencyRecord(
                frames=int(r.get("frames", 0)),
                tokens=int(r.get("tokens", 0)),
                latency_ms=int(r.get("latency_ms", 0)),
                task=str(r.get("task", "")),
            )
            for r in rows
        ]
        return latency_report_rows(records)

    def finetune_jobs(self) -> list[dict[str, Any]]:
        return load_records(self.jobs_log)


def load_captions_file(path: Path | str) -> list[CaptionRecord]:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"captions file not found: {p}")
    return load_captions_jsonl(p)
