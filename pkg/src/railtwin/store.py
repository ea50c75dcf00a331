"""Durable persistence: append-only JSONL logs, loop-state snapshots, a model
registry, and run records, all flat files under a configured data directory.

Layout: DATA_DIR/{datasets,feedback,snapshots,runs,registry}. Logs are
append-only with strictly increasing sequence numbers; appends fsync. A
single writer per log file is the caller's contract; readers are free.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from .backends.base import SamplingParams
from .errors import RestoreError, StoreError, ValidationError

logger = logging.getLogger(__name__)

SUBDIRS = ("datasets", "feedback", "snapshots", "runs", "registry", "media")


def init_data_dir(data_dir: Path | str) -> Path:
    root = Path(data_dir)
    for sub in SUBDIRS:
        (root / sub).mkdir(parents=True, exist_ok=True)
    return root


# -- append-only logs --------------------------------------------------------


def _max_seq(path: Path) -> int:
    last = -1
    try:
        with path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    continue
                seq = row.get("seq")
                if isinstance(seq, int) and seq > last:
                    last = seq
    except FileNotFoundError:
        return -1
    return last


def append_record(log_path: Path | str, record: dict[str, Any]) -> int:
    """Append one row with the next sequence number; fsyncs before returning.

    The sequence continues from the persisted maximum, so restarts never
    reuse numbers.
    """
    path = Path(log_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    seq = _max_seq(path) + 1
    try:
        payload = json.dumps({"seq": seq, **record}, sort_keys=True)
    except (TypeError, ValueError) as exc:
        raise StoreError(f"record is not JSON-serializable: {exc}")
    try:
        with path.open("a", encoding="utf-8") as handle:
            handle.write(payload + "\n")
            handle.flush()
            os.fsync(handle.fileno())
    except OSError as exc:
        raise StoreError(f"append to {path} failed: {exc}")
    return seq


def load_records(
    log_path: Path | str,
    kind: Optional[str] = None,
    since: Optional[float] = None,
    until: Optional[float] = None,
    predicate: Optional[Callable[[dict[str, Any]], bool]] = None,
) -> list[dict[str, Any]]:
    """Rows in sequence order, optionally filtered by kind / time range.

    A trailing partially-written line is skipped with a warning instead of
    crashing the reader.
    """
    path = Path(log_path)
    if not path.exists():
        return []
    rows: list[dict[str, Any]] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc}")
    for index, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError:
            logger.warning("%s: skipping undecodable line %d", path, index + 1)
            continue
        rows.append(row)
    rows.sort(key=lambda r: r.get("seq", 0))
    if kind is not None:
        rows = [r for r in rows if r.get("kind") == kind]
    if since is not None:
        rows = [r for r in rows if r.get("timestamp", 0) >= since]
    if until is not None:
        rows = [r for r in rows if r.get("timestamp", 0) <= until]
    if predicate is not None:
        rows = [r for r in rows if predicate(r)]
    return rows


# -- loop-state snapshots ------------------------------------------------------


def snapshot_state(state: "LoopState", snapshot_dir: Path | str) -> Path:  # noqa: F821
    """Write one JSON document per snapshot; newest wins by filename."""
    from .feedback import LoopState  # local import to avoid a cycle

    if not isinstance(state, LoopState):
        raise ValidationError(f"expected a LoopState, got {type(state).__name__}")
    directory = Path(snapshot_dir)
    directory.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    path = directory / f"state-{stamp}-{state.iteration:08d}-{state.ft_count:04d}.json"
    path.write_text(json.dumps(state.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def restore_state(locator: Path | str) -> "LoopState":  # noqa: F821
    from .feedback import LoopState

    path = Path(locator)
    if not path.exists():
        raise RestoreError(f"snapshot not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        return LoopState.from_dict(raw)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise RestoreError(f"snapshot {path} is corrupt: {exc}")


def latest_snapshot(snapshot_dir: Path | str) -> Optional[Path]:
    directory = Path(snapshot_dir)
    if not directory.exists():
        return None
    candidates = sorted(directory.glob("state-*.json"))
    return candidates[-1] if candidates else None


# -- model registry ------------------------------------------------------------


@dataclass
class ModelRegistryEntry:
    model_id: str
    parent_model_id: Optional[str]
    created_at: float
    dataset_ref: str
    params: SamplingParams

    def to_row(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "parent_model_id": self.parent_model_id,
            "created_at": self.created_at,
            "dataset_ref": self.dataset_ref,
            "params": self.params.to_dict(),
        }


def register_model(registry_path: Path | str, entry: ModelRegistryEntry) -> int:
    return append_record(Path(registry_path), entry.to_row())


def load_registry(registry_path: Path | str) -> list[ModelRegistryEntry]:
    entries = []
    for row in load_records(registry_path):
        entries.append(
            ModelRegistryEntry(
                model_id=str(row["model_id"]),
                parent_model_id=row.get("parent_model_id"),
                created_at=float(row.get("created_at", 0.0)),
                dataset_ref=str(row.get("dataset_ref", "")),
                params=SamplingParams.from_dict(row.get("params", {})),
            )
        )
    check_registry_chain(entries)
    return entries


def check_registry_chain(entries: list[ModelRegistryEntry]) -> None:
    """The parent chain must be acyclic and anchored at parentless roots."""
    parents = {e.model_id: e.parent_model_id for e in entries}
    for start in parents:
        seen = set()
        node: Optional[str] = start
        while node is not None:
            if node in seen:
                raise StoreError(f"model registry chain contains a cycle at {node!r}")
            seen.add(node)
            node = parents.get(node)


# -- run records ----------------------------------------------------------------


RUN_KINDS = ("dataset_gen", "inference", "loop", "eval")


@dataclass
class RunRecord:
    run_id: str
    kind: str
    config: dict[str, Any]
    artifacts: list[str]
    status: str = "succeeded"

    def __post_init__(self):
        if self.kind not in RUN_KINDS:
            raise ValidationError(f"unknown run kind: {self.kind!r}")

    def to_row(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "config": self.config,
            "artifacts": self.artifacts,
            "status": self.status,
        }


def record_run(runs_path: Path | str, record: RunRecord) -> int:
    return append_record(runs_path, record.to_row())
