#!/usr/bin/env python3
"""Regenerate the console test fixtures from the real gateway.

The console's tests replay these recorded payloads instead of talking to a
live server, so both sides must agree on them; tests/test_console_fixtures.py
fails when the checked-in files drift from what the gateway produces.

Timestamps are normalized to null: they are the only non-deterministic field
in the payloads and carry no behavior the console depends on.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path
from typing import Any

from fastapi.testclient import TestClient

from railtwin.api import create_app
from railtwin.config import EngineConfig
from railtwin.feedback import LoopConfig, parse_feedback
from railtwin.service import EngineService

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"

KIND_CASES = [
    {"text": "The LLM accurately identified the cracks in the railway track image.", "score": None},
    {"text": "The LLM failed to identify the rust on the railway bolts.", "score": None},
    {"text": None, "score": 6},
    {"text": "You gave unrealistic defect", "score": None},
    {
        "text": "You should be able to differentiate between different types of defects "
        "such as cracks, rust, and mechanical wear.",
        "score": None,
    },
    {
        "text": "While it generally identifies major defects, it struggles with minor "
        "defects and often misses rust and small cracks",
        "score": 7,
    },
    {"text": "Try another angle of the wheel next time.", "score": None},
    {"text": "good catch, thanks", "score": None},
    {"text": None, "score": 1},
    {"text": "wrong location entirely", "score": 3},
]

SESSION_FEEDBACKS = [{"score": 8}, {"score": 9}, {"score": 8}]


def _normalize(value: Any) -> Any:
    if isinstance(value, dict):
        out: dict[str, Any] = {}
        for k, v in value.items():
            if k == "timestamp":
                out[k] = None
            elif k == "dataset_ref" and isinstance(v, str):
                out[k] = Path(v).name  # strip the run-specific directory
            else:
                out[k] = _normalize(v)
        return out
    if isinstance(value, list):
        return [_normalize(v) for v in value]
    return value


def build_kind_fixture() -> list[dict[str, Any]]:
    rows = []
    for case in KIND_CASES:
        feedback = parse_feedback(case["text"], case["score"])
        rows.append({"text": case["text"], "score": case["score"], "kind": feedback.kind})
    return rows


def build_session_fixture() -> dict[str, Any]:
    workdir = Path(tempfile.mkdtemp(prefix="console-fixture-"))
    config = EngineConfig(data_dir=workdir / "data")
    service = EngineService(
        config, loop_config=LoopConfig(ft_interval=3, satisfaction_threshold=70.0, ema_alpha=1.0)
    )
    client = TestClient(create_app(service))

    initial_state = client.get("/api/loop/state")
    initial_state.raise_for_status()
    initial_report = client.get("/api/loop/report")
    initial_report.raise_for_status()

    infer_request = {"text": "Steel wheel shows a radial crack", "intent": "analyze"}
    infer_response = client.post("/api/infer", json=infer_request)
    infer_response.raise_for_status()

    exchanges = []
    for body in SESSION_FEEDBACKS:
        response = client.post("/api/feedback", json=body)
        response.raise_for_status()
        state = client.get("/api/loop/state")
        state.raise_for_status()
        exchanges.append(
            {
                "request": body,
                "response": _normalize(response.json()),
                "state_after": _normalize(state.json()),
            }
        )
    report = client.get("/api/loop/report")
    report.raise_for_status()
    jobs = client.get("/api/finetune/jobs")
    jobs.raise_for_status()
    return {
        "loop_config": {"ft_interval": 3, "satisfaction_threshold": 70.0, "ema_alpha": 1.0},
        "initial_state": _normalize(initial_state.json()),
        "initial_report": _normalize(initial_report.json()),
        "infer": {"request": infer_request, "response": _normalize(infer_response.json())},
        "feedback": exchanges,
        "report": _normalize(report.json()),
        "jobs": _normalize(jobs.json()),
    }


def main(out_dir: Path = FIXTURES_DIR) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "feedback_kinds.json").write_text(
        json.dumps(build_kind_fixture(), indent=2, sort_keys=True) + "\n"
    )
    (out_dir / "session_alpha3.json").write_text(
        json.dumps(build_session_fixture(), indent=2, sort_keys=True) + "\n"
    )
    print(f"wrote fixtures to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1]) if len(sys.argv) > 1 else FIXTURES_DIR))
