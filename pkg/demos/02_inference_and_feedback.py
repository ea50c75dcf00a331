#!/usr/bin/env python3
"""Walkthrough: multimodal routing, consumable responses, and the instant
feedback loop with interval/threshold fine-tune triggers.

Run: python3 demos/02_inference_and_feedback.py
"""

import json
import tempfile
from pathlib import Path

from railtwin import MockBackend, MultimodalInput, infer, process, route
from railtwin.feedback import LoopConfig, LoopDeps, parse_feedback, run_loop
from railtwin.prompts import DEFAULT_VPI_RULES, match_vpi

workdir = Path(tempfile.mkdtemp(prefix="inference-demo-"))
backend = MockBackend(seed=7, delay_ms=5, media_dir=workdir / "media")

print("=" * 72)
print("1. Routing by modality signature")
print("=" * 72)
cases = [
    MultimodalInput(text="Describe the defect"),
    MultimodalInput(text="what is wrong here", images=("wheel.png",)),
    MultimodalInput(text="inspect this pass", video="run.mp4"),
    MultimodalInput(text="rust texture on steel freight body", intent="generate"),
]
for case in cases:
    plan = route(case)
    roles = " -> ".join(step.role for step in plan.steps)
    print(f"  text={bool(case.text)!s:5} images={len(case.images)} "
          f"video={case.video is not None!s:5} intent={case.intent:8} | {roles} "
          f"=> {plan.expected_output}")

print()
print("=" * 72)
print("2. Virtual prompt injection on a trigger scenario")
print("=" * 72)
prompt = "Steel wheel shows a radial crack"
for injection in match_vpi(prompt, DEFAULT_VPI_RULES):
    print(f"  injected: {injection}")

print()
print("=" * 72)
print("3. Video inference: frame sampling, captioning, synthesis")
print("=" * 72)
video = workdir / "inspection.mp4"
video.write_bytes(b"\x00")
(workdir / "inspection.mp4.json").write_text(json.dumps({"duration_s": 4.0}))
request = MultimodalInput(text="inspect the joint area", video=str(video))
plan = route(request, fps=1.0)
raw = infer(request, plan, backend)
for step in raw.steps:
    print(f"  step {step.role:13} ok={step.ok} latency={step.latency_ms}ms "
          f"tokens={step.prompt_tokens + step.completion_tokens}")
response = process(raw, request, expected_output=plan.expected_output)
print(f"total: tokens={response.usage.tokens} latency={response.usage.latency_ms}ms")
print("findings:")
for finding in response.findings:
    print(f"  - {finding.defect_type} @ {finding.location_phrase} ({finding.severity_phrase})")

print()
print("=" * 72)
print("4. The feedback loop: EMA satisfaction, triggers, model chaining")
print("=" * 72)
stream_rows = [
    (None, 9),                                                    # 90, counter 1
    (None, 8),                                                    # 80, counter 2
    ("failed to flag the rust on the fishplate", None),           # 20 -> fine-tune from feedback
    (None, 10),                                                   # 100, counter 1
    ("missed the small cracks near the bolt hole", None),         # 20 -> fine-tune + SM update
    (None, 9),
    (None, 8),
]
stream = [parse_feedback(text, score) for text, score in stream_rows]
cfg = LoopConfig(ft_interval=3, satisfaction_threshold=70.0, ema_alpha=1.0)
deps = LoopDeps(backend=backend, datasets_dir=workdir / "datasets")
report = run_loop(cfg, stream, deps, base_model_id="defect-llm")
print(f"satisfaction trace: {report.satisfaction_trace}")
print(f"actions:            {report.actions}")
print(f"fine-tunes: {report.ft_count}, model chain:")
for model in report.model_chain:
    print(f"  {model}")
