#!/usr/bin/env python3
"""Walkthrough: the evaluation harness on mock-backed data.

Classification metrics with macro AUC, ROUGE-L, embedding relevance,
judge-scored usefulness, and the latency-versus-frames trend.

Run: python3 demos/03_evaluation.py
"""

import json
import random
import tempfile
from pathlib import Path

from railtwin import MockBackend, MultimodalInput, infer, process, route
from railtwin.metrics import (
    LatencyRecord,
    PredictionRecord,
    classification_metrics,
    latency_report,
    relevance,
    rouge_l_text,
    usefulness,
    USEFULNESS_RUBRIC,
)

workdir = Path(tempfile.mkdtemp(prefix="eval-demo-"))
backend = MockBackend(seed=7, delay_ms=4, media_dir=workdir / "media")
rng = random.Random(11)

print("=" * 72)
print("1. Classification metrics (per-class one-vs-rest + macro)")
print("=" * 72)
labels = ["crack", "rust", "missing-bolt"]
records = []
for _ in range(60):
    true = rng.choice(labels)
    predicted = true if rng.random() < 0.8 else rng.choice(labels)
    scores = {label: rng.random() + (0.7 if label == true else 0.0) for label in labels}
    records.append(PredictionRecord(true_label=true, predicted_label=predicted, scores=scores))
report = classification_metrics(records, classes=labels)
for label, m in report.per_class.items():
    print(f"  {label:13} P={m.precision:.3f} R={m.recall:.3f} F1={m.f1:.3f} n={m.support}")
print(f"  macro         P={report.macro_precision:.3f} R={report.macro_recall:.3f} "
      f"F1={report.macro_f1:.3f} AUC={report.macro_auc:.3f}")

print()
print("=" * 72)
print("2. ROUGE-L")
print("=" * 72)
candidate = "a deep crack runs along the rail head near the joint"
reference = "a deep crack extends along the rail head close to the joint"
result = rouge_l_text(candidate, reference)
print(f"  P={result.precision:.3f} R={result.recall:.3f} F={result.f_measure:.3f} "
      f"(LCS length {result.lcs_length})")

print()
print("=" * 72)
print("3. Answer / context relevance via the embedding backend")
print("=" * 72)
scores = relevance(
    question="what defect is on the wheel",
    answer="the wheel shows a radial crack on its circumference",
    contexts=["maintenance log for wheel 42", "defect glossary: cracks and rust"],
    embedder=backend,
)
print(f"  answer relevance:  {scores['answer_relevance']:.3f}")
print(f"  context relevance: {scores['context_relevance']:.3f}")

print()
print("=" * 72)
print("4. Judge-scored usefulness (1-10)")
print("=" * 72)
score = usefulness(
    "The rail head shows a transverse crack; restrict speed and schedule grinding.",
    USEFULNESS_RUBRIC,
    backend,
)
print(f"  judge score: {score}/10")

print()
print("=" * 72)
print("5. Latency vs frame count (mock per-call delay: 4 ms)")
print("=" * 72)
latency_records = []
for n, duration in ((1, 0.5), (5, 4.0), (10, 9.0)):
    video = workdir / f"clip{n}.mp4"
    video.write_bytes(b"\x00")
    (workdir / f"clip{n}.mp4.json").write_text(json.dumps({"duration_s": duration}))
    request = MultimodalInput(text="inspect", video=str(video))
    plan = route(request)
    raw = infer(request, plan, backend)
    response = process(raw, request, expected_output=plan.expected_output)
    latency_records.append(
        LatencyRecord(frames=n, tokens=response.usage.tokens,
                      latency_ms=response.usage.latency_ms, task="video")
    )
for group in latency_report(latency_records):
    bar = "#" * int(group.mean_latency_ms // 4)
    print(f"  frames={group.frames:3} mean_latency={group.mean_latency_ms:7.1f} ms "
          f"mean_tokens={group.mean_tokens:8.1f} {bar}")
