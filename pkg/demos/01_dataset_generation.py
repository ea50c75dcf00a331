#!/usr/bin/env python3
"""Walkthrough: synthetic instruct-dataset generation on the mock backend.

Starts from three template-style captions, rephrases each into diverse
detailed samples, pairs them with a system message, and prints the
diversity / reconstruction objective per caption.

Run: python3 demos/01_dataset_generation.py
"""

import tempfile
from pathlib import Path

from railtwin import CaptionRecord, GenerationPolicy, MockBackend, compile_dataset
from railtwin.dataset import (
    caption_image,
    complexity_score,
    diversity,
    objective,
    reconstruction_loss,
    rephrase_caption,
    write_dataset_jsonl,
    write_objectives_json,
)

workdir = Path(tempfile.mkdtemp(prefix="dataset-demo-"))
backend = MockBackend(seed=7, media_dir=workdir / "media")

print("=" * 72)
print("1. Template-based captioning")
print("=" * 72)
record = caption_image("rail_crack.jpg", "defect-v1", backend)
print(f"image rail_crack.jpg -> caption: {record.text}")
print(f"caption complexity score: {complexity_score(record.text)}")

print()
print("=" * 72)
print("2. Rephrasing one caption into unique, more complex samples")
print("=" * 72)
caption = CaptionRecord(id="c1", text="A crack on the rail")
policy = GenerationPolicy(k_max=3, similarity_threshold=0.8)
outcome = rephrase_caption(caption, policy, backend)
for sample in outcome.samples:
    print(f"  [{sample.id}] complexity={sample.complexity}: {sample.text}")
print(f"attempts used: {outcome.attempts}, exhausted: {outcome.exhausted}")

print()
print("=" * 72)
print("3. The diversity / reconstruction objective")
print("=" * 72)
texts = [s.text for s in outcome.samples]
print(f"diversity D = {diversity(texts):.4f}")
for t in texts:
    print(f"  L({t[:50]}...) = {reconstruction_loss(t, caption.text):.4f}")
report = objective(texts, caption.text, lambda_=0.5)
print(f"objective D - lambda*L = {report.value:.4f} (lambda={report.lambda_})")

print()
print("=" * 72)
print("4. Compiling a full dataset (3 captions x k_max=5, global dedup)")
print("=" * 72)
captions = [
    CaptionRecord(id="c1", text="A crack on the rail"),
    CaptionRecord(id="c2", text="Corrosion at the joint"),
    CaptionRecord(id="c3", text="A missing bolt"),
]
build = compile_dataset(captions, GenerationPolicy(k_max=5), backend)
print(f"entries: {len(build.entries)} (= 3 captions x 5 samples, no duplicates)")
print(f"system message: {build.entries[0].system_message}")
for obj in build.objectives:
    print(f"  {obj.caption_id}: D={obj.diversity:.3f} L={obj.reconstruction_loss:.3f} "
          f"value={obj.value:.3f}")
dataset_path = write_dataset_jsonl(build.entries, workdir / "dataset.jsonl")
objectives_path = write_objectives_json(build.objectives, workdir / "objectives.json")
print(f"wrote {dataset_path}")
print(f"wrote {objectives_path}")
