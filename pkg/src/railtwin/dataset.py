"""Synthetic instruct-dataset generation.

Pipeline: template-based captioning of defect images, a rephrasing loop that
only accepts candidates which are unique and at least as complex as their
source caption, pairing every accepted sample with a system message, and a
globally deduplicated dataset compile. A diversity / reconstruction-loss
objective is computed per caption as a side report for policy tuning; it does
not gate acceptance.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .backends.base import Backend, SamplingParams
from .errors import DegenerateInputError, EngineError, GenerationError, TemplateNotFoundError, ValidationError
from .text import content_words, jaccard, normalize, word_ngrams, words

logger = logging.getLogger(__name__)

REPHRASE_PROMPT = (
    "You are generating data to train an LLM. Based on the initial "
    'description: "{caption}", create a prompt/response pair ensuring the '
    "response is more complex and diverse than previous ones."
)

DEFAULT_SYSTEM_MESSAGE_TEMPLATE = (
    "Given the defect description provided, identify potential risks and "
    "recommend preventive measures."
)


# -- domain types ----------------------------------------------------------


@dataclass
class CaptionTemplate:
    """A captioning prompt plus the fields a caption must mention."""

    id: str
    prompt: str
    required_fields: tuple[str, ...] = ()


DEFAULT_TEMPLATES: dict[str, CaptionTemplate] = {
    "defect-v1": CaptionTemplate(
        id="defect-v1",
        prompt=(
            "Caption this railway component image for an inspection log. "
            "State the defect type and the location of the defect on the "
            "component, then describe its visible characteristics in one or "
            "two sentences."
        ),
        required_fields=("defect type", "location"),
    ),
}


@dataclass
class CaptionRecord:
    id: str
    text: str
    template_id: str = "defect-v1"
    source_image_ref: Optional[str] = None
    tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not normalize(self.text):
            raise ValidationError(f"caption {self.id!r} is empty after normalization")


@dataclass
class GenerationPolicy:
    """Knobs of the rephrasing loop.

    k_max: accepted samples per caption. similarity_threshold: word-3-gram
    Jaccard above which two texts count as duplicates. lambda_: trade-off
    weight in the diversity objective. max_attempts: backend-call cap per
    caption (defaults to 3 * k_max).
    """

    k_max: int = 5
    similarity_threshold: float = 0.8
    lambda_: float = 0.5
    max_attempts: Optional[int] = None

    def __post_init__(self):
        if self.k_max < 0:
            raise ValidationError(f"k_max must be >= 0, got {self.k_max}")
        if not (0.0 <= self.similarity_threshold <= 1.0):
            raise ValidationError("similarity_threshold must be in [0, 1]")
        if self.lambda_ < 0:
            raise ValidationError("lambda_ must be >= 0")
        if self.max_attempts is None:
            self.max_attempts = max(3 * self.k_max, self.k_max)
        if self.max_attempts < self.k_max:
            raise ValidationError("max_attempts must be >= k_max")


@dataclass
class SyntheticSample:
    id: str
    caption_id: str
    text: str
    complexity: int
    attempt_index: int


@dataclass
class DatasetEntry:
    sample: SyntheticSample
    system_message: str
    prompt: str
    response: str

    def __post_init__(self):
        if not self.system_message.strip():
            raise ValidationError("dataset entry needs a non-empty system message")
        if not self.prompt.strip() or not self.response.strip():
            raise ValidationError("dataset entry needs a non-empty prompt/response pair")

    def to_row(self) -> dict:
        return {
            "id": self.sample.id,
            "caption_id": self.sample.caption_id,
            "system_message": self.system_message,
            "prompt": self.prompt,
            "response": self.response,
            "complexity": self.sample.complexity,
            "attempt_index": self.sample.attempt_index,
        }


@dataclass(frozen=True)
class ObjectiveReport:
    diversity: float
    reconstruction_loss: float
    lambda_: float
    value: float
    caption_id: Optional[str] = None

    def to_row(self) -> dict:
        return {
            "caption_id": self.caption_id,
            "D": self.diversity,
            "L": self.reconstruction_loss,
            "lambda": self.lambda_,
            "value": self.value,
        }


@dataclass
class RephraseOutcome:
    """Samples accepted for one caption, flagged if the attempt budget ran out."""

    samples: list[SyntheticSample]
    exhausted: bool
    attempts: int


@dataclass
class DatasetBuild:
    entries: list[DatasetEntry]
    objectives: list[ObjectiveReport]
    warnings: list[str] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)


# -- scoring primitives ----------------------------------------------------


def complexity_score(text: str) -> int:
    """Word count plus distinct word count, lowercased, punctuation stripped."""
    ws = words(text)
    return len(ws) + len(set(ws))


def is_unique(candidate: str, existing: Sequence[str], policy: GenerationPolicy) -> bool:
    """False iff the candidate normalization-equals any existing text or its
    word-3-gram Jaccard similarity with one exceeds the policy threshold."""
    cand_norm = normalize(candidate)
    cand_grams = word_ngrams(candidate, 3)
    for old in existing:
        if cand_norm == normalize(old):
            return False
        if jaccard(cand_grams, word_ngrams(old, 3)) > policy.similarity_threshold:
            return False
    return True


def diversity(samples: Sequence[str]) -> float:
    """Mean pairwise (1 - word-set Jaccard); 0.0 below two samples."""
    if len(samples) < 2:
        return 0.0
    sets = [set(words(s)) for s in samples]
    total = 0.0
    pairs = 0
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            total += 1.0 - jaccard(sets[i], sets[j])
            pairs += 1
    return total / pairs


def reconstruction_loss(sample: str, caption: str) -> float:
    """Deficit of the caption's distinct content words covered by the sample."""
    if not caption.strip():
        raise ValidationError("caption must be non-empty")
    targets = content_words(caption)
    if not targets:
        raise DegenerateInputError(f"caption has no content words: {caption!r}")
    covered = content_words(sample) & targets
    return 1.0 - len(covered) / len(targets)


def objective(samples: Sequence[str], caption: str, lambda_: float) -> ObjectiveReport:
    """Diversity minus lambda times the mean reconstruction loss."""
    if not samples:
        raise ValidationError("objective requires at least one sample")
    div = diversity(samples)
    loss = sum(reconstruction_loss(s, caption) for s in samples) / len(samples)
    return ObjectiveReport(
        diversity=div,
        reconstruction_loss=loss,
        lambda_=lambda_,
        value=div - lambda_ * loss,
    )


# -- generation ------------------------------------------------------------


def _stable_id(*parts: str) -> str:
    return hashlib.sha1("|".join(parts).encode("utf-8")).hexdigest()[:12]


def caption_image(
    image_ref: str,
    template_id: str,
    backend: Backend,
    templates: Optional[dict[str, CaptionTemplate]] = None,
    params: Optional[SamplingParams] = None,
) -> CaptionRecord:
    """Caption one image with a registered template via the vision backend."""
    registry = DEFAULT_TEMPLATES if templates is None else templates
    template = registry.get(template_id)
    if template is None:
        raise TemplateNotFoundError(f"unknown caption template: {template_id!r}")
    params = params or SamplingParams()
    messages = [
        {"role": "system", "content": template.prompt},
        {"role": "user", "content": f"[media: {image_ref}]"},
    ]
    completion = backend.complete(messages, params, role="vision", media=[image_ref])
    if not completion.text.strip():
        raise GenerationError(f"backend produced an empty caption for {image_ref}")
    return CaptionRecord(
        id=f"c-{_stable_id(image_ref, template_id, completion.text)}",
        text=completion.text.strip(),
        template_id=template_id,
        source_image_ref=image_ref,
    )


def _rephrase_messages(caption_text: str, previous: Sequence[str]) -> list[dict[str, str]]:
    content = REPHRASE_PROMPT.format(caption=caption_text)
    if previous:
        listing = "\n".join(f"- {p}" for p in previous)
        content = f"{content}\nPrevious ones:\n{listing}"
    return [{"role": "user", "content": content}]


def rephrase_caption(
    caption: CaptionRecord,
    policy: GenerationPolicy,
    backend: Backend,
    params: Optional[SamplingParams] = None,
) -> RephraseOutcome:
    """Request rephrasings until k_max are accepted or attempts run out.

    A candidate is accepted iff it is unique against the already accepted
    samples and at least as complex as the source caption. Every generated
    candidate (accepted or not) is fed back into the next request so the
    backend is always asked to move past "previous ones".
    """
    params = params or SamplingParams()
    base_complexity = complexity_score(caption.text)
    accepted: list[SyntheticSample] = []
    seen: list[str] = []
    attempts = 0
    while len(accepted) < policy.k_max and attempts < policy.max_attempts:
        attempts += 1
        completion = backend.complete(
            _rephrase_messages(caption.text, seen), params, role="chat"
        )
        candidate = completion.text.strip()
        if not candidate:
            continue
        ok = (
            is_unique(candidate, [s.text for s in accepted], policy)
            and complexity_score(candidate) >= base_complexity
        )
        seen.append(candidate)
        if not ok:
            continue
        accepted.append(
            SyntheticSample(
                id=f"{caption.id}-s{len(accepted) + 1}",
                caption_id=caption.id,
                text=candidate,
                complexity=complexity_score(candidate),
                attempt_index=attempts,
            )
        )
    exhausted = len(accepted) < policy.k_max
    if exhausted:
        logger.warning(
            "caption %s: accepted %d of %d samples after %d attempts",
            caption.id,
            len(accepted),
            policy.k_max,
            attempts,
        )
    return RephraseOutcome(samples=accepted, exhausted=exhausted, attempts=attempts)


def _instantiate_sm(sm_template: str, caption: CaptionRecord) -> str:
    return sm_template.format_map(
        {"caption": caption.text, "tags": ", ".join(caption.tags), "caption_id": caption.id}
    )


def compile_dataset(
    captions: Sequence[CaptionRecord],
    policy: GenerationPolicy,
    backend: Backend,
    sm_template: str = DEFAULT_SYSTEM_MESSAGE_TEMPLATE,
    params: Optional[SamplingParams] = None,
    max_workers: int = 1,
) -> DatasetBuild:
    """Rephrase every caption, pair samples with the system message, dedup.

    Captions whose generation fails are skipped and recorded; the run
    continues. Cross-caption duplicates are removed in one final
    single-threaded pass, keeping the first occurrence in caption order.
    """
    if not captions:
        raise ValidationError("compile_dataset requires at least one caption")
    if not sm_template.strip():
        raise ValidationError("system message template must be non-empty")
    ids = [c.id for c in captions]
    if len(set(ids)) != len(ids):
        raise ValidationError("caption ids must be unique within a run")

    def run_one(caption: CaptionRecord) -> RephraseOutcome:
        return rephrase_caption(caption, policy, backend, params=params)

    outcomes: list[Optional[RephraseOutcome]] = [None] * len(captions)
    failures: list[tuple[str, str]] = []
    warnings: list[str] = []
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {pool.submit(run_one, c): i for i, c in enumerate(captions)}
            for future, index in futures.items():
                try:
                    outcomes[index] = future.result()
                except EngineError as exc:
                    failures.append((captions[index].id, str(exc)))
    else:
        for index, caption in enumerate(captions):
            try:
                outcomes[index] = run_one(caption)
            except EngineError as exc:
                failures.append((caption.id, str(exc)))

    entries: list[DatasetEntry] = []
    objectives: list[ObjectiveReport] = []
    seen_norms: set[str] = set()
    for caption, outcome in zip(captions, outcomes):
        if outcome is None:
            warnings.append(f"caption {caption.id}: generation failed, skipped")
            continue
        if outcome.exhausted:
            warnings.append(
                f"caption {caption.id}: exhausted after {outcome.attempts} attempts, "
                f"accepted {len(outcome.samples)} of {policy.k_max}"
            )
        kept: list[SyntheticSample] = []
        for sample in outcome.samples:
            norm = normalize(sample.text)
            if norm in seen_norms:
                warnings.append(
                    f"caption {caption.id}: dropped cross-caption duplicate sample {sample.id}"
                )
                continue
            seen_norms.add(norm)
            kept.append(sample)
        system_message = _instantiate_sm(sm_template, caption)
        for sample in kept:
            entries.append(
                DatasetEntry(
                    sample=sample,
                    system_message=system_message,
                    prompt=caption.text,
                    response=sample.text,
                )
            )
        if kept:
            report = objective([s.text for s in kept], caption.text, policy.lambda_)
            objectives.append(
                ObjectiveReport(
                    diversity=report.diversity,
                    reconstruction_loss=report.reconstruction_loss,
                    lambda_=report.lambda_,
                    value=report.value,
                    caption_id=caption.id,
                )
            )
    return DatasetBuild(entries=entries, objectives=objectives, warnings=warnings, failures=failures)


# -- serialization ---------------------------------------------------------


def write_dataset_jsonl(entries: Sequence[DatasetEntry], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry.to_row(), sort_keys=True) + "\n")
    return path


def write_objectives_json(objectives: Sequence[ObjectiveReport], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps([o.to_row() for o in objectives], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def load_captions_jsonl(path: Path | str) -> list[CaptionRecord]:
    """Read caption rows ({id?, text, template_id?, tags?, source_image_ref?})."""
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle):
            if not line.strip():
                continue
            raw = json.loads(line)
            text = str(raw.get("text", ""))
            records.append(
                CaptionRecord(
                    id=str(raw.get("id") or f"c-{_stable_id(str(lineno), text)}"),
                    text=text,
                    template_id=str(raw.get("template_id", "defect-v1")),
                    source_image_ref=raw.get("source_image_ref"),
                    tags=[str(t) for t in raw.get("tags", [])],
                )
            )
    return records
