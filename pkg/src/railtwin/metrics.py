"""Evaluation harness: classification metrics, rank-statistic AUC, ROUGE-L,
embedding relevance, judge-scored usefulness, and latency/token reporting."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .backends.base import Backend, SamplingParams, embed
from .errors import ScoringError, ValidationError
from .text import lcs_length, tokenize_for_rouge

logger = logging.getLogger(__name__)


# -- types -----------------------------------------------------------------


@dataclass(frozen=True)
class PredictionRecord:
    true_label: str
    predicted_label: str
    scores: Optional[dict[str, float]] = None


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_auc: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "per_class": {
                label: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for label, m in sorted(self.per_class.items())
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
                "auc": self.macro_auc,
            },
        }


@dataclass(frozen=True)
class RougeResult:
    precision: float
    recall: float
    f_measure: float
    lcs_length: int


@dataclass(frozen=True)
class LatencyRecord:
    frames: int
    tokens: int
    latency_ms: int
    task: str = ""

    def __post_init__(self):
        if self.frames < 0 or self.tokens < 0 or self.latency_ms < 0:
            raise ValidationError("latency record fields must be non-negative")


@dataclass(frozen=True)
class LatencyGroup:
    frames: int
    mean_latency_ms: float
    mean_tokens: float
    count: int


# -- classification ----------------------------------------------------------


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def classification_metrics(
    records: Sequence[PredictionRecord],
    classes: Optional[Sequence[str]] = None,
) -> MetricsReport:
    """Per-class one-vs-rest precision/recall/F1 plus macro averages.

    Zero-division convention: precision/recall are 0 when their denominator
    is 0. When every record carries scores, macro AUC is filled in as well.
    """
    if not records:
        raise ValidationError("classification_metrics requires at least one record")
    declared = list(classes) if classes is not None else sorted(
        {r.true_label for r in records} | {r.predicted_label for r in records}
    )
    declared_set = set(declared)
    for r in records:
        if r.true_label not in declared_set or r.predicted_label not in declared_set:
            raise ValidationError(
                f"label outside the declared class set: ({r.true_label!r}, {r.predicted_label!r})"
            )
    per_class: dict[str, ClassMetrics] = {}
    for label in declared:
        tp = sum(1 for r in records if r.true_label == label and r.predicted_label == label)
        fp = sum(1 for r in records if r.true_label != label and r.predicted_label == label)
        fn = sum(1 for r in records if r.true_label == label and r.predicted_label != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class[label] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=_f1(precision, recall),
            support=tp + fn,
        )
    macro_auc = None
    if all(r.scores is not None for r in records):
        try:
            macro_auc = auc_ovr(records, classes=declared)
        except ValidationError:
            macro_auc = None
    n = len(declared)
    return MetricsReport(
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / n,
        macro_recall=sum(m.recall for m in per_class.values()) / n,
        macro_f1=sum(m.f1 for m in per_class.values()) / n,
        macro_auc=macro_auc,
    )


def _rank_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    """P(random positive outscores random negative), ties counted half.

    Computed with midranks (Mann-Whitney U), not pair enumeration; the test
    oracle enumerates pairs directly.
    """
    scores = np.concatenate([pos, neg])
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=float)
    sorted_scores = scores[order]
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_rank_sum = ranks[: len(pos)].sum()
    u = pos_rank_sum - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def auc_ovr(
    records: Sequence[PredictionRecord],
    classes: Optional[Sequence[str]] = None,
) -> float:
    """Macro one-vs-rest AUC over per-class scores.

    Classes lacking positives or negatives are excluded with a warning; if
    every class is excluded the input cannot be scored.
    """
    if not records:
        raise ValidationError("auc_ovr requires at least one record")
    for r in records:
        if r.scores is None:
            raise ValidationError("auc_ovr requires scores on every record")
    declared = list(classes) if classes is not None else sorted(
        {r.true_label for r in records}
    )
    per_class: list[float] = []
    for label in declared:
        pos, neg = [], []
        for r in records:
            score = r.scores.get(label)
            if score is None or not np.isfinite(score):
                raise ValidationError(f"record lacks a finite score for class {label!r}")
            (pos if r.true_label == label else neg).append(score)
        if not pos or not neg:
            logger.warning("class %r has no positives or no negatives; excluded from AUC", label)
            continue
        per_class.append(_rank_auc(np.asarray(pos, dtype=float), np.asarray(neg, dtype=float)))
    if not per_class:
        raise ValidationError("no class had both positives and negatives")
    return float(sum(per_class) / len(per_class))


# -- text metrics ------------------------------------------------------------


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeResult:
    """ROUGE-L over token lists: LCS-based precision/recall/F."""
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    return RougeResult(
        precision=precision,
        recall=recall,
        f_measure=_f1(precision, recall),
        lcs_length=lcs,
    )


def rouge_l_text(candidate: str, reference: str) -> RougeResult:
    return rouge_l(tokenize_for_rouge(candidate), tokenize_for_rouge(reference))


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    va, vb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def _rescale(cosine: float) -> float:
    return min(1.0, max(0.0, (cosine + 1.0) / 2.0))


def relevance(
    question: str,
    answer: str,
    contexts: Sequence[str],
    embedder: Backend,
) -> dict[str, float]:
    """Answer/context relevance as question-cosine rescaled from [-1,1] to [0,1]."""
    if not question.strip() or not answer.strip():
        raise ValidationError("relevance requires a non-empty question and answer")
    q_vec = embed(question, embedder)
    answer_rel = _rescale(_cosine(q_vec, embed(answer, embedder)))
    if contexts:
        sims = [_rescale(_cosine(q_vec, embed(c, embedder))) for c in contexts]
        context_rel = sum(sims) / len(sims)
    else:
        context_rel = 0.0
    return {"answer_relevance": answer_rel, "context_relevance": context_rel}


USEFULNESS_RUBRIC = (
    "Rate the usefulness of the following inspection response on a scale of "
    "1 to 10, considering helpfulness, relevance, accuracy, and level of "
    "detail. Reply with the score first."
)

_INT_RE = re.compile(r"\d+")


def usefulness(response: str, rubric: str, judge: Backend) -> int:
    """Judge-scored usefulness: first integer in [1, 10] found in the reply."""
    messages = [
        {"role": "system", "content": rubric},
        {"role": "user", "content": response},
    ]
    completion = judge.complete(messages, SamplingParams(), role="judge")
    for token in _INT_RE.findall(completion.text):
        value = int(token)
        if 1 <= value <= 10:
            return value
    raise ScoringError("judge reply contains no integer in [1, 10]", raw_reply=completion.text)


# -- latency -----------------------------------------------------------------


def latency_report(records: Sequence[LatencyRecord]) -> list[LatencyGroup]:
    """Mean latency and token count grouped by frame count, ascending."""
    if not records:
        raise ValidationError("latency_report requires at least one record")
    groups: dict[int, list[LatencyRecord]] = {}
    for record in records:
        groups.setdefault(record.frames, []).append(record)
    report = []
    for frames in sorted(groups):
        bucket = groups[frames]
        report.append(
            LatencyGroup(
                frames=frames,
                mean_latency_ms=sum(r.latency_ms for r in bucket) / len(bucket),
                mean_tokens=sum(r.tokens for r in bucket) / len(bucket),
                count=len(bucket),
            )
        )
    return report


def latency_report_rows(records: Sequence[LatencyRecord]) -> list[dict]:
    return [
        {
            "frames": g.frames,
            "mean_latency_ms": g.mean_latency_ms,
            "mean_tokens": g.mean_tokens,
            "count": g.count,
        }
        for g in latency_report(records)
    ]


def write_latency_csv(records: Sequence[LatencyRecord], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frames", "mean_latency_ms", "mean_tokens"])
        for group in latency_report(records):
            writer.writerow([group.frames, group.mean_latency_ms, group.mean_tokens])
    return path
