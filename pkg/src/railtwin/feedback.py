"""Instant user feedback loop: feedback parsing, satisfaction dynamics,
system-message and sampling-parameter updates, and interval/threshold
triggered fine-tune cycles that chain each new model on top of the previous
one.

The loop is a single-writer state machine: feedback events are applied
strictly in arrival order, and the fine-tune trigger fires when the counter
reaches the configured interval or satisfaction falls below the threshold.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional

from .backends.base import Backend, FinetuneJob, SamplingParams, execute_finetune
from .dataset import CaptionRecord, DatasetBuild, GenerationPolicy, compile_dataset, write_dataset_jsonl
from .dataset import DEFAULT_SYSTEM_MESSAGE_TEMPLATE
from .errors import ValidationError
from .prompts import DEFAULT_SYSTEM_MESSAGE, SystemMessage
from .text import words

logger = logging.getLogger(__name__)

FEEDBACK_KINDS = ("positive", "negative", "score", "open_ended", "mixed")

# Small embedded polarity lexicon (versioned here for determinism). Weights
# are summed over word occurrences; no negation handling by design.
POLARITY_LEXICON: dict[str, int] = {
    "accurate": 1,
    "accurately": 1,
    "clear": 1,
    "correct": 1,
    "correctly": 1,
    "detailed": 1,
    "excellent": 1,
    "good": 1,
    "great": 1,
    "helpful": 1,
    "impressive": 1,
    "perfect": 1,
    "precise": 1,
    "reliable": 1,
    "thorough": 1,
    "useful": 1,
    "well": 1,
    "bad": -1,
    "confusing": -1,
    "error": -1,
    "errors": -1,
    "fail": -1,
    "failed": -1,
    "fails": -1,
    "inaccurate": -1,
    "incorrect": -1,
    "irrelevant": -1,
    "misses": -1,
    "missed": -1,
    "poor": -1,
    "struggled": -1,
    "struggles": -1,
    "unable": -1,
    "unrealistic": -1,
    "useless": -1,
    "vague": -1,
    "wrong": -1,
}


def polarity_score(text: str) -> int:
    return sum(POLARITY_LEXICON.get(w, 0) for w in words(text))


@dataclass
class Feedback:
    kind: str
    score: Optional[int] = None
    text: Optional[str] = None
    timestamp: Optional[float] = None

    def __post_init__(self):
        if self.kind not in FEEDBACK_KINDS:
            raise ValidationError(f"unknown feedback kind: {self.kind!r}")
        if self.score is not None and not (1 <= self.score <= 10):
            raise ValidationError(f"score must be in 1..10, got {self.score}")
        if self.kind == "score" and self.score is None:
            raise ValidationError("score feedback requires a score")
        if self.kind == "mixed" and (self.score is None or not self.text):
            raise ValidationError("mixed feedback requires both score and text")
        if self.kind in ("positive", "negative", "open_ended") and not self.text:
            raise ValidationError(f"{self.kind} feedback requires text")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "score": self.score, "text": self.text, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, raw: dict) -> "Feedback":
        return cls(
            kind=str(raw["kind"]),
            score=raw.get("score"),
            text=raw.get("text"),
            timestamp=raw.get("timestamp"),
        )


def parse_feedback(
    raw_text: Optional[str],
    raw_score: Optional[int],
    timestamp: Optional[float] = None,
) -> Feedback:
    """Classify raw feedback into one of the five kinds.

    Score and text together make it mixed; score alone is score-based; text
    alone is positive/negative when the polarity lexicon nets that way, and
    open-ended otherwise.
    """
    text = raw_text.strip() if raw_text else None
    if text is None and raw_score is None:
        raise ValidationError("feedback needs text, a score, or both")
    if raw_score is not None and not (1 <= raw_score <= 10):
        raise ValidationError(f"score must be in 1..10, got {raw_score}")
    if raw_score is not None and text:
        return Feedback(kind="mixed", score=raw_score, text=text, timestamp=timestamp)
    if raw_score is not None:
        return Feedback(kind="score", score=raw_score, timestamp=timestamp)
    net = polarity_score(text)
    if net > 0:
        kind = "positive"
    elif net < 0:
        kind = "negative"
    else:
        kind = "open_ended"
    return Feedback(kind=kind, text=text, timestamp=timestamp)


# -- satisfaction dynamics ----------------------------------------------------


@dataclass(frozen=True)
class ScoreAnchors:
    """Calibration constants mapping feedback kinds onto a 0..100 scale."""

    positive: float = 90.0
    negative: float = 20.0
    neutral: float = 50.0
    polarity_slope: float = 10.0


def score_pct(feedback: Feedback, anchors: ScoreAnchors = ScoreAnchors()) -> float:
    """Map feedback onto 0..100: explicit scores become 10x the score."""
    if feedback.kind in ("score", "mixed"):
        return 10.0 * feedback.score
    if feedback.kind == "positive":
        return anchors.positive
    if feedback.kind == "negative":
        return anchors.negative
    net = polarity_score(feedback.text or "")
    return _clamp(anchors.neutral + anchors.polarity_slope * net, 0.0, 100.0)


def _clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


@dataclass(frozen=True)
class SatisfactionState:
    value: float = 100.0

    def __post_init__(self):
        if not (0.0 <= self.value <= 100.0):
            raise ValidationError(f"satisfaction must be in [0, 100], got {self.value}")


def update_satisfaction(
    prev: SatisfactionState,
    feedback: Feedback,
    ema_alpha: float,
    anchors: ScoreAnchors = ScoreAnchors(),
) -> SatisfactionState:
    """Exponential moving average of the feedback's percentage score."""
    if not (0.0 < ema_alpha <= 1.0):
        raise ValidationError(f"ema_alpha must be in (0, 1], got {ema_alpha}")
    updated = (1.0 - ema_alpha) * prev.value + ema_alpha * score_pct(feedback, anchors)
    return SatisfactionState(_clamp(updated, 0.0, 100.0))


# -- configuration and state ---------------------------------------------------


@dataclass(frozen=True)
class ParamBounds:
    top_p_min: float = 0.1
    top_p_max: float = 1.0
    top_k_min: int = 5
    top_k_max: int = 100


@dataclass
class LoopConfig:
    ft_interval: int = 25
    satisfaction_threshold: float = 70.0
    max_iterations: Optional[int] = None
    ema_alpha: float = 0.3
    bounds: ParamBounds = field(default_factory=ParamBounds)
    top_p_step: float = 0.05
    top_k_step: int = 5
    anchors: ScoreAnchors = field(default_factory=ScoreAnchors)
    default_params: SamplingParams = field(default_factory=SamplingParams)
    # Fidelity switch: trigger on HIGH satisfaction instead of low, matching
    # the literal main-loop condition rather than its reset semantics.
    literal_trigger: bool = False

    def __post_init__(self):
        if self.ft_interval < 1:
            raise ValidationError("ft_interval must be a positive integer")
        if not (0.0 < self.satisfaction_threshold < 100.0):
            raise ValidationError("satisfaction_threshold must be in (0, 100)")
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ValidationError("ema_alpha must be in (0, 1]")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValidationError("max_iterations must be positive when set")


@dataclass
class LoopState:
    sm: SystemMessage
    params: SamplingParams
    model_id: str
    instruction: str = ""
    iteration: int = 0
    counter: int = 0
    feedbacks: list[Feedback] = field(default_factory=list)
    satisfaction: SatisfactionState = field(default_factory=SatisfactionState)
    ft_count: int = 0
    model_chain: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.model_chain:
            self.model_chain = [self.model_id]
        if self.ft_count != len(self.model_chain) - 1:
            raise ValidationError("ft_count must equal len(model_chain) - 1")

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "counter": self.counter,
            "feedbacks": [f.to_dict() for f in self.feedbacks],
            "satisfaction": self.satisfaction.value,
            "sm": {"text": self.sm.text, "version": self.sm.version, "history": list(self.sm.history)},
            "instruction": self.instruction,
            "params": self.params.to_dict(),
            "model_id": self.model_id,
            "ft_count": self.ft_count,
            "model_chain": list(self.model_chain),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LoopState":
        return cls(
            sm=SystemMessage(
                text=raw["sm"]["text"],
                version=int(raw["sm"]["version"]),
                history=[str(h) for h in raw["sm"]["history"]],
            ),
            params=SamplingParams.from_dict(raw["params"]),
            model_id=str(raw["model_id"]),
            instruction=str(raw.get("instruction", "")),
            iteration=int(raw["iteration"]),
            counter=int(raw["counter"]),
            feedbacks=[Feedback.from_dict(f) for f in raw.get("feedbacks", [])],
            satisfaction=SatisfactionState(float(raw["satisfaction"])),
            ft_count=int(raw["ft_count"]),
            model_chain=[str(m) for m in raw["model_chain"]],
        )


def new_loop_state(
    model_id: str,
    sm_text: str = DEFAULT_SYSTEM_MESSAGE,
    instruction: str = "",
    params: Optional[SamplingParams] = None,
) -> LoopState:
    return LoopState(
        sm=SystemMessage(text=sm_text),
        params=params or SamplingParams(),
        model_id=model_id,
        instruction=instruction,
    )


# -- system-message / parameter updates ----------------------------------------

# Corrective clauses keyed by focus keywords found in complaint text.
_FOCUS_CLAUSES: tuple[tuple[tuple[str, ...], str], ...] = (
    (("small", "tiny", "minor", "size", "large"),
     "Pay close attention to the size of each defect, including small and minor ones."),
    (("rust", "corrosion", "oxidation"),
     "Check carefully for rust and corrosion, including early-stage oxidation."),
    (("crack", "cracks", "fracture"),
     "Examine the full surface for cracks of every orientation and length."),
    (("location", "where", "position"),
     "Always state the precise location of each defect on the component."),
    (("type", "types", "differentiate", "distinguish"),
     "Distinguish between defect types such as cracks, rust, and mechanical wear."),
    (("bolt", "bolts", "fastener", "missing"),
     "Verify the presence of fasteners and report missing bolts or components."),
)

_REFINEMENT_MARKERS = ("should", "must", "need to", "needs to")


def corrective_clause(text: Optional[str]) -> str:
    lowered = (text or "").lower()
    token_set = set(words(lowered))
    for keywords, clause in _FOCUS_CLAUSES:
        if any(k in token_set for k in keywords):
            return clause
    if text:
        return f"Address this reported issue: {text.strip()}"
    return "Be more careful and detailed when identifying defects."


def _step_toward(value: float, target: float, step: float) -> float:
    if value < target:
        return min(value + step, target)
    if value > target:
        return max(value - step, target)
    return value


@dataclass(frozen=True)
class SystemUpdate:
    sm: SystemMessage
    instruction: str
    params: SamplingParams
    score_pct: float
    changed: bool


def update_system(
    sm: SystemMessage,
    feedback: Feedback,
    instruction: str,
    params: SamplingParams,
    cfg: LoopConfig,
) -> SystemUpdate:
    """Steer the system message and sampling parameters from one feedback.

    Low feedback (score below 50) appends a corrective clause and tightens
    sampling; high feedback (80 and up) relaxes sampling back toward the
    configured defaults. An explicit refinement request in the text is
    carried into the instruction verbatim regardless of branch.
    """
    pct = score_pct(feedback, cfg.anchors)
    new_sm = sm
    new_params = params
    if pct < 50.0:
        clause = corrective_clause(feedback.text)
        if clause not in sm.text:
            new_sm = sm.updated(f"{sm.text} {clause}")
        new_params = SamplingParams(
            top_p=max(round(params.top_p - cfg.top_p_step, 10), cfg.bounds.top_p_min),
            top_k=max(params.top_k - cfg.top_k_step, cfg.bounds.top_k_min),
            temperature=params.temperature,
        )
    elif pct >= 80.0:
        new_params = SamplingParams(
            top_p=round(_step_toward(params.top_p, cfg.default_params.top_p, cfg.top_p_step), 10),
            top_k=int(_step_toward(params.top_k, cfg.default_params.top_k, cfg.top_k_step)),
            temperature=params.temperature,
        )
    new_instruction = instruction
    if feedback.text:
        lowered = feedback.text.lower()
        if any(marker in lowered for marker in _REFINEMENT_MARKERS):
            new_instruction = feedback.text.strip()
    changed = (
        new_sm.text != sm.text
        or new_params != params
        or new_instruction != instruction
    )
    return SystemUpdate(
        sm=new_sm,
        instruction=new_instruction,
        params=new_params,
        score_pct=pct,
        changed=changed,
    )


# -- trigger and fine-tune cycle -------------------------------------------------


def should_finetune(state: LoopState, cfg: LoopConfig) -> bool:
    """Fire at the interval, or when satisfaction is below the threshold."""
    if cfg.literal_trigger:
        return state.counter == cfg.ft_interval or state.satisfaction.value >= cfg.satisfaction_threshold
    return state.counter == cfg.ft_interval or state.satisfaction.value < cfg.satisfaction_threshold


@dataclass
class LoopDeps:
    """Collaborators the loop needs to run a fine-tune cycle."""

    backend: Backend
    policy: GenerationPolicy = field(default_factory=GenerationPolicy)
    sm_template: str = DEFAULT_SYSTEM_MESSAGE_TEMPLATE
    datasets_dir: Path = Path("data") / "datasets"
    poll_interval: float = 0.01
    finetune_timeout: float = 30.0
    on_finetune: Optional[Callable[[FinetuneJob, Path, DatasetBuild], None]] = None


@dataclass
class CycleResult:
    ok: bool
    job: Optional[FinetuneJob] = None
    dataset_path: Optional[Path] = None
    warnings: list[str] = field(default_factory=list)


def finetune_cycle(state: LoopState, deps: LoopDeps, cfg: LoopConfig) -> CycleResult:
    """Synthesize a dataset from accumulated feedback, fine-tune, chain the model.

    On success the feedback vector empties, satisfaction resets to 100 and the
    counter to 0. On failure every reset is deferred so the trigger condition
    persists and the next step retries.
    """
    warnings: list[str] = []
    texts = [f.text for f in state.feedbacks if f.kind in ("negative", "open_ended") and f.text]
    if texts:
        captions = [
            CaptionRecord(id=f"fb-{state.ft_count + 1}-{i}", text=t)
            for i, t in enumerate(texts, start=1)
        ]
    else:
        seed_text = state.instruction or state.sm.text
        warnings.append("no feedback text to synthesize from; using the current instruction")
        logger.warning("fine-tune cycle %d: %s", state.ft_count + 1, warnings[-1])
        captions = [CaptionRecord(id=f"inst-{state.ft_count + 1}", text=seed_text)]
    build = compile_dataset(
        captions, deps.policy, deps.backend, sm_template=deps.sm_template, params=state.params
    )
    warnings.extend(build.warnings)
    digest = hashlib.sha1(
        "|".join([state.model_id, *[c.text for c in captions]]).encode("utf-8")
    ).hexdigest()[:10]
    dataset_path = Path(deps.datasets_dir) / f"ds-ft{state.ft_count + 1}-{digest}.jsonl"
    write_dataset_jsonl(build.entries, dataset_path)
    if not build.entries:
        warnings.append("synthesized dataset is empty; fine-tune skipped")
        return CycleResult(ok=False, dataset_path=dataset_path, warnings=warnings)
    job = execute_finetune(
        state.model_id,
        str(dataset_path),
        state.params,
        deps.backend,
        poll_interval=deps.poll_interval,
        timeout=deps.finetune_timeout,
    )
    if deps.on_finetune is not None:
        deps.on_finetune(job, dataset_path, build)
    if job.status != "succeeded":
        warnings.append(f"fine-tune job {job.job_id} failed: {job.error}")
        logger.warning("fine-tune cycle failed: %s", job.error)
        return CycleResult(ok=False, job=job, dataset_path=dataset_path, warnings=warnings)
    state.model_id = job.result_model_id
    state.model_chain.append(job.result_model_id)
    state.ft_count += 1
    state.feedbacks = []
    state.satisfaction = SatisfactionState(100.0)
    state.counter = 0
    return CycleResult(ok=True, job=job, dataset_path=dataset_path, warnings=warnings)


ACTIONS = ("none", "system_updated", "finetuned")


def step(state: LoopState, feedback: Feedback, cfg: LoopConfig, deps: LoopDeps) -> str:
    """Apply one feedback event in place; returns the action taken.

    Order: append, satisfaction EMA, system/parameter update, counter and
    iteration increment, then the fine-tune trigger. The counter is capped at
    the interval so a failed fine-tune keeps the trigger armed.
    """
    state.feedbacks.append(feedback)
    state.satisfaction = update_satisfaction(
        state.satisfaction, feedback, cfg.ema_alpha, cfg.anchors
    )
    update = update_system(state.sm, feedback, state.instruction, state.params, cfg)
    state.sm = update.sm
    state.instruction = update.instruction
    state.params = update.params
    action = "system_updated" if update.changed else "none"
    state.iteration += 1
    state.counter = min(state.counter + 1, cfg.ft_interval)
    if should_finetune(state, cfg):
        result = finetune_cycle(state, deps, cfg)
        if result.ok:
            action = "finetuned"
    return action


@dataclass
class LoopReport:
    iterations: int
    ft_count: int
    satisfaction_trace: list[float]
    model_chain: list[str]
    actions: list[str]

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "ft_count": self.ft_count,
            "satisfaction_trace": list(self.satisfaction_trace),
            "model_chain": list(self.model_chain),
            "actions": list(self.actions),
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def run_loop(
    cfg: LoopConfig,
    feedback_source: Iterable[Feedback],
    deps: LoopDeps,
    state: Optional[LoopState] = None,
    base_model_id: str = "defect-llm",
    on_step: Optional[Callable[[LoopState, Feedback, str], None]] = None,
) -> LoopReport:
    """Drive the loop over an ordered feedback stream and report the trace."""
    if state is None:
        state = new_loop_state(base_model_id, params=replace(cfg.default_params))
    trace: list[float] = []
    actions: list[str] = []
    for feedback in feedback_source:
        if cfg.max_iterations is not None and state.iteration >= cfg.max_iterations:
            break
        action = step(state, feedback, cfg, deps)
        trace.append(state.satisfaction.value)
        actions.append(action)
        if on_step is not None:
            on_step(state, feedback, action)
    return LoopReport(
        iterations=state.iteration,
        ft_count=state.ft_count,
        satisfaction_trace=trace,
        model_chain=list(state.model_chain),
        actions=actions,
    )
