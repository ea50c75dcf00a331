"""Multimodal routing and response packaging.

The router classifies an input's modality signature and plans model dispatch:
video becomes frame sampling, per-frame vision captioning, and a chat
synthesis; text-only analysis goes straight to chat; text plus images goes to
vision chat; generation intent expands the prompt and calls text-to-image.
The processor turns raw step outputs into an end-user consumable package:
markdown report, structured findings, media with metadata sidecars.
"""

from __future__ import annotations

import json
import logging
import math
import re
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .backends.base import Backend, SamplingParams
from .errors import EngineError, ProcessingError, ValidationError
from .prompts import DEFAULT_SYSTEM_MESSAGE, SystemMessage, compose

logger = logging.getLogger(__name__)


# -- inputs and plans --------------------------------------------------------


@dataclass(frozen=True)
class MultimodalInput:
    text: Optional[str] = None
    images: tuple[str, ...] = ()
    video: Optional[str] = None
    intent: str = "analyze"

    def __post_init__(self):
        if self.intent not in ("analyze", "generate"):
            raise ValidationError(f"intent must be analyze or generate, got {self.intent!r}")
        if not (self.text and self.text.strip()) and not self.images and self.video is None:
            raise ValidationError("input needs text, images, or video")
        if self.video is not None and self.images:
            raise ValidationError("video and images are mutually exclusive per request")


@dataclass(frozen=True)
class PlanStep:
    role: str  # sample_frames | vision_chat | chat | text_to_image
    input_slice: str


@dataclass(frozen=True)
class ModelPlan:
    steps: tuple[PlanStep, ...]
    expected_output: str  # report | image | texture
    fps: float = 1.0

    def __post_init__(self):
        if not self.steps:
            raise ValidationError("a model plan needs at least one step")


def route(input: MultimodalInput, fps: float = 1.0) -> ModelPlan:
    """Pure function of the input's modality signature and intent."""
    if input.intent == "generate":
        expected = "texture" if input.text and "texture" in input.text.lower() else "image"
        return ModelPlan(
            steps=(
                PlanStep("chat", "text expansion"),
                PlanStep("text_to_image", "expanded description"),
            ),
            expected_output=expected,
        )
    if input.video is not None:
        return ModelPlan(
            steps=(
                PlanStep("sample_frames", "video"),
                PlanStep("vision_chat", "frames"),
                PlanStep("chat", "frame captions synthesis"),
            ),
            expected_output="report",
            fps=fps,
        )
    if input.images:
        return ModelPlan(
            steps=(PlanStep("vision_chat", "text+images"),),
            expected_output="report",
        )
    return ModelPlan(steps=(PlanStep("chat", "text"),), expected_output="report")


# -- frame sampling ----------------------------------------------------------


def probe_duration(video: str) -> float:
    """Video duration in seconds, read from the JSON sidecar `<video>.json`."""
    sidecar = Path(str(video) + ".json")
    if sidecar.exists():
        try:
            raw = json.loads(sidecar.read_text(encoding="utf-8"))
            return float(raw["duration_s"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"video sidecar {sidecar} is unreadable: {exc}")
    raise ValidationError(f"cannot determine duration of {video!r} (no sidecar)")


def sample_frames(
    video: str,
    fps: float,
    extractor_cmd: Optional[str] = None,
    out_dir: Optional[Path] = None,
) -> list[str]:
    """Frame locators at uniform timestamps i/fps for i in 0..floor(duration*fps).

    Without an extractor command the locators are `<video>#t=<ts>` references;
    with one ({video}/{ts}/{out} placeholders) PNG files are materialized.
    """
    if fps <= 0:
        raise ValidationError(f"fps must be positive, got {fps}")
    duration = probe_duration(video)
    count = int(math.floor(duration * fps)) + 1
    timestamps = [i / fps for i in range(count)]
    if extractor_cmd is None:
        return [f"{video}#t={ts:.3f}" for ts in timestamps]
    out_dir = Path(out_dir or Path(video).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    for index, ts in enumerate(timestamps):
        out = out_dir / f"{Path(video).stem}-f{index:04d}.png"
        cmd = extractor_cmd.format(video=shlex.quote(str(video)), ts=ts, out=shlex.quote(str(out)))
        completed = subprocess.run(cmd, shell=True, capture_output=True)
        if completed.returncode != 0:
            raise EngineError(
                f"frame extraction failed at t={ts}: {completed.stderr.decode(errors='replace')}"
            )
        frames.append(str(out))
    return frames


# -- execution ---------------------------------------------------------------


FINDINGS_FENCE = "```findings"

FINDINGS_INSTRUCTIONS = (
    "End the reply with a fenced block listing one finding per row, cells "
    'separated by " | ":\n'
    "```findings\n"
    "defect_type | location | severity\n"
    "```"
)


@dataclass
class StepResult:
    role: str
    input_slice: str
    ok: bool
    text: str = ""
    media: list[str] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0
    error: Optional[str] = None


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "total_tokens": self.tokens,
            "latency_ms": self.latency_ms,
        }


@dataclass
class RawResult:
    steps: list[StepResult]

    @property
    def usage(self) -> Usage:
        return Usage(
            prompt_tokens=sum(s.prompt_tokens for s in self.steps),
            completion_tokens=sum(s.completion_tokens for s in self.steps),
            latency_ms=sum(s.latency_ms for s in self.steps),
        )

    @property
    def failed(self) -> bool:
        return any(not s.ok for s in self.steps)


def infer(
    input: MultimodalInput,
    plan: ModelPlan,
    backend: Backend,
    system_message: str = DEFAULT_SYSTEM_MESSAGE,
    injections: Sequence[str] = (),
    params: Optional[SamplingParams] = None,
    frame_workers: int = 4,
    extractor_cmd: Optional[str] = None,
) -> RawResult:
    """Execute plan steps in order, threading prior text into each prompt.

    A failing step is recorded as a failed-step marker and execution stops
    there; earlier successful output is preserved.
    """
    params = params or SamplingParams()
    sm = SystemMessage(text=system_message)
    results: list[StepResult] = []
    prior_text = input.text or ""
    frames: list[str] = []
    for step_def in plan.steps:
        result = StepResult(role=step_def.role, input_slice=step_def.input_slice, ok=False)
        try:
            if step_def.role == "sample_frames":
                frames = sample_frames(input.video, plan.fps, extractor_cmd=extractor_cmd)
                result.text = f"sampled {len(frames)} frames"
                result.media = list(frames)
            elif step_def.role == "vision_chat" and step_def.input_slice == "frames":
                captions, usages = _caption_frames(
                    frames, input.text, backend, sm, params, frame_workers
                )
                result.text = "\n".join(captions)
                result.prompt_tokens = sum(u.prompt_tokens for u in usages)
                result.completion_tokens = sum(u.completion_tokens for u in usages)
                result.latency_ms = sum(u.latency_ms for u in usages)
            elif step_def.role == "vision_chat":
                user = (input.text or "Identify any defects visible in the provided images.")
                user = f"{user}\n\n{FINDINGS_INSTRUCTIONS}"
                prompt = compose(sm, user, injections=injections, media=input.images)
                completion = backend.complete(
                    prompt.to_messages(), params, role="vision", media=input.images
                )
                result.text = completion.text
                result.prompt_tokens = completion.prompt_tokens
                result.completion_tokens = completion.completion_tokens
                result.latency_ms = completion.latency_ms
            elif step_def.role == "chat" and plan.expected_output in ("image", "texture"):
                user = (
                    "Expand the following defect note into one precise visual "
                    f"description for image generation: {input.text}"
                )
                prompt = compose(sm, user, injections=injections)
                completion = backend.complete(prompt.to_messages(), params, role="chat")
                result.text = completion.text
                result.prompt_tokens = completion.prompt_tokens
                result.completion_tokens = completion.completion_tokens
                result.latency_ms = completion.latency_ms
                prior_text = completion.text
            elif step_def.role == "chat":
                if step_def.input_slice == "frame captions synthesis":
                    user = (
                        "Synthesize a single defect assessment from these frame "
                        f"observations:\n{prior_text}\n\n{FINDINGS_INSTRUCTIONS}"
                    )
                else:
                    user = f"{prior_text}\n\n{FINDINGS_INSTRUCTIONS}"
                prompt = compose(sm, user, injections=injections)
                completion = backend.complete(prompt.to_messages(), params, role="chat")
                result.text = completion.text
                result.prompt_tokens = completion.prompt_tokens
                result.completion_tokens = completion.completion_tokens
                result.latency_ms = completion.latency_ms
            elif step_def.role == "text_to_image":
                artifact = backend.generate_image(prior_text or (input.text or ""), params)
                result.media = [artifact.locator]
                result.text = f"generated {plan.expected_output}"
                result.prompt_tokens = artifact.prompt_tokens
                result.latency_ms = artifact.latency_ms
            else:
                raise ValidationError(f"unknown plan step role: {step_def.role!r}")
            result.ok = True
            if result.text and step_def.role in ("vision_chat", "chat"):
                prior_text = result.text
        except EngineError as exc:
            result.error = str(exc)
            results.append(result)
            logger.warning("step %s failed: %s", step_def.role, exc)
            break
        results.append(result)
    return RawResult(steps=results)


def _caption_frames(
    frames: Sequence[str],
    user_text: Optional[str],
    backend: Backend,
    sm: SystemMessage,
    params: SamplingParams,
    frame_workers: int,
) -> tuple[list[str], list[Usage]]:
    """Caption each frame (optionally fanned out), joined in timestamp order."""

    def caption_one(indexed: tuple[int, str]) -> tuple[str, Usage]:
        index, frame = indexed
        user = f"Describe the railway component condition visible in this frame ({frame})."
        if user_text:
            user = f"{user} Context from the inspector: {user_text}"
        prompt = compose(sm, user, media=[frame])
        completion = backend.complete(prompt.to_messages(), params, role="vision", media=[frame])
        return (
            f"Frame {index} ({frame}): {completion.text}",
            Usage(completion.prompt_tokens, completion.completion_tokens, completion.latency_ms),
        )

    indexed = list(enumerate(frames))
    if frame_workers > 1 and len(indexed) > 1:
        with ThreadPoolExecutor(max_workers=frame_workers) as pool:
            outputs = list(pool.map(caption_one, indexed))
    else:
        outputs = [caption_one(item) for item in indexed]
    return [text for text, _ in outputs], [usage for _, usage in outputs]


# -- consumable packaging ------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    defect_type: str
    location_phrase: str
    severity_phrase: str

    def to_dict(self) -> dict:
        return {
            "defect_type": self.defect_type,
            "location_phrase": self.location_phrase,
            "severity_phrase": self.severity_phrase,
        }


@dataclass
class ConsumableResponse:
    report_markdown: str
    findings: list[Finding]
    media: list[str]
    usage: Usage
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "report_markdown": self.report_markdown,
            "findings": [f.to_dict() for f in self.findings],
            "media": list(self.media),
            "usage": self.usage.to_dict(),
            "warnings": list(self.warnings),
        }


_FINDINGS_BLOCK_RE = re.compile(r"```findings\s*\n(.*?)```", re.DOTALL)
_HEADER_CELLS = ("defect_type", "location", "severity")


def parse_findings(text: str) -> tuple[list[Finding], Optional[str]]:
    """Parse the documented findings-block grammar; tolerant of absence.

    The last fenced ```findings block wins. Rows are " | "-separated triples;
    a header row matching the documented column names is skipped; malformed
    rows are dropped with a warning rather than failing the response.
    """
    blocks = _FINDINGS_BLOCK_RE.findall(text)
    if not blocks:
        return [], "no findings block in model output"
    rows = []
    warning = None
    for line in blocks[-1].splitlines():
        line = line.strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split("|")]
        if tuple(c.lower() for c in cells) == _HEADER_CELLS:
            continue
        if len(cells) != 3 or not all(cells):
            warning = f"malformed findings row skipped: {line!r}"
            continue
        rows.append(Finding(*cells))
    if not rows and warning is None:
        warning = "findings block contained no rows"
    return rows, warning


def _summary_text(text: str) -> str:
    return _FINDINGS_BLOCK_RE.sub("", text).strip()


def process(
    raw: RawResult,
    input: MultimodalInput,
    expected_output: str = "report",
) -> ConsumableResponse:
    """Package raw step outputs into the consumable response."""
    successful = [s for s in raw.steps if s.ok]
    if not successful:
        first_error = next((s.error for s in raw.steps if s.error), "no steps executed")
        raise ProcessingError(f"no successful inference step: {first_error}")
    warnings = [f"step {s.role} failed: {s.error}" for s in raw.steps if not s.ok]
    media = [m for s in successful for m in s.media if s.role != "sample_frames"]

    findings: list[Finding] = []
    if expected_output == "report":
        final_text = next(
            (s.text for s in reversed(successful) if s.role in ("chat", "vision_chat")), ""
        )
        findings, finding_warning = parse_findings(final_text)
        if finding_warning:
            warnings.append(finding_warning)
        summary = _summary_text(final_text) or "No model narrative was produced."
    else:
        expansion = next((s.text for s in successful if s.role == "chat"), "")
        summary = expansion or "Generated media from the request."
        for locator in media:
            _write_media_sidecar(locator, input, expected_output)

    lines = ["# Railway defect inspection report", "", summary, "", "## Findings", ""]
    if findings:
        lines.append("| Defect type | Location | Severity |")
        lines.append("| --- | --- | --- |")
        lines.extend(
            f"| {f.defect_type} | {f.location_phrase} | {f.severity_phrase} |" for f in findings
        )
    else:
        lines.append("_No structured findings._")
    if media:
        lines.extend(["", "## Media", ""])
        lines.extend(f"- {m}" for m in media)
    usage = raw.usage
    lines.extend(["", "## Usage", "", f"- tokens: {usage.tokens}", f"- latency_ms: {usage.latency_ms}"])
    return ConsumableResponse(
        report_markdown="\n".join(lines) + "\n",
        findings=findings,
        media=media,
        usage=usage,
        warnings=warnings,
    )


def _write_media_sidecar(locator: str, input: MultimodalInput, kind: str) -> None:
    path = Path(locator)
    if not path.exists():
        return
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(
        json.dumps(
            {
                "kind": kind,
                "source_prompt": input.text,
                "caption": f"Generated {kind} for: {input.text}",
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
