"""Prompt composition: system message, virtual prompt injections, user prompt.

Injected context details sit between the system message and the user prompt
under a dedicated "context" role so the downstream model treats them as
authoritative detail. Serialization order is fixed: system, injections
(priority desc, id asc), user.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError


@dataclass
class SystemMessage:
    """Versioned system message; every text change appends to history."""

    text: str
    version: int = 0
    history: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError("system message text must be non-empty")

    def updated(self, new_text: str) -> "SystemMessage":
        if not new_text.strip():
            raise ValidationError("system message text must be non-empty")
        return SystemMessage(
            text=new_text,
            version=self.version + 1,
            history=[*self.history, self.text],
        )


class _SlotDict(dict):
    def __missing__(self, key: str) -> str:  # leave unknown slots visible
        return "{" + key + "}"


@dataclass(frozen=True)
class VpiRule:
    """Trigger-matched context injection (location / size / depth details)."""

    id: str
    trigger_pattern: str
    injection_template: str
    priority: int = 0
    slots: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.trigger_pattern.strip():
            raise ValidationError(f"rule {self.id!r} has an empty trigger pattern")

    def matches(self, prompt: str, token_boundary: bool = False) -> bool:
        if token_boundary:
            pattern = r"\b" + re.escape(self.trigger_pattern) + r"\b"
            return re.search(pattern, prompt, flags=re.IGNORECASE) is not None
        return self.trigger_pattern.lower() in prompt.lower()

    def instantiate(self) -> str:
        return self.injection_template.format_map(_SlotDict(self.slots))


def match_vpi(
    user_prompt: str,
    rules: Sequence[VpiRule],
    token_boundary: bool = False,
) -> list[str]:
    """Instantiated injections of every matching rule, (priority desc, id asc)."""
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        raise ValidationError("VPI rule ids must be distinct")
    hits = [r for r in rules if r.matches(user_prompt, token_boundary=token_boundary)]
    hits.sort(key=lambda r: (-r.priority, r.id))
    return [r.instantiate() for r in hits]


@dataclass(frozen=True)
class ComposedPrompt:
    system: str
    injected_context: tuple[str, ...]
    user: str
    media: tuple[str, ...] = ()

    def to_messages(self) -> list[dict[str, str]]:
        messages = [{"role": "system", "content": self.system}]
        messages.extend({"role": "context", "content": inj} for inj in self.injected_context)
        user_content = self.user
        if self.media:
            refs = "\n".join(f"[media: {m}]" for m in self.media)
            user_content = f"{user_content}\n{refs}"
        messages.append({"role": "user", "content": user_content})
        return messages


def compose(
    sm: SystemMessage,
    user_prompt: str,
    injections: Iterable[str] = (),
    media: Iterable[str] = (),
) -> ComposedPrompt:
    if not user_prompt.strip():
        raise ValidationError("user prompt must be non-empty")
    return ComposedPrompt(
        system=sm.text,
        injected_context=tuple(injections),
        user=user_prompt,
        media=tuple(media),
    )


def load_rules(path: Path | str) -> list[VpiRule]:
    """Load a JSON array of VPI rules from disk."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValidationError("VPI rules file must contain a JSON array")
    rules = []
    for item in raw:
        rules.append(
            VpiRule(
                id=str(item["id"]),
                trigger_pattern=str(item["trigger_pattern"]),
                injection_template=str(item["injection_template"]),
                priority=int(item.get("priority", 0)),
                slots={str(k): str(v) for k, v in item.get("slots", {}).items()},
            )
        )
    return rules


DEFAULT_SYSTEM_MESSAGE = "You are an expert railway component defect instructor."

DEFAULT_VPI_RULES: tuple[VpiRule, ...] = (
    VpiRule(
        id="radial-crack-wheel",
        trigger_pattern="radial crack",
        injection_template=(
            "A radial crack, about {size} in length, is visible on the "
            "{location} of the steel wheel"
        ),
        priority=10,
        slots={"size": "two inches", "location": "external circumference"},
    ),
    VpiRule(
        id="joint-corrosion",
        trigger_pattern="corrosion",
        injection_template=(
            "Corrosion typically presents as {appearance} at the {location}, "
            "reaching a depth of {depth}"
        ),
        priority=5,
        slots={
            "appearance": "flaking reddish-brown oxidation",
            "location": "rail joint and fishplate contact faces",
            "depth": "one to three millimetres",
        },
    ),
    VpiRule(
        id="missing-bolt",
        trigger_pattern="missing bolt",
        injection_template=(
            "A missing bolt leaves an empty {location} hole, usually with "
            "bright shear marks around the seat"
        ),
        priority=5,
        slots={"location": "fishplate"},
    ),
)
