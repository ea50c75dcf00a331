"""Deterministic text primitives shared by the dataset pipeline and the metrics.

Everything here is pure and documented to the letter so that independent
reimplementations (used as test oracles) can reproduce values bit-exactly.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

_WORD_RE = re.compile(r"[a-z0-9]+")

# Fixed embedded stop-word list. Reconstruction loss depends on it, so it is
# versioned here rather than pulled from an external corpus.
STOP_WORDS = frozenset(
    """
    a an the and or but if then else when while at by for in of on to with
    from as is are was were be been being it its this that these those there
    here he she they them we you i his her their our your my me us not no
    so such too very can will would could should just do does did has have
    had
    """.split()
)


def words(text: str) -> list[str]:
    """Lowercased alphanumeric word runs; punctuation acts as a separator."""
    return _WORD_RE.findall(text.lower())


def content_words(text: str) -> set[str]:
    return {w for w in words(text) if w not in STOP_WORDS}


def normalize(text: str) -> str:
    """Case/whitespace normalization used for duplicate detection."""
    return " ".join(text.split()).lower()


def word_ngrams(text: str, n: int) -> set[tuple[str, ...]]:
    ws = words(text)
    return {tuple(ws[i : i + n]) for i in range(len(ws) - n + 1)}


def jaccard(a: Iterable, b: Iterable) -> float:
    """Set Jaccard similarity; 0.0 when the union is empty."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def tokenize_for_rouge(text: str) -> list[str]:
    """Lowercase, split on non-word characters (bit-exact ROUGE tokenization)."""
    return [t for t in re.split(r"[^\w]+", text.lower()) if t]


def fallback_token_count(text: str) -> int:
    """Maximal word-character runs plus individual non-space punctuation marks."""
    word_runs = len(re.findall(r"\w+", text))
    punct = len(re.findall(r"[^\w\s]", text))
    return word_runs + punct


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest common subsequence length via the standard dynamic program."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]
