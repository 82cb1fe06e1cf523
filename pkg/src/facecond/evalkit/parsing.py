"""Free-text to label conversion.

Sentences split on '.', '!', '?'. Sentences containing a negation cue
are dropped before any matching, so "AU4 is not present" never yields
AU4. Synonym lookup checks the first sentence first (generated
descriptions lead with their conclusion); whole-text majority voting is
the fallback. Numeric tasks parse AU codes and leading ages directly.

A failed parse is returned as None and scored as wrong downstream.
"""

from __future__ import annotations

import re
from typing import Sequence

from .taxonomy import Taxonomy, default_negation_cues

SENTENCE_TERMINATORS = ".!?"

_AU_PATTERN = re.compile(r"au ?(\d+)", re.IGNORECASE)
_INT_PATTERN = re.compile(r"\d+")


def split_sentences(text: str) -> list[str]:
    """Segments including their terminator; concatenation restores text."""
    segments: list[str] = []
    current: list[str] = []
    for ch in text:
        current.append(ch)
        if ch in SENTENCE_TERMINATORS:
            segments.append("".join(current))
            current = []
    if current:
        segments.append("".join(current))
    return segments


def strip_negatives(text: str, cues: Sequence[str] | None = None) -> str:
    """Remove every sentence containing a negation cue (substring,
    case-insensitive); remaining sentences keep their original order and
    spacing."""
    if cues is None:
        cues = default_negation_cues()
    kept = []
    for segment in split_sentences(text):
        lower = segment.lower()
        if not any(cue in lower for cue in cues):
            kept.append(segment)
    return "".join(kept)


def _first_sentence(text: str) -> str | None:
    for segment in split_sentences(text):
        if segment.strip():
            return segment
    return None


def _vote(counts: dict[str, int], class_order: Sequence[str]) -> str | None:
    best = max(counts.values(), default=0)
    if best == 0:
        return None
    # ties resolve to the earliest class in taxonomy order
    for cls in class_order:
        if counts[cls] == best:
            return cls
    return None


def match_synonyms(text: str, taxonomy: Taxonomy) -> str | None:
    """Single-label extraction with first-sentence precedence.

    Expects negation-stripped text. Returns None when no phrase of any
    class occurs.
    """
    lower = text.lower()
    first = _first_sentence(lower)
    if first is not None:
        first_counts = taxonomy.count_matches(first)
        if max(first_counts.values(), default=0) > 0:
            return _vote(first_counts, taxonomy.classes)
    return _vote(taxonomy.count_matches(lower), taxonomy.classes)


def match_synonyms_all(text: str, taxonomy: Taxonomy) -> set[str]:
    """Every class with at least one phrase occurrence (multi-label tasks)."""
    counts = taxonomy.count_matches(text.lower())
    return {cls for cls, n in counts.items() if n > 0}


def parse_aus(text: str, cues: Sequence[str] | None = None) -> set[int]:
    """Action-unit codes: "AU" followed by digits, optional space,
    case-insensitive, after negation stripping."""
    stripped = strip_negatives(text, cues)
    return {int(m.group(1)) for m in _AU_PATTERN.finditer(stripped)}


def parse_age(text: str, cues: Sequence[str] | None = None) -> int | None:
    """First integer token after negation stripping; None when absent."""
    stripped = strip_negatives(text, cues)
    match = _INT_PATTERN.search(stripped)
    return int(match.group(0)) if match else None


def vote_chunks(
    predictions: Sequence[str | None], taxonomy: Taxonomy
) -> str | None:
    """Majority vote over one group's chunk predictions.

    Deepfake ties resolve to "fake" (conservative); other tasks resolve
    to taxonomy class order. Failed parses abstain; an all-None group
    stays None.
    """
    if len(predictions) == 0:
        raise ValueError("empty chunk group")
    counts = {cls: 0 for cls in taxonomy.classes}
    for pred in predictions:
        if pred is not None:
            if pred not in counts:
                raise ValueError(f"prediction {pred!r} not in taxonomy classes")
            counts[pred] += 1
    best = max(counts.values(), default=0)
    if best == 0:
        return None
    tied = [cls for cls in taxonomy.classes if counts[cls] == best]
    if taxonomy.task == "deepfake" and "fake" in tied:
        return "fake"
    return tied[0]
