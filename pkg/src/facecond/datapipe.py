"""Annotation manifest pipeline: ingestion, rating-threshold filtering,
instruction pairing, and stratified test-split construction.

Manifest schema (JSONL, one record per line):

    {"id": "...", "task": "...",
     "media": {"path": "...", "type": "image"|"video"},
     "label": ..., "description": "...",
     "instruction": "..."?,
     "ratings": {"label_accuracy": 1-10, "desc_video_consistency": 1-10,
                 "desc_label_consistency": 1-10, "overall": 1-10}?}

Instruction banks are JSON {task: [instruction strings]}; each
instruction carries exactly one "{media}" placeholder that is replaced
by the record's media type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

MEDIA_TYPES = ("image", "video")
RATING_KEYS = (
    "label_accuracy",
    "desc_video_consistency",
    "desc_label_consistency",
    "overall",
)
MEDIA_PLACEHOLDER = "{media}"
DEFAULT_RATING_THRESHOLD = 6


@dataclass(frozen=True)
class AnnotationRecord:
    id: str
    task: str
    media_path: str
    media_type: str
    label: object
    description: str
    instruction: str | None = None
    ratings: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.media_type not in MEDIA_TYPES:
            raise ValueError(f"media type must be one of {MEDIA_TYPES}")
        unknown = set(self.ratings) - set(RATING_KEYS)
        if unknown:
            raise ValueError(f"unknown rating keys: {sorted(unknown)}")
        for key, value in self.ratings.items():
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 10:
                raise ValueError(f"rating {key}={value!r} outside 1..10")

    @property
    def overall_rating(self) -> int | None:
        return self.ratings.get("overall")

    def to_json_obj(self) -> dict:
        obj = {
            "id": self.id,
            "task": self.task,
            "media": {"path": self.media_path, "type": self.media_type},
            "label": self.label,
            "description": self.description,
        }
        if self.instruction is not None:
            obj["instruction"] = self.instruction
        if self.ratings:
            obj["ratings"] = dict(sorted(self.ratings.items()))
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "AnnotationRecord":
        media = obj["media"]
        return cls(
            id=str(obj["id"]),
            task=str(obj["task"]),
            media_path=str(media["path"]),
            media_type=str(media["type"]),
            label=obj["label"],
            description=str(obj["description"]),
            instruction=obj.get("instruction"),
            ratings=dict(obj.get("ratings", {})),
        )


@dataclass(frozen=True)
class ManifestError:
    line: int
    message: str


def load_manifest(path: str) -> tuple[list[AnnotationRecord], list[ManifestError]]:
    """Parse a JSONL manifest; malformed lines become error entries
    instead of aborting the load."""
    records: list[AnnotationRecord] = []
    errors: list[ManifestError] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                records.append(AnnotationRecord.from_json_obj(json.loads(stripped)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                errors.append(ManifestError(line=lineno, message=str(exc)))
    return records, errors


def save_manifest(path: str, records: Sequence[AnnotationRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            json.dump(record.to_json_obj(), fh, sort_keys=True)
            fh.write("\n")


def filter_by_rating(
    records: Sequence[AnnotationRecord],
    threshold: int = DEFAULT_RATING_THRESHOLD,
) -> tuple[list[AnnotationRecord], list[AnnotationRecord]]:
    """Keep records whose overall rating exceeds the threshold.

    A record rated exactly at the threshold is removed, as is any record
    with no overall rating (unrated data never passed review).
    """
    kept, removed = [], []
    for record in records:
        rating = record.overall_rating
        if rating is not None and rating > threshold:
            kept.append(record)
        else:
            removed.append(record)
    return kept, removed


@dataclass(frozen=True)
class InstructionBank:
    instructions: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        for task, items in self.instructions.items():
            if not items:
                raise ValueError(f"task {task!r} has no instructions")
            for text in items:
                if text.count(MEDIA_PLACEHOLDER) != 1:
                    raise ValueError(
                        f"instruction {text!r} must contain exactly one {MEDIA_PLACEHOLDER}"
                    )

    def for_task(self, task: str) -> tuple[str, ...]:
        if task not in self.instructions:
            raise KeyError(f"instruction bank has no task {task!r}")
        return self.instructions[task]


def load_instruction_bank(path: str) -> InstructionBank:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a task -> instruction-list object")
    return InstructionBank({task: tuple(items) for task, items in data.items()})


def pair_instructions(
    records: Sequence[AnnotationRecord],
    bank: InstructionBank,
    seed: int = 0,
) -> list[AnnotationRecord]:
    """Give every instruction-less record a uniformly drawn instruction
    for its task, substituting the media placeholder. Records that
    already carry an instruction pass through untouched."""
    for record in records:
        if record.instruction is None:
            bank.for_task(record.task)  # fail fast on missing tasks
    rng = np.random.default_rng(seed)
    out = []
    for record in records:
        if record.instruction is not None:
            out.append(record)
            continue
        options = bank.for_task(record.task)
        choice = options[int(rng.integers(len(options)))]
        out.append(
            replace(record, instruction=choice.replace(MEDIA_PLACEHOLDER, record.media_type))
        )
    return out


def _quotas(target: dict[str, float], per_task: int) -> dict[str, int]:
    # largest-remainder apportionment keeps every class within +-1 of
    # its exact proportional share
    total = sum(target.values())
    if total <= 0:
        raise ValueError("target distribution must have positive mass")
    shares = {cls: per_task * weight / total for cls, weight in target.items()}
    quotas = {cls: int(np.floor(share)) for cls, share in shares.items()}
    leftover = per_task - sum(quotas.values())
    remainders = sorted(
        target, key=lambda cls: (-(shares[cls] - quotas[cls]), list(target).index(cls))
    )
    for cls in remainders[:leftover]:
        quotas[cls] += 1
    return quotas


def build_test_split(
    records: Sequence[AnnotationRecord],
    target: dict[str, dict[str, float]],
    per_task: int = 500,
    seed: int = 0,
) -> tuple[list[AnnotationRecord], dict]:
    """Greedy stratified selection: per task, rank candidates by overall
    rating (descending, ties by id) and fill each class quota from the
    top. ``target`` maps task -> class -> proportion.

    ``seed`` is accepted for interface uniformity; the ranked selection
    itself is deterministic.
    """
    del seed
    selected: list[AnnotationRecord] = []
    summary: dict = {"per_task": per_task, "tasks": {}}
    for task in sorted(target):
        quotas = _quotas(target[task], per_task)
        candidates = [r for r in records if r.task == task]
        by_class: dict[str, list[AnnotationRecord]] = {cls: [] for cls in quotas}
        for record in candidates:
            cls = str(record.label)
            if cls in by_class:
                by_class[cls].append(record)
        task_summary = {"classes": {}, "selected": 0}
        for cls, quota in quotas.items():
            pool = sorted(
                by_class[cls],
                key=lambda r: (-(r.overall_rating or 0), r.id),
            )
            if len(pool) < quota:
                raise ValueError(
                    f"task {task!r} class {cls!r}: need {quota} records, have {len(pool)}"
                )
            chosen = pool[:quota]
            selected.extend(chosen)
            ratings = [r.overall_rating for r in chosen if r.overall_rating is not None]
            task_summary["classes"][cls] = {
                "count": quota,
                "mean_overall_rating": float(np.mean(ratings)) if ratings else None,
            }
            task_summary["selected"] += quota
        summary["tasks"][task] = task_summary
    return selected, summary
