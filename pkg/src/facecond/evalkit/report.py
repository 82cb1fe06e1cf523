"""Scoring driver: evaluation records in, metric report out.

Input is JSONL, one record per line:

    {"id": "...", "task": "expression|au|attribute|age|deepfake",
     "generated": "...", "ground_truth": ..., "chunk_group": "..."?}

ground_truth is a class name (expression, deepfake), a list of AU
integers (au), a list of positive attribute names (attribute), or an
integer age. chunk_group marks video chunks that majority-vote into one
prediction for the single-label tasks.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .metrics import (
    DISFA_AUS,
    compute_avg_f1,
    compute_mae,
    compute_mean_attr_accuracy,
    compute_uar_war,
    confusion_matrix,
    parse_failure_rate,
)
from .parsing import (
    match_synonyms,
    match_synonyms_all,
    parse_age,
    parse_aus,
    strip_negatives,
    vote_chunks,
)
from .taxonomy import Taxonomy, default_negation_cues, default_taxonomy

TASKS = ("expression", "au", "attribute", "age", "deepfake")
_SINGLE_LABEL_TASKS = ("expression", "deepfake")


@dataclass(frozen=True)
class EvalRecord:
    id: str
    task: str
    generated: str
    ground_truth: object
    chunk_group: str | None = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        gt = self.ground_truth
        ok = {
            "expression": lambda: isinstance(gt, str),
            "deepfake": lambda: isinstance(gt, str),
            "au": lambda: isinstance(gt, (list, tuple, set))
            and all(isinstance(v, int) for v in gt),
            "attribute": lambda: isinstance(gt, (list, tuple, set))
            and all(isinstance(v, str) for v in gt),
            "age": lambda: isinstance(gt, int) and not isinstance(gt, bool),
        }[self.task]()
        if not ok:
            raise ValueError(
                f"record {self.id!r}: ground truth {gt!r} does not fit task {self.task!r}"
            )


def load_eval_records(path: str) -> list[EvalRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                records.append(
                    EvalRecord(
                        id=str(doc["id"]),
                        task=doc["task"],
                        generated=doc["generated"],
                        ground_truth=doc["ground_truth"],
                        chunk_group=doc.get("chunk_group"),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad eval record: {exc}") from exc
    return records


def extract_prediction(
    record: EvalRecord,
    taxonomies: dict[str, Taxonomy],
    cues: Sequence[str],
):
    """Task-appropriate label extraction from the generated text."""
    if record.task == "au":
        return parse_aus(record.generated, cues)
    if record.task == "age":
        return parse_age(record.generated, cues)
    stripped = strip_negatives(record.generated, cues)
    if record.task == "attribute":
        return match_synonyms_all(stripped, taxonomies["attribute"])
    return match_synonyms(stripped, taxonomies[record.task])


def _collapse_chunks(records, preds, taxonomy):
    """Vote chunk groups down to one (prediction, ground truth) pair each."""
    groups: dict[object, list[int]] = {}
    singles: list[int] = []
    for i, record in enumerate(records):
        if record.chunk_group is None:
            singles.append(i)
        else:
            groups.setdefault(record.chunk_group, []).append(i)
    out_preds, out_gts = [], []
    for i in singles:
        out_preds.append(preds[i])
        out_gts.append(records[i].ground_truth)
    for key in sorted(groups, key=str):
        members = groups[key]
        gts = {records[i].ground_truth for i in members}
        if len(gts) != 1:
            raise ValueError(f"chunk group {key!r} mixes ground-truth labels")
        out_preds.append(vote_chunks([preds[i] for i in members], taxonomy))
        out_gts.append(next(iter(gts)))
    return out_preds, out_gts


def score_records(
    records: Sequence[EvalRecord],
    taxonomies: dict[str, Taxonomy] | None = None,
    au_list: Sequence[int] = DISFA_AUS,
    negation_cues: Sequence[str] | None = None,
    threads: int = 1,
) -> dict:
    """Metric report over records of any mix of tasks.

    Records are sorted by id before aggregation so that parallel parsing
    stays deterministic.
    """
    if not records:
        raise ValueError("no records to score")
    taxonomies = dict(taxonomies) if taxonomies else {}
    for task in ("expression", "attribute", "deepfake"):
        taxonomies.setdefault(task, default_taxonomy(task))
    cues = tuple(negation_cues) if negation_cues is not None else default_negation_cues()

    records = sorted(records, key=lambda r: r.id)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            preds = list(
                pool.map(lambda r: extract_prediction(r, taxonomies, cues), records)
            )
    else:
        preds = [extract_prediction(r, taxonomies, cues) for r in records]

    report: dict = {"n_records": len(records), "tasks": {}}
    by_task: dict[str, list[int]] = {}
    for i, record in enumerate(records):
        by_task.setdefault(record.task, []).append(i)

    for task, idx in sorted(by_task.items()):
        task_records = [records[i] for i in idx]
        task_preds = [preds[i] for i in idx]
        entry: dict = {"n": len(task_records)}
        if task in _SINGLE_LABEL_TASKS:
            taxonomy = taxonomies[task]
            entry["parse_failure_rate"] = parse_failure_rate(task_preds)
            voted_preds, voted_gts = _collapse_chunks(task_records, task_preds, taxonomy)
            entry["n_groups"] = len(voted_gts)
            uar, war = compute_uar_war(voted_preds, voted_gts, taxonomy.classes)
            entry["metrics"] = {"uar": uar, "war": war, "accuracy": war}
            entry["classes"] = list(taxonomy.classes)
            entry["confusion"] = confusion_matrix(
                voted_preds, voted_gts, taxonomy.classes
            ).tolist()
        elif task == "au":
            gt_sets = [set(r.ground_truth) for r in task_records]
            per_au, mean_f1 = compute_avg_f1(task_preds, gt_sets, au_list)
            entry["metrics"] = {"average_f1": mean_f1}
            entry["per_au_f1"] = {str(au): f1 for au, f1 in per_au.items()}
            entry["au_list"] = list(au_list)
        elif task == "age":
            gts = [r.ground_truth for r in task_records]
            entry["metrics"] = {"mae": compute_mae(task_preds, gts)}
            entry["parse_failure_rate"] = parse_failure_rate(task_preds)
        elif task == "attribute":
            attributes = list(taxonomies["attribute"].classes)
            index = {a: i for i, a in enumerate(attributes)}
            gt_vectors = []
            for record in task_records:
                vec = [0] * len(attributes)
                for name in record.ground_truth:
                    if name not in index:
                        raise ValueError(
                            f"record {record.id!r}: unknown attribute {name!r}"
                        )
                    vec[index[name]] = 1
                gt_vectors.append(vec)
            per_attr, mean_acc = compute_mean_attr_accuracy(
                task_preds, gt_vectors, attributes
            )
            entry["metrics"] = {"mean_attribute_accuracy": mean_acc}
            entry["per_attribute_accuracy"] = per_attr
        report["tasks"][task] = entry
    return report


def confusion_csv_lines(entry: dict) -> list[str]:
    """CSV rows for one task's confusion matrix (gt rows, pred columns)."""
    classes = entry["classes"]
    header = ["gt\\pred"] + classes + ["nomatch"]
    lines = [",".join(header)]
    for cls, row in zip(classes, entry["confusion"]):
        lines.append(",".join([cls] + [str(v) for v in row]))
    return lines
