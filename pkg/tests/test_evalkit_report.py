import json
from pathlib import Path

import pytest

from facecond.evalkit import (
    EvalRecord,
    confusion_csv_lines,
    default_negation_cues,
    default_taxonomy,
    extract_prediction,
    load_eval_records,
    score_records,
)

FIXTURES = Path(__file__).parent / "fixtures"
TASK_FILES = {
    "expression": "eval_expression.jsonl",
    "au": "eval_au.jsonl",
    "attribute": "eval_attribute.jsonl",
    "age": "eval_age.jsonl",
    "deepfake": "eval_deepfake.jsonl",
}


def load_fixture_lines(task):
    lines = (FIXTURES / TASK_FILES[task]).read_text().splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def normalize(task, value):
    if task in ("au", "attribute") and value is not None:
        return sorted(value)
    return value


@pytest.fixture(scope="module")
def taxonomies():
    return {task: default_taxonomy(task) for task in ("expression", "attribute", "deepfake")}


@pytest.mark.parametrize("task", sorted(TASK_FILES))
def test_fixture_corpus_parses_to_expected_labels(task, taxonomies):
    docs = load_fixture_lines(task)
    assert len(docs) == 50
    cues = default_negation_cues()
    failures = []
    for doc in docs:
        record = EvalRecord(
            id=doc["id"],
            task=doc["task"],
            generated=doc["generated"],
            ground_truth=tuple(doc["ground_truth"])
            if isinstance(doc["ground_truth"], list)
            else doc["ground_truth"],
            chunk_group=doc.get("chunk_group"),
        )
        got = extract_prediction(record, taxonomies, cues)
        if isinstance(got, set):
            got = sorted(got)
        if got != normalize(task, doc["expected"]):
            failures.append((doc["id"], doc["expected"], got))
    assert not failures, failures


def test_load_eval_records_roundtrip(tmp_path):
    docs = load_fixture_lines("expression")[:5]
    path = tmp_path / "recs.jsonl"
    path.write_text("\n".join(json.dumps(d) for d in docs) + "\n")
    records = load_eval_records(str(path))
    assert len(records) == 5
    assert records[0].id == "exp-001"
    assert records[0].task == "expression"


def test_load_eval_records_rejects_bad_lines(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "task": "expression", "generated": "x"}\n')
    with pytest.raises(ValueError):
        load_eval_records(str(path))


def make_records(task, items):
    out = []
    for i, (text, gt, group) in enumerate(items):
        out.append(
            EvalRecord(
                id=f"{task}-{i:03d}",
                task=task,
                generated=text,
                ground_truth=gt,
                chunk_group=group,
            )
        )
    return out


def test_score_records_expression_end_to_end():
    records = make_records(
        "expression",
        [
            ("She is smiling and pleased.", "happiness", None),
            ("He looks mad.", "anger", None),
            ("A calm face.", "neutral", None),
            ("crying and tearful", "sadness", None),
            ("He seems furious.", "sadness", None),  # wrong prediction
        ],
    )
    report = score_records(records)
    entry = report["tasks"]["expression"]
    assert entry["n"] == 5
    assert entry["metrics"]["war"] == pytest.approx(0.8)
    assert entry["metrics"]["accuracy"] == entry["metrics"]["war"]
    assert 0.0 <= entry["metrics"]["uar"] <= 1.0
    assert entry["parse_failure_rate"] == 0.0
    assert len(entry["confusion"]) == 7  # expression classes


def test_score_records_deepfake_chunk_voting():
    records = make_records(
        "deepfake",
        [
            ("This chunk looks real.", "fake", "vid-1"),
            ("A manipulated face here.", "fake", "vid-1"),
            ("Synthetic textures on the cheeks.", "fake", "vid-1"),
            ("Genuine scene.", "real", None),
        ],
    )
    report = score_records(records)
    entry = report["tasks"]["deepfake"]
    assert entry["n"] == 4
    assert entry["n_groups"] == 2  # one voted group + one singleton
    assert entry["metrics"]["accuracy"] == 1.0


def test_score_records_deepfake_tie_votes_fake():
    records = make_records(
        "deepfake",
        [
            ("This chunk looks real.", "fake", "vid-1"),
            ("A manipulated face here.", "fake", "vid-1"),
        ],
    )
    report = score_records(records)
    assert report["tasks"]["deepfake"]["metrics"]["accuracy"] == 1.0


def test_score_records_numeric_tasks():
    records = make_records(
        "au",
        [
            ("AU1 and AU2 appear.", [1, 2], None),
            ("au12 only.", [12], None),
        ],
    ) + make_records(
        "age",
        [
            ("30 years old.", 30, None),
            ("around fifty", 50, None),  # parse failure -> |gt| penalty
        ],
    )
    report = score_records(records, au_list=(1, 2, 12))
    au_entry = report["tasks"]["au"]
    assert au_entry["metrics"]["average_f1"] == 1.0
    age_entry = report["tasks"]["age"]
    assert age_entry["metrics"]["mae"] == pytest.approx(25.0)
    assert age_entry["parse_failure_rate"] == 0.5


def test_score_records_attribute_task():
    records = make_records(
        "attribute",
        [
            ("She has blond hair.", ["Blond_Hair"], None),
            ("A goatee and eyeglasses.", ["Goatee"], None),  # extra pred: Eyeglasses
        ],
    )
    report = score_records(records)
    entry = report["tasks"]["attribute"]
    acc = entry["metrics"]["mean_attribute_accuracy"]
    # one wrong cell (Eyeglasses on sample 2) out of 2 * 40
    assert acc == pytest.approx(1.0 - 1.0 / 80.0)


def test_score_records_threads_match_serial():
    docs = load_fixture_lines("expression")
    records = [
        EvalRecord(
            id=d["id"], task=d["task"], generated=d["generated"],
            ground_truth=d["ground_truth"],
        )
        for d in docs
    ]
    serial = score_records(records, threads=1)
    parallel = score_records(records, threads=4)
    assert serial == parallel


def test_confusion_csv_layout():
    records = make_records(
        "deepfake",
        [("real footage", "real", None), ("mumble", "fake", None)],
    )
    report = score_records(records)
    lines = confusion_csv_lines(report["tasks"]["deepfake"])
    assert lines[0] == "gt\\pred,real,fake,nomatch"
    assert len(lines) == 3


def test_score_records_rejects_empty():
    with pytest.raises(ValueError):
        score_records([])
