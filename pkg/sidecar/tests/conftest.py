import json
import sys

import pytest


def make_pairs(n_questions=10, positives=2, negatives=3):
    """Synthetic learnable pairs: positives share topic tokens, negatives don't."""
    records = []
    for i in range(n_questions):
        qid = f"q{i:02d}"
        question = f"what does the passage say about topic{i}?"
        for j in range(positives):
            records.append(
                {
                    "question_id": qid,
                    "passage_id": f"{i + 1}:1-{j + 1}",
                    "question_en": question,
                    "passage_en": f"this passage explains topic{i} in detail part {j}",
                    "label": 1,
                }
            )
        for j in range(negatives):
            records.append(
                {
                    "question_id": qid,
                    "passage_id": f"{i + 1}:{j + 10}-{j + 10}",
                    "question_en": question,
                    "passage_en": f"unrelated filler text about matter{(i + j + 1) % n_questions} and noise{j}",
                    "label": 0,
                }
            )
    return records


@pytest.fixture
def toy_pairs_path(tmp_path):
    records = make_pairs()
    assert len(records) == 50
    path = tmp_path / "pairs.jsonl"
    path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8"
    )
    return path


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.get_closest_marker("acceptance"):
        status = "PASS" if rep.passed else "FAIL"
        sys.stderr.write(f"\nACCEPTANCE {status}: {item.name}\n")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: release criterion check")
