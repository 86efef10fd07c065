import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ayahqa.corpus import load_corpus
from ayahqa.dataset import load_judgments, load_questions

REPO_ROOT = Path(__file__).resolve().parent.parent
MINI = REPO_ROOT / "data" / "mini"


@pytest.fixture(scope="session")
def mini_paths():
    return {
        "corpus_ar": MINI / "corpus_ar.tsv",
        "corpus_en": MINI / "corpus_en.tsv",
        "questions": MINI / "questions.jsonl",
        "qrels": MINI / "qrels.tsv",
    }


@pytest.fixture(scope="session")
def mini_corpus(mini_paths):
    return load_corpus(mini_paths["corpus_ar"], mini_paths["corpus_en"])


@pytest.fixture(scope="session")
def mini_questions(mini_paths):
    return load_questions(mini_paths["questions"])


@pytest.fixture(scope="session")
def mini_judgments(mini_paths):
    return load_judgments(mini_paths["qrels"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One PASS/FAIL line per acceptance criterion, printed as they run."""
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.fspath.basename == "test_acceptance.py":
        status = "PASS" if rep.passed else "FAIL"
        sys.stderr.write(f"\nACCEPTANCE {status}: {item.name}\n")
