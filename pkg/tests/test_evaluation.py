import itertools
import json
import random

import pytest

from oracles import (
    oracle_average_precision,
    oracle_precision,
    oracle_recall,
    oracle_reciprocal_rank,
)

from ayahqa.corpus import PassageId
from ayahqa.dataset import Judgment, QType, Question, Source, Split
from ayahqa.errors import (
    QuestionSetMismatchError,
    UnknownQuestionError,
    ZeroRelevantError,
)
from ayahqa.evaluation import (
    average_precision_at_k,
    compare_runs,
    comparison_table,
    evaluate,
    precision_at_k,
    recall_at_k,
    reciprocal_rank_at_k,
    report_table,
)
from ayahqa.retrieval import RankedEntry, RankedRun


def question(qid, qtype=QType.SINGLE):
    return Question(qid, "سؤال؟", "question?", qtype, Split.TEST, Source.ORIGINAL, None)


def run_of(entries_by_qid, tag="t"):
    run = RankedRun(run_tag=tag, k=10)
    for qid, pids in entries_by_qid.items():
        run.entries[qid] = [
            RankedEntry(pid, 1.0 - 0.05 * i, i + 1) for i, pid in enumerate(pids)
        ]
    return run


P = {name: PassageId(i + 1, 1, 1) for i, name in enumerate("abcdefghij")}


class TestMetricFunctions:
    def test_hand_case(self):
        ranked = ["p1", "p2", "p3", "p5"]
        relevant = {"p2", "p5"}
        assert precision_at_k(ranked, relevant, 5) == 0.4
        assert precision_at_k(ranked, relevant, 10) == 0.2
        assert recall_at_k(ranked, relevant, 5) == 1.0
        assert average_precision_at_k(ranked, relevant) == 0.5
        assert reciprocal_rank_at_k(ranked, relevant) == 0.5

    def test_precision_perfect_topk(self):
        assert precision_at_k(list("abcde"), set("abcdefg"), 5) == 1.0

    def test_empty_ranking(self):
        assert precision_at_k([], {"a"}, 5) == 0.0
        assert recall_at_k([], {"a"}, 5) == 0.0
        assert average_precision_at_k([], {"a"}) == 0.0
        assert reciprocal_rank_at_k([], {"a"}) == 0.0

    def test_relevant_item_beyond_k_contributes_zero(self):
        ranked = ["x1", "x2", "x3", "x4", "x5", "rel"]
        assert recall_at_k(ranked, {"rel"}, 5) == 0.0
        assert reciprocal_rank_at_k(ranked, {"rel"}, 5) == 0.0

    def test_rr_cases(self):
        assert reciprocal_rank_at_k(["rel"], {"rel"}) == 1.0
        assert reciprocal_rank_at_k(["x", "rel"], {"rel"}) == 0.5
        assert reciprocal_rank_at_k([f"x{i}" for i in range(10)], {"rel"}) == 0.0

    def test_ap_first_and_capped(self):
        assert average_precision_at_k(["rel", "x"], {"rel"}) == 1.0
        # more relevant passages than the cutoff: can never reach 1.0
        relevant = {f"r{i}" for i in range(12)}
        ranked = [f"r{i}" for i in range(10)]
        assert average_precision_at_k(ranked, relevant) < 1.0

    def test_zero_relevant_raises(self):
        for fn in (recall_at_k, average_precision_at_k, reciprocal_rank_at_k):
            with pytest.raises(ZeroRelevantError):
                fn(["a"], set(), 5)

    def test_exhaustive_oracle_equivalence(self):
        universe = list("abcde")
        rankings = [
            perm
            for length in range(0, 6)
            for perm in itertools.permutations(universe, length)
        ]
        rel_sets = [
            set(c)
            for size in (1, 2, 3)
            for c in itertools.combinations(universe, size)
        ]
        for ranked in rankings:
            for relevant in rel_sets:
                for k in (1, 3, 5):
                    assert abs(precision_at_k(ranked, relevant, k) - oracle_precision(ranked, relevant, k)) <= 1e-12
                    assert abs(recall_at_k(ranked, relevant, k) - oracle_recall(ranked, relevant, k)) <= 1e-12
                assert abs(average_precision_at_k(ranked, relevant) - oracle_average_precision(ranked, relevant)) <= 1e-12
                assert abs(reciprocal_rank_at_k(ranked, relevant) - oracle_reciprocal_rank(ranked, relevant)) <= 1e-12

    def test_monotone_under_upward_swap(self):
        rng = random.Random(7)
        for _ in range(200):
            ranked = rng.sample(list("abcdefgh"), 8)
            relevant = set(rng.sample(list("abcdefgh"), 3))
            # find an adjacent (irrelevant, relevant) pair and swap it upward
            for i in range(7):
                if ranked[i] not in relevant and ranked[i + 1] in relevant:
                    swapped = list(ranked)
                    swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
                    assert average_precision_at_k(swapped, relevant) >= average_precision_at_k(ranked, relevant)
                    assert reciprocal_rank_at_k(swapped, relevant) >= reciprocal_rank_at_k(ranked, relevant)
                    break


class TestEvaluate:
    def test_zero_answer_policy(self):
        questions = [question("z1", QType.ZERO), question("z2", QType.ZERO)]
        run = run_of({"z1": [], "z2": [P["a"]]})
        report = evaluate(run, [], questions)
        assert report.per_question["z1"].map10 == 1.0
        assert report.per_question["z1"].pre10 == 1.0
        assert report.per_question["z2"].map10 == 0.0
        assert report.zero_answer_count == 2

    def test_single_answerable_hand_case(self):
        questions = [question("q1", QType.MULTI)]
        judgments = [Judgment("q1", P["b"], 1), Judgment("q1", P["e"], 1)]
        run = run_of({"q1": [P["a"], P["b"], P["c"], P["e"]]})
        report = evaluate(run, judgments, questions)
        m = report.per_question["q1"]
        assert (m.map10, m.mrr, m.rec5, m.rec10, m.pre5, m.pre10) == (0.5, 0.5, 1.0, 1.0, 0.4, 0.2)

    def test_question_in_qrels_but_not_run_scores_as_empty(self):
        questions = [question("q1"), question("q2")]
        judgments = [Judgment("q1", P["a"], 1), Judgment("q2", P["b"], 1)]
        run = run_of({"q1": [P["a"]]})
        report = evaluate(run, judgments, questions)
        assert report.per_question["q2"].map10 == 0.0
        assert report.question_count == 2

    def test_unknown_run_question(self):
        run = run_of({"ghost": [P["a"]]})
        with pytest.raises(UnknownQuestionError):
            evaluate(run, [], [question("q1")])

    def test_answerable_without_positives_rejected(self):
        run = run_of({"q1": [P["a"]]})
        with pytest.raises(ZeroRelevantError):
            evaluate(run, [], [question("q1")])

    def test_aggregate_is_plain_mean_in_id_order(self):
        questions = [question("q1"), question("q2"), question("z", QType.ZERO)]
        judgments = [Judgment("q1", P["a"], 1), Judgment("q2", P["b"], 1)]
        run = run_of({"q1": [P["a"]], "q2": [P["c"], P["b"]], "z": []})
        report = evaluate(run, judgments, questions)
        values = [report.per_question[q].mrr for q in sorted(report.per_question)]
        assert report.aggregates.mrr == sum(values) / 3
        assert report.aggregates.mrr == pytest.approx((1.0 + 0.5 + 1.0) / 3)

    def test_all_values_in_unit_interval(self, mini_questions, mini_judgments):
        rng = random.Random(11)
        pids = [P[c] for c in "abcdefghij"]
        run = RankedRun(run_tag="r", k=10)
        for q in mini_questions:
            n = rng.randint(0, 8)
            chosen = rng.sample(pids, n)
            run.entries[q.id] = [
                RankedEntry(pid, 1.0 - i * 0.01, i + 1) for i, pid in enumerate(chosen)
            ]
        # patch qrels onto the run's pid space: reuse mini judgments qids only
        judgments = []
        seen = set()
        for j in mini_judgments:
            if j.relevance == 1 and j.question_id not in seen:
                seen.add(j.question_id)
                judgments.append(Judgment(j.question_id, pids[hash(j.question_id) % 4], 1))
        questions = [q for q in mini_questions if q.qtype != QType.MULTI or q.id in seen]
        report = evaluate(run, judgments, mini_questions)
        for m in list(report.per_question.values()) + [report.aggregates]:
            for name in ("map10", "mrr", "rec5", "rec10", "pre5", "pre10"):
                assert 0.0 <= m.get(name) <= 1.0

    def test_report_json_round_trip(self):
        questions = [question("q1")]
        judgments = [Judgment("q1", P["a"], 1)]
        report = evaluate(run_of({"q1": [P["a"]]}), judgments, questions)
        data = json.loads(report.to_json())
        assert data["aggregates"]["map10"] == 1.0
        assert data["question_count"] == 1
        assert data["config"]["map_cutoff"] == 10


class TestCompare:
    def reports(self, base_vals, ours_vals):
        questions = [question("q1"), question("q2")]
        judgments = [Judgment("q1", P["a"], 1), Judgment("q2", P["b"], 1)]
        base = evaluate(run_of(base_vals, tag="base"), judgments, questions)
        ours = evaluate(run_of(ours_vals, tag="ours"), judgments, questions)
        return base, ours

    def test_delta_and_bolding(self):
        base, ours = self.reports(
            {"q1": [P["c"], P["a"]], "q2": [P["c"]]},
            {"q1": [P["a"]], "q2": [P["b"]]},
        )
        cmp = compare_runs(base, ours)
        d = cmp.to_dict()
        assert d["metrics"]["mrr"]["winner"] == "ours"
        assert d["metrics"]["mrr"]["delta"] == pytest.approx(0.75)
        table = comparison_table(cmp)
        assert "**1.00**" in table
        assert "+0.75" in table

    def test_identical_reports_no_bold(self):
        base, ours = self.reports({"q1": [P["a"]], "q2": [P["b"]]}, {"q1": [P["a"]], "q2": [P["b"]]})
        cmp = compare_runs(base, ours)
        table = comparison_table(cmp)
        assert "**" not in table
        assert all(row["delta"] == 0.0 for row in cmp.to_dict()["metrics"].values())

    def test_question_set_mismatch(self):
        questions = [question("q1"), question("q2")]
        judgments = [Judgment("q1", P["a"], 1), Judgment("q2", P["b"], 1)]
        base = evaluate(run_of({"q1": [P["a"]]}), [judgments[0]], [questions[0]])
        ours = evaluate(run_of({"q2": [P["b"]]}), [judgments[1]], [questions[1]])
        with pytest.raises(QuestionSetMismatchError):
            compare_runs(base, ours)


def test_report_table_renders(mini_questions):
    questions = [question("q1")]
    judgments = [Judgment("q1", P["a"], 1)]
    report = evaluate(run_of({"q1": [P["a"]]}), judgments, questions)
    text = report_table(report)
    assert "MAP10" in text and "Pre10" in text
    assert "questions: 1" in text
