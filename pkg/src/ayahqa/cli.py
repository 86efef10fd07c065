"""Command-line entry point: ingest, translate, expand, build-pairs,
retrieve, tune-threshold, evaluate, compare, stats.

Every flag falls back to an ``AYAH_``-prefixed environment variable
(``--cache`` -> ``AYAH_CACHE``, ``--endpoint`` -> ``AYAH_PROVIDER_URL``,
``--api-key`` -> ``AYAH_PROVIDER_KEY``). Outputs are written atomically
(temp file + rename) with a ``<out>.meta.json`` sidecar echoing the
command, seed/k parameters and input digests; with ``--deterministic`` the
sidecar carries no timestamps, so reruns are byte-identical.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import augment, dataset, evaluation, pairs, retrieval
from .corpus import load_corpus
from .errors import AyahQaError
from .fileio import atomic_write_text, write_meta
from .scorer import Bm25Scorer, FixtureScorer, RemoteScorer


def _env(name: str, flag_default: str | None = None) -> str | None:
    return os.environ.get(f"AYAH_{name}", flag_default)


@dataclass
class PipelineManifest:
    """Resolved input paths for one invocation; all must exist up front."""

    inputs: dict[str, Path]

    @classmethod
    def resolve(cls, **named_paths: str | None) -> "PipelineManifest":
        inputs: dict[str, Path] = {}
        for name, raw in named_paths.items():
            if raw is None:
                continue
            p = Path(raw)
            if not p.exists():
                raise AyahQaError(f"--{name.replace('_', '-')}: {p} does not exist")
            inputs[name] = p
        return cls(inputs)

    def paths(self) -> list[Path]:
        return list(self.inputs.values())


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus-ar", default=_env("CORPUS_AR"), required=_env("CORPUS_AR") is None,
                   help="Arabic corpus TSV")
    p.add_argument("--corpus-en", default=_env("CORPUS_EN"), required=_env("CORPUS_EN") is None,
                   help="English corpus TSV")


def _add_provider_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--provider", choices=["echo", "remote"], default=_env("PROVIDER", "echo"))
    p.add_argument("--endpoint", default=_env("PROVIDER_URL"), help="remote provider base URL")
    p.add_argument("--api-key", default=_env("PROVIDER_KEY"))
    p.add_argument("--cache", default=_env("CACHE"), help="provider cache JSONL (created if absent)")
    p.add_argument("--workers", type=int, default=int(_env("WORKERS", "4")))


def _make_provider(args) -> augment.EchoProvider | augment.RemoteProvider:
    if args.provider == "remote":
        if not args.endpoint:
            raise AyahQaError("--endpoint (or AYAH_PROVIDER_URL) is required with --provider remote")
        return augment.RemoteProvider(args.endpoint, api_key=args.api_key)
    return augment.EchoProvider()


def _make_cache(args) -> augment.TranslationCache:
    return augment.TranslationCache(args.cache)


def _make_scorer(args, corpus):
    if args.scorer == "lexical":
        return Bm25Scorer().fit(corpus)
    if args.scorer == "remote":
        if not args.endpoint:
            raise AyahQaError("--endpoint (or AYAH_PROVIDER_URL) is required with --scorer remote")
        return RemoteScorer(args.endpoint, api_key=args.api_key)
    if not args.fixture:
        raise AyahQaError("--fixture is required with --scorer fixture")
    return FixtureScorer.from_file(args.fixture)


def _filter_split(questions, split: str):
    if split == "all":
        return list(questions)
    return [q for q in questions if q.split.value == split]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    manifest = PipelineManifest.resolve(
        corpus_ar=args.corpus_ar,
        corpus_en=args.corpus_en,
        questions=args.questions,
        qrels=args.qrels,
        exclude=args.exclude,
    )
    corpus = load_corpus(args.corpus_ar, args.corpus_en)
    questions = dataset.load_questions(args.questions)
    judgments = dataset.load_judgments(args.qrels)

    if args.exclude:
        excluded = dataset.load_exclusions(args.exclude)
        questions, judgments, dropped = dataset.drop_questions(questions, judgments, excluded)
        if dropped:
            print(f"excluded {len(dropped)} question(s): {', '.join(dropped)}")

    questions = [dataset.standardize_question(q) for q in questions]
    questions, duplicate_ids = augment.dedupe_questions(questions)
    if duplicate_ids:
        questions, judgments, _ = dataset.drop_questions(questions, judgments, set(duplicate_ids))
        print(f"dropped {len(duplicate_ids)} duplicate question(s): {', '.join(duplicate_ids)}")

    report = dataset.validate_dataset(questions, judgments, corpus)
    for v in report:
        print(f"violation [{v.code}]: {v.message}", file=sys.stderr)
    if not report.ok:
        print(f"dataset invalid: {len(report.violations)} violation(s)", file=sys.stderr)
        return 1

    dataset.save_questions(questions, args.out_questions)
    dataset.save_judgments(judgments, args.out_qrels)
    params = {"seed": None, "k": None}
    write_meta(args.out_questions, "ingest", params, manifest.paths(), args.deterministic)
    write_meta(args.out_qrels, "ingest", params, manifest.paths(), args.deterministic)
    print(f"ingested {len(questions)} questions, {len(judgments)} judgments")
    return 0


def cmd_translate(args) -> int:
    manifest = PipelineManifest.resolve(questions=args.questions)
    questions = dataset.load_questions(args.questions)
    provider = _make_provider(args)
    cache = _make_cache(args)
    translated = augment.translate_questions(
        questions, provider, cache, src=args.src, tgt=args.tgt, workers=args.workers
    )
    dataset.save_questions(translated, args.out)
    write_meta(
        args.out,
        "translate",
        {"provider": provider.provider_id, "src": args.src, "tgt": args.tgt, "seed": None, "k": None},
        manifest.paths(),
        args.deterministic,
    )
    filled = sum(1 for before, after in zip(questions, translated) if before.text_en is None and after.text_en)
    print(f"translated {filled} question(s); {len(translated)} total")
    return 0


def cmd_expand(args) -> int:
    manifest = PipelineManifest.resolve(questions=args.questions, qrels=args.qrels)
    questions = dataset.load_questions(args.questions)
    judgments = dataset.load_judgments(args.qrels)
    provider = _make_provider(args)
    cache = _make_cache(args)

    originals = [q for q in questions if q.source != dataset.Source.PARAPHRASE]
    if len(originals) != len(questions):
        raise AyahQaError("input already contains paraphrases; expand original questions only")

    expanded_q, expanded_j = augment.paraphrase_and_expand(
        questions, judgments, provider, args.n, cache, lang=args.lang, workers=args.workers
    )
    if args.translate_variants:
        expanded_q = augment.translate_questions(
            expanded_q, provider, cache, src=args.lang, tgt="en", workers=args.workers
        )

    dataset.save_questions(expanded_q, args.out_questions)
    dataset.save_judgments(expanded_j, args.out_qrels)
    params = {
        "provider": provider.provider_id,
        "n": args.n,
        "paraphrase_lang": args.lang,
        "variants_translated": bool(args.translate_variants),
        "seed": None,
        "k": None,
    }
    write_meta(args.out_questions, "expand", params, manifest.paths(), args.deterministic)
    write_meta(args.out_qrels, "expand", params, manifest.paths(), args.deterministic)
    print(
        f"expanded {len(questions)} -> {len(expanded_q)} questions, "
        f"{len(judgments)} -> {len(expanded_j)} judgments"
    )
    return 0


def cmd_build_pairs(args) -> int:
    manifest = PipelineManifest.resolve(
        corpus_ar=args.corpus_ar, corpus_en=args.corpus_en, questions=args.questions, qrels=args.qrels
    )
    corpus = load_corpus(args.corpus_ar, args.corpus_en)
    questions = _filter_split(dataset.load_questions(args.questions), args.split)
    judgments = dataset.load_judgments(args.qrels)
    cfg = pairs.SamplingConfig(neg_ratio=args.neg_ratio, seed=args.seed, strategy=args.strategy)
    built = pairs.build_pairs(questions, corpus, judgments, cfg)
    pairs.export_pairs(built, questions, corpus, args.out)
    write_meta(
        args.out,
        "build-pairs",
        {"seed": args.seed, "k": None, "neg_ratio": args.neg_ratio, "strategy": args.strategy, "split": args.split},
        manifest.paths(),
        args.deterministic,
    )
    n_pos = sum(1 for p in built if p.label == 1)
    print(f"built {len(built)} pairs ({n_pos} positive) for {len(questions)} questions")
    return 0


def cmd_retrieve(args) -> int:
    manifest = PipelineManifest.resolve(
        corpus_ar=args.corpus_ar,
        corpus_en=args.corpus_en,
        questions=args.questions,
        fixture=args.fixture,
    )
    corpus = load_corpus(args.corpus_ar, args.corpus_en)
    questions = _filter_split(dataset.load_questions(args.questions), args.split)
    scorer = _make_scorer(args, corpus)
    threshold = retrieval.Threshold.parse(args.threshold)
    run = retrieval.build_run(questions, corpus, scorer, k=args.k, threshold=threshold, run_tag=args.tag)
    retrieval.write_run(run, args.out)
    write_meta(
        args.out,
        "retrieve",
        {
            "seed": None,
            "k": args.k,
            "scorer": scorer.name,
            "threshold": args.threshold,
            "tag": args.tag,
            "split": args.split,
        },
        manifest.paths(),
        args.deterministic,
    )
    empty = sum(1 for entries in run.entries.values() if not entries)
    print(f"ranked {len(run.entries)} questions (no-answer predictions: {empty})")
    return 0


def cmd_tune_threshold(args) -> int:
    manifest = PipelineManifest.resolve(
        corpus_ar=args.corpus_ar,
        corpus_en=args.corpus_en,
        questions=args.questions,
        qrels=args.qrels,
        fixture=args.fixture,
    )
    corpus = load_corpus(args.corpus_ar, args.corpus_en)
    questions = _filter_split(dataset.load_questions(args.questions), args.split)
    judgments = dataset.load_judgments(args.qrels)
    scorer = _make_scorer(args, corpus)
    grid = [float(v) for v in args.grid.split(",") if v.strip()]
    best = retrieval.tune_threshold(questions, judgments, corpus, scorer, grid, k=args.k)
    print(f"best threshold: {best.tau}")
    if args.json:
        import json as _json

        atomic_write_text(args.json, _json.dumps({"tau": best.tau, "grid": grid}, indent=2) + "\n")
        write_meta(args.json, "tune-threshold", {"seed": None, "k": args.k, "grid": grid},
                   manifest.paths(), args.deterministic)
    return 0


def cmd_evaluate(args) -> int:
    manifest = PipelineManifest.resolve(run=args.run, qrels=args.qrels, questions=args.questions)
    run = retrieval.read_run(args.run)
    judgments = dataset.load_judgments(args.qrels)
    questions = dataset.load_questions(args.questions)
    report = evaluation.evaluate(run, judgments, questions)
    sys.stdout.write(evaluation.report_table(report))
    if args.json:
        atomic_write_text(args.json, report.to_json())
        write_meta(args.json, "evaluate", {"seed": None, "k": run.k}, manifest.paths(), args.deterministic)
    return 0


def cmd_compare(args) -> int:
    manifest = PipelineManifest.resolve(
        base_run=args.base_run, ours_run=args.ours_run, qrels=args.qrels, questions=args.questions
    )
    judgments = dataset.load_judgments(args.qrels)
    questions = dataset.load_questions(args.questions)
    base_report = evaluation.evaluate(retrieval.read_run(args.base_run), judgments, questions)
    ours_report = evaluation.evaluate(retrieval.read_run(args.ours_run), judgments, questions)
    cmp = evaluation.compare_runs(base_report, ours_report)
    sys.stdout.write(evaluation.comparison_table(cmp))
    if args.json:
        atomic_write_text(args.json, cmp.to_json())
        write_meta(args.json, "compare", {"seed": None, "k": None}, manifest.paths(), args.deterministic)
    return 0


def cmd_stats(args) -> int:
    PipelineManifest.resolve(questions=args.questions, qrels=args.qrels)
    questions = dataset.load_questions(args.questions)
    judgments = dataset.load_judgments(args.qrels)
    stats = dataset.compute_stats(questions, judgments)
    print(f"questions: {stats.total}")
    print("  by split: " + " ".join(f"{k}={v}" for k, v in stats.by_split.items()))
    print("  by qtype: " + " ".join(f"{k}={v}" for k, v in stats.by_qtype.items()))
    print("  by source: " + " ".join(f"{k}={v}" for k, v in stats.by_source.items()))
    print(f"judgments: {stats.judgments} (positive={stats.positive_judgments})")
    print(dataset.EXPANSION_NOTE)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ayahqa",
        description="Cross-language passage retrieval pipeline and evaluation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--deterministic", action="store_true",
                       help="omit timestamps from output metadata for byte-identical reruns")

    p = sub.add_parser("ingest", help="load, clean, validate and re-emit the dataset")
    _add_corpus_args(p)
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    p.add_argument("--exclude", default=_env("EXCLUDE"), help="manual exclusion list (one question id per line)")
    p.add_argument("--out-questions", required=True)
    p.add_argument("--out-qrels", required=True)
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("translate", help="fill missing English question text via a provider")
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--out", required=True)
    p.add_argument("--src", default="ar")
    p.add_argument("--tgt", default="en")
    _add_provider_args(p)
    common(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("expand", help="paraphrase questions and replicate their judgments")
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    p.add_argument("--out-questions", required=True)
    p.add_argument("--out-qrels", required=True)
    p.add_argument("--n", type=int, default=2, help="paraphrases per question")
    p.add_argument("--lang", default="ar", help="paraphrase language (source side)")
    p.add_argument("--no-translate-variants", dest="translate_variants", action="store_false",
                   help="skip translating new variants to English")
    _add_provider_args(p)
    common(p)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("build-pairs", help="construct labeled training pairs")
    _add_corpus_args(p)
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    p.add_argument("--neg-ratio", type=float, default=2.0)
    p.add_argument("--strategy", choices=list(pairs.STRATEGIES), default="uniform")
    p.add_argument("--split", choices=["train", "dev", "test", "all"], default="train")
    common(p)
    p.set_defaults(func=cmd_build_pairs)

    p = sub.add_parser("retrieve", help="rank corpus passages per question into a run file")
    _add_corpus_args(p)
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--out", required=True)
    p.add_argument("--scorer", choices=["lexical", "remote", "fixture"], default="lexical")
    p.add_argument("--fixture", default=_env("FIXTURE"), help="run file for --scorer fixture")
    p.add_argument("--endpoint", default=_env("PROVIDER_URL"))
    p.add_argument("--api-key", default=_env("PROVIDER_KEY"))
    p.add_argument("--k", type=int, default=int(_env("K", "10")))
    p.add_argument("--threshold", default=_env("THRESHOLD", "none"))
    p.add_argument("--tag", default=_env("TAG", "ours"))
    p.add_argument("--split", choices=["train", "dev", "test", "all"], default="all")
    common(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("tune-threshold", help="pick the no-answer threshold on a dev split")
    _add_corpus_args(p)
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    p.add_argument("--scorer", choices=["lexical", "remote", "fixture"], default="lexical")
    p.add_argument("--fixture", default=_env("FIXTURE"))
    p.add_argument("--endpoint", default=_env("PROVIDER_URL"))
    p.add_argument("--api-key", default=_env("PROVIDER_KEY"))
    p.add_argument("--grid", required=True, help="comma-separated candidate taus")
    p.add_argument("--k", type=int, default=int(_env("K", "10")))
    p.add_argument("--split", choices=["train", "dev", "test", "all"], default="dev")
    p.add_argument("--json", help="write the chosen threshold as JSON")
    common(p)
    p.set_defaults(func=cmd_tune_threshold)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    p.add_argument("--run", default=_env("RUN"), required=_env("RUN") is None)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--json", help="write the machine-readable report here")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="Base-vs-Ours comparison of two run files")
    p.add_argument("--base-run", required=True)
    p.add_argument("--ours-run", required=True)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--json", help="write the machine-readable comparison here")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="dataset summary counts")
    p.add_argument("--questions", default=_env("QUESTIONS"), required=_env("QUESTIONS") is None)
    p.add_argument("--qrels", default=_env("QRELS"), required=_env("QRELS") is None)
    common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AyahQaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
