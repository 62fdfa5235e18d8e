"""Subcommand CLI chaining the pipeline stages over persisted artifacts.

Stages communicate through plain text files (idf tables, collection
records, k-best lists, match dumps) so each can be rerun or inspected
in isolation; ``pipeline`` chains retrieval and reranking in memory for
the common case. Every run is deterministic given its inputs and seed:
rerunning a subcommand reproduces its output files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .collection import load_collection, load_features, save_collection
from .evalsig import (
    align_sentences,
    approx_randomization,
    bleu_score,
    bleu_stats,
    read_sentence_file,
    sum_stats,
)
from .rerank import (
    RERANK_DEFAULTS,
    RerankParams,
    select_best,
    write_diagnostics,
    write_output,
)
from .retrieval import (
    MODES,
    RETRIEVAL_DEFAULTS,
    MatchList,
    Query,
    Retriever,
    RetrievalParams,
    read_kbest,
    read_matchlists,
    read_queries,
    write_matchlists,
)
from .textcore import build_idf, IdfTable, read_token_lines
from .tune import DevSet, GridSpec, stepwise_search

log = logging.getLogger(__name__)

_PIPELINE_KEYS = {
    "collection": None,
    "idf": None,
    "kbest": None,
    "out_dir": None,
    "mode": "txt",
    "features": None,
    "queries": None,
    "references": None,
    "k_n": None,
    "k_m": None,
    "k_r": None,
    "interp_weight": None,
    "distance_weight": 0.01,
    "distance_cutoff": 90.0,
    "workers": 1,
    "diagnostics": False,
    "skip_empty": False,
}


def _resolve_params(
    mode: str, cfg: dict
) -> tuple[RetrievalParams, RerankParams]:
    rdef = RETRIEVAL_DEFAULTS[mode]
    rrdef = RERANK_DEFAULTS[mode]
    retrieval = RetrievalParams(
        k_n=cfg["k_n"] if cfg["k_n"] is not None else rdef.k_n,
        k_m=cfg["k_m"] if cfg["k_m"] is not None else rdef.k_m,
        distance_weight=cfg["distance_weight"],
        distance_cutoff=cfg["distance_cutoff"],
    )
    rerank = RerankParams(
        k_r=cfg["k_r"] if cfg["k_r"] is not None else rrdef.k_r,
        interp_weight=cfg["interp_weight"]
        if cfg["interp_weight"] is not None
        else rrdef.interp_weight,
    )
    return retrieval, rerank


def _run_sentences(work, kbests, workers: int) -> list:
    if workers <= 1:
        return [work(kb) for kb in kbests]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, kbests))


def _load_query_table(path) -> dict[str, Query]:
    return read_queries(path) if path else {}


def cmd_extract_idf(args) -> int:
    table = build_idf(read_token_lines(args.corpus))
    table.save(args.out)
    print(f"documents: {table.doc_count}")
    print(f"terms: {len(table)}")
    return 0


def cmd_build_index(args) -> int:
    coll = load_collection(args.collection, skip_empty=args.skip_empty)
    save_collection(coll, args.out)
    print(f"captions: {len(coll)}")
    print(f"images: {len(coll.by_image)}")
    print(f"terms: {len(coll.vocab)}")
    return 0


def cmd_retrieve(args) -> int:
    mode = args.mode
    if mode == "cnn" and not args.features:
        raise ValueError("cnn mode requires --features")
    coll = load_collection(args.collection)
    idf = IdfTable.load(args.idf)
    feats = load_features(args.features) if mode == "cnn" else None
    queries = _load_query_table(args.queries)
    rdef = RETRIEVAL_DEFAULTS[mode]
    params = RetrievalParams(
        k_n=args.k_n if args.k_n is not None else rdef.k_n,
        k_m=args.k_m if args.k_m is not None else rdef.k_m,
        distance_weight=args.distance_weight,
        distance_cutoff=args.distance_cutoff,
    )
    retriever = Retriever(coll, idf, feats)
    kbests = read_kbest(args.kbest)

    def work(kb):
        query = queries.get(kb.sent_id, Query(kb.sent_id))
        try:
            return retriever.retrieve(
                kb, query.image_id, query.categories, mode, params
            )
        except Exception as exc:
            raise RuntimeError(
                f"retrieve stage failed on sentence {kb.sent_id}: {exc}"
            ) from exc

    matchlists = _run_sentences(work, kbests, args.workers)
    write_matchlists(matchlists, args.out)
    fallbacks = sum(ml.used_fallback for ml in matchlists)
    print(f"sentences: {len(matchlists)}")
    print(f"fallbacks: {fallbacks} / {len(matchlists)}")
    return 0


def cmd_rerank(args) -> int:
    coll = load_collection(args.collection)
    idf = IdfTable.load(args.idf)
    kbests = read_kbest(args.kbest)
    matchlists = {
        ml.sent_id: ml for ml in read_matchlists(args.matches, coll)
    }
    params = RerankParams(k_r=args.k_r, interp_weight=args.interp_weight)
    results = []
    for kb in kbests:
        ml = matchlists.get(kb.sent_id, MatchList(kb.sent_id, []))
        try:
            out = select_best(kb, ml, idf, params)
        except Exception as exc:
            raise RuntimeError(
                f"rerank stage failed on sentence {kb.sent_id}: {exc}"
            ) from exc
        results.append((out, ml.used_fallback))
    write_output([out for out, _ in results], args.out)
    if args.diagnostics:
        write_diagnostics(results, args.diagnostics)
    print(f"sentences: {len(results)}")
    return 0


def _merge_pipeline_config(args) -> dict:
    cfg = dict(_PIPELINE_KEYS)
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            loaded = json.load(handle)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ValueError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        cfg.update(loaded)
    for key in _PIPELINE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key in ("collection", "idf", "kbest", "out_dir"):
        if not cfg[key]:
            raise ValueError(f"pipeline config is missing {key!r}")
    if cfg["mode"] not in MODES:
        raise ValueError(f"unknown mode {cfg['mode']!r}")
    if cfg["mode"] == "cnn" and not cfg["features"]:
        raise ValueError("cnn mode requires a features path")
    return cfg


def cmd_pipeline(args) -> int:
    cfg = _merge_pipeline_config(args)
    mode = cfg["mode"]
    idf = IdfTable.load(cfg["idf"])
    coll = load_collection(cfg["collection"], skip_empty=cfg["skip_empty"])
    if mode == "hca" and not any(
        doc.categories is not None for doc in coll.docs
    ):
        raise ValueError("hca mode requires category annotations")
    feats = load_features(cfg["features"]) if mode == "cnn" else None
    queries = _load_query_table(cfg["queries"])
    retrieval_params, rerank_params = _resolve_params(mode, cfg)
    retriever = Retriever(coll, idf, feats)
    kbests = read_kbest(cfg["kbest"])

    def work(kb):
        query = queries.get(kb.sent_id, Query(kb.sent_id))
        try:
            ml = retriever.retrieve(
                kb, query.image_id, query.categories, mode, retrieval_params
            )
        except Exception as exc:
            raise RuntimeError(
                f"retrieve stage failed on sentence {kb.sent_id}: {exc}"
            ) from exc
        try:
            out = select_best(kb, ml, idf, rerank_params)
        except Exception as exc:
            raise RuntimeError(
                f"rerank stage failed on sentence {kb.sent_id}: {exc}"
            ) from exc
        return out, ml.used_fallback

    results = _run_sentences(work, kbests, cfg["workers"])

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_output([out for out, _ in results], out_dir / "output.txt")
    if cfg["diagnostics"]:
        write_diagnostics(results, out_dir / "diagnostics.txt")

    resolved = dict(cfg)
    resolved.update(
        k_n=retrieval_params.k_n,
        k_m=retrieval_params.k_m,
        k_r=rerank_params.k_r,
        interp_weight=rerank_params.interp_weight,
    )
    with open(out_dir / "config.json", "w", encoding="utf-8") as handle:
        json.dump(resolved, handle, indent=2, sort_keys=True)
        handle.write("\n")

    fallbacks = sum(fb for _, fb in results)
    report = [
        f"sentences: {len(results)}",
        f"fallbacks: {fallbacks} / {len(results)}",
    ]
    if cfg["references"]:
        ids, sentences = read_sentence_file(cfg["references"])
        if ids is not None:
            table = dict(zip(ids, sentences))
            missing = [
                kb.sent_id for kb in kbests if kb.sent_id not in table
            ]
            if missing:
                raise ValueError(
                    f"references missing sentences: {', '.join(missing)}"
                )
            refs = [table[kb.sent_id] for kb in kbests]
        else:
            if len(sentences) != len(kbests):
                raise ValueError(
                    f"{len(sentences)} references for {len(kbests)} sentences"
                )
            refs = sentences
        total = sum_stats(
            [
                bleu_stats(out.chosen.tokens, ref)
                for (out, _), ref in zip(results, refs)
            ]
        )
        score = bleu_score(total)
        report.append(f"BLEU: {100 * score:.2f} ({score:.6f})")
    for line in report:
        print(line)
    with open(out_dir / "report.txt", "w", encoding="utf-8") as handle:
        handle.write("\n".join(report) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    hyps, refs = align_sentences([args.hyp, args.ref])
    total = sum_stats([bleu_stats(h, r) for h, r in zip(hyps, refs)])
    score = bleu_score(total)
    print(f"sentences: {len(hyps)}")
    print(f"BLEU: {100 * score:.2f} ({score:.6f})")
    return 0


def cmd_compare(args) -> int:
    sys_a, sys_b, refs = align_sentences([args.a, args.b, args.ref])
    stats_a = [bleu_stats(h, r) for h, r in zip(sys_a, refs)]
    stats_b = [bleu_stats(h, r) for h, r in zip(sys_b, refs)]
    score_a = bleu_score(sum_stats(stats_a))
    score_b = bleu_score(sum_stats(stats_b))
    p = approx_randomization(
        stats_a, stats_b, args.trials, args.seed, args.workers
    )
    print(f"sentences: {len(refs)}")
    print(f"BLEU_A: {100 * score_a:.2f} ({score_a:.6f})")
    print(f"BLEU_B: {100 * score_b:.2f} ({score_b:.6f})")
    print(f"diff: {100 * abs(score_a - score_b):.2f}")
    print(f"trials: {args.trials}")
    print(f"seed: {args.seed}")
    print(f"p-value: {p:.6f}")
    return 0


def cmd_tune(args) -> int:
    with open(args.grid, encoding="utf-8") as handle:
        spec = json.load(handle)
    mode = spec.pop("mode", "txt")
    distance_weight = spec.pop("distance_weight", 0.01)
    known = {"k_n", "k_m", "k_r", "interp_weight", "distance_cutoff"}
    unknown = set(spec) - known
    if unknown:
        raise ValueError(
            f"unknown grid keys: {', '.join(sorted(unknown))}"
        )
    missing = {"k_n", "k_m", "k_r", "interp_weight"} - set(spec)
    if missing:
        raise ValueError(
            f"grid is missing candidate lists: {', '.join(sorted(missing))}"
        )
    grid = GridSpec(**spec)

    coll = load_collection(args.collection)
    idf = IdfTable.load(args.idf)
    feats = load_features(args.features) if args.features else None
    if mode == "cnn" and feats is None:
        raise ValueError("cnn mode requires --features")
    kbests = read_kbest(args.kbest)
    ids, sentences = read_sentence_file(args.references)
    if ids is not None:
        table = dict(zip(ids, sentences))
        refs = []
        for kb in kbests:
            if kb.sent_id not in table:
                raise ValueError(
                    f"references missing sentence {kb.sent_id}"
                )
            refs.append(table[kb.sent_id])
    else:
        if len(sentences) != len(kbests):
            raise ValueError(
                f"{len(sentences)} references for {len(kbests)} sentences"
            )
        refs = sentences
    dev = DevSet(
        coll=coll,
        idf=idf,
        kbests=kbests,
        references=refs,
        feats=feats,
        queries=_load_query_table(args.queries),
    )
    result = stepwise_search(grid, dev, mode, distance_weight)

    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as handle:
            for point, bleu in result.trace:
                record = dict(point)
                record["bleu"] = bleu
                handle.write(json.dumps(record, sort_keys=True) + "\n")
    best = {
        "mode": mode,
        "k_n": result.retrieval_params.k_n,
        "k_m": result.retrieval_params.k_m,
        "k_r": result.rerank_params.k_r,
        "interp_weight": result.rerank_params.interp_weight,
        "distance_weight": distance_weight,
        "distance_cutoff": result.retrieval_params.distance_cutoff,
        "bleu": result.best_bleu,
    }
    if args.best_out:
        with open(args.best_out, "w", encoding="utf-8") as handle:
            json.dump(best, handle, indent=2, sort_keys=True)
            handle.write("\n")
    print(f"evaluated points: {len(result.trace)}")
    for key, value in best.items():
        print(f"{key}: {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsr",
        description=(
            "Caption-translation reranking using target-side retrieval"
            " over a captioned-image collection."
        ),
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="enable info logging"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser(
        "extract-idf", help="estimate idf weights from a monolingual corpus"
    )
    sp.add_argument("corpus", help="one tokenized sentence per line")
    sp.add_argument("out", help="idf table output path")
    sp.set_defaults(func=cmd_extract_idf)

    sp = sub.add_parser(
        "build-index", help="validate a collection and persist it"
    )
    sp.add_argument("collection", help="collection record file")
    sp.add_argument("out", help="validated collection output path")
    sp.add_argument(
        "--skip-empty",
        action="store_true",
        help="drop empty captions instead of failing",
    )
    sp.set_defaults(func=cmd_build_index)

    sp = sub.add_parser(
        "retrieve", help="retrieve matches for every sentence's k-best list"
    )
    sp.add_argument("--collection", required=True)
    sp.add_argument("--idf", required=True)
    sp.add_argument("--kbest", required=True)
    sp.add_argument("--out", required=True, help="match dump output path")
    sp.add_argument("--mode", choices=MODES, default="txt")
    sp.add_argument("--features", help="image feature file (cnn mode)")
    sp.add_argument("--queries", help="per-sentence image ids / categories")
    sp.add_argument("--k-n", dest="k_n", type=int)
    sp.add_argument("--k-m", dest="k_m", type=int)
    sp.add_argument(
        "--distance-weight", dest="distance_weight", type=float, default=0.01
    )
    sp.add_argument(
        "--distance-cutoff", dest="distance_cutoff", type=float, default=90.0
    )
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_retrieve)

    sp = sub.add_parser(
        "rerank", help="rerank k-best lists against a match dump"
    )
    sp.add_argument("--collection", required=True)
    sp.add_argument("--idf", required=True)
    sp.add_argument("--kbest", required=True)
    sp.add_argument("--matches", required=True, help="match dump path")
    sp.add_argument("--out", required=True)
    sp.add_argument("--k-r", dest="k_r", type=int, default=5)
    sp.add_argument(
        "--interp-weight", dest="interp_weight", type=float, default=5e4
    )
    sp.add_argument("--diagnostics", help="per-sentence diagnostics path")
    sp.set_defaults(func=cmd_rerank)

    sp = sub.add_parser(
        "pipeline", help="run retrieval and reranking end to end"
    )
    sp.add_argument("--config", help="JSON config; flags override fields")
    sp.add_argument("--collection")
    sp.add_argument("--idf")
    sp.add_argument("--kbest")
    sp.add_argument("--out-dir", dest="out_dir")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--features")
    sp.add_argument("--queries")
    sp.add_argument("--references")
    sp.add_argument("--k-n", dest="k_n", type=int)
    sp.add_argument("--k-m", dest="k_m", type=int)
    sp.add_argument("--k-r", dest="k_r", type=int)
    sp.add_argument("--interp-weight", dest="interp_weight", type=float)
    sp.add_argument("--distance-weight", dest="distance_weight", type=float)
    sp.add_argument("--distance-cutoff", dest="distance_cutoff", type=float)
    sp.add_argument("--workers", type=int)
    sp.add_argument(
        "--diagnostics", action="store_const", const=True, default=None
    )
    sp.add_argument(
        "--skip-empty",
        dest="skip_empty",
        action="store_const",
        const=True,
        default=None,
    )
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("evaluate", help="corpus BLEU of one system output")
    sp.add_argument("hyp")
    sp.add_argument("ref")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser(
        "compare",
        help="BLEU of two systems plus approximate-randomization p-value",
    )
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("ref")
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser(
        "tune", help="step-wise hyperparameter search on a dev set"
    )
    sp.add_argument("--grid", required=True, help="JSON grid spec")
    sp.add_argument("--collection", required=True)
    sp.add_argument("--idf", required=True)
    sp.add_argument("--kbest", required=True)
    sp.add_argument("--references", required=True)
    sp.add_argument("--queries")
    sp.add_argument("--features")
    sp.add_argument("--trace-out", dest="trace_out")
    sp.add_argument("--best-out", dest="best_out")
    sp.set_defaults(func=cmd_tune)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
