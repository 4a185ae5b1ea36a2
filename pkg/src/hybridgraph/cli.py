"""Command-line interface.

Failures print one ``error: <code>: <detail>`` line on stderr and exit 1;
usage errors exit 2.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import formats
from .errors import HybridIndexError
from .evaluate import ground_truth, run_benchmark
from .index import BuildParams
from .knn import default_workers
from .maintenance import insert_batch, mark_delete
from .model import QuerySpec, Weights
from .refine import build_hybrid_index
from .search import batch_query
from .serialize import deserialize_index, serialize_index
from .store import DocumentStore
from .synthetic import SyntheticCorpus, plant_hop_chains

log = logging.getLogger("hybridgraph")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _threads(args) -> int:
    return args.threads or default_workers()


def cmd_build(args) -> int:
    docs = formats.read_corpus(args.corpus)
    kg = formats.read_kg(args.kg) if args.kg else None
    params = BuildParams(k=args.knn_k, iters=args.iters, degree=args.degree, seed=args.seed, x_hops=args.x_hops)
    t0 = time.perf_counter()
    index = build_hybrid_index(docs, kg, params, workers=_threads(args))
    size = serialize_index(index, args.out)
    print(f"built n={index.n} degree={index.degree} bytes={size} seconds={time.perf_counter() - t0:.2f}")
    return 0


def _override(queries: list[QuerySpec], args) -> list[QuerySpec]:
    out = []
    for q in queries:
        k = args.k or q.k
        beam = args.beam[0] if args.beam else q.beam_width
        out.append(replace(q, k=k, beam_width=max(beam, k)))
    return out


def cmd_query(args) -> int:
    index = deserialize_index(args.index)
    queries = _override(formats.read_queries(args.queries), args)
    report = batch_query(index, queries, workers=_threads(args), x_hops=args.x_hops)
    formats.write_results(args.out or "/dev/stdout", report.results, report.errors)
    qps = "undefined" if report.qps is None else f"{report.qps:.1f}"
    log.info("answered %d queries, qps=%s", len(queries), qps)
    return 1 if any(report.errors) else 0


def cmd_bench(args) -> int:
    index = deserialize_index(args.index)
    queries = formats.read_queries(args.queries)
    truth_map = formats.read_truth(args.truth)
    missing = [i for i in range(len(queries)) if i not in truth_map]
    if missing:
        raise HybridIndexError("missing-truth", f"no truth for query {missing[0]}")
    truth = [truth_map[i] for i in range(len(queries))]
    beams = args.beam or [16, 32, 64, 128]
    report = run_benchmark(index, queries, truth, beams, k=args.k, x_hops=args.x_hops)
    print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_csv())
    return 0


def cmd_insert(args) -> int:
    index = deserialize_index(args.index)
    docs = formats.read_corpus(args.corpus)
    t0 = time.perf_counter()
    index = insert_batch(index, docs, workers=_threads(args))
    size = serialize_index(index, args.out)
    print(f"inserted {len(docs)} n={index.n} bytes={size} seconds={time.perf_counter() - t0:.2f}")
    return 0


def cmd_delete(args) -> int:
    index = mark_delete(deserialize_index(args.index), args.ids)
    serialize_index(index, args.out)
    print(f"deleted {len(args.ids)} live={int((~index.store.deleted).sum())}")
    return 0


def cmd_validate(args) -> int:
    index = deserialize_index(args.index)
    errs = index.check_invariants()
    if errs:
        raise HybridIndexError("invariant-violation", f"{len(errs)} problems, first: {errs[0]}")
    print(f"ok n={index.n} degree={index.degree} keyword_edges={len(index.keyword_edges.idx)} logical_edges={len(index.logical)}")
    return 0


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gen = SyntheticCorpus(dense_dim=args.dim, seed=args.seed)
    k = args.k or 10
    if args.chains:
        hc = plant_hop_chains(gen, args.n, args.chains)
        docs = hc.docs
        formats.write_kg(out / "kg.jsonl", hc.kg)
        queries = [
            QuerySpec(v, Weights(1, 1, 1, 1), entities={e}, k=k, beam_width=max(64, k))
            for v, e in zip(hc.queries, hc.query_entities)
        ]
        truth = hc.answers
    else:
        docs = gen.documents(args.n)
        queries = [QuerySpec(v, k=k, beam_width=max(64, k)) for v in gen.query_vectors(args.n_queries)]
        truth = ground_truth(DocumentStore.from_records(docs), queries)
    formats.write_corpus(out / "corpus.jsonl", docs)
    formats.write_queries(out / "queries.jsonl", queries)
    formats.write_truth(out / "truth.jsonl", truth)
    print(f"wrote {len(docs)} docs and {len(queries)} queries to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridgraph", description="Hybrid dense/sparse/keyword/KG graph index.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, *flags):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--threads", type=int, default=0, help="worker threads (default: available cores)")
        for f in flags:
            f(sp)
        return sp

    corpus = lambda sp: sp.add_argument("--corpus", required=True)  # noqa: E731
    index = lambda sp: sp.add_argument("--index", required=True)  # noqa: E731
    queries = lambda sp: sp.add_argument("--queries", required=True)  # noqa: E731
    xh = lambda sp: sp.add_argument("--x-hops", type=int, default=None)  # noqa: E731
    k = lambda sp: sp.add_argument("--k", type=int, default=None)  # noqa: E731
    beam = lambda sp: sp.add_argument("--beam", type=_int_list, default=None, help="beam width(s), comma-separated")  # noqa: E731

    def out(required):
        return lambda sp: sp.add_argument("--out", required=required)

    def build_flags(sp):
        sp.add_argument("--kg")
        sp.add_argument("--degree", type=int, default=16)
        sp.add_argument("--knn-k", type=int, default=32)
        sp.add_argument("--iters", type=int, default=10)
        sp.add_argument("--seed", type=int, default=0)

    b = add("build", cmd_build, "build an index file from a corpus", corpus, out(True), build_flags)
    b.add_argument("--x-hops", type=int, default=2)
    add("query", cmd_query, "answer queries, write results JSON-lines", index, queries, out(False), beam, k, xh)
    add("bench", cmd_bench, "sweep beam widths, report QPS/recall/nDCG", index, queries, out(False), beam, k, xh,
        lambda sp: sp.add_argument("--truth", required=True))
    add("insert", cmd_insert, "insert documents into an index", index, corpus, out(True))
    add("delete", cmd_delete, "mark documents deleted", index, out(True),
        lambda sp: sp.add_argument("--ids", type=_int_list, required=True))
    add("validate", cmd_validate, "scan index invariants", index)

    def gen_flags(sp):
        sp.add_argument("--n", type=int, default=2000, help="number of documents")
        sp.add_argument("--n-queries", type=int, default=50)
        sp.add_argument("--chains", type=int, default=0, help="plant this many 2-hop KG chains")
        sp.add_argument("--dim", type=int, default=64)
        sp.add_argument("--seed", type=int, default=0)

    add("gen", cmd_gen, "write a synthetic corpus, queries and truth", out(True), k, gen_flags)
    return p


def main(argv=None) -> int:
    level = os.environ.get("HYBRID_INDEX_LOG", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except HybridIndexError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: io-error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
