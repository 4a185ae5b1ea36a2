"""Exhaustive oracles, ranking metrics and the beam-width sweep."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, replace
from typing import Collection, Mapping, Sequence

import numpy as np

from . import backend
from .distance import kernel_query
from .errors import ValidationError
from .index import HybridIndex
from .model import QuerySpec, build_query_vector
from .search import greedy_hybrid_search
from .store import DocumentStore

CSV_HEADER = ("beam", "qps", "recall", "ndcg", "latency_ms")


@dataclass
class Ranking:
    nodes: list[int]
    ids: list[int]
    scores: list[float]


def brute_force_topk(q: QuerySpec, store: DocumentStore, k: int | None = None) -> Ranking:
    """Exact weighted top-k over live documents, ties by ascending node id.

    When the query requires keywords, documents lacking any of them are
    dropped before ranking.
    """
    k = q.k if k is None else k
    live = ~store.deleted
    if q.required_keywords:
        kw = store.keyword_sets
        live &= np.fromiter((q.required_keywords <= s for s in kw), dtype=bool, count=len(store))
    cand = np.flatnonzero(live)
    if cand.size == 0:
        return Ranking([], [], [])
    qv = build_query_vector(q.vector, q.weights)
    scores = backend.active().score_many(store.kernel_store(), kernel_query(qv), cand)
    top = np.lexsort((cand, -scores))[:k]
    nodes = cand[top]
    return Ranking(nodes.tolist(), store.doc_ids[nodes].tolist(), scores[top].tolist())


def recall_at_k(result: Sequence[int], truth: Collection[int], k: int) -> float:
    """Share of the truth found in the first ``k`` results.

    The denominator is ``min(k, |truth|)`` so that queries with fewer than
    ``k`` relevant documents can still reach 1.0.
    """
    if k < 1:
        raise ValidationError("invalid-k", "recall@k needs k >= 1")
    truth = set(truth)
    if not truth:
        raise ValidationError("empty-truth", "recall needs at least one relevant document")
    hits = len(set(list(result)[:k]) & truth)
    return hits / min(k, len(truth))


def _gains(relevance: Mapping[int, float] | Collection[int]) -> dict[int, float]:
    if isinstance(relevance, Mapping):
        return {int(d): float(g) for d, g in relevance.items()}
    return {int(d): 1.0 for d in relevance}


def dcg(gains: Sequence[float]) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg_at_k(result: Sequence[int], relevance: Mapping[int, float] | Collection[int], k: int) -> float:
    """nDCG@k; ``relevance`` is a doc->gain map or a collection of relevant ids (gain 1)."""
    if k < 1:
        raise ValidationError("invalid-k", "nDCG@k needs k >= 1")
    gains = _gains(relevance)
    got = dcg([gains.get(d, 0.0) for d in list(result)[:k]])
    ideal = dcg(sorted(gains.values(), reverse=True)[:k])
    return got / ideal if ideal > 0 else 0.0


def ground_truth(store: DocumentStore, queries: Sequence[QuerySpec]) -> list[list[int]]:
    """Exact top-``q.k`` doc ids per query."""
    return [brute_force_topk(q, store).ids for q in queries]


@dataclass
class BenchmarkRow:
    beam: int
    qps: float
    recall: float
    ndcg: float
    latency_ms: float


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.beam, f"{r.qps:.2f}", f"{r.recall:.4f}", f"{r.ndcg:.4f}", f"{r.latency_ms:.3f}"])
        return buf.getvalue()

    def table(self) -> str:
        head = f"{'beam':>6} {'qps':>10} {'recall':>8} {'ndcg':>8} {'latency_ms':>11}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.beam:>6} {r.qps:>10.1f} {r.recall:>8.4f} {r.ndcg:>8.4f} {r.latency_ms:>11.3f}")
        return "\n".join(lines)


def run_benchmark(
    index: HybridIndex,
    queries: Sequence[QuerySpec],
    truth: Sequence[Mapping[int, float] | Collection[int]] | None,
    beams: Sequence[int],
    k: int | None = None,
    **search_opts,
) -> BenchmarkReport:
    """One row per beam width: QPS, mean recall@k, mean nDCG@k and mean latency."""
    if truth is None:
        raise ValidationError("missing-truth", "benchmark needs a truth set")
    if len(truth) != len(queries):
        raise ValidationError("missing-truth", f"{len(queries)} queries but {len(truth)} truth rows")
    rows = []
    for beam in beams:
        rec, nd, lat = [], [], []
        t0 = time.perf_counter()
        for q, rel in zip(queries, truth):
            qk = q.k if k is None else k
            qb = replace(q, beam_width=max(int(beam), qk), k=qk)
            s = time.perf_counter()
            res = greedy_hybrid_search(index, qb, **search_opts)
            lat.append(time.perf_counter() - s)
            rec.append(recall_at_k(res.ids, _gains(rel), qk))
            nd.append(ndcg_at_k(res.ids, rel, qk))
        wall = time.perf_counter() - t0
        n = len(queries)
        rows.append(
            BenchmarkRow(
                beam=int(beam),
                qps=n / wall if n and wall > 0 else 0.0,
                recall=float(np.mean(rec)) if rec else 0.0,
                ndcg=float(np.mean(nd)) if nd else 0.0,
                latency_ms=1e3 * float(np.mean(lat)) if lat else 0.0,
            )
        )
    return BenchmarkReport(rows)
