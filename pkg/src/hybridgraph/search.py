"""Weighted best-first search over the hybrid index.

Semantic edges are always followed. Keyword edges are loaded only at nodes
sharing a required keyword, and logical edges only at nodes carrying a query
entity within ``x_hops``. Nodes reached through the knowledge graph have their
distance reduced by ``w_k / hop``.
"""

from __future__ import annotations

import time
from bisect import insort
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import backend
from .distance import kernel_query
from .index import HybridIndex
from .model import QuerySpec, build_query_vector

N_ENTRY = 32


@dataclass
class SearchResult:
    ids: list[int]  # document ids
    nodes: list[int]
    scores: list[float]  # hybrid score plus hop reward
    warnings: list[str] = field(default_factory=list)
    shortfall: bool = False
    n_scored: int = 0
    hops: dict[int, int] = field(default_factory=dict)  # node -> hop, KG-reached nodes only
    expanded: list[int] = field(default_factory=list)

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.ids, self.scores))


@dataclass
class Seeds:
    nodes: list[int]
    ent: dict[int, int]
    warnings: list[str]

    @property
    def entity_mode(self) -> bool:
        return bool(self.ent)


def select_entry_points(q: QuerySpec, index: HybridIndex, n_entry: int = N_ENTRY) -> Seeds:
    """Entity-bearing nodes when the query names entities and weights hops; else the smallest-norm nodes."""
    warnings = []
    if q.entities and q.weights.hop > 0:
        ent: dict[int, int] = {}
        for e in sorted(q.entities):
            for u in index.entity_map.get(e).tolist():
                ent.setdefault(u, e)
        if ent:
            return Seeds(sorted(ent), ent, warnings)
        warnings.append("entity-not-found")
    return Seeds(index.entry_order[:n_entry].tolist(), {}, warnings)


class _Traversal:
    def __init__(self, index: HybridIndex, q: QuerySpec, x_hops: int):
        self.index = index
        self.store = index.store
        self.q = q
        self.kw = q.required_keywords
        self.wk = q.weights.hop
        self.x_hops = x_hops
        self.qv = build_query_vector(q.vector, q.weights)
        self.kq = kernel_query(self.qv)
        self.mod = backend.active()
        self.ks = self.store.kernel_store()
        self.kwsets = self.store.keyword_sets
        self.deleted = self.store.deleted
        self.raw: dict[int, float] = {}
        self.dis: dict[int, float] = {}
        self.hop: dict[int, int] = {}
        self.ent: dict[int, int] = {}
        self.expanded: list[int] = []
        self._expanded: set[int] = set()
        self.pool: list[tuple[float, int]] = []
        self.top: list[tuple[float, int]] = []
        self.kw_cand: dict[int, float] = {}

    def shares_keyword(self, u: int) -> bool:
        return bool(self.kw) and not self.kwsets[u].isdisjoint(self.kw)

    def score(self, nodes: list[int]) -> None:
        fresh = [o for o in nodes if o not in self.raw]
        if fresh:
            vals = self.mod.score_many(self.ks, self.kq, np.asarray(fresh, dtype=np.int64))
            self.raw.update(zip(fresh, vals.tolist()))

    def adjusted(self, o: int) -> float:
        h = self.hop.get(o, 0)
        d = -self.raw[o]
        return d - self.wk / h if h >= 1 else d

    def offer(self, o: int) -> None:
        item = (self.dis[o], o)
        if len(self.pool) < self.q.beam_width or item < self.pool[-1]:
            insort(self.pool, item)
            if len(self.pool) > self.q.beam_width:
                self.pool.pop()
        if self.deleted[o]:
            return
        if len(self.top) < self.q.k or item < self.top[-1]:
            insort(self.top, item)
            if len(self.top) > self.q.k:
                _, m = self.top.pop()
                if self.shares_keyword(m):
                    self.kw_cand[m] = self.dis[m]

    def withdraw(self, o: int) -> None:
        item = (self.dis[o], o)
        for lst in (self.pool, self.top):
            if item in lst:
                lst.remove(item)

    def related_entity(self, u: int, o: int, via_logical: dict[int, int]) -> int | None:
        src = self.ent[u]
        cands = self.store.entity_sets[o] & self.index.kg.neighbors(src) if self.index.kg is not None else set()
        if o in via_logical:
            cands = set(cands) | {via_logical[o]}
        return min(cands) if cands else None

    def next_unexpanded(self) -> int | None:
        for _, o in self.pool:
            if o not in self._expanded:
                return o
        return None

    def run(self, seeds: Seeds) -> None:
        self.ent.update(seeds.ent)
        for u in seeds.ent:
            self.hop[u] = 0
        self.score(seeds.nodes)
        for u in seeds.nodes:
            self.dis[u] = self.adjusted(u)
            self.offer(u)
        while (u := self.next_unexpanded()) is not None:
            self._expanded.add(u)
            self.expanded.append(u)
            self.expand(u)

    def expand(self, u: int) -> None:
        idx = self.index
        nbrs = idx.semantic[u].tolist()
        if self.shares_keyword(u):
            nbrs += idx.keyword_neighbors(u).tolist()
        via_logical: dict[int, int] = {}
        kg_active = u in self.ent and self.hop[u] < self.x_hops
        if kg_active:
            for _, _, t, w in idx.logical.from_source(u, self.ent[u]).tolist():
                nbrs.append(w)
                via_logical[w] = min(t, via_logical.get(w, t))
        nbrs = list(dict.fromkeys(o for o in nbrs if o != u))
        fresh = {o for o in nbrs if o not in self.raw}
        self.score(nbrs)
        for o in nbrs:
            e = self.related_entity(u, o, via_logical) if kg_active else None
            if o in fresh:
                if e is not None:
                    self.ent[o] = e
                    self.hop[o] = self.hop[u] + 1
                self.dis[o] = self.adjusted(o)
                self.offer(o)
            elif e is not None and self.hop.get(o, self.x_hops + 1) > self.hop[u] + 1:
                # shorter KG route to an already scored node: minimum hop wins
                self.withdraw(o)
                in_kw = o in self.kw_cand
                self.ent[o] = e
                self.hop[o] = self.hop[u] + 1
                self.dis[o] = self.adjusted(o)
                self.offer(o)
                if in_kw:
                    self.kw_cand[o] = self.dis[o]


def keyword_postfilter(
    top: Sequence[tuple[float, int]],
    kw_cand: dict[int, float],
    required: frozenset,
    k: int,
    keyword_sets: Sequence[frozenset],
    deleted,
    match: str = "all",
) -> tuple[list[tuple[float, int]], bool]:
    """Merge the twin pools, keep nodes satisfying the keyword predicate, best ``k`` first.

    Returns ``(items, shortfall)``; ``items`` are ``(distance, node)`` pairs.
    """
    if not required:
        items = [(d, o) for d, o in top if not deleted[o]]
        return items[:k], len(items) < k
    merged = dict(kw_cand)
    merged.update((o, d) for d, o in top)
    if match == "all":
        ok = lambda o: required <= keyword_sets[o]  # noqa: E731
    elif match == "any":
        ok = lambda o: not required.isdisjoint(keyword_sets[o])  # noqa: E731
    else:
        raise ValueError(f"unknown keyword match {match!r}")
    items = sorted((d, o) for o, d in merged.items() if not deleted[o] and ok(o))
    return items[:k], len(items) < k


def _finish(index: HybridIndex, items, shortfall, warnings, n_scored, hops=None, expanded=None) -> SearchResult:
    nodes = [o for _, o in items]
    return SearchResult(
        ids=[int(index.store.doc_ids[o]) for o in nodes],
        nodes=nodes,
        scores=[-d for d, _ in items],
        warnings=list(warnings),
        shortfall=shortfall,
        n_scored=n_scored,
        hops=hops or {},
        expanded=expanded or [],
    )


def greedy_hybrid_search(
    index: HybridIndex,
    q: QuerySpec,
    x_hops: int | None = None,
    keyword_match: str = "all",
    n_entry: int = N_ENTRY,
    engine: str = "auto",
) -> SearchResult:
    """Answer one query. ``engine='generic'`` disables the compiled fast path."""
    x_hops = index.params.x_hops if x_hops is None else x_hops
    seeds = select_entry_points(q, index, n_entry)
    if engine == "auto" and not q.required_keywords and not seeds.entity_mode:
        mod = backend.active()
        qv = build_query_vector(q.vector, q.weights)
        ids, dis, scored = mod.beam_search(
            index.store.kernel_store(),
            kernel_query(qv),
            index.semantic,
            np.asarray(seeds.nodes, dtype=np.int64),
            index.store.deleted.view(np.uint8),
            q.beam_width,
            q.k,
        )
        items = list(zip(dis.tolist(), ids.tolist()))
        return _finish(index, items, len(items) < q.k, seeds.warnings, scored)
    t = _Traversal(index, q, x_hops)
    t.run(seeds)
    items, short = keyword_postfilter(
        t.top, t.kw_cand, q.required_keywords, q.k, t.kwsets, t.deleted, keyword_match
    )
    warnings = seeds.warnings + (["keyword-shortfall"] if short and q.required_keywords else [])
    hops = {o: h for o, h in t.hop.items() if h >= 1}
    return _finish(index, items, short, warnings, len(t.raw), hops, t.expanded)


@dataclass
class BatchReport:
    results: list[SearchResult | None]
    errors: list[str | None]
    wall_seconds: float
    qps: float | None  # None for an empty batch


def batch_query(index: HybridIndex, queries: Sequence[QuerySpec], workers: int = 1, **opts) -> BatchReport:
    """Run ``queries`` (in parallel when ``workers > 1``); one failure does not abort the batch."""

    def one(q):
        try:
            return greedy_hybrid_search(index, q, **opts), None
        except Exception as exc:  # noqa: BLE001
            return None, f"{type(exc).__name__}: {exc}"

    t0 = time.perf_counter()
    if workers > 1 and len(queries) > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, queries))
    else:
        out = [one(q) for q in queries]
    wall = time.perf_counter() - t0
    qps = len(queries) / wall if queries and wall > 0 else None
    return BatchReport([r for r, _ in out], [e for _, e in out], wall, qps)
