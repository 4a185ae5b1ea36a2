"""Online updates: batch insertion and mark-deletion on immutable snapshots.

Insertion never touches the forward halves of existing nodes. A new node's
candidate list merges a graph search over the existing nodes with a k-NN
list among the batch, then goes through the same pruning as a full build.
Existing nodes only gain reverse edges toward new nodes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Iterable, Sequence

import numpy as np

from . import backend
from .errors import ValidationError
from .index import HybridIndex
from .knn import build_knn_graph, default_workers
from .logical import LogicalEdges, build_entity_map, derive_logical_edges
from .model import DocumentRecord
from .refine import assemble_node, entry_order, keyword_edge_lists, refine_node, reverse_lists
from .search import N_ENTRY
from .store import CSR, DocumentStore

log = logging.getLogger(__name__)

EXHAUSTIVE_BATCH = 2048  # batches up to this size get an exact k-NN list


def _search_candidates(index: HybridIndex, store: DocumentStore, new: range, k: int) -> dict[int, dict[int, float]]:
    """Phase (a): beam-2k search of each new node over the existing graph."""
    mod = backend.active()
    ks = store.kernel_store()
    entries = index.entry_order[:N_ENTRY]
    routable = np.zeros(len(store), dtype=np.uint8)  # deleted nodes remain valid neighbours
    out = {}
    for u in new:
        ids, dis, _ = mod.beam_search(ks, mod.node_query(ks, u), index.semantic, entries, routable, 2 * k, k)
        out[u] = dict(zip(ids.tolist(), (-dis).tolist()))
    return out


def _batch_candidates(store: DocumentStore, new: range, k: int, params, workers: int) -> dict[int, dict[int, float]]:
    """Phase (b): k-NN among the new nodes only."""
    m = len(new)
    out: dict[int, dict[int, float]] = {u: {} for u in new}
    if m < 2:
        return out
    if m <= EXHAUSTIVE_BATCH or m <= k:
        mod = backend.active()
        ids = np.arange(new.start, new.stop, dtype=np.int64)
        pair = mod.pairwise(store.kernel_store(), ids)
        for i, u in enumerate(new):
            row = pair[i]
            order = np.lexsort((ids, -row))
            out[u] = {int(ids[j]): float(row[j]) for j in order if j != i}
        return out
    sub = DocumentStore.from_records([store.record(u) for u in new])
    g = build_knn_graph(sub, k, params.iters, params.seed, workers)
    for i, u in enumerate(new):
        out[u] = {new.start + int(j): float(s) for j, s in zip(g.ids[i], g.scores[i])}
    return out


def _merge_top(a: dict[int, float], b: dict[int, float], k: int) -> tuple[np.ndarray, np.ndarray]:
    merged = {**a, **b}
    ranked = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return (
        np.array([v for v, _ in ranked], dtype=np.int64),
        np.array([s for _, s in ranked], dtype=np.float64),
    )


def _accept_reverse(semantic, fwd, rc, store, v: int, u: int, degree: int) -> None:
    """Give existing node ``v`` a reverse edge to ``u``: fill a padding slot or replace the weakest reverse slot."""
    row = semantic[v]
    if u in row:
        return
    half = degree // 2
    f, r = int(fwd[v]), int(rc[v])
    if r < half and f + r < degree:
        row[f + r] = u
        rc[v] = r + 1
        return
    if r == 0:
        return
    mod = backend.active()
    ks = store.kernel_store()
    slots = np.arange(f, f + r)
    cand = np.append(row[slots], u).astype(np.int64)
    sims = mod.score_many(ks, mod.node_query(ks, v), cand)
    # weakest reverse slot: lowest similarity, then highest id
    weakest = int(np.lexsort((-cand[:-1], sims[:-1]))[0])
    w, sw, su = int(cand[weakest]), sims[weakest], sims[-1]
    if su > sw or (su == sw and u < w):
        row[slots[weakest]] = u


def _affected_logical(index: HybridIndex, store: DocumentStore, emap, new: range) -> set[int]:
    """Nodes whose logical edges can change: the new ones and holders of KG neighbours of new entities."""
    kg = index.kg
    touched = set(new)
    ents = store.entity_sets
    for u in new:
        for t in ents[u]:
            for s in kg.neighbors(t):
                touched.update(emap.get(s).tolist())
    return touched


def insert_batch(
    index: HybridIndex,
    new_docs: Sequence[DocumentRecord],
    workers: int | None = None,
) -> HybridIndex:
    """New snapshot with ``new_docs`` added; the input index is left untouched."""
    if not new_docs:
        return index
    workers = default_workers() if workers is None else workers
    params = index.params
    store = index.store.extend(new_docs)
    n0, n = index.n, len(store)
    new = range(n0, n)
    k, d = params.k, params.degree

    a = _search_candidates(index, store, new, k)
    b = _batch_candidates(store, new, k, params, workers)
    merged = {u: _merge_top(a[u], b[u], k) for u in new}
    fn = lambda u: refine_node(u, *merged[u], store, d, params.keyword_rule)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            refs = list(ex.map(fn, new))
    else:
        refs = [fn(u) for u in new]

    semantic = np.vstack([index.semantic, np.empty((len(new), d), dtype=np.int32)])
    fwd = np.concatenate([index.forward_count, np.empty(len(new), dtype=np.int32)])
    rc = np.concatenate([index.reverse_count, np.empty(len(new), dtype=np.int32)])

    # reverse lists among the batch (existing forward halves never point at new nodes)
    rev = reverse_lists([[v - n0 for v in r.retained if v >= n0] for r in refs], len(new))
    for i, r in enumerate(refs):
        padding = r.retained[d // 2 :] + [v for v in r.order if v not in set(r.retained)]
        edges, fwd[r.node], rc[r.node] = assemble_node(r.retained, [n0 + w for w in rev[i]], padding, d)
        semantic[r.node] = edges

    for r in refs:
        for v in r.retained:
            if v < n0:
                _accept_reverse(semantic, fwd, rc, store, v, r.node, d)

    # new nodes only displace padding or reverse slots, so old keyword rows stay disjoint
    kw_rows = [index.keyword_edges.row(u).tolist() for u in range(n0)] + keyword_edge_lists(refs, semantic)

    emap = build_entity_map(store)
    if index.kg is None or len(index.kg) == 0:
        logical = LogicalEdges.empty(n)
    else:
        old = index.logical.as_lists() + [[] for _ in new]
        sets = store.entity_sets
        for u in sorted(_affected_logical(index, store, emap, new)):
            old[u] = derive_logical_edges(u, sets[u], index.kg, emap, params.fanout_cap)
        logical = LogicalEdges.from_lists(old)

    log.info("inserted %d docs into index of %d", len(new), n0)
    return replace(
        index,
        store=store,
        semantic=semantic,
        forward_count=fwd,
        reverse_count=rc,
        keyword_edges=CSR.from_rows(kw_rows, False),
        logical=logical,
        entity_map=emap,
        entry_order=entry_order(store),
        trace=None,
    )


def mark_delete(index: HybridIndex, doc_ids: Iterable[int]) -> HybridIndex:
    """New snapshot whose listed documents are routable but never returned."""
    doc_ids = list(doc_ids)
    if not doc_ids:
        return index
    node_of = index.store.node_of
    missing = [i for i in doc_ids if i not in node_of]
    if missing:
        raise ValidationError("unknown-id", f"unknown doc ids {missing[:5]}")
    deleted = index.store.deleted.copy()
    deleted[[node_of[i] for i in doc_ids]] = True
    return replace(index, store=index.store.with_deleted(deleted))
