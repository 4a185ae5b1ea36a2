"""Turning the k-NN graph into the hybrid index.

Per node: count detourable routes, order neighbours by that count, run the
inner-product filter up to ``degree`` retained edges, and flag pruned
neighbours whose shared keywords no retained neighbour covers (those become
keyword edges). Forward and reverse halves are then merged into fixed-degree
semantic edge lists.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import backend
from .errors import BuildError
from .index import BuildParams, HybridIndex
from .knn import KnnGraph, build_knn_graph, default_workers
from .logical import build_entity_map, build_logical_edges
from .model import DocumentRecord, KnowledgeGraph
from .store import CSR, DocumentStore

log = logging.getLogger(__name__)

KEYWORD_RULES = ("union", "subset")


@dataclass
class NodeRefinement:
    """Outcome of pruning one node's k-NN list (node ids, not list positions)."""

    node: int
    counts: np.ndarray  # detour counts aligned with the k-NN list
    order: list[int]  # neighbours in pruning order
    retained: list[int]
    pruned: list[int]
    flags: list[bool]  # keyword flag per pruned neighbour


@dataclass
class BuildTrace:
    knn: KnnGraph
    refinements: list[NodeRefinement]


def count_detourable_routes(dis_to_node: np.ndarray, dis_pair: np.ndarray) -> np.ndarray:
    """Detour count per neighbour Y: number of X with ``max(dis(A,X), dis(X,Y)) < dis(A,Y)``."""
    dis_to_node = np.asarray(dis_to_node, dtype=np.float64)
    cond = np.maximum(dis_to_node[:, None], dis_pair) < dis_to_node[None, :]
    np.fill_diagonal(cond, False)
    return cond.sum(axis=0)


def rng_order(ids: np.ndarray, scores: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Positions sorted by detour count, then descending score, then ascending id."""
    return np.lexsort((np.asarray(ids), -np.asarray(scores), np.asarray(counts)))


def set_keyword_flag(k_node: frozenset, k_cand: frozenset, retained: Sequence[frozenset], rule: str = "union") -> bool:
    """True when the candidate carries a shared keyword the retained set fails to cover.

    ``union``: some term of ``K(u) & K(v)`` appears in no retained keyword set.
    ``subset``: no single retained neighbour covers all of ``K(u) & K(v)``.
    """
    need = k_node & k_cand
    if not need:
        return False
    if rule == "union":
        covered = frozenset().union(*retained) if retained else frozenset()
        return not need <= covered
    if rule == "subset":
        return not any(need <= r for r in retained)
    raise ValueError(f"unknown keyword rule {rule!r}")


def ip_filter_pass(
    ordered: Sequence[int],
    pair_ip: np.ndarray,
    self_ip: np.ndarray,
    degree: int,
    keyword_sets: Sequence[frozenset] | None = None,
    node_keywords: frozenset = frozenset(),
    rule: str = "union",
) -> tuple[list[int], list[int], list[bool]]:
    """Scan positions in pruning order and keep up to ``degree`` of them.

    The first is always kept. A later candidate ``v`` is kept iff there is room
    and ``pair_ip[w, v] < self_ip[v]`` for every kept ``w``. Returns kept
    positions, rejected positions and each rejected one's keyword flag.
    """
    ordered = list(ordered)
    kept = [ordered[0]]
    pruned, flags = [], []
    covered = set(keyword_sets[ordered[0]]) if keyword_sets is not None else set()
    for v in ordered[1:]:
        if keyword_sets is None:
            flag = False
        elif rule == "union":
            need = node_keywords & keyword_sets[v]
            flag = bool(need) and not need <= covered
        else:
            flag = set_keyword_flag(node_keywords, keyword_sets[v], [keyword_sets[w] for w in kept], rule)
        if len(kept) < degree and bool(np.all(pair_ip[kept, v] < self_ip[v])):
            kept.append(v)
            if keyword_sets is not None:
                covered |= keyword_sets[v]
        else:
            pruned.append(v)
            flags.append(flag)
    return kept, pruned, flags


def refine_node(u: int, ids: np.ndarray, scores: np.ndarray, store: DocumentStore, degree: int, rule: str = "union"):
    mod = backend.active()
    pair = mod.pairwise(store.kernel_store(), ids)
    counts = count_detourable_routes(-scores, -pair)
    order = rng_order(ids, scores, counts)
    kw = store.keyword_sets
    local_kw = [kw[int(v)] for v in ids]
    kept, pruned, flags = ip_filter_pass(order, pair, store.norms[ids], degree, local_kw, kw[u], rule)
    return NodeRefinement(
        node=u,
        counts=counts,
        order=[int(ids[p]) for p in order],
        retained=[int(ids[p]) for p in kept],
        pruned=[int(ids[p]) for p in pruned],
        flags=flags,
    )


def refine_all(g: KnnGraph, store: DocumentStore, degree: int, rule: str = "union", workers: int = 1, nodes=None):
    nodes = range(g.n) if nodes is None else nodes
    fn = lambda u: refine_node(u, g.ids[u], g.scores[u], store, degree, rule)  # noqa: E731
    if workers <= 1:
        return [fn(u) for u in nodes]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, nodes, chunksize=64))


def assemble_node(
    forward: Sequence[int], reverse: Sequence[int], padding: Sequence[int], degree: int
) -> tuple[list[int], int, int]:
    """``degree`` distinct ids: half forward, up to half reverse, then padding.

    Returns ``(edges, forward_count, reverse_count)``.
    """
    half = degree // 2
    edges = list(forward[:half])
    seen = set(edges)
    n_rev = 0
    for w in reverse:
        if n_rev == half:
            break
        if w not in seen:
            edges.append(w)
            seen.add(w)
            n_rev += 1
    for w in padding:
        if len(edges) == degree:
            break
        if w not in seen:
            edges.append(w)
            seen.add(w)
    if len(edges) < degree:
        raise BuildError("corpus-too-small", f"only {len(edges)} candidate edges for degree {degree}")
    return edges, min(len(forward), half), n_rev


def reverse_lists(retained: Sequence[Sequence[int]], n: int) -> list[list[int]]:
    """For each node, the nodes listing it, earliest list position first, ties by id."""
    rev: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for w, lst in enumerate(retained):
        for pos, u in enumerate(lst):
            rev[u].append((pos, w))
    return [[w for _, w in sorted(r)] for r in rev]


def merge_reverse_edges(refinements: Sequence[NodeRefinement], degree: int):
    """Fixed-degree semantic edges from forward lists plus reverse neighbours."""
    n = len(refinements)
    if n < degree + 1:
        raise BuildError("corpus-too-small", f"{n} nodes cannot carry degree {degree}")
    rev = reverse_lists([r.retained for r in refinements], n)
    semantic = np.empty((n, degree), dtype=np.int32)
    fwd = np.empty(n, dtype=np.int32)
    rc = np.empty(n, dtype=np.int32)
    for u, r in enumerate(refinements):
        padding = r.retained[degree // 2 :] + [v for v in r.order if v not in set(r.retained)]
        edges, fwd[u], rc[u] = assemble_node(r.retained, rev[u], padding, degree)
        semantic[u] = edges
    return semantic, fwd, rc


def keyword_edge_lists(refinements: Sequence[NodeRefinement], semantic: np.ndarray) -> list[list[int]]:
    out = []
    for r in refinements:
        sem = set(semantic[r.node].tolist())
        out.append([v for v, f in zip(r.pruned, r.flags) if f and v not in sem])
    return out


def entry_order(store: DocumentStore) -> np.ndarray:
    """Node ids by ascending squared norm, ties by id."""
    return np.lexsort((np.arange(len(store)), store.norms)).astype(np.int64)


def check_params(n: int, params: BuildParams) -> None:
    if params.degree < 2 or params.degree % 2:
        raise BuildError("degree-not-even", f"degree {params.degree} must be even and >= 2")
    if params.k < params.degree:
        raise BuildError("knn-k-below-degree", f"k={params.k} < degree={params.degree}")
    if params.keyword_rule not in KEYWORD_RULES:
        raise BuildError("unknown-keyword-rule", params.keyword_rule)
    if n < params.degree + 1 or n <= params.k:
        raise BuildError("corpus-too-small", f"{n} nodes for k={params.k}, degree={params.degree}")


def build_hybrid_index(
    corpus: DocumentStore | Sequence[DocumentRecord],
    kg: KnowledgeGraph | None = None,
    params: BuildParams | None = None,
    workers: int | None = None,
    keep_trace: bool = False,
    **overrides,
) -> HybridIndex:
    """Full construction: NN-Descent, pruning with keyword recycling, reverse merge, logical edges."""
    params = params or BuildParams()
    if overrides:
        params = BuildParams(**{**params.__dict__, **overrides})
    store = corpus if isinstance(corpus, DocumentStore) else DocumentStore.from_records(corpus)
    check_params(len(store), params)
    workers = default_workers() if workers is None else workers

    g = build_knn_graph(store, params.k, params.iters, params.seed, workers)
    refinements = refine_all(g, store, params.degree, params.keyword_rule, workers)
    semantic, fwd, rc = merge_reverse_edges(refinements, params.degree)
    kw_edges = CSR.from_rows(keyword_edge_lists(refinements, semantic), False)
    emap = build_entity_map(store)
    logical = build_logical_edges(store, kg, emap, params.fanout_cap)
    log.info("built index: n=%d d=%d keyword edges=%d logical edges=%d", len(store), params.degree, len(kw_edges.idx), len(logical))
    return HybridIndex(
        store=store,
        params=params,
        semantic=semantic,
        forward_count=fwd,
        reverse_count=rc,
        keyword_edges=kw_edges,
        logical=logical,
        entity_map=emap,
        entry_order=entry_order(store),
        kg=kg,
        trace=BuildTrace(g, refinements) if keep_trace else None,
    )
