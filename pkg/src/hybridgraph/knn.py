"""Approximate k-NN graph over fused vectors via NN-Descent."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import BuildError

log = logging.getLogger(__name__)

DEFAULT_K = 32
DEFAULT_ITERS = 10
EARLY_STOP = 0.01


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass
class KnnGraph:
    """Per-node neighbour lists sorted by descending score, ties by ascending id.

    ``new`` marks entries inserted by the most recent pass; only pairs touching
    a new entry are compared in the next one.
    """

    ids: np.ndarray
    scores: np.ndarray
    new: np.ndarray

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def mean_score(self) -> float:
        return float(self.scores.mean())


def _sort_rows(ids: np.ndarray, scores: np.ndarray) -> None:
    for u in range(ids.shape[0]):
        order = np.lexsort((ids[u], -scores[u]))
        ids[u] = ids[u][order]
        scores[u] = scores[u][order]


def _run_chunks(n: int, workers: int, fn) -> list:
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(lambda ab: fn(*ab), spans))


def init_random_graph(store, k: int, seed: int = 0) -> KnnGraph:
    """Every node gets ``k`` distinct random neighbours other than itself, scored."""
    n = len(store)
    if k < 1 or n <= k:
        raise BuildError("corpus-too-small", f"need more than k={k} nodes, have {n}")
    rng = np.random.default_rng(seed)
    ids = np.empty((n, k), dtype=np.int64)
    for u in range(n):
        c = rng.choice(n - 1, size=k, replace=False)
        c[c >= u] += 1
        ids[u] = c
    mod = backend.active()
    ks = store.kernel_store()
    scores = np.empty((n, k), dtype=np.float64)
    for u in range(n):
        scores[u] = mod.score_many(ks, mod.node_query(ks, u), ids[u])
    _sort_rows(ids, scores)
    return KnnGraph(ids, scores, np.ones((n, k), dtype=np.uint8))


def nn_descent_iterate(g: KnnGraph, store, workers: int = 1) -> tuple[KnnGraph, int]:
    """One synchronous NN-Descent pass; returns the new graph and the number of list entries that changed."""
    mod = backend.active()
    ks = store.kernel_store()
    ids = np.empty_like(g.ids)
    scores = np.empty_like(g.scores)
    new = np.empty_like(g.new)
    counts = _run_chunks(
        g.n, workers, lambda a, b: mod.nn_descent_pass(ks, g.ids, g.scores, g.new, a, b, ids, scores, new)
    )
    return KnnGraph(ids, scores, new), int(sum(counts))


def build_knn_graph(
    store,
    k: int = DEFAULT_K,
    iters: int = DEFAULT_ITERS,
    seed: int = 0,
    workers: int | None = None,
    early_stop: float = EARLY_STOP,
) -> KnnGraph:
    workers = default_workers() if workers is None else workers
    g = init_random_graph(store, k, seed)
    for it in range(iters):
        g, changed = nn_descent_iterate(g, store, workers)
        rate = changed / (g.n * g.k)
        log.debug("nn-descent iter %d: %d updates (%.4f)", it, changed, rate)
        if rate < early_stop:
            break
    return g
