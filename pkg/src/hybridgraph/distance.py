"""Composite inner-product similarity between fused vectors.

Larger scores are more similar; wherever a distance is needed it is the
negated score.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import backend
from .errors import ValidationError
from .model import FusedVector, SparseVector

_F64 = np.float64


def _seqsum(parts) -> float:
    acc = np.concatenate([np.zeros(1, _F64)] + [np.asarray(p, dtype=_F64) for p in parts])
    return float(np.cumsum(acc)[-1])


def dense_dot(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError("dimension-mismatch", f"{a.shape} vs {b.shape}")
    return backend.active().dense_dot(a, b)


def intersect_terms(a: SparseVector, b: SparseVector) -> np.ndarray:
    return np.intersect1d(a.indices, b.indices, assume_unique=True)


def _matched_products(a: SparseVector, b: SparseVector) -> np.ndarray:
    _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    return a.values[ia].astype(_F64) * b.values[ib].astype(_F64)


def sparse_dot(a: SparseVector, b: SparseVector) -> float:
    return _seqsum([_matched_products(a, b)])


def hybrid_score(q: FusedVector, d: FusedVector, return_terms: bool = False):
    """Score of a (weighted) query vector against a document vector.

    Sums dense, learned and statistical inner products in that order. With
    ``return_terms`` also returns the shared statistical terms.
    """
    if q.dim != d.dim:
        raise ValidationError("dimension-mismatch", f"{q.dim} vs {d.dim}")
    score = _seqsum(
        [
            q.dense.astype(_F64) * d.dense.astype(_F64),
            _matched_products(q.learned, d.learned),
            _matched_products(q.statistical, d.statistical),
        ]
    )
    if return_terms:
        return score, intersect_terms(q.statistical, d.statistical)
    return score


def kernel_query(v: FusedVector):
    return backend.active().make_query(
        v.dense, v.learned.indices, v.learned.values, v.statistical.indices, v.statistical.values
    )


def batch_scores(q: FusedVector, ids: Sequence[int], store, workers: int = 1) -> np.ndarray:
    """Scores of ``q`` against nodes ``ids`` of ``store``; output order follows ``ids``."""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if q.dim != store.dim:
        raise ValidationError("dimension-mismatch", f"{q.dim} vs {store.dim}")
    if ids.size and (ids.min() < 0 or ids.max() >= len(store)):
        raise ValidationError("unknown-id", "node id out of range")
    mod = backend.active()
    ks = store.kernel_store()
    kq = kernel_query(q)
    if workers <= 1 or ids.size < 2 * workers:
        return mod.score_many(ks, kq, ids)
    chunks = np.array_split(ids, workers)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(lambda c: mod.score_many(ks, kq, c), chunks))
    return np.concatenate(parts)
