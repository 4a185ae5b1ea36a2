"""Pure NumPy fallback for the compiled kernels.

Same API and the same results, bit for bit: products are formed in float64
and summed left-to-right with ``np.cumsum`` (a strictly sequential
accumulate) in the order dense, learned, statistical.
"""

from __future__ import annotations

from bisect import insort

import numpy as np

NAME = "python"

_F64 = np.float64


class Store:
    def __init__(self, dense, lptr, lidx, lval, sptr, sidx, sval):
        self.dense = np.ascontiguousarray(dense, dtype=np.float32)
        self.lptr = np.asarray(lptr, dtype=np.int64)
        self.lidx = np.asarray(lidx, dtype=np.uint32)
        self.lval = np.asarray(lval, dtype=np.float32)
        self.sptr = np.asarray(sptr, dtype=np.int64)
        self.sidx = np.asarray(sidx, dtype=np.uint32)
        self.sval = np.asarray(sval, dtype=np.float32)
        self.n, self.m = self.dense.shape


class Query:
    def __init__(self, dense, lidx, lval, sidx, sval):
        self.dense = np.ascontiguousarray(dense, dtype=_F64)
        self.lidx = np.asarray(lidx, dtype=np.uint32)
        self.lval = np.asarray(lval, dtype=_F64)
        self.sidx = np.asarray(sidx, dtype=np.uint32)
        self.sval = np.asarray(sval, dtype=_F64)
        self.dim = self.dense.shape[0]


def make_query(dense, lidx, lval, sidx, sval):
    return Query(dense, lidx, lval, sidx, sval)


def node_query(store: Store, u: int) -> Query:
    l0, l1 = store.lptr[u], store.lptr[u + 1]
    s0, s1 = store.sptr[u], store.sptr[u + 1]
    return Query(store.dense[u], store.lidx[l0:l1], store.lval[l0:l1], store.sidx[s0:s1], store.sval[s0:s1])


def _seqsum(mat: np.ndarray) -> np.ndarray:
    # leading zero column reproduces ``acc = 0.0; acc += ...`` exactly
    padded = np.zeros((mat.shape[0], mat.shape[1] + 1), dtype=_F64)
    padded[:, 1:] = mat
    return np.cumsum(padded, axis=1)[:, -1]


def dense_dot(a, b) -> float:
    prod = np.asarray(a, dtype=_F64) * np.asarray(b, dtype=_F64)
    return float(_seqsum(prod.reshape(1, -1))[0])


def sparse_dot(ai, av, bi, bv) -> float:
    ai = np.asarray(ai, dtype=np.uint32)
    bi = np.asarray(bi, dtype=np.uint32)
    _, ia, ib = np.intersect1d(ai, bi, assume_unique=True, return_indices=True)
    prod = np.asarray(av, dtype=_F64)[ia] * np.asarray(bv, dtype=np.float32)[ib].astype(_F64)
    return float(_seqsum(prod.reshape(1, -1))[0])


def _gather_rows(ptr, ids):
    starts = ptr[ids]
    lens = ptr[ids + 1] - starts
    total = int(lens.sum())
    rows = np.repeat(np.arange(len(ids)), lens)
    offs = np.cumsum(lens) - lens
    flat = np.arange(total) - np.repeat(offs, lens) + np.repeat(starts, lens)
    return rows, flat


def _ranks(rows, b):
    counts = np.bincount(rows, minlength=b)
    offs = np.cumsum(counts) - counts
    return np.arange(rows.size) - offs[rows], int(counts.max()) if b else 0


def _matched(ptr, idx, val, ids, qidx, qval):
    """Matched products per row, in ascending index order."""
    b = len(ids)
    if qidx.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, _F64), 0
    rows, flat = _gather_rows(ptr, ids)
    if flat.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, _F64), 0
    di = idx[flat]
    p = np.minimum(np.searchsorted(qidx, di), qidx.size - 1)
    hit = qidx[p] == di
    prods = qval[p[hit]] * val[flat[hit]].astype(_F64)
    rows = rows[hit]
    ranks, width = _ranks(rows, b)
    return rows, ranks, prods, width


def _assemble(dense_prod, parts):
    b, m = dense_prod.shape
    width = m + sum(p[3] for p in parts)
    mat = np.zeros((b, width), dtype=_F64)
    mat[:, :m] = dense_prod
    col = m
    for rows, ranks, prods, w in parts:
        if prods.size:
            mat[rows, col + ranks] = prods
        col += w
    return _seqsum(mat)


def score_many(store: Store, q: Query, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if q.dim != store.m:
        raise ValueError("dimension-mismatch")
    if ids.size and (ids.min() < 0 or ids.max() >= store.n):
        raise IndexError("unknown node")
    if ids.size == 0:
        return np.empty(0, dtype=_F64)
    dense_prod = store.dense[ids].astype(_F64) * q.dense
    lp = _matched(store.lptr, store.lidx, store.lval, ids, q.lidx, q.lval)
    sp = _matched(store.sptr, store.sidx, store.sval, ids, q.sidx, q.sval)
    return _assemble(dense_prod, [lp, sp])


def self_scores(store: Store) -> np.ndarray:
    ids = np.arange(store.n, dtype=np.int64)
    dense = store.dense.astype(_F64)
    parts = []
    for ptr, val in ((store.lptr, store.lval), (store.sptr, store.sval)):
        rows, flat = _gather_rows(ptr, ids)
        v = val[flat].astype(_F64)
        ranks, width = _ranks(rows, store.n)
        parts.append((rows, ranks, v * v, width if flat.size else 0))
    return _assemble(dense * dense, parts)


def pairwise(store: Store, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    out = np.empty((ids.size, ids.size), dtype=_F64)
    for i, u in enumerate(ids):
        out[i] = score_many(store, node_query(store, int(u)), ids)
    return out


def nn_descent_pass(store, ids, scores, new, start, stop, out_ids, out_scores, out_new) -> int:
    k = ids.shape[1]
    updates = 0
    for u in range(start, stop):
        nb = ids[u]
        flags = new[u].astype(bool)[:, None] | new[nb].astype(bool)
        cands = np.unique(ids[nb][flags])
        cands = cands[(cands != u) & ~np.isin(cands, nb)]
        if cands.size:
            sc = score_many(store, node_query(store, u), cands)
        else:
            sc = np.empty(0, dtype=_F64)
        all_ids = np.concatenate([nb, cands])
        all_sc = np.concatenate([scores[u], sc])
        all_new = np.concatenate([np.zeros(k, np.uint8), np.ones(cands.size, np.uint8)])
        order = np.lexsort((all_ids, -all_sc))[:k]
        out_ids[u] = all_ids[order]
        out_scores[u] = all_sc[order]
        out_new[u] = all_new[order]
        updates += int(out_new[u].sum())
    return updates


def beam_search(store, q, semantic, entries, deleted, beam, k):
    seen = np.zeros(store.n, dtype=bool)
    pool: list[tuple[float, int]] = []
    expanded: set[int] = set()
    top: list[tuple[float, int]] = []
    scored = 0

    def offer(batch):
        nonlocal scored
        batch = [o for o in batch if not seen[o]]
        if not batch:
            return
        seen[batch] = True
        scored += len(batch)
        dis = -score_many(store, q, batch)
        for o, d in zip(batch, dis.tolist()):
            item = (d, o)
            if len(pool) < beam or item < pool[-1]:
                insort(pool, item)
                if len(pool) > beam:
                    pool.pop()
            if not deleted[o] and (len(top) < k or item < top[-1]):
                insort(top, item)
                if len(top) > k:
                    top.pop()

    for e in np.asarray(entries, dtype=np.int64).tolist():
        offer([e])
    while True:
        u = next((o for _, o in pool if o not in expanded), None)
        if u is None:
            break
        expanded.add(u)
        offer(semantic[u].tolist())
    ids = np.array([o for _, o in top], dtype=np.int64)
    dists = np.array([d for d, _ in top], dtype=_F64)
    return ids, dists, scored
