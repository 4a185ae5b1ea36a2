# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: hybrid scoring, NN-Descent passes and plain beam search.

Every score is accumulated in one double in a fixed order (dense, learned,
statistical, each by ascending index) so results match the NumPy fallback
bit for bit. Build without FMA contraction.
"""

import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t
from libc.stdlib cimport free, malloc

NAME = "cython"

ctypedef uint32_t idx_t


cdef struct StoreView:
    Py_ssize_t n
    Py_ssize_t m
    Py_ssize_t max_l
    Py_ssize_t max_s
    const float* dense
    const int64_t* lptr
    const idx_t* lidx
    const float* lval
    const int64_t* sptr
    const idx_t* sidx
    const float* sval


cdef struct QView:
    const double* dense
    const idx_t* lidx
    const double* lval
    Py_ssize_t nl
    const idx_t* sidx
    const double* sval
    Py_ssize_t ns


cdef class Store:
    cdef StoreView v
    cdef object _keep

    def __init__(self, dense, lptr, lidx, lval, sptr, sidx, sval):
        cdef const float[:, ::1] d = np.ascontiguousarray(dense, dtype=np.float32)
        cdef const int64_t[::1] lp = np.ascontiguousarray(lptr, dtype=np.int64)
        cdef const idx_t[::1] li = np.ascontiguousarray(lidx, dtype=np.uint32)
        cdef const float[::1] lv = np.ascontiguousarray(lval, dtype=np.float32)
        cdef const int64_t[::1] sp = np.ascontiguousarray(sptr, dtype=np.int64)
        cdef const idx_t[::1] si = np.ascontiguousarray(sidx, dtype=np.uint32)
        cdef const float[::1] sv = np.ascontiguousarray(sval, dtype=np.float32)
        self._keep = (d, lp, li, lv, sp, si, sv)
        self.v.n = d.shape[0]
        self.v.m = d.shape[1]
        self.v.dense = &d[0, 0] if d.shape[0] and d.shape[1] else NULL
        self.v.lptr = &lp[0]
        self.v.lidx = &li[0] if li.shape[0] else NULL
        self.v.lval = &lv[0] if lv.shape[0] else NULL
        self.v.sptr = &sp[0]
        self.v.sidx = &si[0] if si.shape[0] else NULL
        self.v.sval = &sv[0] if sv.shape[0] else NULL
        self.v.max_l = int(np.diff(np.asarray(lp)).max()) if d.shape[0] else 0
        self.v.max_s = int(np.diff(np.asarray(sp)).max()) if d.shape[0] else 0

    @property
    def n(self):
        return self.v.n

    @property
    def m(self):
        return self.v.m


cdef class Query:
    cdef QView v
    cdef public Py_ssize_t dim
    cdef object _keep

    def __init__(self, dense, lidx, lval, sidx, sval):
        cdef const double[::1] d = np.ascontiguousarray(dense, dtype=np.float64)
        cdef const idx_t[::1] li = np.ascontiguousarray(lidx, dtype=np.uint32)
        cdef const double[::1] lv = np.ascontiguousarray(lval, dtype=np.float64)
        cdef const idx_t[::1] si = np.ascontiguousarray(sidx, dtype=np.uint32)
        cdef const double[::1] sv = np.ascontiguousarray(sval, dtype=np.float64)
        self._keep = (d, li, lv, si, sv)
        self.v.dense = &d[0] if d.shape[0] else NULL
        self.v.lidx = &li[0] if li.shape[0] else NULL
        self.v.lval = &lv[0] if lv.shape[0] else NULL
        self.v.nl = li.shape[0]
        self.v.sidx = &si[0] if si.shape[0] else NULL
        self.v.sval = &sv[0] if sv.shape[0] else NULL
        self.v.ns = si.shape[0]
        self.dim = d.shape[0]


cdef inline double _sparse_acc(double acc, const idx_t* qi, const double* qv, Py_ssize_t nq,
                               const idx_t* di, const float* dv, Py_ssize_t nd) noexcept nogil:
    cdef Py_ssize_t a = 0, b = 0, lo = 0, hi, mid
    cdef idx_t key
    if nq == 0 or nd == 0:
        return acc
    if nq * 8 <= nd:
        # probe the short side into the long side
        for a in range(nq):
            key = qi[a]
            hi = nd
            while lo < hi:
                mid = (lo + hi) >> 1
                if di[mid] < key:
                    lo = mid + 1
                else:
                    hi = mid
            if lo == nd:
                break
            if di[lo] == key:
                acc += qv[a] * <double>dv[lo]
                lo += 1
    elif nd * 8 <= nq:
        for b in range(nd):
            key = di[b]
            hi = nq
            while lo < hi:
                mid = (lo + hi) >> 1
                if qi[mid] < key:
                    lo = mid + 1
                else:
                    hi = mid
            if lo == nq:
                break
            if qi[lo] == key:
                acc += qv[lo] * <double>dv[b]
                lo += 1
    else:
        while a < nq and b < nd:
            if qi[a] < di[b]:
                a += 1
            elif qi[a] > di[b]:
                b += 1
            else:
                acc += qv[a] * <double>dv[b]
                a += 1
                b += 1
    return acc


cdef inline double _score(const StoreView* s, const QView* q, Py_ssize_t j) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    cdef const float* row = s.dense + j * s.m
    for i in range(s.m):
        acc += q.dense[i] * <double>row[i]
    cdef int64_t p0 = s.lptr[j], p1 = s.lptr[j + 1]
    acc = _sparse_acc(acc, q.lidx, q.lval, q.nl, s.lidx + p0, s.lval + p0, p1 - p0)
    p0 = s.sptr[j]
    p1 = s.sptr[j + 1]
    acc = _sparse_acc(acc, q.sidx, q.sval, q.ns, s.sidx + p0, s.sval + p0, p1 - p0)
    return acc


cdef struct NodeBuf:
    double* dense
    double* lval
    double* sval


cdef int _buf_alloc(NodeBuf* b, const StoreView* s) noexcept nogil:
    b.dense = <double*>malloc((s.m + 1) * sizeof(double))
    b.lval = <double*>malloc((s.max_l + 1) * sizeof(double))
    b.sval = <double*>malloc((s.max_s + 1) * sizeof(double))
    return 0 if (b.dense != NULL and b.lval != NULL and b.sval != NULL) else -1


cdef void _buf_free(NodeBuf* b) noexcept nogil:
    free(b.dense)
    free(b.lval)
    free(b.sval)


cdef void _load_node(const StoreView* s, Py_ssize_t u, NodeBuf* b, QView* q) noexcept nogil:
    cdef Py_ssize_t i
    cdef int64_t p0, p1
    cdef const float* row = s.dense + u * s.m
    for i in range(s.m):
        b.dense[i] = row[i]
    p0 = s.lptr[u]
    p1 = s.lptr[u + 1]
    for i in range(p1 - p0):
        b.lval[i] = s.lval[p0 + i]
    q.lidx = s.lidx + p0
    q.nl = p1 - p0
    p0 = s.sptr[u]
    p1 = s.sptr[u + 1]
    for i in range(p1 - p0):
        b.sval[i] = s.sval[p0 + i]
    q.sidx = s.sidx + p0
    q.ns = p1 - p0
    q.dense = b.dense
    q.lval = b.lval
    q.sval = b.sval


cdef inline bint _better(double s1, int64_t i1, double s2, int64_t i2) noexcept nogil:
    return s1 > s2 or (s1 == s2 and i1 < i2)


cdef inline bint _closer(double d1, int64_t i1, double d2, int64_t i2) noexcept nogil:
    return d1 < d2 or (d1 == d2 and i1 < i2)


def make_query(dense, lidx, lval, sidx, sval):
    return Query(dense, lidx, lval, sidx, sval)


def node_query(Store store, Py_ssize_t u):
    s = store._keep
    lp, sp = np.asarray(s[1]), np.asarray(s[4])
    return Query(
        np.asarray(s[0])[u].astype(np.float64),
        np.asarray(s[2])[lp[u]:lp[u + 1]],
        np.asarray(s[3])[lp[u]:lp[u + 1]].astype(np.float64),
        np.asarray(s[5])[sp[u]:sp[u + 1]],
        np.asarray(s[6])[sp[u]:sp[u + 1]].astype(np.float64),
    )


def dense_dot(a, b):
    cdef const double[::1] x = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(b, dtype=np.float64)
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        acc += x[i] * y[i]
    return acc


def sparse_dot(ai, av, bi, bv):
    """Dot product of two sorted sparse vectors; ``bv`` is rounded to float32 like stored docs."""
    cdef const idx_t[::1] qi = np.ascontiguousarray(ai, dtype=np.uint32)
    cdef const double[::1] qv = np.ascontiguousarray(av, dtype=np.float64)
    cdef const idx_t[::1] di = np.ascontiguousarray(bi, dtype=np.uint32)
    cdef const float[::1] dv = np.ascontiguousarray(bv, dtype=np.float32)
    if qi.shape[0] == 0 or di.shape[0] == 0:
        return 0.0
    return _sparse_acc(0.0, &qi[0], &qv[0], qi.shape[0], &di[0], &dv[0], di.shape[0])


def score_many(Store store, Query q, ids):
    cdef const int64_t[::1] nodes = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t i, cnt = nodes.shape[0]
    out = np.empty(cnt, dtype=np.float64)
    cdef double[::1] o = out
    if q.dim != store.v.m:
        raise ValueError("dimension-mismatch")
    for i in range(cnt):
        if nodes[i] < 0 or nodes[i] >= store.v.n:
            raise IndexError(f"unknown node {nodes[i]}")
    with nogil:
        for i in range(cnt):
            o[i] = _score(&store.v, &q.v, nodes[i])
    return out


def self_scores(Store store):
    out = np.empty(store.v.n, dtype=np.float64)
    cdef double[::1] o = out
    cdef NodeBuf b
    cdef QView q
    cdef Py_ssize_t u
    if _buf_alloc(&b, &store.v) != 0:
        _buf_free(&b)
        raise MemoryError()
    with nogil:
        for u in range(store.v.n):
            _load_node(&store.v, u, &b, &q)
            o[u] = _score(&store.v, &q, u)
    _buf_free(&b)
    return out


def pairwise(Store store, ids):
    """``out[i, j]`` = score of node ``ids[i]`` (as query) against node ``ids[j]``."""
    cdef const int64_t[::1] nodes = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t i, j, cnt = nodes.shape[0]
    out = np.empty((cnt, cnt), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef NodeBuf b
    cdef QView q
    if _buf_alloc(&b, &store.v) != 0:
        _buf_free(&b)
        raise MemoryError()
    with nogil:
        for i in range(cnt):
            _load_node(&store.v, nodes[i], &b, &q)
            for j in range(cnt):
                o[i, j] = _score(&store.v, &q, nodes[j])
    _buf_free(&b)
    return out


def nn_descent_pass(Store store, ids, scores, new, Py_ssize_t start, Py_ssize_t stop,
                    out_ids, out_scores, out_new):
    """One NN-Descent sweep over nodes ``[start, stop)``.

    Candidates of ``u`` are 2-hop neighbours reached through at least one edge
    flagged new. Reads the snapshot, writes only the output rows of its range.
    Returns the number of entries that entered a list.
    """
    cdef const int64_t[:, ::1] gi = ids
    cdef const double[:, ::1] gs = scores
    cdef const uint8_t[:, ::1] gn = new
    cdef int64_t[:, ::1] oi = out_ids
    cdef double[:, ::1] os = out_scores
    cdef uint8_t[:, ::1] on = out_new
    cdef Py_ssize_t n = gi.shape[0], k = gi.shape[1]
    cdef Py_ssize_t u, a, b, c, v, nc, t, pos
    cdef int64_t updates = 0
    cdef double sc
    cdef bint nuv
    cdef NodeBuf buf
    cdef QView q
    cdef int64_t* mark = <int64_t*>malloc(n * sizeof(int64_t))
    cdef int64_t* cand = <int64_t*>malloc((k * k + 1) * sizeof(int64_t))
    cdef int64_t* wi = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    cdef double* ws = <double*>malloc((k + 1) * sizeof(double))
    cdef uint8_t* wn = <uint8_t*>malloc((k + 1) * sizeof(uint8_t))
    if mark == NULL or cand == NULL or wi == NULL or ws == NULL or wn == NULL or _buf_alloc(&buf, &store.v) != 0:
        free(mark); free(cand); free(wi); free(ws); free(wn)
        raise MemoryError()
    with nogil:
        for u in range(n):
            mark[u] = -1
        for u in range(start, stop):
            mark[u] = u
            for a in range(k):
                mark[gi[u, a]] = u
            nc = 0
            for a in range(k):
                v = gi[u, a]
                nuv = gn[u, a]
                for b in range(k):
                    if not (nuv or gn[v, b]):
                        continue
                    c = gi[v, b]
                    if mark[c] == u:
                        continue
                    mark[c] = u
                    cand[nc] = c
                    nc += 1
            for a in range(k):
                wi[a] = gi[u, a]
                ws[a] = gs[u, a]
                wn[a] = 0
            if nc:
                _load_node(&store.v, u, &buf, &q)
            for t in range(nc):
                c = cand[t]
                sc = _score(&store.v, &q, c)
                if not _better(sc, c, ws[k - 1], wi[k - 1]):
                    continue
                pos = k - 1
                while pos > 0 and _better(sc, c, ws[pos - 1], wi[pos - 1]):
                    wi[pos] = wi[pos - 1]
                    ws[pos] = ws[pos - 1]
                    wn[pos] = wn[pos - 1]
                    pos -= 1
                wi[pos] = c
                ws[pos] = sc
                wn[pos] = 1
            for a in range(k):
                oi[u, a] = wi[a]
                os[u, a] = ws[a]
                on[u, a] = wn[a]
                updates += wn[a]
    free(mark); free(cand); free(wi); free(ws); free(wn)
    _buf_free(&buf)
    return updates


cdef struct Pools:
    Py_ssize_t beam
    Py_ssize_t k
    Py_ssize_t pcnt
    Py_ssize_t tcnt
    double* pd
    int64_t* pi
    uint8_t* pe
    double* td
    int64_t* ti


cdef void _offer(Pools* p, double dis, int64_t o, bint deleted) noexcept nogil:
    cdef Py_ssize_t pos
    if p.pcnt < p.beam or _closer(dis, o, p.pd[p.pcnt - 1], p.pi[p.pcnt - 1]):
        pos = p.pcnt
        while pos > 0 and _closer(dis, o, p.pd[pos - 1], p.pi[pos - 1]):
            p.pd[pos] = p.pd[pos - 1]
            p.pi[pos] = p.pi[pos - 1]
            p.pe[pos] = p.pe[pos - 1]
            pos -= 1
        p.pd[pos] = dis
        p.pi[pos] = o
        p.pe[pos] = 0
        if p.pcnt < p.beam:
            p.pcnt += 1
    if deleted:
        return
    if p.tcnt < p.k or _closer(dis, o, p.td[p.tcnt - 1], p.ti[p.tcnt - 1]):
        pos = p.tcnt
        while pos > 0 and _closer(dis, o, p.td[pos - 1], p.ti[pos - 1]):
            p.td[pos] = p.td[pos - 1]
            p.ti[pos] = p.ti[pos - 1]
            pos -= 1
        p.td[pos] = dis
        p.ti[pos] = o
        if p.tcnt < p.k:
            p.tcnt += 1


def beam_search(Store store, Query q, semantic, entries, deleted, Py_ssize_t beam, Py_ssize_t k):
    """Best-first search over semantic edges with a ``beam``-bounded pool.

    Returns ``(ids, dis, n_scored)`` of the ``k`` closest non-deleted nodes,
    ``dis`` being the negated score.
    """
    cdef const int32_t[:, ::1] g = semantic
    cdef const int64_t[::1] ent = np.ascontiguousarray(entries, dtype=np.int64)
    cdef const uint8_t[::1] dele = deleted
    cdef Py_ssize_t n = store.v.n, deg = g.shape[1]
    cdef Py_ssize_t i, j, u, o
    cdef int64_t scored = 0
    cdef Pools p
    if q.dim != store.v.m:
        raise ValueError("dimension-mismatch")
    cdef uint8_t* seen = <uint8_t*>malloc(n * sizeof(uint8_t))
    p.beam = beam
    p.k = k
    p.pcnt = 0
    p.tcnt = 0
    p.pd = <double*>malloc((beam + 1) * sizeof(double))
    p.pi = <int64_t*>malloc((beam + 1) * sizeof(int64_t))
    p.pe = <uint8_t*>malloc((beam + 1) * sizeof(uint8_t))
    p.td = <double*>malloc((k + 1) * sizeof(double))
    p.ti = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    if seen == NULL or p.pd == NULL or p.pi == NULL or p.pe == NULL or p.td == NULL or p.ti == NULL:
        free(seen); free(p.pd); free(p.pi); free(p.pe); free(p.td); free(p.ti)
        raise MemoryError()
    with nogil:
        for i in range(n):
            seen[i] = 0
        for j in range(ent.shape[0]):
            o = ent[j]
            if seen[o]:
                continue
            seen[o] = 1
            scored += 1
            _offer(&p, -_score(&store.v, &q.v, o), o, dele[o])
        while True:
            u = -1
            for i in range(p.pcnt):
                if not p.pe[i]:
                    p.pe[i] = 1
                    u = p.pi[i]
                    break
            if u < 0:
                break
            for j in range(deg):
                o = g[u, j]
                if seen[o]:
                    continue
                seen[o] = 1
                scored += 1
                _offer(&p, -_score(&store.v, &q.v, o), o, dele[o])
    ids = np.empty(p.tcnt, dtype=np.int64)
    dists = np.empty(p.tcnt, dtype=np.float64)
    for i in range(p.tcnt):
        ids[i] = p.ti[i]
        dists[i] = p.td[i]
    free(seen); free(p.pd); free(p.pi); free(p.pe); free(p.td); free(p.ti)
    return ids, dists, int(scored)
