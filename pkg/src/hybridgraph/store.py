"""Columnar document store shared by construction and search."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import backend
from .errors import CorpusError
from .model import (
    INDEX_DTYPE,
    STORE_DTYPE,
    DocumentRecord,
    FusedVector,
    SparseVector,
    validate_corpus,
)


def _readonly(*arrays):
    for a in arrays:
        if a is not None:
            a.flags.writeable = False


@dataclass(frozen=True, eq=False)
class CSR:
    """Row-compressed ragged array; ``values`` is None for pure index sets."""

    ptr: np.ndarray
    idx: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        _readonly(self.ptr, self.idx, self.values)

    @classmethod
    def from_rows(cls, rows, with_values: bool, dtype=STORE_DTYPE) -> CSR:
        lens = [len(r[0]) if with_values else len(r) for r in rows]
        ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lens, out=ptr[1:])
        if with_values:
            idx = np.concatenate([r[0] for r in rows] + [np.empty(0, INDEX_DTYPE)]).astype(INDEX_DTYPE)
            vals = np.concatenate([r[1] for r in rows] + [np.empty(0, dtype)]).astype(dtype)
            return cls(ptr, np.ascontiguousarray(idx), np.ascontiguousarray(vals))
        idx = np.concatenate([np.asarray(r, dtype=INDEX_DTYPE) for r in rows] + [np.empty(0, INDEX_DTYPE)])
        return cls(ptr, np.ascontiguousarray(idx.astype(INDEX_DTYPE)))

    def __len__(self) -> int:
        return len(self.ptr) - 1

    def row(self, i: int) -> np.ndarray:
        return self.idx[self.ptr[i] : self.ptr[i + 1]]

    def row_values(self, i: int) -> np.ndarray:
        return self.values[self.ptr[i] : self.ptr[i + 1]]

    def concat(self, other: CSR) -> CSR:
        ptr = np.concatenate([self.ptr, other.ptr[1:] + self.ptr[-1]])
        idx = np.concatenate([self.idx, other.idx])
        vals = None if self.values is None else np.concatenate([self.values, other.values])
        return CSR(ptr, idx, vals)


class DocumentStore:
    """Immutable columnar view of a validated corpus.

    Nodes are addressed by position ``0..n-1``; ``doc_ids`` maps them back to
    the caller's document ids.
    """

    def __init__(self, doc_ids, dense, learned: CSR, statistical: CSR, keywords: CSR, entities: CSR, deleted=None):
        self.doc_ids = np.ascontiguousarray(doc_ids, dtype=np.uint64)
        self.dense = np.ascontiguousarray(dense, dtype=STORE_DTYPE)
        if self.dense.ndim != 2:
            raise CorpusError("dimension-mismatch", "dense block must be 2-d")
        self.learned = learned
        self.statistical = statistical
        self.keywords = keywords
        self.entities = entities
        n = len(self.doc_ids)
        self.deleted = np.zeros(n, dtype=bool) if deleted is None else np.array(deleted, dtype=bool)
        _readonly(self.doc_ids, self.dense, self.deleted)
        self.node_of = {int(d): i for i, d in enumerate(self.doc_ids.tolist())}
        if len(self.node_of) != n:
            raise CorpusError("duplicate-id", "doc ids must be unique")
        self._kernel_handles: dict[str, object] = {}

    @classmethod
    def from_records(cls, docs: Sequence[DocumentRecord]) -> DocumentStore:
        validate_corpus(docs)
        dense = np.stack([d.vector.dense.astype(STORE_DTYPE) for d in docs])
        learned = CSR.from_rows([(d.vector.learned.indices, d.vector.learned.values) for d in docs], True)
        stat = CSR.from_rows([(d.vector.statistical.indices, d.vector.statistical.values) for d in docs], True)
        kw = CSR.from_rows([sorted(d.keywords) for d in docs], False)
        ents = CSR.from_rows([sorted(d.entities) for d in docs], False)
        return cls([d.doc_id for d in docs], dense, learned, stat, kw, ents, [d.deleted for d in docs])

    def __len__(self) -> int:
        return len(self.doc_ids)

    @property
    def dim(self) -> int:
        return self.dense.shape[1]

    def kernel_store(self):
        """Backend-specific handle over the arrays, cached per backend."""
        mod = backend.active()
        h = self._kernel_handles.get(mod.NAME)
        if h is None:
            h = mod.Store(
                self.dense,
                self.learned.ptr,
                self.learned.idx,
                self.learned.values,
                self.statistical.ptr,
                self.statistical.idx,
                self.statistical.values,
            )
            self._kernel_handles[mod.NAME] = h
        return h

    @cached_property
    def norms(self) -> np.ndarray:
        """Self inner product of every node under unit weights (float64)."""
        out = backend.active().self_scores(self.kernel_store())
        _readonly(out)
        return out

    @cached_property
    def keyword_sets(self) -> list[frozenset]:
        return [frozenset(self.keywords.row(i).tolist()) for i in range(len(self))]

    @cached_property
    def entity_sets(self) -> list[frozenset]:
        return [frozenset(self.entities.row(i).tolist()) for i in range(len(self))]

    def vector(self, node: int) -> FusedVector:
        return FusedVector(
            self.dense[node],
            SparseVector(self.learned.row(node), self.learned.row_values(node)),
            SparseVector(self.statistical.row(node), self.statistical.row_values(node)),
        )

    def record(self, node: int) -> DocumentRecord:
        return DocumentRecord(
            int(self.doc_ids[node]),
            self.vector(node),
            keywords=self.keyword_sets[node],
            entities=self.entity_sets[node],
            deleted=bool(self.deleted[node]),
        )

    def records(self) -> list[DocumentRecord]:
        return [self.record(i) for i in range(len(self))]

    def extend(self, docs: Sequence[DocumentRecord]) -> DocumentStore:
        """New store with ``docs`` appended as nodes ``n..n+len(docs)-1``."""
        if not docs:
            return self
        validate_corpus(docs)
        for d in docs:
            if d.vector.dim != self.dim:
                raise CorpusError("dimension-mismatch", f"doc {d.doc_id} has dense dim {d.vector.dim}")
            if d.doc_id in self.node_of:
                raise CorpusError("duplicate-id", f"doc id {d.doc_id} already indexed")
        tail = DocumentStore.from_records(docs)
        return DocumentStore(
            np.concatenate([self.doc_ids, tail.doc_ids]),
            np.concatenate([self.dense, tail.dense]),
            self.learned.concat(tail.learned),
            self.statistical.concat(tail.statistical),
            self.keywords.concat(tail.keywords),
            self.entities.concat(tail.entities),
            np.concatenate([self.deleted, tail.deleted]),
        )

    def with_deleted(self, deleted: np.ndarray) -> DocumentStore:
        s = DocumentStore.__new__(DocumentStore)
        s.__dict__.update(self.__dict__)
        s.deleted = np.array(deleted, dtype=bool)
        _readonly(s.deleted)
        return s
