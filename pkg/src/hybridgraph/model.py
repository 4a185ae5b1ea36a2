"""Data model for the unified metric space: fused vectors, documents, weights, queries."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import CorpusError, ValidationError

INDEX_DTYPE = np.uint32
STORE_DTYPE = np.float32


def _as_frozenset(items) -> frozenset:
    return frozenset(int(x) for x in items)


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted (index, value) pairs, CSR-row style.

    Document vectors hold float32 values; weighted query vectors keep float64
    so that applying a weight does not add a rounding step.
    """

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=INDEX_DTYPE).reshape(-1)
        vals = np.asarray(self.values)
        if vals.dtype not in (np.float32, np.float64):
            vals = vals.astype(STORE_DTYPE)
        vals = np.ascontiguousarray(vals).reshape(-1)
        if idx.shape != vals.shape:
            raise ValidationError("shape-mismatch", "indices and values differ in length")
        if idx.size > 1 and not np.all(idx[1:] > idx[:-1]):
            raise ValidationError("unsorted-sparse", "sparse indices must be strictly ascending")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("nonfinite", "sparse values must be finite")
        if np.any(vals == 0):
            raise ValidationError("zero-entry", "explicit zeros are not stored")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def empty(cls, dtype=STORE_DTYPE) -> SparseVector:
        return cls(np.empty(0, INDEX_DTYPE), np.empty(0, dtype))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], dtype=STORE_DTYPE) -> SparseVector:
        """Build from ``[[idx, val], ...]`` as found in JSON-lines input.

        Order is preserved (unsorted input is rejected, not fixed up) and zero
        values are dropped.
        """
        pairs = [(int(i), float(v)) for i, v in pairs if float(v) != 0.0]
        if not pairs:
            return cls.empty(dtype)
        idx, vals = zip(*pairs)
        if min(idx) < 0:
            raise ValidationError("negative-index", "sparse indices are unsigned")
        return cls(np.array(idx, dtype=np.int64).astype(INDEX_DTYPE), np.array(vals, dtype=dtype))

    def to_pairs(self) -> list[list]:
        return [[int(i), float(v)] for i, v in zip(self.indices, self.values)]

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def scaled(self, w: float) -> SparseVector:
        if w == 0.0:
            return SparseVector.empty(np.float64)
        vals = self.values.astype(np.float64) * float(w)
        keep = vals != 0.0  # a tiny weight can underflow
        return SparseVector(self.indices[keep], vals[keep])

    def dim(self) -> int:
        return int(self.indices[-1]) + 1 if self.indices.size else 0


@dataclass(frozen=True, eq=False)
class FusedVector:
    """Dense part plus learned-sparse and statistical-sparse parts."""

    dense: np.ndarray
    learned: SparseVector = field(default_factory=SparseVector.empty)
    statistical: SparseVector = field(default_factory=SparseVector.empty)

    def __post_init__(self):
        dense = np.asarray(self.dense)
        if dense.dtype not in (np.float32, np.float64):
            dense = dense.astype(STORE_DTYPE)
        dense = np.ascontiguousarray(dense).reshape(-1)
        if not np.all(np.isfinite(dense)):
            raise ValidationError("nonfinite", "dense values must be finite")
        object.__setattr__(self, "dense", dense)

    @cached_property
    def squared_norm(self) -> float:
        from .distance import hybrid_score

        return hybrid_score(self, self)

    @property
    def dim(self) -> int:
        return int(self.dense.size)


@dataclass(frozen=True, eq=False)
class DocumentRecord:
    doc_id: int
    vector: FusedVector
    keywords: frozenset = None
    entities: frozenset = frozenset()
    deleted: bool = False

    def __post_init__(self):
        if int(self.doc_id) < 0:
            raise ValidationError("negative-id", f"doc id {self.doc_id}")
        object.__setattr__(self, "doc_id", int(self.doc_id))
        if self.keywords is None:
            kw = frozenset(int(i) for i in self.vector.statistical.indices)
        else:
            kw = _as_frozenset(self.keywords)
        object.__setattr__(self, "keywords", kw)
        object.__setattr__(self, "entities", _as_frozenset(self.entities))


@dataclass(frozen=True)
class Weights:
    """Path weights ``(w_d, w_s, w_f, w_k)``; ``hop`` is only used by the query engine."""

    dense: float = 1.0
    learned: float = 1.0
    statistical: float = 1.0
    hop: float = 0.0

    def __post_init__(self):
        vals = (self.dense, self.learned, self.statistical, self.hop)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("invalid-weights", "weights must be finite")
        if any(v < 0 for v in vals):
            raise ValidationError("invalid-weights", "weights must be non-negative")
        if max(self.dense, self.learned, self.statistical) <= 0:
            raise ValidationError("invalid-weights", "at least one vector path needs a positive weight")

    @classmethod
    def of(cls, values: Sequence[float]) -> Weights:
        values = [float(v) for v in values]
        if len(values) == 3:
            values.append(0.0)
        if len(values) != 4:
            raise ValidationError("invalid-weights", "expected 3 or 4 weights")
        return cls(*values)

    def as_list(self) -> list[float]:
        return [self.dense, self.learned, self.statistical, self.hop]


def two_path_weights(alpha: float, hop: float = 0.0) -> Weights:
    """Dense + learned-sparse mix: ``alpha*sim_d + (1-alpha)*sim_s``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("invalid-weights", "alpha must lie in [0, 1]")
    return Weights(alpha, 1.0 - alpha, 0.0, hop)


def three_path_weights(alpha: float, w_opt: float, hop: float = 0.0) -> Weights:
    """``alpha*(sim_d + w_opt*sim_s) + (1-alpha)*sim_f``.

    ``w_opt`` is the best learned-sparse weight found for the two-path mix.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("invalid-weights", "alpha must lie in [0, 1]")
    return Weights(alpha, alpha * w_opt, 1.0 - alpha, hop)


@dataclass(frozen=True)
class QuerySpec:
    vector: FusedVector
    weights: Weights = Weights()
    required_keywords: frozenset = frozenset()
    entities: frozenset = frozenset()
    k: int = 10
    beam_width: int = 64

    def __post_init__(self):
        object.__setattr__(self, "required_keywords", _as_frozenset(self.required_keywords))
        object.__setattr__(self, "entities", _as_frozenset(self.entities))
        if self.k < 1:
            raise ValidationError("invalid-k", "k must be positive")
        if self.beam_width < self.k:
            raise ValidationError("invalid-beam", "beam width must be >= k")
        if self.weights.hop > 0 and not self.entities:
            raise ValidationError("missing-entities", "hop weight given without query entities")


def build_query_vector(query: FusedVector, w: Weights) -> FusedVector:
    """Scale each path of ``query`` by its weight (computed in float64)."""
    if not isinstance(w, Weights):
        w = Weights.of(w)
    return FusedVector(
        query.dense.astype(np.float64) * w.dense,
        query.learned.scaled(w.learned),
        query.statistical.scaled(w.statistical),
    )


class KnowledgeGraph:
    """Triplet store with an undirected adjacency view."""

    def __init__(self, triplets: Iterable[Sequence[int]] = ()):
        arr = np.array([tuple(int(x) for x in t) for t in triplets], dtype=np.int64).reshape(-1, 3)
        if arr.size and arr.min() < 0:
            raise ValidationError("negative-id", "entity and relation ids are unsigned")
        self.triplets = arr
        adj: dict[int, set] = defaultdict(set)
        for s, r, t in arr.tolist():
            adj[s].add((r, t))
            adj[t].add((r, s))
        self.adjacency: dict[int, tuple] = {e: tuple(sorted(v)) for e, v in sorted(adj.items())}
        self._neighbors = {e: frozenset(t for _, t in v) for e, v in self.adjacency.items()}

    def __len__(self) -> int:
        return len(self.triplets)

    def relations(self, entity: int) -> tuple:
        """``(relation, neighbor)`` pairs touching ``entity``, sorted."""
        return self.adjacency.get(entity, ())

    def neighbors(self, entity: int) -> frozenset:
        return self._neighbors.get(entity, frozenset())

    def degree(self, entity: int) -> int:
        return len(self.adjacency.get(entity, ()))


@dataclass(frozen=True)
class CorpusSummary:
    n: int
    dense_dim: int
    learned_dim: int
    statistical_dim: int
    mean_learned_nnz: float
    mean_statistical_nnz: float
    n_entities: int


def validate_corpus(
    docs: Sequence[DocumentRecord],
    learned_dim: int | None = None,
    statistical_dim: int | None = None,
) -> CorpusSummary:
    """Check a corpus for uniform dims and unique ids; return per-path dimension stats."""
    if len(docs) == 0:
        raise CorpusError("empty-corpus", "no documents")
    m = docs[0].vector.dim
    seen: set[int] = set()
    ldim = sdim = 0
    lnnz = snnz = 0
    ents: set[int] = set()
    for doc in docs:
        if doc.vector.dim != m:
            raise CorpusError("dimension-mismatch", f"doc {doc.doc_id} has dense dim {doc.vector.dim}, expected {m}")
        if doc.doc_id in seen:
            raise CorpusError("duplicate-id", f"doc id {doc.doc_id} repeated")
        seen.add(doc.doc_id)
        for sv in (doc.vector.learned, doc.vector.statistical):
            if sv.nnz > 1 and not np.all(sv.indices[1:] > sv.indices[:-1]):
                raise CorpusError("unsorted-sparse", f"doc {doc.doc_id}")
        ldim = max(ldim, doc.vector.learned.dim())
        sdim = max(sdim, doc.vector.statistical.dim())
        lnnz += doc.vector.learned.nnz
        snnz += doc.vector.statistical.nnz
        ents.update(doc.entities)
    if learned_dim is not None and ldim > learned_dim:
        raise CorpusError("index-out-of-range", f"learned index {ldim - 1} >= {learned_dim}")
    if statistical_dim is not None and sdim > statistical_dim:
        raise CorpusError("index-out-of-range", f"statistical index {sdim - 1} >= {statistical_dim}")
    n = len(docs)
    return CorpusSummary(
        n=n,
        dense_dim=m,
        learned_dim=learned_dim if learned_dim is not None else ldim,
        statistical_dim=statistical_dim if statistical_dim is not None else sdim,
        mean_learned_nnz=lnnz / n,
        mean_statistical_nnz=snnz / n,
        n_entities=len(ents),
    )
