"""The hybrid index: semantic, keyword and logical edges over one document store."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .logical import EntityMap, LogicalEdges
from .model import KnowledgeGraph
from .store import CSR, DocumentStore


@dataclass(frozen=True)
class BuildParams:
    k: int = 32
    iters: int = 10
    degree: int = 16
    seed: int = 0
    keyword_rule: str = "union"
    fanout_cap: int = 64
    x_hops: int = 2


@dataclass(frozen=True, eq=False)
class HybridIndex:
    """Immutable index snapshot.

    ``semantic[u]`` holds exactly ``degree`` node ids laid out as
    ``forward_count[u]`` forward edges, then ``reverse_count[u]`` reverse
    edges, then padding taken from u's remaining forward candidates.
    """

    store: DocumentStore
    params: BuildParams
    semantic: np.ndarray
    forward_count: np.ndarray
    reverse_count: np.ndarray
    keyword_edges: CSR
    logical: LogicalEdges
    entity_map: EntityMap
    entry_order: np.ndarray
    kg: KnowledgeGraph | None = None
    trace: object = field(default=None, compare=False)

    def __post_init__(self):
        for a in (self.semantic, self.forward_count, self.reverse_count, self.entry_order):
            a.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.store)

    @property
    def degree(self) -> int:
        return self.params.degree

    def keyword_neighbors(self, u: int) -> np.ndarray:
        return self.keyword_edges.row(u)

    def reverse_slots(self, u: int) -> range:
        f = int(self.forward_count[u])
        return range(f, f + int(self.reverse_count[u]))

    def check_invariants(self) -> list[str]:
        """Structural scan; returns human-readable violations (empty when sound)."""
        errs = []
        n, d = self.n, self.degree
        if self.semantic.shape != (n, d):
            errs.append(f"semantic shape {self.semantic.shape} != {(n, d)}")
            return errs
        ents = self.store.entity_sets
        for u in range(n):
            row = self.semantic[u]
            if len(set(row.tolist())) != d:
                errs.append(f"node {u}: duplicate semantic edges")
            if u in row:
                errs.append(f"node {u}: self loop")
            if row.min() < 0 or row.max() >= n:
                errs.append(f"node {u}: edge out of range")
            if self.forward_count[u] + self.reverse_count[u] > d:
                errs.append(f"node {u}: slot counts exceed degree")
            kw = set(self.keyword_edges.row(u).tolist())
            if kw & set(row.tolist()):
                errs.append(f"node {u}: keyword edge duplicates a semantic edge")
            for s, _, t, w in self.logical.of(u).tolist():
                if s not in ents[u] or t in ents[u]:
                    errs.append(f"node {u}: logical edge ({s},{t}) violates entity rule")
                if t not in ents[w]:
                    errs.append(f"node {u}: logical edge target node {w} lacks entity {t}")
                if self.kg is not None and t not in self.kg.neighbors(s):
                    errs.append(f"node {u}: logical edge ({s},{t}) not in knowledge graph")
        norms = self.store.norms[self.entry_order]
        if np.any(norms[1:] < norms[:-1]):
            errs.append("entry order not sorted by norm")
        return errs
