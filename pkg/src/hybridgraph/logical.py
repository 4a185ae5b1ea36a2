"""Logical edges: document links induced by knowledge-graph relations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import KnowledgeGraph

DEFAULT_FANOUT_CAP = 64

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class EntityMap:
    """entity id -> sorted node ids containing it, stored as a keyed CSR."""

    keys: np.ndarray
    ptr: np.ndarray
    nodes: np.ndarray

    def get(self, entity: int) -> np.ndarray:
        i = int(np.searchsorted(self.keys, entity))
        if i < len(self.keys) and self.keys[i] == entity:
            return self.nodes[self.ptr[i] : self.ptr[i + 1]]
        return _EMPTY

    def __len__(self) -> int:
        return len(self.keys)

    def to_dict(self) -> dict[int, list[int]]:
        return {int(e): self.get(int(e)).tolist() for e in self.keys}


def build_entity_map(store) -> EntityMap:
    ents = store.entities
    lens = np.diff(ents.ptr)
    node = np.repeat(np.arange(len(store), dtype=np.int64), lens)
    ent = ents.idx.astype(np.int64)
    order = np.lexsort((node, ent))
    ent, node = ent[order], node[order]
    keys, starts = np.unique(ent, return_index=True)
    ptr = np.append(starts, ent.size).astype(np.int64)
    for a in (keys, ptr, node):
        a.flags.writeable = False
    return EntityMap(keys.astype(np.int64), ptr, node)


def derive_logical_edges(
    u: int, entities: frozenset, kg: KnowledgeGraph, emap: EntityMap, fanout_cap: int = DEFAULT_FANOUT_CAP
) -> list[tuple[int, int, int, int]]:
    """``(source entity, relation, target entity, target node)`` edges of node ``u``.

    Grouped by source entity ascending. Within a group, one edge per
    ``(target entity, node)`` keeps the smallest relation id; targets with the
    highest KG degree come first and at most ``fanout_cap`` are kept.
    """
    out = []
    for s in sorted(entities):
        best: dict[tuple[int, int], int] = {}
        for r, t in kg.relations(s):
            if t in entities:
                continue
            for w in emap.get(t).tolist():
                if w != u and (t, w) not in best:
                    best[(t, w)] = r
        ranked = sorted(best, key=lambda tw: (-kg.degree(tw[0]), tw[0], tw[1]))[:fanout_cap]
        out.extend((s, best[tw], tw[0], tw[1]) for tw in ranked)
    return out


@dataclass(frozen=True, eq=False)
class LogicalEdges:
    """Per-node logical edges in CSR form; columns ``src, rel, tgt, node``."""

    ptr: np.ndarray
    edges: np.ndarray  # (E, 4) int64

    @classmethod
    def empty(cls, n: int) -> LogicalEdges:
        return cls(np.zeros(n + 1, dtype=np.int64), np.empty((0, 4), dtype=np.int64))

    @classmethod
    def from_lists(cls, per_node: list[list[tuple]]) -> LogicalEdges:
        ptr = np.zeros(len(per_node) + 1, dtype=np.int64)
        np.cumsum([len(e) for e in per_node], out=ptr[1:])
        flat = [e for edges in per_node for e in edges]
        arr = np.array(flat, dtype=np.int64).reshape(-1, 4)
        ptr.flags.writeable = False
        arr.flags.writeable = False
        return cls(ptr, arr)

    def __len__(self) -> int:
        return int(self.ptr[-1])

    def of(self, u: int) -> np.ndarray:
        return self.edges[self.ptr[u] : self.ptr[u + 1]]

    def from_source(self, u: int, src: int) -> np.ndarray:
        rows = self.of(u)
        lo, hi = np.searchsorted(rows[:, 0], [src, src + 1])
        return rows[lo:hi]

    def as_lists(self) -> list[list[tuple]]:
        return [[tuple(e) for e in self.of(u).tolist()] for u in range(len(self.ptr) - 1)]


def build_logical_edges(
    store, kg: KnowledgeGraph | None, emap: EntityMap, fanout_cap: int = DEFAULT_FANOUT_CAP
) -> LogicalEdges:
    n = len(store)
    if kg is None or len(kg) == 0:
        return LogicalEdges.empty(n)
    sets = store.entity_sets
    return LogicalEdges.from_lists([derive_logical_edges(u, sets[u], kg, emap, fanout_cap) for u in range(n)])
