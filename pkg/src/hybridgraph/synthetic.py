"""Synthetic corpora: clustered Gaussian dense parts, Zipf-distributed sparse supports.

Keywords default to the statistical support. Helpers plant keyword groups and
knowledge-graph chains for the keyword and multi-hop checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import DocumentRecord, FusedVector, KnowledgeGraph, SparseVector


def _zipf(v: int, s: float) -> np.ndarray:
    p = 1.0 / np.arange(1, v + 1) ** s
    return p / p.sum()


class SyntheticCorpus:
    """Generator for documents and queries drawn from one shared topic model."""

    def __init__(
        self,
        dense_dim: int = 64,
        learned_vocab: int = 2000,
        statistical_vocab: int = 5000,
        n_clusters: int = 16,
        nnz: int = 20,
        query_nnz: int = 12,
        topic_share: float = 0.5,
        doc_noise: float = 1.5,
        query_noise: float = 2.0,
        seed: int = 0,
    ):
        # Overlapping clusters: with tight ones the k-NN graph splits into one island per cluster.
        self.rng = np.random.default_rng(seed)
        self.m = dense_dim
        self.n_clusters = n_clusters
        self.nnz = nnz
        self.query_nnz = query_nnz
        self.topic_share = topic_share
        self.doc_noise = doc_noise
        self.query_noise = query_noise
        self.centers = self.rng.standard_normal((n_clusters, dense_dim)) / np.sqrt(dense_dim)
        self.vocab = {"learned": learned_vocab, "statistical": statistical_vocab}
        self.topics = {
            path: [self.rng.permutation(v) for _ in range(n_clusters)] for path, v in self.vocab.items()
        }
        self.zipf = {path: _zipf(v, 1.07) for path, v in self.vocab.items()}

    def _sparse(self, path: str, cluster: int, nnz: int) -> SparseVector:
        v = self.vocab[path]
        n_topic = int(round(nnz * self.topic_share))
        ranks = self.rng.choice(v, size=nnz, replace=False, p=self.zipf[path])
        terms = set(self.topics[path][cluster][ranks[:n_topic]].tolist())
        terms.update(ranks[n_topic:].tolist())
        idx = np.array(sorted(terms), dtype=np.int64)
        vals = self.rng.gamma(2.0, 1.0, size=idx.size)
        vals *= self.rng.lognormal(0.0, 0.2) / np.linalg.norm(vals)
        return SparseVector(idx, vals.astype(np.float32))

    def _dense(self, cluster: int, noise: float) -> np.ndarray:
        x = self.centers[cluster] + self.rng.standard_normal(self.m) * noise / np.sqrt(self.m)
        x *= self.rng.lognormal(0.0, 0.2) / np.linalg.norm(x)
        return x.astype(np.float32)

    def vector(self, cluster: int | None = None, nnz: int | None = None, noise: float | None = None) -> FusedVector:
        c = int(self.rng.integers(self.n_clusters)) if cluster is None else cluster
        nnz = self.nnz if nnz is None else nnz
        noise = self.doc_noise if noise is None else noise
        return FusedVector(self._dense(c, noise), self._sparse("learned", c, nnz), self._sparse("statistical", c, nnz))

    def documents(self, n: int, start_id: int = 0) -> list[DocumentRecord]:
        return [DocumentRecord(start_id + i, self.vector()) for i in range(n)]

    def query_vectors(self, n: int) -> list[FusedVector]:
        return [self.vector(nnz=self.query_nnz, noise=self.query_noise) for _ in range(n)]

    def simplex_weights(self, n: int) -> np.ndarray:
        """``n`` weight triples drawn uniformly from the probability simplex."""
        return self.rng.dirichlet(np.ones(3), size=n)


def with_terms(v: FusedVector, terms, value: float = 1.0) -> FusedVector:
    """Copy of ``v`` whose statistical part also carries ``terms`` at ``value``."""
    st = dict(zip(v.statistical.indices.tolist(), v.statistical.values.tolist()))
    st.update((int(t), value) for t in terms)
    idx = sorted(st)
    return FusedVector(v.dense, v.learned, SparseVector(np.array(idx, np.int64), np.array([st[i] for i in idx], np.float32)))


def plant_keyword_groups(
    gen: SyntheticCorpus, docs: list[DocumentRecord], n_groups: int, per_group: int, terms_per_group: int = 2
) -> list[frozenset]:
    """Add a fresh rare term set to ``per_group`` random docs per group (in place).

    The planted terms are appended to the statistical vector with a large
    weight, as a rare term gets from its inverse document frequency, and the
    default keyword rule still holds. Returns the planted term sets.
    """
    base = gen.vocab["statistical"]
    groups = []
    for g in range(n_groups):
        terms = [base + g * terms_per_group + t for t in range(terms_per_group)]
        for pos in gen.rng.choice(len(docs), size=per_group, replace=False):
            d = docs[pos]
            st = d.vector.statistical
            idx = np.concatenate([st.indices.astype(np.int64), terms])
            vals = np.concatenate([st.values, np.full(len(terms), 1.0, np.float32)])
            vec = FusedVector(d.vector.dense, d.vector.learned, SparseVector(idx, vals))
            docs[pos] = DocumentRecord(d.doc_id, vec, entities=d.entities)
        groups.append(frozenset(terms))
    return groups


@dataclass
class HopChains:
    """Planted multi-hop instances: query ``i`` names ``query_entities[i]``; its answers are ``answers[i]``."""

    docs: list[DocumentRecord]
    kg: KnowledgeGraph
    queries: list[FusedVector]
    query_entities: list[int]
    answers: list[list[int]] = field(default_factory=list)


def plant_hop_chains(gen: SyntheticCorpus, n_background: int, n_chains: int) -> HopChains:
    """Corpus with ``n_chains`` chains ``e -r- f -r- g`` spread over three docs.

    The seed doc holds ``e``, the bridge doc ``f``, the answer doc ``g``. The
    query is drawn from one cluster while bridge and answer docs come from a
    different cluster, so vector similarity alone does not find them.
    """
    docs = gen.documents(n_background)
    next_id = n_background
    triplets = []
    queries, q_ents, answers = [], [], []
    for i in range(n_chains):
        e, f, g = 3 * i, 3 * i + 1, 3 * i + 2
        qc = int(gen.rng.integers(gen.n_clusters))
        far = (qc + gen.n_clusters // 2) % gen.n_clusters
        seed_doc = DocumentRecord(next_id, gen.vector(cluster=qc), entities={e})
        bridge = DocumentRecord(next_id + 1, gen.vector(cluster=far), entities={f})
        answer = DocumentRecord(next_id + 2, gen.vector(cluster=far), entities={g})
        docs.extend([seed_doc, bridge, answer])
        triplets += [(e, 0, f), (f, 1, g)]
        queries.append(gen.vector(cluster=qc, nnz=gen.query_nnz, noise=gen.query_noise))
        q_ents.append(e)
        answers.append([next_id + 1, next_id + 2])
        next_id += 3
    return HopChains(docs, KnowledgeGraph(triplets), queries, q_ents, answers)
