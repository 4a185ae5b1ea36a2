import numpy as np
import pytest

from hybridgraph import backend
from hybridgraph.model import DocumentRecord, FusedVector, SparseVector
from hybridgraph.refine import build_hybrid_index
from hybridgraph.store import DocumentStore
from hybridgraph.synthetic import SyntheticCorpus, plant_hop_chains, plant_keyword_groups


@pytest.fixture(params=backend.available())
def kernel(request):
    """Run the test once per available kernel backend."""
    with backend.use(request.param) as mod:
        yield mod


def sparse(pairs):
    return SparseVector.from_pairs(pairs)


def doc(i, dense, learned=(), statistical=(), **kw):
    return DocumentRecord(i, FusedVector(np.asarray(dense, np.float32), sparse(learned), sparse(statistical)), **kw)


@pytest.fixture(scope="session")
def small_docs():
    return SyntheticCorpus(dense_dim=16, learned_vocab=300, statistical_vocab=500, seed=11).documents(300)


@pytest.fixture(scope="session")
def small_store(small_docs):
    return DocumentStore.from_records(small_docs)


@pytest.fixture(scope="session")
def built(small_docs):
    """Degree-8 index with its construction trace."""
    return build_hybrid_index(small_docs, degree=8, k=16, workers=1, keep_trace=True)


@pytest.fixture(scope="session")
def keyword_corpus():
    gen = SyntheticCorpus(dense_dim=32, seed=21)
    docs = gen.documents(800)
    groups = plant_keyword_groups(gen, docs, n_groups=10, per_group=15)
    return gen, docs, groups


@pytest.fixture(scope="session")
def keyword_index(keyword_corpus):
    _, docs, _ = keyword_corpus
    return build_hybrid_index(docs, workers=1)


@pytest.fixture(scope="session")
def chains():
    return plant_hop_chains(SyntheticCorpus(dense_dim=32, seed=5), 400, 20)


@pytest.fixture(scope="session")
def chain_index(chains):
    return build_hybrid_index(chains.docs, kg=chains.kg, workers=1)
