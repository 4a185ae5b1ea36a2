import numpy as np
import pytest

from hybridgraph.errors import CorpusError, ValidationError
from hybridgraph.model import (
    DocumentRecord,
    FusedVector,
    KnowledgeGraph,
    QuerySpec,
    SparseVector,
    Weights,
    build_query_vector,
    three_path_weights,
    two_path_weights,
    validate_corpus,
)

from conftest import doc, sparse


class TestSparseVector:
    def test_from_pairs_drops_zeros(self):
        v = sparse([[1, 0.5], [4, 0.0], [9, 2.0]])
        assert v.indices.tolist() == [1, 9]
        assert v.to_pairs() == [[1, 0.5], [9, 2.0]]

    @pytest.mark.parametrize(
        "idx, vals, code",
        [
            ([3, 1], [1.0, 1.0], "unsorted-sparse"),
            ([1, 1], [1.0, 1.0], "unsorted-sparse"),
            ([1, 2], [1.0, np.nan], "nonfinite"),
            ([1, 2], [1.0, 0.0], "zero-entry"),
            ([1, 2], [1.0], "shape-mismatch"),
        ],
    )
    def test_rejects(self, idx, vals, code):
        with pytest.raises(ValidationError) as e:
            SparseVector(np.array(idx), np.array(vals, np.float32))
        assert e.value.code == code

    def test_negative_index(self):
        with pytest.raises(ValidationError, match="negative-index"):
            sparse([[-1, 1.0]])

    def test_scaled_keeps_float64_and_zero_weight_empties(self):
        v = sparse([[2, 0.1]])
        assert v.scaled(3.0).values.dtype == np.float64
        assert v.scaled(3.0).values[0] == np.float64(np.float32(0.1)) * 3.0
        assert v.scaled(0.0).nnz == 0


def test_keywords_default_to_statistical_support():
    d = doc(0, [1.0], statistical=[[3, 1.0], [7, 2.0]])
    assert d.keywords == {3, 7}
    assert doc(1, [1.0], statistical=[[3, 1.0]], keywords=[5]).keywords == {5}


class TestWeights:
    @pytest.mark.parametrize("w", [(-1, 1, 1), (0, 0, 0), (np.inf, 1, 1), (1, 1, 1, -0.5)])
    def test_invalid(self, w):
        with pytest.raises(ValidationError, match="invalid-weights"):
            Weights(*w)

    def test_of(self):
        assert Weights.of([1, 2, 3]).as_list() == [1, 2, 3, 0]
        with pytest.raises(ValidationError):
            Weights.of([1, 2])

    def test_two_path(self):
        w = two_path_weights(0.3)
        assert (w.dense, w.learned, w.statistical) == (0.3, 0.7, 0.0)

    def test_three_path(self):
        w = three_path_weights(0.4, 0.5)
        assert (w.dense, w.learned, w.statistical) == pytest.approx((0.4, 0.2, 0.6))
        with pytest.raises(ValidationError):
            three_path_weights(1.5, 0.5)


class TestQuerySpec:
    v = FusedVector(np.ones(2, np.float32))

    def test_k_and_beam(self):
        with pytest.raises(ValidationError, match="invalid-k"):
            QuerySpec(self.v, k=0)
        with pytest.raises(ValidationError, match="invalid-beam"):
            QuerySpec(self.v, k=10, beam_width=5)

    def test_hop_weight_needs_entities(self):
        with pytest.raises(ValidationError, match="missing-entities"):
            QuerySpec(self.v, Weights(1, 1, 1, 1))
        assert QuerySpec(self.v, Weights(1, 1, 1, 1), entities=[3]).entities == {3}

    def test_query_vector_scaling(self):
        qv = build_query_vector(FusedVector(np.array([1, 2], np.float32), sparse([[0, 1.0]])), Weights(2, 0, 1))
        assert qv.dense.tolist() == [2.0, 4.0]
        assert qv.learned.nnz == 0


def test_knowledge_graph_is_undirected():
    kg = KnowledgeGraph([(1, 0, 2), (2, 5, 3), (1, 4, 2)])
    assert kg.neighbors(2) == {1, 3}
    assert kg.relations(1) == ((0, 2), (4, 2))
    assert kg.degree(2) == 3
    assert kg.neighbors(99) == frozenset()


class TestValidateCorpus:
    def test_summary(self):
        s = validate_corpus([doc(0, [1, 0], [[2, 1.0]], [[9, 1.0]], entities=[4]), doc(1, [0, 1])])
        assert (s.n, s.dense_dim, s.learned_dim, s.statistical_dim, s.n_entities) == (2, 2, 3, 10, 1)

    def test_errors(self):
        with pytest.raises(CorpusError, match="empty-corpus"):
            validate_corpus([])
        with pytest.raises(CorpusError, match="dimension-mismatch"):
            validate_corpus([doc(0, [1, 0]), doc(1, [1])])
        with pytest.raises(CorpusError, match="duplicate-id"):
            validate_corpus([doc(0, [1]), doc(0, [2])])
        with pytest.raises(CorpusError, match="index-out-of-range"):
            validate_corpus([doc(0, [1], [[50, 1.0]])], learned_dim=10)

    def test_negative_doc_id(self):
        with pytest.raises(ValidationError):
            DocumentRecord(-1, FusedVector(np.ones(1)))


def test_scaling_by_tiny_weight_drops_underflowed_entries():
    v = sparse([[1, 1e-30], [2, 1.0]])
    assert v.scaled(1e-300).indices.tolist() == [2]
