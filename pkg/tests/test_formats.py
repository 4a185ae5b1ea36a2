import json

import numpy as np
import pytest

from hybridgraph import formats
from hybridgraph.errors import CorpusError, ValidationError
from hybridgraph.model import KnowledgeGraph, QuerySpec, Weights
from hybridgraph.search import greedy_hybrid_search

from conftest import doc


def test_corpus_roundtrip(tmp_path, small_docs):
    docs = small_docs[:20] + [doc(10**6, np.ones(16), [[1, 0.5]], [[2, 1.0]], keywords=[9], entities=[4, 1])]
    p = tmp_path / "c.jsonl"
    assert formats.write_corpus(p, docs) == 21
    back = formats.read_corpus(p)
    for a, b in zip(docs, back):
        assert a.doc_id == b.doc_id and a.keywords == b.keywords and a.entities == b.entities
        assert np.array_equal(a.vector.dense, b.vector.dense)
        assert a.vector.learned.to_pairs() == b.vector.learned.to_pairs()
        assert a.vector.statistical.to_pairs() == b.vector.statistical.to_pairs()


def test_kg_roundtrip(tmp_path):
    kg = KnowledgeGraph([(1, 0, 2), (2, 3, 4)])
    formats.write_kg(tmp_path / "kg.jsonl", kg)
    assert formats.read_kg(tmp_path / "kg.jsonl").triplets.tolist() == kg.triplets.tolist()


def test_queries_roundtrip(tmp_path, small_docs):
    qs = [QuerySpec(small_docs[0].vector, Weights(0.2, 0.3, 0.5, 1.0), {3}, {7}, k=5, beam_width=40)]
    formats.write_queries(tmp_path / "q.jsonl", qs)
    (q,) = formats.read_queries(tmp_path / "q.jsonl")
    assert (q.weights, q.required_keywords, q.entities, q.k, q.beam_width) == (qs[0].weights, {3}, {7}, 5, 40)


def test_query_defaults(tmp_path):
    (tmp_path / "q.jsonl").write_text('{"dense": [1, 0]}\n\n')
    (q,) = formats.read_queries(tmp_path / "q.jsonl")
    assert (q.k, q.beam_width, q.weights.as_list()) == (10, 64, [1.0, 1.0, 1.0, 0.0])


def test_truth_with_and_without_gains(tmp_path):
    formats.write_truth(tmp_path / "t.jsonl", [[4, 5], [6]])
    assert formats.read_truth(tmp_path / "t.jsonl") == {0: {4: 1.0, 5: 1.0}, 1: {6: 1.0}}
    (tmp_path / "g.jsonl").write_text('{"qid": 3, "relevant": [1, 2], "gains": [2, 0.5]}\n')
    assert formats.read_truth(tmp_path / "g.jsonl") == {3: {1: 2.0, 2: 0.5}}


def test_results_lines(tmp_path, keyword_index, keyword_corpus):
    gen, _, _ = keyword_corpus
    res = greedy_hybrid_search(keyword_index, QuerySpec(gen.query_vectors(1)[0], k=3))
    formats.write_results(tmp_path / "r.jsonl", [res, None], [None, "boom"])
    a, b = [json.loads(x) for x in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert a["qid"] == 0 and [r["id"] for r in a["results"]] == res.ids and a["warnings"] == []
    assert b["error"] == "boom"


@pytest.mark.parametrize(
    "line, err, code",
    [
        ("{not json", CorpusError, "bad-json"),
        ("[1, 2]", CorpusError, "bad-record"),
        ('{"dense": [1]}', CorpusError, "bad-record"),
        ('{"id": 1, "dense": [1], "learned": [[3, 1], [2, 1]]}', ValidationError, "unsorted-sparse"),
    ],
)
def test_bad_corpus_lines(tmp_path, line, err, code):
    p = tmp_path / "bad.jsonl"
    p.write_text(line + "\n")
    with pytest.raises(err) as e:
        formats.read_corpus(p)
    assert e.value.code == code and "bad.jsonl:1" in str(e.value)


def test_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="missing-file"):
        formats.read_corpus(tmp_path / "nope.jsonl")
