import numpy as np
import pytest

from hybridgraph.distance import hybrid_score
from hybridgraph.evaluate import brute_force_topk, recall_at_k
from hybridgraph.maintenance import mark_delete
from hybridgraph.model import FusedVector, QuerySpec, Weights, build_query_vector
from hybridgraph.search import batch_query, greedy_hybrid_search, keyword_postfilter, select_entry_points
from hybridgraph.synthetic import with_terms

WEIGHTS = [Weights(1, 1, 1), Weights(0.8, 0.1, 0.1), Weights(0.05, 0.6, 0.35), Weights(0, 0, 1)]


@pytest.fixture(scope="module")
def probes(keyword_corpus):
    gen, _, _ = keyword_corpus
    return gen.query_vectors(25)


@pytest.mark.parametrize("w", WEIGHTS)
def test_fast_path_equals_generic_traversal(kernel, keyword_index, probes, w):
    for v in probes[:10]:
        q = QuerySpec(v, w, k=10, beam_width=32)
        a = greedy_hybrid_search(keyword_index, q)
        b = greedy_hybrid_search(keyword_index, q, engine="generic")
        assert (a.ids, a.scores, a.n_scored) == (b.ids, b.scores, b.n_scored)


def test_results_sorted_and_scored_exactly(keyword_index, probes):
    w = Weights(0.3, 0.5, 0.2)
    for v in probes[:5]:
        res = greedy_hybrid_search(keyword_index, QuerySpec(v, w))
        qv = build_query_vector(v, w)
        assert res.scores == sorted(res.scores, reverse=True)
        for node, s in zip(res.nodes, res.scores):
            assert s == hybrid_score(qv, keyword_index.store.vector(node))


def test_monotone_beam(keyword_index, probes):
    means = []
    for beam in (10, 20, 40, 80, 160):
        rec = []
        for v in probes:
            q = QuerySpec(v, Weights(0.4, 0.4, 0.2), k=10, beam_width=beam)
            rec.append(recall_at_k(greedy_hybrid_search(keyword_index, q).ids, brute_force_topk(q, keyword_index.store).ids, 10))
        means.append(np.mean(rec))
    assert all(b >= a - 1e-12 for a, b in zip(means, means[1:])), means


def test_queries_leave_index_untouched(keyword_index, probes):
    before = keyword_index.semantic.tobytes(), keyword_index.keyword_edges.idx.tobytes()
    for w in WEIGHTS:
        greedy_hybrid_search(keyword_index, QuerySpec(probes[0], w))
    assert (keyword_index.semantic.tobytes(), keyword_index.keyword_edges.idx.tobytes()) == before
    assert not keyword_index.semantic.flags.writeable


class TestKeywords:
    def test_every_result_has_all_required_terms(self, keyword_index, keyword_corpus, probes):
        _, _, groups = keyword_corpus
        kw = keyword_index.store.keyword_sets
        for g in groups:
            for v in probes[:5]:
                for val in (0.3, 1.0):
                    res = greedy_hybrid_search(keyword_index, QuerySpec(with_terms(v, g, val), required_keywords=g))
                    assert res.ids and all(g <= kw[o] for o in res.nodes)
                # a query that does not mention the terms may come back short, never wrong
                res = greedy_hybrid_search(keyword_index, QuerySpec(v, required_keywords=g))
                assert all(g <= kw[o] for o in res.nodes)

    def test_agrees_with_filtered_oracle(self, keyword_index, keyword_corpus, probes):
        _, _, groups = keyword_corpus
        rec = []
        for g in groups:
            for v in probes[:5]:
                q = QuerySpec(with_terms(v, g), required_keywords=g, k=10, beam_width=64)
                got = greedy_hybrid_search(keyword_index, q)
                truth = brute_force_topk(q, keyword_index.store)
                assert set(got.ids) <= set(brute_force_topk(q, keyword_index.store, k=len(keyword_index.store)).ids)
                rec.append(recall_at_k(got.ids, truth.ids, 10))
        assert np.mean(rec) >= 0.95

    def test_unknown_term_reports_shortfall(self, keyword_index, probes):
        res = greedy_hybrid_search(keyword_index, QuerySpec(probes[0], required_keywords={10**8}))
        assert res.ids == [] and res.shortfall and "keyword-shortfall" in res.warnings


class TestPostfilter:
    kw = [frozenset(), frozenset({7}), frozenset({7, 8}), frozenset({8})]
    alive = np.zeros(4, bool)

    def test_no_keywords_passes_through(self):
        top = [(-3.0, 0), (-2.0, 1)]
        assert keyword_postfilter(top, {}, frozenset(), 2, self.kw, self.alive) == (top, False)

    def test_twin_pool_rescues_evicted_match(self):
        top = [(-3.0, 0), (-2.5, 3)]
        items, short = keyword_postfilter(top, {2: -1.0}, frozenset({7}), 2, self.kw, self.alive)
        assert items == [(-1.0, 2)] and short

    def test_all_vs_any(self):
        top = [(-3.0, 1), (-2.0, 2), (-1.0, 3)]
        req = frozenset({7, 8})
        assert [o for _, o in keyword_postfilter(top, {}, req, 3, self.kw, self.alive)[0]] == [2]
        assert [o for _, o in keyword_postfilter(top, {}, req, 3, self.kw, self.alive, "any")[0]] == [1, 2, 3]
        with pytest.raises(ValueError):
            keyword_postfilter(top, {}, req, 3, self.kw, self.alive, "most")

    def test_deleted_dropped(self):
        dead = np.array([False, True, False, False])
        items, _ = keyword_postfilter([(-3.0, 1), (-2.0, 2)], {}, frozenset({7}), 2, self.kw, dead)
        assert items == [(-2.0, 2)]


class TestEntities:
    def test_hop_reward_locality(self, chain_index, chains):
        wk = 0.7
        for v, e in zip(chains.queries[:8], chains.query_entities):
            q = QuerySpec(v, Weights(1, 1, 1, wk), entities={e})
            res = greedy_hybrid_search(chain_index, q)
            qv = build_query_vector(v, q.weights)
            for node, s in zip(res.nodes, res.scores):
                raw = hybrid_score(qv, chain_index.store.vector(node))
                h = res.hops.get(node, 0)
                assert s == (raw + wk / h if h else raw)
            assert all(1 <= h <= 2 for h in res.hops.values())

    def test_chain_answers_found_only_with_reward(self, chain_index, chains):
        hit = {0.0: [], 1.0: []}
        for v, e, ans in zip(chains.queries, chains.query_entities, chains.answers):
            for wk in hit:
                res = greedy_hybrid_search(chain_index, QuerySpec(v, Weights(1, 1, 1, wk), entities={e}))
                hit[wk].append(recall_at_k(res.ids, ans, 10))
        assert np.mean(hit[1.0]) - np.mean(hit[0.0]) >= 0.5

    def test_x_hops_limits_propagation(self, chain_index, chains):
        v, e = chains.queries[0], chains.query_entities[0]
        q = QuerySpec(v, Weights(1, 1, 1, 1), entities={e})
        assert max(greedy_hybrid_search(chain_index, q, x_hops=1).hops.values()) == 1
        assert greedy_hybrid_search(chain_index, q, x_hops=0).hops == {}

    def test_missing_entity_falls_back(self, chain_index, chains):
        q = QuerySpec(chains.queries[0], Weights(1, 1, 1, 1), entities={10**7})
        seeds = select_entry_points(q, chain_index)
        assert not seeds.entity_mode and "entity-not-found" in seeds.warnings
        assert "entity-not-found" in greedy_hybrid_search(chain_index, q).warnings


def test_deleted_nodes_routable_but_never_returned(keyword_index, probes):
    target = greedy_hybrid_search(keyword_index, QuerySpec(probes[0], k=1)).ids[0]
    idx = mark_delete(keyword_index, [target])
    node = idx.store.node_of[target]
    q = QuerySpec(idx.store.vector(node), k=10)
    res = greedy_hybrid_search(idx, q, engine="generic")
    assert target not in res.ids and len(res.ids) == 10
    assert node in res.expanded
    assert greedy_hybrid_search(idx, q).ids == res.ids


class TestBatch:
    def test_parallel_equals_serial(self, keyword_index, keyword_corpus):
        gen, _, groups = keyword_corpus
        qs = [QuerySpec(v, Weights(*w)) for v, w in zip(gen.query_vectors(100), gen.simplex_weights(100))]
        qs[::7] = [QuerySpec(q.vector, required_keywords=groups[0]) for q in qs[::7]]
        serial = batch_query(keyword_index, qs)
        par = batch_query(keyword_index, qs, workers=8)
        assert [(r.ids, r.scores) for r in serial.results] == [(r.ids, r.scores) for r in par.results]
        assert serial.qps > 0

    def test_single_and_empty(self, keyword_index, probes):
        q = QuerySpec(probes[1])
        assert batch_query(keyword_index, [q]).results[0].ids == greedy_hybrid_search(keyword_index, q).ids
        empty = batch_query(keyword_index, [])
        assert empty.results == [] and empty.qps is None

    def test_errors_do_not_abort(self, keyword_index, probes):
        bad = QuerySpec(FusedVector(np.ones(3, np.float32)))
        rep = batch_query(keyword_index, [QuerySpec(probes[0]), bad, QuerySpec(probes[1])], workers=2)
        assert rep.errors[0] is None and rep.errors[2] is None
        assert rep.results[1] is None and "dimension-mismatch" in rep.errors[1]
