"""Compiled vs NumPy kernels on the hot paths: scoring, one NN-Descent pass, graph search.

    python3 benchmarks/bench_backends.py --n 2000
"""

import argparse
import time

import numpy as np

from hybridgraph import backend
from hybridgraph.distance import kernel_query
from hybridgraph.knn import init_random_graph, nn_descent_iterate
from hybridgraph.model import QuerySpec, build_query_vector
from hybridgraph.refine import build_hybrid_index
from hybridgraph.search import greedy_hybrid_search
from hybridgraph.store import DocumentStore
from hybridgraph.synthetic import SyntheticCorpus


def timed(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--queries", type=int, default=50)
    args = ap.parse_args()

    gen = SyntheticCorpus(seed=0)
    docs = gen.documents(args.n)
    qs = gen.query_vectors(args.queries)
    with backend.use("python"):
        index = build_hybrid_index(docs, workers=1)

    print(f"{'backend':<8} {'score_all_ms':>13} {'nnd_pass_s':>11} {'search_ms':>10}")
    for name in backend.available():
        with backend.use(name):
            store = DocumentStore.from_records(docs)
            mod = backend.active()
            ks = store.kernel_store()
            q = kernel_query(build_query_vector(qs[0], (1, 1, 1)))
            ids = np.arange(len(store))
            t_score = timed(lambda: mod.score_many(ks, q, ids))
            g = init_random_graph(store, 32, 0)
            t_nnd = timed(lambda: nn_descent_iterate(g, store, 1), repeat=1)
            specs = [QuerySpec(v, beam_width=64) for v in qs]
            t_search = timed(lambda: [greedy_hybrid_search(index, s) for s in specs])
            print(f"{name:<8} {1e3 * t_score:>13.3f} {t_nnd:>11.3f} {1e3 * t_search / len(specs):>10.3f}")


if __name__ == "__main__":
    main()
