"""JSON-lines readers and writers for corpora, knowledge graphs, queries, truth and results.

Sparse vectors are written as ``[[index, value], ...]`` lists.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CorpusError, HybridIndexError, ValidationError
from .model import DocumentRecord, FusedVector, KnowledgeGraph, QuerySpec, SparseVector, Weights


def _lines(path) -> Iterator[tuple[int, dict]]:
    p = Path(path)
    if not p.exists():
        raise CorpusError("missing-file", str(p))
    with p.open() as fh:
        for no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError("bad-json", f"{p}:{no}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise CorpusError("bad-record", f"{p}:{no}: expected an object")
            yield no, obj


def _write(path, rows: Iterable[dict]) -> int:
    n = 0
    with Path(path).open("w") as fh:
        for r in rows:
            fh.write(json.dumps(r, separators=(",", ":")) + "\n")
            n += 1
    return n


def _vector(obj: dict) -> FusedVector:
    if "dense" not in obj:
        raise ValidationError("bad-record", "missing 'dense'")
    return FusedVector(
        np.asarray(obj["dense"], dtype=np.float32),
        SparseVector.from_pairs(obj.get("learned", [])),
        SparseVector.from_pairs(obj.get("statistical", [])),
    )


def _vector_obj(v: FusedVector) -> dict:
    return {
        "dense": [float(x) for x in v.dense.tolist()],
        "learned": v.learned.to_pairs(),
        "statistical": v.statistical.to_pairs(),
    }


def _wrap(path, no: int, fn):
    try:
        return fn()
    except HybridIndexError as exc:
        raise type(exc)(exc.code, f"{path}:{no}: {exc}") from None
    except (TypeError, ValueError, KeyError) as exc:
        raise CorpusError("bad-record", f"{path}:{no}: {exc}") from None


def read_corpus(path) -> list[DocumentRecord]:
    """``{"id", "dense", "learned", "statistical", "keywords"?, "entities"?}`` per line."""

    def doc(obj):
        kw = obj.get("keywords")
        return DocumentRecord(int(obj["id"]), _vector(obj), keywords=kw, entities=obj.get("entities", ()))

    return [_wrap(path, no, lambda o=obj: doc(o)) for no, obj in _lines(path)]


def write_corpus(path, docs: Sequence[DocumentRecord]) -> int:
    def row(d: DocumentRecord):
        obj = {"id": d.doc_id, **_vector_obj(d.vector)}
        if d.keywords != frozenset(d.vector.statistical.indices.tolist()):
            obj["keywords"] = sorted(d.keywords)
        if d.entities:
            obj["entities"] = sorted(d.entities)
        return obj

    return _write(path, (row(d) for d in docs))


def read_kg(path) -> KnowledgeGraph:
    """``{"s", "r", "t"}`` triplets per line."""
    return KnowledgeGraph([_wrap(path, no, lambda o=o: (int(o["s"]), int(o["r"]), int(o["t"]))) for no, o in _lines(path)])


def write_kg(path, kg: KnowledgeGraph) -> int:
    return _write(path, ({"s": s, "r": r, "t": t} for s, r, t in kg.triplets.tolist()))


def read_queries(path) -> list[QuerySpec]:
    """Query lines; weights are ``[w_d, w_s, w_f]`` or ``[w_d, w_s, w_f, w_k]``."""

    def query(obj):
        return QuerySpec(
            _vector(obj),
            Weights.of(obj.get("weights", [1.0, 1.0, 1.0, 0.0])),
            required_keywords=obj.get("keywords", ()),
            entities=obj.get("entities", ()),
            k=int(obj.get("k", 10)),
            beam_width=int(obj.get("beam", max(64, int(obj.get("k", 10))))),
        )

    return [_wrap(path, no, lambda o=obj: query(o)) for no, obj in _lines(path)]


def write_queries(path, queries: Sequence[QuerySpec]) -> int:
    def row(q: QuerySpec):
        obj = {**_vector_obj(q.vector), "weights": q.weights.as_list(), "k": q.k, "beam": q.beam_width}
        if q.required_keywords:
            obj["keywords"] = sorted(q.required_keywords)
        if q.entities:
            obj["entities"] = sorted(q.entities)
        return obj

    return _write(path, (row(q) for q in queries))


def read_truth(path) -> dict[int, dict[int, float]]:
    """``{"qid", "relevant", "gains"?}`` per line -> qid -> doc -> gain (1 when no gains)."""
    out = {}
    for no, obj in _lines(path):

        def rel(o=obj):
            docs = [int(d) for d in o["relevant"]]
            gains = [float(g) for g in o.get("gains", [1.0] * len(docs))]
            if len(gains) != len(docs):
                raise ValueError("'gains' and 'relevant' differ in length")
            return int(o["qid"]), dict(zip(docs, gains))

        qid, r = _wrap(path, no, rel)
        out[qid] = r
    return out


def write_truth(path, truth: Sequence[Sequence[int]] | Mapping[int, Sequence[int]]) -> int:
    items = truth.items() if isinstance(truth, Mapping) else enumerate(truth)
    return _write(path, ({"qid": int(q), "relevant": [int(d) for d in rel]} for q, rel in items))


def write_results(path, results: Sequence, errors: Sequence[str | None] | None = None) -> int:
    """One ``{"qid", "results", "warnings"}`` line per query; failed queries carry ``"error"``."""
    errors = errors or [None] * len(results)

    def row(qid, res, err):
        if res is None:
            return {"qid": qid, "results": [], "warnings": [], "error": err}
        return {
            "qid": qid,
            "results": [{"id": i, "score": s} for i, s in zip(res.ids, res.scores)],
            "warnings": res.warnings,
        }

    return _write(path, (row(i, r, e) for i, (r, e) in enumerate(zip(results, errors))))
