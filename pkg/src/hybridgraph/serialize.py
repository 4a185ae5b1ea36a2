"""Binary index file.

Layout (little-endian throughout)::

    header   magic(8) version(u32) n(u64) m(u64) degree(u32) flags(u32)
             x_hops(u32) fanout_cap(u32) seed(u64) k(u32) iters(u32)
             keyword_rule(u32) n_sections(u32) header_checksum(u64)
    section  tag(4) payload_len(u64) checksum(u64) payload

A payload is a sequence of arrays, each written as ``count(u64)`` then raw
items. Integers are stored as u32 and floats as f32. Checksums are 8-byte
BLAKE2b digests. Optional sections (keyword edges, logical edges, knowledge
graph) are omitted when empty and signalled in ``flags``.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import IndexFormatError
from .index import BuildParams, HybridIndex
from .logical import EntityMap, LogicalEdges
from .model import INDEX_DTYPE, STORE_DTYPE, KnowledgeGraph
from .refine import KEYWORD_RULES
from .store import CSR, DocumentStore

MAGIC = b"HYBGIDX\x00"
VERSION = 1

_HEAD = struct.Struct("<8sIQQIIIIQIIII")
_SEC = struct.Struct("<4sQQ")
_U64 = struct.Struct("<Q")

F_KEYWORD = 1
F_LOGICAL = 2
F_KG = 4

_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")
_U8 = np.dtype("u1")


def checksum(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _u32(a) -> np.ndarray:
    a = np.asarray(a)
    if a.size and (a.min() < 0 or a.max() > 0xFFFFFFFF):
        raise IndexFormatError("value-out-of-range", "integer field does not fit in 32 bits")
    return a.astype(_U32)


def _payload(arrays) -> bytes:
    out = bytearray()
    for a in arrays:
        a = np.ascontiguousarray(a)
        out += _U64.pack(a.size)
        out += a.tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes, tag: str):
        self.buf, self.pos, self.tag = buf, 0, tag

    def take(self, dtype) -> np.ndarray:
        if self.pos + 8 > len(self.buf):
            raise IndexFormatError("truncated-file", f"section {self.tag} ends early")
        (count,) = _U64.unpack_from(self.buf, self.pos)
        self.pos += 8
        nbytes = count * np.dtype(dtype).itemsize
        if self.pos + nbytes > len(self.buf):
            raise IndexFormatError("truncated-file", f"section {self.tag} ends early")
        a = np.frombuffer(self.buf, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return a


def _csr_arrays(c: CSR, values: bool = False):
    arrs = [_u32(c.ptr), _u32(c.idx)]
    if values:
        arrs.append(c.values.astype(_F32))
    return arrs


def _sections(index: HybridIndex) -> list[tuple[bytes, bytes]]:
    s = index.store
    secs = [
        (b"VECS", _payload([s.dense.astype(_F32).ravel(), *_csr_arrays(s.learned, True), *_csr_arrays(s.statistical, True)])),
        (b"KWDS", _payload(_csr_arrays(s.keywords))),
        (b"ENTS", _payload(_csr_arrays(s.entities))),
        (b"SEMA", _payload([_u32(index.semantic).ravel(), _u32(index.forward_count), _u32(index.reverse_count)])),
    ]
    if len(index.keyword_edges.idx):
        secs.append((b"KEDG", _payload(_csr_arrays(index.keyword_edges))))
    if len(index.logical):
        secs.append((b"LOGI", _payload([_u32(index.logical.ptr), _u32(index.logical.edges).ravel()])))
    em = index.entity_map
    secs += [
        (b"EMAP", _payload([_u32(em.keys), _u32(em.ptr), _u32(em.nodes)])),
        (b"ENTR", _payload([_u32(index.entry_order)])),
    ]
    if index.kg is not None and len(index.kg):
        secs.append((b"KGRF", _payload([_u32(index.kg.triplets).ravel()])))
    secs += [
        (b"DIDS", _payload([_u32(s.doc_ids)])),
        (b"DELE", _payload([s.deleted.astype(_U8)])),
    ]
    return secs


def to_bytes(index: HybridIndex) -> bytes:
    """Deterministic byte image of ``index``."""
    p = index.params
    secs = _sections(index)
    tags = {t for t, _ in secs}
    flags = (F_KEYWORD if b"KEDG" in tags else 0) | (F_LOGICAL if b"LOGI" in tags else 0) | (F_KG if b"KGRF" in tags else 0)
    head = _HEAD.pack(
        MAGIC, VERSION, index.n, index.store.dim, p.degree, flags, p.x_hops, p.fanout_cap, p.seed, p.k, p.iters,
        KEYWORD_RULES.index(p.keyword_rule), len(secs),
    )
    out = bytearray(head)
    out += _U64.pack(checksum(head))
    for tag, payload in secs:
        out += _SEC.pack(tag, len(payload), checksum(payload))
        out += payload
    return bytes(out)


def serialize_index(index: HybridIndex, path) -> int:
    """Write ``index`` to ``path``; returns the byte count."""
    data = to_bytes(index)
    Path(path).write_bytes(data)
    return len(data)


def _parse_header(data: bytes):
    if len(data) < 8 or data[:8] != MAGIC:
        raise IndexFormatError("not-an-index", "bad magic")
    if len(data) < 12:
        raise IndexFormatError("truncated-file", "header ends early")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise IndexFormatError("version-mismatch", f"file version {version}, reader version {VERSION}")
    if len(data) < _HEAD.size + 8:
        raise IndexFormatError("truncated-file", "header ends early")
    head = data[: _HEAD.size]
    (stored,) = _U64.unpack_from(data, _HEAD.size)
    if checksum(head) != stored:
        raise IndexFormatError("checksum-failure", "header")
    return _HEAD.unpack(head)


def _read_sections(data: bytes, count: int) -> dict[str, bytes]:
    pos = _HEAD.size + 8
    out = {}
    for _ in range(count):
        if pos + _SEC.size > len(data):
            raise IndexFormatError("truncated-file", "section header ends early")
        tag, length, stored = _SEC.unpack_from(data, pos)
        pos += _SEC.size
        if pos + length > len(data):
            raise IndexFormatError("truncated-file", f"section {tag.decode(errors='replace')} ends early")
        payload = data[pos : pos + length]
        pos += length
        if checksum(payload) != stored:
            raise IndexFormatError("checksum-failure", f"section {tag.decode(errors='replace')}")
        out[tag.decode()] = payload
    if pos != len(data):
        raise IndexFormatError("trailing-bytes", f"{len(data) - pos} bytes after last section")
    return out


def _csr(r: _Reader, values: bool = False) -> CSR:
    ptr = r.take(_U32).astype(np.int64)
    idx = r.take(_U32).astype(INDEX_DTYPE)
    vals = r.take(_F32).astype(STORE_DTYPE) if values else None
    return CSR(ptr, idx, vals)


def from_bytes(data: bytes, check: bool = False) -> HybridIndex:
    (_, _, n, m, degree, flags, x_hops, fanout, seed, k, iters, rule, count) = _parse_header(data)
    if rule >= len(KEYWORD_RULES):
        raise IndexFormatError("value-out-of-range", f"keyword rule code {rule}")
    secs = _read_sections(data, count)
    need = {"VECS", "KWDS", "ENTS", "SEMA", "EMAP", "ENTR", "DIDS", "DELE"}
    need |= {"KEDG"} if flags & F_KEYWORD else set()
    need |= {"LOGI"} if flags & F_LOGICAL else set()
    need |= {"KGRF"} if flags & F_KG else set()
    if missing := need - secs.keys():
        raise IndexFormatError("missing-section", ",".join(sorted(missing)))
    r = {t: _Reader(b, t) for t, b in secs.items()}

    dense = r["VECS"].take(_F32).astype(STORE_DTYPE)
    if dense.size != n * m:
        raise IndexFormatError("corrupt-section", "dense block size does not match header")
    learned, stat = _csr(r["VECS"], True), _csr(r["VECS"], True)
    keywords, entities = _csr(r["KWDS"]), _csr(r["ENTS"])
    doc_ids = r["DIDS"].take(_U32).astype(np.uint64)
    deleted = r["DELE"].take(_U8).astype(bool)
    store = DocumentStore(doc_ids, dense.reshape(n, m), learned, stat, keywords, entities, deleted)

    semantic = r["SEMA"].take(_U32).astype(np.int32).reshape(n, degree)
    fwd = r["SEMA"].take(_U32).astype(np.int32)
    rc = r["SEMA"].take(_U32).astype(np.int32)
    kw_edges = _csr(r["KEDG"]) if "KEDG" in r else CSR(np.zeros(n + 1, np.int64), np.empty(0, INDEX_DTYPE))
    if "LOGI" in r:
        ptr = r["LOGI"].take(_U32).astype(np.int64)
        logical = LogicalEdges(ptr, r["LOGI"].take(_U32).astype(np.int64).reshape(-1, 4))
    else:
        logical = LogicalEdges.empty(n)
    em = r["EMAP"]
    emap = EntityMap(em.take(_U32).astype(np.int64), em.take(_U32).astype(np.int64), em.take(_U32).astype(np.int64))
    entry = r["ENTR"].take(_U32).astype(np.int64)
    kg = KnowledgeGraph(r["KGRF"].take(_U32).astype(np.int64).reshape(-1, 3).tolist()) if "KGRF" in r else None

    params = BuildParams(k=k, iters=iters, degree=degree, seed=seed, keyword_rule=KEYWORD_RULES[rule], fanout_cap=fanout, x_hops=x_hops)
    index = HybridIndex(store, params, semantic, fwd, rc, kw_edges, logical, emap, entry, kg)
    if check and (errs := index.check_invariants()):
        raise IndexFormatError("invalid-index", errs[0])
    return index


def deserialize_index(path, check: bool = False) -> HybridIndex:
    """Load an index file; ``check`` runs the invariant scan after loading."""
    p = Path(path)
    if not p.exists():
        raise IndexFormatError("missing-file", str(p))
    return from_bytes(p.read_bytes(), check)
