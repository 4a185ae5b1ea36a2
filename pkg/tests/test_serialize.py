import struct

import numpy as np
import pytest

from hybridgraph.errors import IndexFormatError
from hybridgraph.maintenance import mark_delete
from hybridgraph.model import QuerySpec, Weights
from hybridgraph.search import greedy_hybrid_search
from hybridgraph.serialize import _HEAD, MAGIC, checksum, deserialize_index, from_bytes, serialize_index, to_bytes


def _code(data):
    with pytest.raises(IndexFormatError) as e:
        from_bytes(bytes(data))
    return e.value.code


def test_roundtrip_replays_queries(tmp_path, chain_index, chains):
    p = tmp_path / "i.bin"
    size = serialize_index(chain_index, p)
    assert size == p.stat().st_size
    back = deserialize_index(p, check=True)
    assert to_bytes(back) == p.read_bytes()
    for v, e in zip(chains.queries, chains.query_entities):
        for q in (QuerySpec(v), QuerySpec(v, Weights(0.2, 0.5, 0.3, 1.0), entities={e})):
            a, b = greedy_hybrid_search(chain_index, q), greedy_hybrid_search(back, q)
            assert (a.ids, a.scores, a.warnings) == (b.ids, b.scores, b.warnings)


def test_serialize_twice_identical(keyword_index):
    assert to_bytes(keyword_index) == to_bytes(keyword_index)


def test_optional_sections_omitted(built, chain_index):
    assert b"LOGI" not in to_bytes(built) and b"KGRF" not in to_bytes(built)
    assert b"LOGI" in to_bytes(chain_index)
    back = from_bytes(to_bytes(built))
    assert len(back.logical) == 0 and back.kg is None


def test_deleted_flags_survive(keyword_index):
    ids = keyword_index.store.doc_ids[:5].tolist()
    back = from_bytes(to_bytes(mark_delete(keyword_index, ids)))
    assert back.store.deleted[:5].all() and not back.store.deleted[5:].any()


def test_norms_recomputed_identically(keyword_index):
    back = from_bytes(to_bytes(keyword_index))
    assert np.array_equal(back.store.norms, keyword_index.store.norms)
    assert np.array_equal(back.entry_order, keyword_index.entry_order)


@pytest.fixture(scope="module")
def data(built):
    return bytearray(to_bytes(built))


class TestCorruption:
    def test_bad_magic(self, data):
        assert _code(b"NOTANIDX" + data[8:]) == "not-an-index"
        assert _code(b"") == "not-an-index"

    def test_version(self, data):
        d = bytearray(data)
        struct.pack_into("<I", d, 8, 99)
        assert _code(d) == "version-mismatch"

    def test_payload_flip(self, data):
        d = bytearray(data)
        d[-3] ^= 0xFF
        assert _code(d) == "checksum-failure"

    def test_header_flip(self, data):
        d = bytearray(data)
        d[20] ^= 0x01
        assert _code(d) == "checksum-failure"

    @pytest.mark.parametrize("cut", [10, 40, 200, -1])
    def test_truncated(self, data, cut):
        assert _code(data[:cut]) == "truncated-file"

    def test_rule_code_out_of_range(self, data):
        d = bytearray(data)
        fields = list(_HEAD.unpack_from(d))
        fields[11] = 7
        _HEAD.pack_into(d, 0, *fields)
        struct.pack_into("<Q", d, _HEAD.size, checksum(bytes(d[: _HEAD.size])))
        assert _code(d) == "value-out-of-range"

    def test_missing_file(self, tmp_path):
        with pytest.raises(IndexFormatError, match="missing-file"):
            deserialize_index(tmp_path / "none.bin")


def test_magic_constant():
    assert len(MAGIC) == 8
