import json

import pytest

from hybridgraph.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--out", str(d / "data"), "--n", "400", "--n-queries", "20", "--seed", "3"]) == 0
    assert main(["build", "--corpus", str(d / "data/corpus.jsonl"), "--out", str(d / "i.bin"), "--threads", "1"]) == 0
    return d


def test_pipeline(workdir, capsys):
    d = workdir
    assert main(["validate", "--index", str(d / "i.bin")]) == 0
    assert main(["bench", "--index", str(d / "i.bin"), "--queries", str(d / "data/queries.jsonl"),
                 "--truth", str(d / "data/truth.jsonl"), "--beam", "16,64", "--out", str(d / "r.csv")]) == 0
    rows = (d / "r.csv").read_text().splitlines()
    assert rows[0] == "beam,qps,recall,ndcg,latency_ms" and len(rows) == 3
    assert main(["query", "--index", str(d / "i.bin"), "--queries", str(d / "data/queries.jsonl"),
                 "--out", str(d / "res.jsonl"), "--k", "5"]) == 0
    lines = [json.loads(x) for x in (d / "res.jsonl").read_text().splitlines()]
    assert len(lines) == 20 and all(len(x["results"]) == 5 for x in lines)
    assert "beam" in capsys.readouterr().out


def test_insert_and_delete(workdir, tmp_path):
    d = workdir
    assert main(["gen", "--out", str(tmp_path / "more"), "--n", "50", "--n-queries", "1", "--seed", "4"]) == 0
    src = (tmp_path / "more/corpus.jsonl").read_text().splitlines()
    shifted = []
    for line in src:
        obj = json.loads(line)
        obj["id"] += 10_000
        shifted.append(json.dumps(obj))
    (tmp_path / "new.jsonl").write_text("\n".join(shifted) + "\n")
    before = (d / "i.bin").read_bytes()
    assert main(["insert", "--index", str(d / "i.bin"), "--corpus", str(tmp_path / "new.jsonl"), "--out", str(tmp_path / "j.bin")]) == 0
    assert (d / "i.bin").read_bytes() == before
    assert main(["validate", "--index", str(tmp_path / "j.bin")]) == 0
    assert main(["delete", "--index", str(tmp_path / "j.bin"), "--ids", "10000,3", "--out", str(tmp_path / "k.bin")]) == 0


def test_chain_generation(tmp_path):
    assert main(["gen", "--out", str(tmp_path), "--n", "150", "--chains", "5"]) == 0
    assert (tmp_path / "kg.jsonl").exists()
    assert main(["build", "--corpus", str(tmp_path / "corpus.jsonl"), "--kg", str(tmp_path / "kg.jsonl"),
                 "--out", str(tmp_path / "k.bin"), "--degree", "8", "--knn-k", "16"]) == 0
    assert main(["validate", "--index", str(tmp_path / "k.bin")]) == 0


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["build", "--bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2


@pytest.mark.parametrize(
    "argv, code",
    [
        (["validate", "--index", "/nonexistent/x.bin"], "missing-file"),
        (["delete", "--index", "{i}", "--ids", "999999", "--out", "{t}/o.bin"], "unknown-id"),
        (["build", "--corpus", "{d}/corpus.jsonl", "--out", "{t}/o.bin", "--degree", "7"], "degree-not-even"),
    ],
)
def test_failures_print_one_line(workdir, tmp_path, capsys, argv, code):
    argv = [a.format(i=workdir / "i.bin", t=tmp_path, d=workdir / "data") for a in argv]
    assert main(argv) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error: {code}:")


def test_corrupt_index_reports_code(workdir, tmp_path, capsys):
    data = bytearray((workdir / "i.bin").read_bytes())
    data[-1] ^= 0xFF
    (tmp_path / "bad.bin").write_bytes(bytes(data))
    assert main(["validate", "--index", str(tmp_path / "bad.bin")]) == 1
    assert capsys.readouterr().err.startswith("error: checksum-failure")
