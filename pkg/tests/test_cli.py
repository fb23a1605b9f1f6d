import json

import numpy as np
import pytest

from clausevec.cli import main
from clausevec.export import read_bin

from conftest import EXAMPLE_TEXT


@pytest.fixture
def example_file(tmp_path):
    p = tmp_path / "example.p"
    p.write_text(EXAMPLE_TEXT)
    return p


def _records(path):
    return [json.loads(l) for l in path.read_text().splitlines()]


def test_vectorize_term_walks(example_file, tmp_path):
    out = tmp_path / "v.jsonl"
    assert main(["vectorize", str(example_file), "--encoder", "term_walks", "-o", str(out)]) == 0
    recs = _records(out)
    assert [r["id"] for r in recs] == ["c1", "c2"]
    assert recs[0]["values"][11] == 2 and recs[1]["values"][17] == 2


@pytest.mark.parametrize("encoder", ["chain_patterns", "gcn", "mpnn", "glstm_mpnn"])
def test_vectorize_is_deterministic(encoder, example_file, tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    args = ["vectorize", str(example_file), "--encoder", encoder, "--dim", "16", "--seed", "3", "--format", "bin"]
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    with open(a, "rb") as fh:
        arr = read_bin(fh)
    assert arr.shape == (2, 32 if encoder == "chain_patterns" else 16)


def test_vectorize_vocabulary_mode(example_file, tmp_path):
    out = tmp_path / "v.csv"
    assert main(["vectorize", str(example_file), "--encoder", "term_walks", "--walk-mode", "vocabulary",
                 "--format", "csv", "-o", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert len(header) == 3 + 7


def test_vectorize_config_file(example_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"encoder": "rgcn", "d": 12, "rounds": 1}))
    out = tmp_path / "v.jsonl"
    assert main(["vectorize", str(example_file), "--config", str(cfg), "-o", str(out)]) == 0
    assert len(_records(out)[0]["values"]) == 12


def test_exit_codes(example_file, tmp_path):
    bad = tmp_path / "bad.p"
    bad.write_text("cnf(c3, axiom, (p(A) | )).")
    assert main(["vectorize", str(bad), "--encoder", "term_walks"]) == 2
    assert main(["vectorize", str(tmp_path / "missing.p"), "--encoder", "term_walks"]) == 2
    assert main(["vectorize", str(example_file), "--encoder", "transformer"]) == 3
    assert main(["bench", "--encoders", ""]) == 2
    assert main(["bench", "--encoders", "nope"]) == 3
    assert main(["generate", "--clauses", "-3"]) == 3


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.p", tmp_path / "b.p"
    assert main(["generate", "--seed", "4", "--clauses", "30", "-o", str(a)]) == 0
    assert main(["generate", "--seed", "4", "--clauses", "30", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 30


def test_bench_command(tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main(["bench", "--encoders", "term_walks,chain_patterns", "--generate", "30",
                 "--repetitions", "2", "--dim", "8", "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert set(doc["encoders"]) == {"term_walks", "chain_patterns"}
    assert "chain_patterns" in capsys.readouterr().out


def test_train_command(tmp_path):
    report, ckpt = tmp_path / "r.json", tmp_path / "ckpt"
    assert main(["train", "--encoder", "gcn", "--dim", "8", "--rounds", "1", "--epochs", "2",
                 "--generate", "40", "--report", str(report), "--checkpoint", str(ckpt)]) == 0
    doc = json.loads(report.read_text())
    assert len(doc["epochs"]) == 3 and doc["config"]["d"] == 8
    assert (tmp_path / "ckpt.json").exists() and (tmp_path / "ckpt.head.bin").exists()
    assert main(["train", "--encoder", "term_walks"]) == 3
    assert main(["train", "--encoder", "gcn", "--task", "bogus"]) == 3


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--encoder", "rgcn", "--clauses", "2", "--dim", "4", "--rounds", "1"]) == 0
    assert "rgcn" in capsys.readouterr().out
