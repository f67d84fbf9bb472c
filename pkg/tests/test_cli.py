import json
from pathlib import Path

import pytest

from topicrefine.cli import run
from topicrefine.topics import load_topic_set

FIXTURE = Path(__file__).parent / "data" / "synthetic"
FAST = ["--k", "4", "--iterations", "60", "--min-doc-freq", "2"]


def fixture_args():
    return ["--corpus", str(FIXTURE / "corpus.txt"), "--embeddings", str(FIXTURE / "embeddings.txt")]


def tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_unknown_flag_exits_one(capsys):
    assert run(["lda", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "error_code: usage_error" in err


def test_missing_subcommand_and_out(capsys, tmp_path):
    assert run([]) == 1
    assert run(["lda", "--corpus", str(FIXTURE / "corpus.txt")]) == 1
    assert "--out is required" in capsys.readouterr().err


def test_version(capsys):
    assert run(["--version"]) == 0
    assert "topicrefine" in capsys.readouterr().out


def test_lda_writes_topics_and_manifest(tmp_path):
    out = tmp_path / "lda"
    assert run(["lda", *fixture_args()[:2], *FAST, "--out", str(out), "--deterministic"]) == 0
    topics = load_topic_set(out / "topics.txt")
    assert (topics.K, topics.N) == (4, 10)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["lda"]["K"] == 4
    assert manifest["config"]["seed"] == 42
    assert manifest["started_at"] is None
    assert json.loads((out / "config.json").read_text()) == manifest["config"]


def test_config_file_is_overridden_by_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lda": {"K": 3, "iterations": 40}, "seed": 7}), encoding="utf-8")
    out = tmp_path / "o"
    assert run(["lda", *fixture_args()[:2], "--config", str(cfg), "--k", "2", "--out", str(out)]) == 0
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["lda"]["K"] == 2
    assert resolved["lda"]["iterations"] == 40
    assert resolved["seed"] == 7


def test_replaying_recorded_config_reproduces_output(tmp_path):
    first = tmp_path / "a"
    assert run(["lda", *fixture_args()[:2], *FAST, "--seed", "3", "--out", str(first)]) == 0
    second = tmp_path / "b"
    assert run(["lda", "--config", str(first / "config.json"), "--out", str(second)]) == 0
    assert (first / "topics.txt").read_bytes() == (second / "topics.txt").read_bytes()


def test_bad_config_json_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{nope", encoding="utf-8")
    assert run(["lda", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "error_code: config_error" in capsys.readouterr().err


def test_k_above_vocabulary_is_config_error(tmp_path):
    assert run(["lda", *fixture_args()[:2], "--k", "5000", "--out", str(tmp_path / "o")]) == 1


def test_malformed_topics_is_data_error(tmp_path, capsys):
    bad = tmp_path / "topics.txt"
    bad.write_text("a b c\nd e\n", encoding="utf-8")
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("a\nb\n", encoding="utf-8")
    code = run(["refine", "--topics", str(bad), "--vocab", str(vocab),
                "--embeddings", str(FIXTURE / "embeddings.txt"), "--backend", "mock", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "error_code: format_error" in capsys.readouterr().err


def test_missing_input_file_is_data_error(tmp_path):
    assert run(["lda", "--corpus", str(tmp_path / "absent.txt"), "--out", str(tmp_path / "o")]) == 2


def test_remote_backend_failure_exits_three(tmp_path, monkeypatch, capsys):
    lda = tmp_path / "lda"
    assert run(["lda", *fixture_args()[:2], *FAST, "--out", str(lda)]) == 0
    monkeypatch.setenv("TOPICREFINE_API_KEY", "sk-test")
    monkeypatch.setenv("TOPICREFINE_API_URL", "http://127.0.0.1:9/v1/chat/completions")
    code = run(["refine", "--topics", str(lda / "topics.txt"), "--vocab", str(lda / "vocab.txt"),
                "--embeddings", str(FIXTURE / "embeddings.txt"), "--max-retries", "0", "--timeout", "2",
                "--jobs", "1", "--out", str(tmp_path / "r")])
    assert code == 3
    assert "error_code:" in capsys.readouterr().err


def test_refine_and_eval_subcommands(tmp_path):
    lda = tmp_path / "lda"
    assert run(["lda", *fixture_args()[:2], *FAST, "--out", str(lda)]) == 0
    ref = tmp_path / "refine"
    assert run(["refine", "--topics", str(lda / "topics.txt"), "--vocab", str(lda / "vocab.txt"),
                "--embeddings", str(FIXTURE / "embeddings.txt"), "--backend", "mock",
                "--out", str(ref)]) == 0
    records = [json.loads(l) for l in (ref / "records.jsonl").read_text().splitlines()]
    assert len(records) == 40
    ev = tmp_path / "eval"
    assert run(["eval", "--topics", str(ref / "topics.txt"), "--baseline", str(lda / "topics.txt"),
                "--embeddings", str(FIXTURE / "embeddings.txt"), "--reference", str(FIXTURE / "corpus.txt"),
                "--out", str(ev)]) == 0
    delta = json.loads((ev / "delta.json").read_text())
    assert set(delta) == {"NPMI", "UCI", "S", "D"}
    assert (ev / "delta.md").read_text().startswith("| Metric |")
    assert len((ev / "per_word_npmi.csv").read_text().splitlines()) == 4


def test_classify_subcommand(tmp_path):
    lda = tmp_path / "lda"
    assert run(["lda", *fixture_args()[:2], *FAST, "--out", str(lda)]) == 0
    out = tmp_path / "cls"
    assert run(["classify", "--corpus", str(FIXTURE / "corpus.txt"), "--labels", str(FIXTURE / "labels.txt"),
                "--topics", str(lda / "topics.txt"), "--embeddings", str(FIXTURE / "embeddings.txt"),
                "--min-doc-freq", "2", "--out", str(out)]) == 0
    result = json.loads((out / "classification.json").read_text())["topics"]
    assert result["f1_average"] == "macro" and 0.0 <= result["accuracy"] <= 1.0


def test_refine_twice_gives_identical_trees(tmp_path):
    lda = tmp_path / "lda"
    assert run(["lda", *fixture_args()[:2], *FAST, "--out", str(lda)]) == 0
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert run(["refine", "--topics", str(lda / "topics.txt"), "--vocab", str(lda / "vocab.txt"),
                    "--embeddings", str(FIXTURE / "embeddings.txt"), "--backend", "mock",
                    "--deterministic", "--out", str(out)]) == 0
        outs.append(tree(out))
    assert outs[0] == outs[1]
