"""Command-line behaviour: exit codes, artifact determinism, pipelines."""

import json
import subprocess
import sys

import pytest

from promdet import interchange, synth
from promdet.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def data_file(tmp_path):
    records = synth.generate(synth.SynthConfig(num_utterances=18, dim=4, seed=3))
    path = tmp_path / "d.jsonl"
    interchange.save(records, path)
    return path


def test_help_exits_zero():
    with pytest.raises(SystemExit) as e:
        run_cli("--help")
    assert e.value.code == 0


def test_unknown_subcommand_exits_two(capsys):
    with pytest.raises(SystemExit) as e:
        run_cli("frobnicate")
    assert e.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as e:
        run_cli("synth", "--bogus")
    assert e.value.code == 2


def test_validate_ok(data_file, capsys):
    assert run_cli("validate", str(data_file)) == 0
    assert "ok: 36 records" in capsys.readouterr().out


def test_validate_bad_file_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"utt_id": "x"}\n', encoding="utf-8")
    assert run_cli("validate", str(bad)) == 1
    err = capsys.readouterr().err
    assert "invalid" in err and "line 1" in err


def test_synth_is_byte_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run_cli("synth", "--preset", "paperlike", "--seed", "7", "--n", "6", "--out", str(p1)) == 0
    assert run_cli("synth", "--preset", "paperlike", "--seed", "7", "--n", "6", "--out", str(p2)) == 0
    assert p1.read_bytes() == p2.read_bytes()


def test_aggregate_then_cluster(tmp_path, data_file, capsys):
    feat = tmp_path / "e.csv"
    assert (
        run_cli(
            "aggregate", "--in", str(data_file), "--out", str(feat),
            "--level", "word", "--set", "E", "--mode", "speech_text", "--l1", "nonnative",
        )
        == 0
    )
    model = tmp_path / "km.json"
    assert run_cli("cluster", "--in", str(feat), "--level", "word", "--k", "2", "--seed", "7", "--out", str(model)) == 0
    out = capsys.readouterr().out
    assert "accuracy: 100.0" in out
    assert json.loads(model.read_text(encoding="utf-8"))["centroids"]


def test_distances_report_schema(tmp_path, data_file):
    feat = tmp_path / "e.csv"
    run_cli("aggregate", "--in", str(data_file), "--out", str(feat), "--level", "word", "--set", "E")
    rep = tmp_path / "sep.json"
    assert run_cli("distances", "--in", str(feat), "--level", "word", "--set", "E", "--out", str(rep)) == 0
    obj = json.loads(rep.read_text(encoding="utf-8"))
    assert list(obj)[:7] == ["cosine", "jaccard", "manhattan", "euclidean", "chebyshev", "canberra", "mahalanobis"]


def test_pca_writes_csv_and_svg(tmp_path, data_file):
    feat = tmp_path / "e.csv"
    run_cli("aggregate", "--in", str(data_file), "--out", str(feat), "--level", "word", "--set", "EDP")
    scatter = tmp_path / "scatter.csv"
    assert (
        run_cli("pca", "--in", str(feat), "--level", "word", "--components", "2", "--out", str(scatter)) == 0
    )
    assert scatter.read_text(encoding="utf-8").splitlines()[0] == "pc1,pc2,label"
    assert (tmp_path / "scatter.svg").exists()


def test_train_writes_checkpoint_and_report(tmp_path, data_file):
    feat = tmp_path / "e.csv"
    run_cli("aggregate", "--in", str(data_file), "--out", str(feat), "--level", "word", "--set", "E")
    ckpt = tmp_path / "net.json"
    assert (
        run_cli(
            "train", "--in", str(feat), "--level", "word", "--preset", "word",
            "--epochs", "5", "--seed", "3", "--out", str(ckpt),
        )
        == 0
    )
    assert ckpt.exists()
    report = tmp_path / "net.train.csv"
    assert report.read_text(encoding="utf-8").startswith("epoch,loss,train_acc")
    assert len(report.read_text(encoding="utf-8").splitlines()) == 6


def test_evaluate_single_cell(tmp_path, data_file):
    out = tmp_path / "runs"
    assert (
        run_cli(
            "evaluate", "--in", str(data_file), "--out", str(out),
            "--level", "word", "--set", "E", "--mode", "speech_text",
            "--l1", "nonnative", "--classifier", "kmeans", "--seed", "7",
        )
        == 0
    )
    manifest = json.loads((out / "runs.json").read_text(encoding="utf-8"))
    assert len(manifest["runs"]) == 1
    assert manifest["runs"][0]["accuracy"] == 100.0
    assert (out / "table.md").exists() and (out / "table.csv").exists()


def test_evaluate_single_cell_missing_flags(tmp_path, data_file, capsys):
    out = tmp_path / "runs"
    assert run_cli("evaluate", "--in", str(data_file), "--out", str(out)) == 1
    assert "missing flags" in capsys.readouterr().err


def test_report_formats(tmp_path, data_file):
    out = tmp_path / "runs"
    run_cli(
        "evaluate", "--in", str(data_file), "--out", str(out),
        "--level", "word", "--set", "E", "--mode", "speech_text",
        "--l1", "GER", "--classifier", "kmeans",
    )
    for fmt, name in (("md", "t.md"), ("csv", "t.csv"), ("json", "t.json")):
        target = tmp_path / name
        assert (
            run_cli("report", "--in", str(out / "runs.json"), "--format", fmt, "--out", str(target)) == 0
        )
        assert target.exists()
    assert "GER" in (tmp_path / "t.md").read_text(encoding="utf-8")
    obj = json.loads((tmp_path / "t.json").read_text(encoding="utf-8"))
    assert obj["GER"]["E"]["word_speech_text_kmeans"] == 100.0


def test_evaluate_jobs_assembly_deterministic(tmp_path):
    records = synth.generate(synth.SynthConfig(num_utterances=6, dim=3, seed=5))
    # drop syllable spans so the grid only runs (cheap) word-level cells;
    # the pool path is what matters here, not cell coverage
    records = [
        interchange.UtteranceRecord(
            utt_id=r.utt_id, corpus=r.corpus, l1=r.l1, mode=r.mode, epoch=r.epoch,
            text=r.text, phonemes=r.phonemes, words=r.words, syllables=None,
            embeddings=r.embeddings,
        )
        for r in records
    ]
    data = tmp_path / "d.jsonl"
    interchange.save(records, data)
    outs = []
    for jobs, name in ((1, "r1"), (2, "r2")):
        out = tmp_path / name
        assert (
            run_cli(
                "evaluate", "--in", str(data), "--out", str(out),
                "--grid", "full", "--jobs", str(jobs), "--seed", "2",
            )
            == 0
        )
        outs.append(out)
    assert (outs[0] / "runs.json").read_bytes() == (outs[1] / "runs.json").read_bytes()
    assert (outs[0] / "table.csv").read_bytes() == (outs[1] / "table.csv").read_bytes()


def test_missing_input_file_returns_one(tmp_path, capsys):
    assert run_cli("validate", str(tmp_path / "absent.jsonl")) == 1
    assert "error" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "promdet.cli", "synth", "--n", "2", "--out", str(tmp_path / "x.jsonl")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "wrote 4 records" in proc.stdout


def test_syllabify_fills_missing_spans(tmp_path):
    records = synth.generate(synth.SynthConfig(num_utterances=4, dim=3, seed=8))
    stripped = [
        interchange.UtteranceRecord(
            utt_id=r.utt_id, corpus=r.corpus, l1=r.l1, mode=r.mode, epoch=r.epoch,
            text=r.text, phonemes=r.phonemes, words=r.words, syllables=None,
            embeddings=r.embeddings,
        )
        for r in records
    ]
    src = tmp_path / "in.jsonl"
    dst = tmp_path / "out.jsonl"
    interchange.save(stripped, src)
    assert run_cli("syllabify", "--in", str(src), "--out", str(dst)) == 0
    back = interchange.load(dst)
    assert all(r.syllables is not None and len(r.syllables) > 0 for r in back)
