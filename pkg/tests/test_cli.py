import json
import subprocess
import sys

import pytest

from pairdense.cli import main
from pairdense.protein_graph import load_dataset


def lines(out):
    return [json.loads(x) for x in out.splitlines() if x.startswith("{")]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["synth", "--complexes", "6", "--seed", "5", "--out", str(d),
                 "--min-residues", "16", "--max-residues", "24", "--d", "4", "--k", "3",
                 "--radius", "1.5"]) == 0
    assert main(["split", "--data", str(d), "--seed", "1", "--ratios", "0.5,0.25,0.25"]) == 0
    return d


def test_synth_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["synth", "--complexes", "20", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    a = sorted((tmp_path / "a").iterdir())
    b = sorted((tmp_path / "b").iterdir())
    assert len(a) == 20
    assert [p.name for p in a] == [p.name for p in b]
    assert all(x.read_bytes() == y.read_bytes() for x, y in zip(a, b))
    for c in load_dataset(tmp_path / "a").values():
        assert 40 <= c.n_l + c.n_r <= 80
    resolved = lines(capsys.readouterr().out)[0]
    assert resolved["resolved_config"]["radius"] == 1.2


def test_split_manifest(dataset):
    split = json.loads((dataset / "split.json").read_text())
    ids = split["train"] + split["validation"] + split["test"]
    assert sorted(ids) == sorted(load_dataset(dataset))
    assert (len(split["train"]), len(split["validation"]), len(split["test"])) == (4, 1, 1)


def test_train_evaluate_predict(dataset, tmp_path, capsys):
    run = tmp_path / "run"
    before = {p.name: p.read_bytes() for p in dataset.iterdir()}
    assert main(["train", "--data", str(dataset), "--out", str(run), "--epochs", "2",
                 "--blocks", "1", "--channels", "4", "--batch-size", "32", "--seed", "2"]) == 0
    out = lines(capsys.readouterr().out)
    assert out[0]["resolved_config"]["train"]["epochs"] == 2
    assert out[0]["resolved_config"]["sampling"]["pn_ratio"] == 10.0
    metrics = [json.loads(x) for x in (run / "metrics.jsonl").read_text().splitlines()]
    assert [m["epoch"] for m in metrics] == [0, 1]
    assert set(metrics[0]) == {"epoch", "train_loss", "val_medauc", "wallclock"}

    report_path = tmp_path / "report.json"
    assert main(["evaluate", "--data", str(dataset), "--checkpoint", str(run / "model.ckpt"),
                 "--out", str(report_path), "--roc"]) == 0
    report = json.loads(report_path.read_text())
    assert 0 <= report["medauc"] <= 1 and len(report["per_complex"]) == 1 and "roc" in report

    preds = tmp_path / "preds"
    assert main(["predict", "--data", str(dataset), "--checkpoint", str(run / "model.ckpt"),
                 "--out", str(preds), "--subset", "all"]) == 0
    files = sorted(preds.iterdir())
    assert len(files) == 6
    rec = json.loads(files[0].read_text())
    assert len(rec["logits"]) == len(rec["labels"]) == rec["n_l"] * rec["n_r"]
    # inputs are never modified
    assert before == {p.name: p.read_bytes() for p in dataset.iterdir()}


def test_train_inprotein_uses_joint_mode(dataset, tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# small run\nepochs = 1\nblocks = 1\nchannels = 4\ninprotein_ratio = 5\nseed = 9\n")
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path / "r"),
                 "--config", str(cfg), "--channels", "3"]) == 0
    resolved = lines(capsys.readouterr().out)[0]["resolved_config"]
    assert resolved["train"]["channels"] == 3  # flag beats file
    assert resolved["train"]["seed"] == 9 and resolved["sampling"]["inprotein_ratio"] == 5
    from pairdense.training import load_model

    assert load_model(tmp_path / "r" / "model.ckpt").config.mode == "joint"


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text
    assert lines(text)[-1]["failed"] == []


def test_usage_errors(dataset, tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "missing")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["field"] == "--data"
    assert main(["evaluate", "--data", str(dataset), "--checkpoint", str(tmp_path / "no.ckpt"),
                 "--out", str(tmp_path / "r.json")]) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "--checkpoint"
    bad = tmp_path / "bad.json"
    bad.write_text('{"epochs": -1}')
    assert main(["train", "--data", str(dataset), "--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"momentum": 0.9}')
    assert main(["train", "--data", str(dataset), "--config", str(unknown)]) == 2
    assert "momentum" in capsys.readouterr().err


def test_corrupt_dataset_is_input_error(tmp_path, capsys):
    (tmp_path / "x.json").write_text("{broken")
    assert main(["train", "--data", str(tmp_path)]) == 1
    assert "malformed JSON" in capsys.readouterr().err


def test_unknown_flag_and_module_entry():
    res = subprocess.run([sys.executable, "-m", "pairdense", "train", "--bogus"],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "--bogus" in res.stderr
    res = subprocess.run([sys.executable, "-m", "pairdense", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "gradcheck" in res.stdout
