import numpy as np
import pytest

from rlpar.cli import main
from rlpar.dataio import load_dataset, read_predictions

FAST = ["--epochs", "1", "--batch", "8", "--replay", "64", "--target-update", "10", "--lr", "1e-3"]


@pytest.fixture
def synth_dir(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("n = 40\nn_test = 15\nF = 4\nL = 3\nrates = 0.3, 0.5, 0.2\nsnr = 3\nseed = 2\n")
    out = tmp_path / "data"
    assert main(["synth", "--spec", str(spec), "--out", str(out)]) == 0
    return out


def test_synth_writes_both_splits(synth_dir):
    tr = load_dataset(synth_dir / "train.manifest")
    te = load_dataset(synth_dir / "test.manifest")
    assert (tr.N, tr.F, tr.L, te.N) == (40, 4, 3, 15)
    assert np.array_equal(tr.scaler.mean, te.scaler.mean)


def test_train_eval_metrics_roundtrip(synth_dir, tmp_path, capsys):
    groups = tmp_path / "g.txt"
    groups.write_text("# two groups\nfirst: attr00, attr01\nsecond: attr02\n")
    ck = tmp_path / "ck"
    rc = main(["train", "--dataset", str(synth_dir / "train.manifest"), "--groups", str(groups),
               "--reward", "gor", "--out", str(ck), *FAST])
    assert rc == 0
    for f in ("group_00.grlq", "group_01.grlq", "model.manifest", "train.log", "train.summary", "training.png"):
        assert (ck / f).is_file(), f
    rep = tmp_path / "rep"
    assert main(["eval", "--ckpt-dir", str(ck), "--dataset", str(synth_dir / "test.manifest"),
                 "--report", str(rep)]) == 0
    assert (rep / "attributes.png").stat().st_size > 0
    names, ids, pred = read_predictions(rep / "predictions.txt")
    assert names == ("attr00", "attr01", "attr02") and len(ids) == 15
    capsys.readouterr()
    out = tmp_path / "m.summary"
    assert main(["metrics", "--truth", str(synth_dir / "test.manifest"), "--pred",
                 str(rep / "predictions.txt"), "--out", str(out)]) == 0
    assert out.read_text() == (rep / "metrics.summary").read_text()


def test_sweep_cli(synth_dir, tmp_path, capsys):
    out = tmp_path / "sweep"
    rc = main(["sweep-rho", "--rho", "0.5,1.0", "--train", str(synth_dir / "train.manifest"),
               "--test", str(synth_dir / "test.manifest"), "--group", "0", "--out", str(out), *FAST])
    assert rc == 0
    rows = (out / "rho_sweep.tsv").read_text().splitlines()
    assert [r.split("\t")[0] for r in rows] == ["rho", "0.50", "1.00", "basic"]
    assert (out / "rho_sweep.png").is_file()
    assert "step for step: True" in capsys.readouterr().out


def test_ablation_cli(synth_dir, tmp_path):
    groups = tmp_path / "g.txt"
    groups.write_text("x: attr00\ny: attr01, attr02\n")
    out = tmp_path / "abl"
    assert main(["ablation", "--train", str(synth_dir / "train.manifest"), "--test", str(synth_dir / "test.manifest"),
                 "--groups", str(groups), "--out", str(out), "--no-figures", *FAST]) == 0
    assert (out / "ablation.tsv").read_text().startswith("variant\tmA")
    assert not (out / "ablation.png").exists()


def test_validation_errors_exit_2(synth_dir, tmp_path, capsys):
    assert main(["train", "--dataset", str(tmp_path / "missing.manifest"), "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "g.txt"
    bad.write_text("first: attr00, nope\nsecond: attr01, attr02\n")
    rc = main(["train", "--dataset", str(synth_dir / "train.manifest"), "--groups", str(bad),
               "--out", str(tmp_path / "o"), *FAST])
    assert rc == 2
    assert "nope" in capsys.readouterr().err
    assert main(["train", "--dataset", str(synth_dir / "train.manifest"), "--gamma", "2",
                 "--out", str(tmp_path / "o")]) == 2


def test_runtime_error_exit_3(synth_dir, tmp_path, monkeypatch):
    import rlpar.cli as cli

    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "train", boom)
    assert main(["train", "--dataset", str(synth_dir / "train.manifest"), "--out", str(tmp_path / "o")]) == 3


def test_example_group_name_accepted(tmp_path):
    from rlpar.dataio import SynthSpec, generate_synthetic, save_dataset
    from rlpar.schema import example_config_text, schema_from_group_text

    names = schema_from_group_text(example_config_text("pa100k")).names
    ds = generate_synthetic(SynthSpec(n=4, n_features=2, n_attributes=len(names), rates=(0.5,) * len(names), names=names))
    save_dataset(ds, tmp_path / "d.manifest")
    assert main(["train", "--dataset", str(tmp_path / "d.manifest"), "--groups", "pa100k", "--epochs", "0",
                 "--out", str(tmp_path / "o"), "--no-figures"]) == 0
    assert (tmp_path / "o" / "group_04.grlq").is_file()
