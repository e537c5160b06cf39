import json

import numpy as np
import pytest

import rrtn.losses as losses_mod
from rrtn import gradcheck
from rrtn import tensor as T
from rrtn.cli import main
from rrtn.config import ConfigError, RunConfig, load_config
from rrtn.data import load_features
from rrtn.sweep import relative_gain, run_sweep, summarize

FAST = ["--set", "data.n_samples=80", "--set", "train.epochs=3", "--set", "model.encoder_dims=[16]",
        "--set", "model.rep_dim=8", "--set", "model.emb_dim=8"]


# config --------------------------------------------------------------------------

def test_defaults_are_desk_scale():
    cfg = load_config(env={})
    assert (cfg.train.epochs, cfg.train.batch_size) == (20, 16)
    assert (cfg.data.n_samples, cfg.data.T, cfg.data.F, cfg.data.K) == (512, 32, 16, 10)
    assert cfg.ruwl.c_init == [1.0, 1.0, 0.01] and cfg.ruwl.lambda_consts == [1.0, 1.0, 1e-8]
    assert cfg.ruwl.lambda_position == "numerator"
    assert cfg.train.lr == 0.001 and cfg.train.eps == 1e-8 and cfg.train.weight_decay == 0.01


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"train": {"epoch": 3}}))
    with pytest.raises(ConfigError, match="train.epoch"):
        load_config(p, env={})
    p.write_text(json.dumps({"trian": {}}))
    with pytest.raises(ConfigError, match="trian"):
        load_config(p, env={})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides=["train.batch_size=1"], env={})
    with pytest.raises(ConfigError):
        load_config(overrides=['train.mode="fancy"'], env={})
    with pytest.raises(ConfigError):
        load_config(overrides=["augment.time_drop_width=40"], env={})


def test_env_seed_override():
    assert load_config(env={"RRTN_SEED": "17"}).train.seed == 17


def test_parse_error_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "train": {\n    "epochs": ,\n  }\n}\n')
    assert main(["train", str(p)]) == 2
    err = capsys.readouterr().err
    assert "bad.json:3:" in err


def test_round_trip_to_dict():
    cfg = RunConfig()
    assert load_config(env={}).to_dict() == cfg.to_dict()


# commands -----------------------------------------------------------------------------

def test_train_writes_epoch_records_and_is_deterministic(tmp_path, capsys):
    args = ["train", *FAST]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    lines = (tmp_path / "a" / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 3
    for name in ("metrics.jsonl", "final.ckpt", "best.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_eval_reproduces_final_dev_ccc(tmp_path, capsys):
    assert main(["train", *FAST, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    capsys.readouterr()
    assert main(["eval", str(tmp_path / "final.ckpt")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == f"mean CCC {report['final_dev_ccc']:.6f}"
    assert len(out[1].split()) == 2 + 10


def test_gen_data_then_eval_on_file(tmp_path, capsys):
    feat = tmp_path / "d.feat"
    assert main(["gen-data", "--set", "data.n_samples=40", "--output", str(feat)]) == 0
    ds = load_features(feat)
    assert ds.n == 40 and ds.dims == (32, 16, 10)
    assert main(["train", *FAST, "--set", f'data.path="{feat}"', "--out", str(tmp_path / "r")]) == 0
    assert main(["eval", str(tmp_path / "r" / "final.ckpt"), str(feat)]) == 0


def test_eval_empty_split_exit_2(tmp_path, capsys):
    feat = tmp_path / "one.feat"
    assert main(["gen-data", "--set", "data.n_samples=1", "--output", str(feat)]) == 0
    assert main(["train", *FAST, "--set", "train.epochs=0", "--out", str(tmp_path / "r")]) == 0
    assert main(["eval", str(tmp_path / "r" / "final.ckpt"), str(feat)]) == 2


def test_eval_missing_checkpoint_exit_2(tmp_path):
    assert main(["eval", str(tmp_path / "nope.ckpt")]) == 2


def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    checks = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(checks) >= 10 and all(l.startswith("PASS") for l in checks)


def test_gradcheck_negative_control(monkeypatch, capsys):
    real = losses_mod.ccc_loss

    def corrupted(pred, target):
        out = real(pred, target)
        return T._make(out.data, "corrupt", (out,), lambda g: (2.0 * g,))

    monkeypatch.setattr(losses_mod, "ccc_loss", corrupted)
    assert main(["gradcheck"]) == 1
    out = capsys.readouterr().out
    failing = [l for l in out.splitlines() if l.startswith("FAIL")]
    assert any(l.split()[1] == "ccc_loss" for l in failing)


def test_gradcheck_suite_reports_exceptions_as_failures():
    def boom(rng):
        raise T.GradientCheckError("nan")

    (res,) = gradcheck.run_suite([("boom", boom)])
    assert not res.passed and res.max_rel_err == float("inf")


# sweep ------------------------------------------------------------------------------------

def test_relative_gain_arithmetic():
    assert relative_gain(0.678, 0.647) == pytest.approx(0.0479, abs=5e-4)
    assert round(100 * relative_gain(0.678, 0.647), 1) == 4.8
    assert round(100 * relative_gain(0.674, 0.647), 1) == 4.2
    assert round(100 * relative_gain(0.668, 0.655), 1) == 2.0


def test_summarize_rows():
    rows = [{"seed": s, "mode": m, "best_dev_ccc": v}
            for s, vals in enumerate([(0.5, 0.6, 0.7), (0.7, 0.6, 0.5)])
            for m, v in zip(("baseline", "rrtn_fixed", "rrtn_ruwl"), vals)]
    agg = {a["mode"]: a for a in summarize(rows)}
    assert agg["baseline"]["mean"] == pytest.approx(0.6)
    assert agg["rrtn_fixed"]["sd"] == 0.0
    assert agg["rrtn_ruwl"]["relative_local_gain"] == pytest.approx(0.0)
    assert agg["baseline"]["relative_local_gain"] is None


def test_sweep_outputs(tmp_path, capsys):
    args = ["sweep", *FAST, "--set", "train.seeds=[0, 1]", "--out", str(tmp_path)]
    assert main(args) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["rows"]) == 3 * 2 and len(summary["aggregate"]) == 3
    txt = (tmp_path / "summary.txt").read_text()
    assert "rel. local gain" in txt
    first = (tmp_path / "summary.json").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "summary.json").read_bytes() == first
