import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from molloc.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, run
from molloc.config import ConfigError, apply_overrides, load_config, read_document
from molloc.crb import crb

CFG = Path(__file__).resolve().parents[1] / "configs" / "acceptance.toml"


def test_acceptance_config_loads():
    cfg = load_config(CFG)
    assert cfg.anchors.n == 3 and cfg.trials == 10_000
    assert cfg.channel.Q == 5e5 and cfg.channel.D == 1e-9 and cfg.channel.V_s == 1e-18
    np.testing.assert_allclose(np.linalg.norm(cfg.anchors.positions, axis=1), 1e-5, rtol=1e-15)
    assert len(cfg.sweep) == 5 and cfg.sweep[-1] / cfg.sweep[0] == pytest.approx(100)


def test_overrides():
    cfg = load_config(CFG, ["channel.diffusion_m2_per_s=2e-9", "trials=5",
                            "gradient_descent.step_rule=fixed"])
    assert cfg.channel.D == 2e-9 and cfg.trials == 5 and cfg.gd_options.step_rule == "fixed"
    with pytest.raises(ConfigError):
        apply_overrides(read_document(CFG), ["channel.nope=1"])
    with pytest.raises(ConfigError):
        apply_overrides(read_document(CFG), ["trials"])


def test_unknown_key_in_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(CFG.read_text() + "\nextra_key = 1\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run(["sweep", "--config", str(CFG), "--out", str(out), "--set", "trials=50", "-q"]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 5
    assert {"snr_raw", "snr_db", "mse", "crb"} <= set(rows[0])


def test_crb_passthrough(tmp_path):
    out = tmp_path / "crb.json"
    assert run(["crb", "--config", str(CFG), "--out", str(out), "--format", "json", "-q"]) == 0
    doc = json.loads(out.read_text())
    cfg = load_config(CFG)
    ref = crb(cfg.source, cfg.anchors, cfg.channel)
    assert doc["crb_m2"] == ref.crb
    np.testing.assert_array_equal(doc["fim_per_m2"], ref.fim.matrix)


def test_seed_changes_draws_not_crb(tmp_path):
    outs = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}.csv"
        run(["sweep", "--config", str(CFG), "--out", str(out), "--seed", str(seed),
             "--set", "trials=40", "-q"])
        outs.append(list(csv.DictReader(io.StringIO(out.read_text()))))
    assert [r["crb"] for r in outs[0]] == [r["crb"] for r in outs[1]]
    assert [r["mse"] for r in outs[0]] != [r["mse"] for r in outs[1]]


@pytest.mark.parametrize("cmd", ["simulate", "triangulate", "gradient-descent", "convergence"])
def test_other_subcommands(cmd, tmp_path):
    out = tmp_path / "o.json"
    assert run([cmd, "--config", str(CFG), "--out", str(out), "--format", "json", "-q"]) == EXIT_OK
    assert json.loads(out.read_text())


def test_noise_free_flag(tmp_path):
    out = tmp_path / "t.json"
    run(["triangulate", "--config", str(CFG), "--noise-free", "--out", str(out),
         "--format", "json", "-q"])
    assert json.loads(out.read_text())["squared_error_m2"] <= 1e-18


def test_exit_codes(tmp_path):
    assert run(["crb", "--config", str(CFG), "--set", "bogus=1", "-q"]) == EXIT_CONFIG
    assert run(["crb", "--config", str(CFG), "--set", "geometry.source_m=[1e-4, 0.0]",
                "-q"]) == EXIT_CONFIG
    assert run(["crb", "--config", str(CFG), "--set", "channel.molecules=-5", "-q"]) == EXIT_CONFIG
    assert run(["triangulate", "--config", str(CFG), "--peak-model", "paper-literal",
                "-q"]) == EXIT_NUMERICAL
    assert run(["crb", "--config", str(tmp_path / "missing.toml"), "-q"]) == 4
