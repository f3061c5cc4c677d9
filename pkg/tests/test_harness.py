import csv
import dataclasses
import json

import numpy as np
import pytest

from conftest import EQUILATERAL, SOURCE, distances
from molloc.channel import ChannelParams, expected_peak_count
from molloc.crb import crb
from molloc.estimators import GdOptions
from molloc.harness import (ScenarioConfig, ScenarioError, SweepResult, SweepRow, export_results,
                            load_results, run_convergence, run_mse_sweep, snr, snr_db,
                            trial_rng)

SWEEP = (5e5, 5e6, 5e7)


def config(**kw):
    base = dict(anchors=EQUILATERAL, source=SOURCE, seed=7, trials=300, sweep=SWEEP)
    base.update(kw)
    return ScenarioConfig(**base)


def test_snr_examples():
    p = ChannelParams()
    y = EQUILATERAL.centroid
    lam = expected_peak_count(distances(EQUILATERAL, y), p)[0]
    assert snr(EQUILATERAL, y, p) == pytest.approx(np.sqrt(lam), rel=1e-14)
    assert snr(EQUILATERAL, SOURCE, ChannelParams(Q=4 * p.Q)) == pytest.approx(
        2 * snr(EQUILATERAL, SOURCE, p), rel=1e-14)
    direct = np.mean([np.sqrt(expected_peak_count(np.linalg.norm(x - SOURCE), p))
                      for x in EQUILATERAL.positions])
    assert snr(EQUILATERAL, SOURCE, p) == pytest.approx(direct, rel=1e-14)
    assert snr_db(100.0) == pytest.approx(20.0)


def test_config_rejects_source_outside_hull():
    with pytest.raises(ScenarioError):
        config(source=[2e-5, 0.0])
    with pytest.raises(ScenarioError):
        config(source=EQUILATERAL.positions[0])


def test_config_validation():
    with pytest.raises(ScenarioError):
        config(trials=0)
    with pytest.raises(ScenarioError):
        config(seed=-1)


def test_trial_streams_are_order_independent():
    a = trial_rng(1, 2, 3).random(4)
    _ = trial_rng(1, 2, 4).random(4)
    np.testing.assert_array_equal(a, trial_rng(1, 2, 3).random(4))
    assert not np.array_equal(a, trial_rng(1, 3, 2).random(4))


def test_noise_free_sweep_exact():
    res = run_mse_sweep(config(channel=ChannelParams(noise_free=True), trials=5))
    assert all(r.mse <= 1e-18 for r in res.rows)


def test_sweep_rows_sorted_and_decreasing():
    res = run_mse_sweep(config(trials=2000))
    snrs = [r.snr_raw for r in res.rows]
    assert snrs == sorted(snrs)
    mse = [r.mse for r in res.rows]
    assert mse[0] > mse[1] > mse[2]
    for r in res.rows:
        params = dataclasses.replace(ChannelParams(), Q=r.Q)
        assert r.crb == crb(SOURCE, EQUILATERAL, params).crb


def test_empty_sweep_is_error():
    with pytest.raises(ScenarioError):
        run_mse_sweep(config(sweep=()))


def test_failure_accounting():
    # low Q makes zero counts common
    cfg = config(sweep=(2e4,), trials=400, failure_policy="count-as-failure")
    (row,) = run_mse_sweep(cfg).rows
    assert row.failures > 0
    assert row.trials_used + row.failures == 400
    (row2,) = run_mse_sweep(dataclasses.replace(cfg, failure_policy="resample")).rows
    assert row2.failures == 0 and row2.trials_used == 400


def test_all_trials_failed_is_error():
    cfg = config(sweep=(1e-3,), trials=20, failure_policy="count-as-failure")
    with pytest.raises(ScenarioError):
        run_mse_sweep(cfg)


def test_both_estimators():
    cfg = config(estimator="both", trials=30, sweep=(5e6,))
    res = run_mse_sweep(cfg)
    assert sorted(r.estimator for r in res.rows) == ["gradient-descent", "triangulation"]


def test_determinism_across_workers(tmp_path):
    paths = []
    for w in (1, 3):
        res = run_mse_sweep(config(trials=600, workers=w))
        p = tmp_path / f"w{w}.csv"
        export_results(res, p, "csv")
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_csv_export(tmp_path):
    rows = [SweepRow("triangulation", 1.0, 2.0, 3.0, 0.1 + 0.2, 0.01, 5.0, 10, 0),
            SweepRow("triangulation", 2.0, 3.0, 4.0, 1 / 3, 0.01, 6.0, 10, 0)]
    p = tmp_path / "s.csv"
    export_results(SweepResult(rows), p, "csv")
    lines = p.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",") == ["estimator", "Q", "snr_raw", "snr_db", "mse", "mse_se", "crb",
                                   "trials_used", "failures"]
    assert "0.30000000000000004" in lines[1]
    with open(p) as fh:
        parsed = list(csv.DictReader(fh))
    assert float(parsed[1]["mse"]) == 1 / 3


def test_json_round_trip_and_rerun(tmp_path):
    res = run_mse_sweep(config(trials=200))
    p = tmp_path / "s.json"
    export_results(res, p, "json")
    back = load_results(p)
    assert back.rows == res.rows
    doc = json.loads(p.read_text())
    assert doc["config"]["seed"] == 7
    rerun = run_mse_sweep(back.config)
    assert [r.mse for r in rerun.rows] == [r.mse for r in res.rows]


def test_convergence_noise_free():
    cfg = config(estimator="gradient-descent", channel=ChannelParams(noise_free=True))
    res = run_convergence(cfg)
    err = res.squared_error_per_iter
    assert len(err) == len(res.trajectory.iterates)
    assert err[-1] <= 1e-18
    assert min(k for k, e in enumerate(err) if e <= 1e-18) <= 100


def test_convergence_from_truth():
    cfg = config(estimator="gradient-descent", channel=ChannelParams(noise_free=True),
                 gd_options=GdOptions(init=SOURCE))
    res = run_convergence(cfg)
    assert len(res.trajectory.iterates) == 1 and res.trajectory.converged


def test_convergence_needs_gd():
    with pytest.raises(ScenarioError):
        run_convergence(config())


def test_convergence_export(tmp_path):
    cfg = config(estimator="gradient-descent")
    res = run_convergence(cfg)
    export_results(res, tmp_path / "c.csv", "csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "iteration,y0,y1,cost,squared_error"
    assert len(lines) == len(res.trajectory.iterates) + 1
    export_results(res, tmp_path / "c.json", "json")
    back = load_results(tmp_path / "c.json")
    assert back.squared_error_per_iter == res.squared_error_per_iter
    assert back.trajectory.costs == res.trajectory.costs
