"""Monte Carlo experiments: MSE-vs-CRB sweeps and convergence traces."""
from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .crb import crb as compute_crb
from .channel import ChannelParams, PeakModel, expected_peak_count, sample_peak_measurements
from .estimators import (AnchorCollision, GdOptions, MeasurementFailure, Trajectory,
                         gradient_descent, triangulate_many)
from .geometry import AnchorSet, as_point, in_open_convex_hull

log = logging.getLogger(__name__)


class Estimator(str, enum.Enum):
    TRIANGULATION = "triangulation"
    GRADIENT_DESCENT = "gradient-descent"
    BOTH = "both"


class FailurePolicy(str, enum.Enum):
    RESAMPLE = "resample"
    COUNT_AS_FAILURE = "count-as-failure"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    anchors: AnchorSet
    source: np.ndarray
    channel: ChannelParams = ChannelParams()
    seed: int = 0
    trials: int = 1000
    estimator: Estimator = Estimator.TRIANGULATION
    gd_options: GdOptions = GdOptions()
    sweep: tuple = ()  # Q values
    failure_policy: FailurePolicy = FailurePolicy.RESAMPLE
    resample_cap: int = 100
    workers: int = 1

    def __post_init__(self):
        anchors = self.anchors if isinstance(self.anchors, AnchorSet) else AnchorSet(self.anchors)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "source", as_point(self.source, anchors.dim))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "failure_policy", FailurePolicy(self.failure_policy))
        object.__setattr__(self, "sweep", tuple(float(q) for q in self.sweep))
        if not in_open_convex_hull(self.source, anchors):
            raise ScenarioError(
                f"source {self.source.tolist()} is not strictly inside the anchors' convex hull")
        if self.trials < 1:
            raise ScenarioError("trials must be >= 1")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must be an explicit 64-bit unsigned integer")
        if self.workers < 1:
            raise ScenarioError("workers must be >= 1")

    def to_dict(self) -> dict:
        """Fully resolved config, JSON-serialisable."""
        ch = dataclasses.asdict(self.channel)
        ch["peak_model"] = self.channel.peak_model.value
        gd = dataclasses.asdict(self.gd_options)
        if not isinstance(gd["init"], str):
            gd["init"] = np.asarray(gd["init"], dtype=float).tolist()
        return {
            "anchors": self.anchors.positions.tolist(),
            "source": self.source.tolist(),
            "channel": ch,
            "seed": int(self.seed),
            "trials": self.trials,
            "estimator": self.estimator.value,
            "gd_options": gd,
            "sweep": list(self.sweep),
            "failure_policy": self.failure_policy.value,
            "resample_cap": self.resample_cap,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        d["anchors"] = AnchorSet(np.asarray(d["anchors"], dtype=float))
        d["channel"] = ChannelParams(**d["channel"])
        d["gd_options"] = GdOptions(**d["gd_options"])
        return cls(**d)


@dataclass(frozen=True)
class SweepRow:
    estimator: str
    Q: float
    snr_raw: float
    snr_db: float
    mse: float
    mse_se: float
    crb: float
    trials_used: int
    failures: int


@dataclass
class SweepResult:
    rows: list
    config: ScenarioConfig | None = None


@dataclass
class ConvergenceResult:
    trajectory: Trajectory
    squared_error_per_iter: list
    source: np.ndarray | None = None
    config: ScenarioConfig | None = None


def snr(anchors, y_star, params: ChannelParams) -> float:
    """Mean over sensors of sqrt(expected peak count)."""
    anchors = anchors if isinstance(anchors, AnchorSet) else AnchorSet(anchors)
    d = np.linalg.norm(anchors.positions - as_point(y_star, anchors.dim), axis=1)
    return float(np.mean(np.sqrt(expected_peak_count(d, params))))


def snr_db(value: float) -> float:
    return 10.0 * math.log10(value)


def trial_rng(seed: int, sweep_index: int, trial_index: int) -> np.random.Generator:
    """Independent stream per (sweep point, trial), independent of execution order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(sweep_index, trial_index))
    return np.random.Generator(np.random.PCG64(ss))


def _draw_counts(distances, params, rng, policy, cap):
    """Counts for one trial; None when the failure policy gives up."""
    for _ in range(cap + 1):
        z = sample_peak_measurements(distances, params, rng).counts
        if np.all(z > 0):
            return z
        if policy is FailurePolicy.COUNT_AS_FAILURE:
            return None
    return None


def _trial_block(cfg: ScenarioConfig, params: ChannelParams, sweep_index: int,
                 trial_indices: range, estimator: Estimator) -> np.ndarray:
    """Squared errors for a block of trials; NaN marks a failed trial."""
    distances = np.linalg.norm(cfg.anchors.positions - cfg.source, axis=1)
    out = np.full(len(trial_indices), np.nan)
    counts, ok = [], []
    for k, t in enumerate(trial_indices):
        rng = trial_rng(cfg.seed, sweep_index, t)
        if estimator is Estimator.TRIANGULATION:
            z = _draw_counts(distances, params, rng, cfg.failure_policy, cfg.resample_cap)
            if z is not None:
                counts.append(z)
                ok.append(k)
        else:
            z = sample_peak_measurements(distances, params, rng).counts
            try:
                traj = gradient_descent(cfg.anchors, z, params, cfg.gd_options)
            except (FloatingPointError, AnchorCollision):
                continue
            out[k] = float(np.sum((traj.iterates[-1] - cfg.source) ** 2))
    if counts:
        est = triangulate_many(cfg.anchors, np.array(counts), params)
        out[np.array(ok)] = np.sum((est - cfg.source) ** 2, axis=1)
    return out


def _run_point(cfg, params, sweep_index, estimator):
    n = cfg.trials
    if cfg.workers == 1:
        return _trial_block(cfg, params, sweep_index, range(n), estimator)
    edges = np.linspace(0, n, cfg.workers + 1).astype(int)
    blocks = [range(edges[i], edges[i + 1]) for i in range(cfg.workers)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
        parts = list(ex.map(_trial_block, [cfg] * len(blocks), [params] * len(blocks),
                            [sweep_index] * len(blocks), blocks, [estimator] * len(blocks)))
    return np.concatenate(parts)


def run_mse_sweep(config: ScenarioConfig) -> SweepResult:
    """MSE of the chosen estimator(s) and the CRB at each swept Q."""
    if not config.sweep:
        raise ScenarioError("sweep list is empty")
    estimators = ([Estimator.TRIANGULATION, Estimator.GRADIENT_DESCENT]
                  if config.estimator is Estimator.BOTH else [config.estimator])
    rows = []
    for si, Q in enumerate(config.sweep):
        params = dataclasses.replace(config.channel, Q=Q)
        bound = compute_crb(config.source, config.anchors, params).crb
        s = snr(config.anchors, config.source, params)
        for est in estimators:
            se = _run_point(config, params, si, est)
            good = se[~np.isnan(se)]
            if good.size == 0:
                raise ScenarioError(f"all trials failed at Q = {Q:g}")
            sem = float(np.std(good, ddof=1) / np.sqrt(good.size)) if good.size > 1 else 0.0
            rows.append(SweepRow(est.value, Q, s, snr_db(s), float(np.mean(good)), sem, bound,
                                 int(good.size), int(se.size - good.size)))
            log.info("Q=%.4g %s snr=%.3f mse=%.4g crb=%.4g", Q, est.value, s, rows[-1].mse, bound)
    rows.sort(key=lambda r: (r.snr_raw, r.estimator))
    return SweepResult(rows, config)


def run_convergence(config: ScenarioConfig, trial_index: int = 0) -> ConvergenceResult:
    """One gradient-descent trajectory on measurements from trial ``trial_index``."""
    if config.estimator is Estimator.TRIANGULATION:
        raise ScenarioError("convergence runs need the gradient-descent estimator")
    distances = np.linalg.norm(config.anchors.positions - config.source, axis=1)
    rng = trial_rng(config.seed, 0, trial_index)
    z = sample_peak_measurements(distances, config.channel, rng)
    traj = gradient_descent(config.anchors, z, config.channel, config.gd_options)
    err = [float(np.sum((y - config.source) ** 2)) for y in traj.iterates]
    if not traj.converged:
        log.warning("gradient descent did not converge in %d iterations", traj.iterations_used)
    return ConvergenceResult(traj, err, config.source, config)


# --------------------------------------------------------------------------
# export

SWEEP_FIELDS = [f.name for f in dataclasses.fields(SweepRow)]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _convergence_records(result: ConvergenceResult):
    for k, (y, J, e) in enumerate(zip(result.trajectory.iterates, result.trajectory.costs,
                                      result.squared_error_per_iter)):
        rec = {"iteration": k}
        rec.update({f"y{i}": float(c) for i, c in enumerate(y)})
        rec.update({"cost": float(J), "squared_error": float(e)})
        yield rec


def export_results(result, path, format: str = "csv") -> None:
    format = format.lower()
    if format == "csv":
        if isinstance(result, SweepResult):
            header = SWEEP_FIELDS
            records = [dataclasses.asdict(r) for r in result.rows]
        else:
            records = list(_convergence_records(result))
            header = list(records[0])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for rec in records:
                w.writerow([_fmt(rec[h]) for h in header])
    elif format == "json":
        with open(path, "w") as fh:
            json.dump(result_to_dict(result), fh, indent=2)
    else:
        raise ValueError(f"unknown format {format!r}")


def result_to_dict(result) -> dict:
    cfg = result.config.to_dict() if result.config is not None else None
    if isinstance(result, SweepResult):
        return {"kind": "sweep", "config": cfg,
                "rows": [dataclasses.asdict(r) for r in result.rows]}
    t = result.trajectory
    return {
        "kind": "convergence", "config": cfg,
        "source": None if result.source is None else result.source.tolist(),
        "trajectory": {"iterates": [y.tolist() for y in t.iterates], "costs": t.costs,
                       "converged": t.converged, "iterations_used": t.iterations_used},
        "squared_error_per_iter": result.squared_error_per_iter,
    }


def load_results(path):
    with open(path) as fh:
        d = json.load(fh)
    cfg = ScenarioConfig.from_dict(d["config"]) if d["config"] is not None else None
    if d["kind"] == "sweep":
        return SweepResult([SweepRow(**r) for r in d["rows"]], cfg)
    t = d["trajectory"]
    traj = Trajectory([np.array(y) for y in t["iterates"]], t["costs"], t["converged"],
                      t["iterations_used"])
    src = None if d["source"] is None else np.array(d["source"])
    return ConvergenceResult(traj, d["squared_error_per_iter"], src, cfg)


def random_scenario(rng: np.random.Generator, dim: int = 2, extent: float = 10e-6,
                    min_shape: float = 0.25) -> tuple[AnchorSet, np.ndarray]:
    """Random simplex of ``dim + 1`` anchors and a source uniform inside it.

    Anchors are uniform in ``[-extent, extent]^dim``; simplices whose edge
    matrix has singular-value ratio below ``min_shape`` are redrawn.
    """
    while True:
        X = rng.uniform(-extent, extent, size=(dim + 1, dim))
        sv = np.linalg.svd(X[1:] - X[0], compute_uv=False)
        if sv[-1] / sv[0] >= min_shape:
            break
    beta = rng.dirichlet(np.ones(dim + 1))
    return AnchorSet(X), beta @ X
