"""Triangulation least squares and gradient descent on the peak-count residual.

Public functions take and return SI quantities. Internally every length is
divided by ``LENGTH_SCALE`` so that the d^-3 .. d^-8 powers stay well scaled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.linalg import solve_triangular

from .channel import LENGTH_SCALE, ChannelParams, alpha_scaled, as_counts
from .geometry import AnchorSet, DegenerateGeometryError, as_point

L0 = LENGTH_SCALE

# An iterate closer than this to an anchor (internal units) is rejected.
ANCHOR_GUARD = 1e-9


class MeasurementFailure(ValueError):
    """A zero count makes the distance estimate (alpha / z)^(2/3) undefined."""

    def __init__(self, sensor_index: int):
        super().__init__(f"sensor {sensor_index} reported z = 0; cannot invert for distance")
        self.sensor_index = sensor_index


class AnchorCollision(ValueError):
    pass


def _anchors(anchors) -> AnchorSet:
    return anchors if isinstance(anchors, AnchorSet) else AnchorSet(anchors)


def _check_counts(z: np.ndarray, anchors: AnchorSet) -> np.ndarray:
    if z.shape != (anchors.n,):
        raise ValueError(f"expected {anchors.n} measurements, got {z.shape[0]}")
    return z


# --------------------------------------------------------------------------
# triangulation

@dataclass(frozen=True)
class TriangulationSystem:
    """Stacked pairwise equations ``A y = B`` (SI: A in m, B in m^2)."""

    A: np.ndarray
    B: np.ndarray
    pairs: tuple

    def solve(self) -> np.ndarray:
        return _qr_solve(self.A / L0, self.B / L0**2) * L0


def _pairs(n: int) -> tuple:
    return tuple(combinations(range(n), 2))


def _system_scaled(X: np.ndarray, z: np.ndarray, a: float, pairs) -> tuple[np.ndarray, np.ndarray]:
    """A (m x N) and B (m,) or (m, k) for count arrays z of shape (n,) or (k, n)."""
    zero = np.flatnonzero(np.atleast_2d(z).min(axis=0) <= 0)
    if zero.size:
        raise MeasurementFailure(int(zero[0]))
    r2 = (a / z) ** (2.0 / 3.0)  # squared distance estimates
    sq = np.einsum("ij,ij->i", X, X)
    i, j = np.array(pairs).T
    A = -2.0 * (X[i] - X[j])
    B = r2[..., i] - r2[..., j] - sq[i] + sq[j]
    return A, B.T


def _qr_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Qm, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * diag.max():
        raise DegenerateGeometryError("triangulation matrix is rank deficient")
    return solve_triangular(R, Qm.T @ B)


def build_system(anchors, measurements, params: ChannelParams) -> TriangulationSystem:
    """Pairwise difference system over all anchor pairs i < j."""
    anchors = _anchors(anchors)
    z = _check_counts(as_counts(measurements), anchors)
    pairs = _pairs(anchors.n)
    A, B = _system_scaled(anchors.positions / L0, z, alpha_scaled(params), pairs)
    return TriangulationSystem(A * L0, B * L0**2, pairs)


def triangulate(anchors, measurements, params: ChannelParams) -> np.ndarray:
    """Least-squares source estimate from peak counts (QR solve)."""
    anchors = _anchors(anchors)
    z = _check_counts(as_counts(measurements), anchors)
    A, B = _system_scaled(anchors.positions / L0, z, alpha_scaled(params), _pairs(anchors.n))
    return _qr_solve(A, B) * L0


def triangulate_many(anchors, counts: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Vectorised ``triangulate`` for a ``(k, n)`` block of count vectors."""
    anchors = _anchors(anchors)
    counts = np.asarray(counts, dtype=float)
    A, B = _system_scaled(anchors.positions / L0, counts, alpha_scaled(params), _pairs(anchors.n))
    return _qr_solve(A, B).T * L0


# --------------------------------------------------------------------------
# gradient descent

def _model_terms(y: np.ndarray, X: np.ndarray):
    diff = X - y
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if d.min() <= 0:
        raise AnchorCollision("point coincides with an anchor")
    return diff, d


def _cost(y, X, z, a) -> float:
    _, d = _model_terms(y, X)
    r = z - a / d**3
    return float(r @ r)


def _grad(y, X, z, a) -> np.ndarray:
    diff, d = _model_terms(y, X)
    g = a / d**3
    gdot = -3.0 * a / d**4
    return 2.0 * (((z - g) * gdot / d) @ diff)


def gd_cost(y, anchors, measurements, params: ChannelParams) -> float:
    """Sum of squared residuals between counts and alpha / d^3."""
    anchors = _anchors(anchors)
    z = _check_counts(as_counts(measurements), anchors)
    y = as_point(y, anchors.dim)
    return _cost(y / L0, anchors.positions / L0, z, alpha_scaled(params))


def gd_gradient(y, anchors, measurements, params: ChannelParams) -> np.ndarray:
    """Gradient of :func:`gd_cost` with respect to y (units 1/m)."""
    anchors = _anchors(anchors)
    z = _check_counts(as_counts(measurements), anchors)
    y = as_point(y, anchors.dim)
    return _grad(y / L0, anchors.positions / L0, z, alpha_scaled(params)) / L0


@dataclass(frozen=True)
class GdOptions:
    """Gradient-descent settings.

    mu: initial step size in m^2; ``None`` picks the inverse curvature of the
    cost at the initial point. step_rule: ``"bb"`` re-estimates the step each
    iteration from the last two gradients (Barzilai-Borwein), ``"fixed"``
    restarts from ``mu`` every iteration. Either way a step that raises the
    cost is halved, at most ``max_halvings`` times. grad_tol is in 1/m;
    ``None`` means ``1e-12 * alpha / L0^4`` converted to SI.
    """

    mu: float | None = None
    max_iters: int = 500
    grad_tol: float | None = None
    init: object = "centroid"
    step_rule: str = "bb"
    max_halvings: int = 30

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_rule not in ("bb", "fixed"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


@dataclass
class Trajectory:
    iterates: list = field(default_factory=list)  # SI points y[0], y[1], ...
    costs: list = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0


def default_step(y0, anchors, params: ChannelParams) -> float:
    """Inverse Gauss-Newton curvature trace of the cost at ``y0`` [m^2]."""
    anchors = _anchors(anchors)
    _, d = _model_terms(as_point(y0, anchors.dim) / L0, anchors.positions / L0)
    a = alpha_scaled(params)
    return L0**2 / float(np.sum(18.0 * a * a / d**8))


def gradient_descent(anchors, measurements, params: ChannelParams,
                     opts: GdOptions | None = None) -> Trajectory:
    """Iterate ``y <- y - mu * grad J(y)`` from the anchor centroid (by default)."""
    opts = opts or GdOptions()
    anchors = _anchors(anchors)
    z = _check_counts(as_counts(measurements), anchors)
    X = anchors.positions / L0
    a = alpha_scaled(params)

    y0 = anchors.centroid if isinstance(opts.init, str) and opts.init == "centroid" else opts.init
    y = as_point(y0, anchors.dim) / L0
    mu0 = (opts.mu if opts.mu is not None else default_step(y * L0, anchors, params)) / L0**2
    tol = (opts.grad_tol * L0) if opts.grad_tol is not None else 1e-12 * a

    J = _cost(y, X, z, a)
    if not np.isfinite(J):
        raise FloatingPointError("non-finite cost at the initial point")
    traj = Trajectory(iterates=[y * L0], costs=[J])
    g = _grad(y, X, z, a)
    mu = mu0
    for _ in range(opts.max_iters):
        if np.linalg.norm(g) <= tol:
            traj.converged = True
            break
        step = mu
        for _ in range(opts.max_halvings + 1):
            y_new = y - step * g
            if np.min(np.linalg.norm(X - y_new, axis=1)) > ANCHOR_GUARD:
                J_new = _cost(y_new, X, z, a)
                if J_new <= J:
                    break
            step *= 0.5
        else:
            break  # no decreasing step at machine resolution
        if not np.isfinite(J_new):
            raise FloatingPointError("non-finite cost")
        g_new = _grad(y_new, X, z, a)
        if opts.step_rule == "bb":
            s, dg = y_new - y, g_new - g
            sy = float(s @ dg)
            mu = sy / float(dg @ dg) if sy > 0 else mu0
        y, J, g = y_new, J_new, g_new
        traj.iterates.append(y * L0)
        traj.costs.append(J)
        traj.iterations_used += 1
    else:
        traj.converged = bool(np.linalg.norm(g) <= tol)
    return traj
