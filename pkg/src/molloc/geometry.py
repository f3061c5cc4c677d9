"""Points, anchor sets, barycentric coordinates and open-hull membership.

Points are plain 1-D numpy arrays in meters. ``AnchorSet`` wraps the
``(n, N)`` array of sensor positions and checks that it spans N dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

# Positive barycentric weights must clear this to count as strictly inside.
BOUNDARY_EPS = 1e-12


class DegenerateGeometryError(ValueError):
    """Anchors do not span the ambient dimension (collinear / coplanar)."""


def as_point(p, dim: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] not in (2, 3):
        raise ValueError(f"point must be a 2- or 3-vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.shape[0]}")
    return p


def distance(p, q) -> float:
    p = as_point(p)
    q = as_point(q, p.shape[0])
    return float(np.linalg.norm(p - q))


def _affine_rank(positions: np.ndarray) -> int:
    diffs = positions[1:] - positions[0]
    scale = np.max(np.abs(diffs))
    if scale == 0:
        return 0
    return int(np.linalg.matrix_rank(diffs / scale, tol=1e-10))


@dataclass(frozen=True)
class AnchorSet:
    """Ordered sensor locations ``positions[i] = x_i`` (shape ``(n, N)``)."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3):
            raise ValueError(f"anchors must have shape (n, 2) or (n, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("anchor coordinates must be finite")
        n, dim = pos.shape
        if n < dim + 1:
            raise ValueError(f"need at least {dim + 1} anchors in {dim}-D, got {n}")
        if _affine_rank(pos) < dim:
            raise DegenerateGeometryError(
                "anchors are collinear (2-D) or coplanar (3-D); perturb them")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def __len__(self):
        return self.n

    def translated(self, v) -> "AnchorSet":
        return AnchorSet(self.positions + as_point(v, self.dim))

    def transformed(self, rot) -> "AnchorSet":
        return AnchorSet(self.positions @ np.asarray(rot, dtype=float).T)

    def scaled(self, s: float) -> "AnchorSet":
        return AnchorSet(self.positions * s)


def _as_anchors(anchors) -> AnchorSet:
    return anchors if isinstance(anchors, AnchorSet) else AnchorSet(anchors)


def barycentric_coordinates(y, anchors) -> np.ndarray:
    """Weights ``beta`` with ``X^T beta = y`` and ``sum(beta) = 1``.

    Unique for ``n = N + 1``. With more anchors the minimum-norm solution of
    the underdetermined affine system is returned.
    """
    anchors = _as_anchors(anchors)
    y = as_point(y, anchors.dim)
    # Work relative to the centroid so the affine system is well scaled.
    c = anchors.centroid
    scale = np.max(np.abs(anchors.positions - c))
    M = np.vstack([((anchors.positions - c) / scale).T, np.ones(anchors.n)])
    rhs = np.append((y - c) / scale, 1.0)
    if anchors.n == anchors.dim + 1:
        return np.linalg.solve(M, rhs)
    return np.linalg.lstsq(M, rhs, rcond=None)[0]


def in_open_convex_hull(y, anchors, eps: float = BOUNDARY_EPS) -> bool:
    anchors = _as_anchors(anchors)
    y = as_point(y, anchors.dim)
    if anchors.n == anchors.dim + 1:
        return bool(np.all(barycentric_coordinates(y, anchors) > eps))
    return _max_min_weight(y, anchors) > eps


def _max_min_weight(y: np.ndarray, anchors: AnchorSet) -> float:
    # maximize t  s.t.  X^T beta = y, 1^T beta = 1, beta_i >= t
    n = anchors.n
    c = anchors.centroid
    scale = np.max(np.abs(anchors.positions - c))
    X = (anchors.positions - c) / scale
    A_eq = np.zeros((anchors.dim + 1, n + 1))
    A_eq[:-1, :n] = X.T
    A_eq[-1, :n] = 1.0
    b_eq = np.append((y - c) / scale, 1.0)
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * (n + 1), method="highs")
    if res.status == 2:  # infeasible: outside the closed hull
        return -np.inf
    if res.status == 3:  # unbounded cannot happen for a valid anchor set
        raise DegenerateGeometryError("hull membership problem is unbounded")
    return float(-res.fun)
