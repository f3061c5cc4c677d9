"""Poisson log-likelihood of peak counts, its derivatives, and the CRB.

The counts are modelled as independent ``Poisson(alpha / d_i^3)``. All
inputs/outputs are SI; the score is in 1/m, the Hessian and Fisher matrix in
1/m^2 and the bound in m^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln

from .channel import LENGTH_SCALE, ChannelParams, alpha_scaled, as_counts
from .estimators import _anchors, _check_counts, _model_terms
from .geometry import as_point

L0 = LENGTH_SCALE
MAX_CONDITION = 1e12


class SingularFisherError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class FisherInfo:
    matrix: np.ndarray  # N x N, 1/m^2


@dataclass(frozen=True)
class CrbResult:
    crb: float  # trace of the inverse FIM, m^2
    fim: FisherInfo


def _setup(y, anchors, params):
    anchors = _anchors(anchors)
    y = as_point(y, anchors.dim) / L0
    diff, d = _model_terms(y, anchors.positions / L0)
    return anchors, diff, d, alpha_scaled(params)


def log_likelihood(y, measurements, anchors, params: ChannelParams,
                   include_constant: bool = False) -> float:
    anchors, _, d, a = _setup(y, anchors, params)
    z = _check_counts(as_counts(measurements), anchors)
    lam = a / d**3
    # z * log(lam) with the 0 * log(.) = 0 convention
    ll = float(np.sum(np.where(z > 0, z * np.log(lam), 0.0) - lam))
    if include_constant:
        ll -= float(np.sum(gammaln(z + 1.0)))
    return ll


def score(y, measurements, anchors, params: ChannelParams) -> np.ndarray:
    anchors, diff, d, a = _setup(y, anchors, params)
    z = _check_counts(as_counts(measurements), anchors)
    # diff = x_i - y, and d(d_i)/dy = -(x_i - y) / d_i
    w = 3.0 * (z / d - a / d**4) / d
    return (w @ diff) / L0


def hessian(y, measurements, anchors, params: ChannelParams) -> np.ndarray:
    """Second derivative of the log-likelihood in y (N x N)."""
    anchors, diff, d, a = _setup(y, anchors, params)
    z = _check_counts(as_counts(measurements), anchors)
    outer_w = 5.0 * a / d**7 - 2.0 * z / d**4
    iso_w = (a / d**3 - z) / d**2
    H = 3.0 * (iso_w.sum() * np.eye(anchors.dim) - np.einsum("i,ij,ik->jk", outer_w, diff, diff))
    return H / L0**2


def _fim_scaled(y, anchors, params):
    _, diff, d, a = _setup(y, anchors, params)
    return 9.0 * a * np.einsum("i,ij,ik->jk", 1.0 / d**7, diff, diff)


def fisher_information(y_star, anchors, params: ChannelParams) -> FisherInfo:
    return FisherInfo(_fim_scaled(y_star, anchors, params) / L0**2)


def crb(y_star, anchors, params: ChannelParams) -> CrbResult:
    """Trace of the inverse Fisher matrix, via Cholesky with a condition check."""
    F = _fim_scaled(y_star, anchors, params)
    ev = np.linalg.eigvalsh(F)
    if ev[0] <= 0 or ev[-1] / ev[0] > MAX_CONDITION:
        raise SingularFisherError("Fisher matrix is singular or nearly so")
    inv = cho_solve(cho_factor(F), np.eye(F.shape[0]))
    return CrbResult(float(np.trace(inv)) * L0**2, FisherInfo(F / L0**2))
