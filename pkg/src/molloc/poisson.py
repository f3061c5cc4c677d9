"""Poisson variates drawn from a numpy ``Generator``'s uniform stream.

Small means use inversion by sequential search; larger means use Hörmann's
transformed rejection with squeeze (PTRS). Means above ``MAX_LAMBDA`` are
refused rather than approximated.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

INVERSION_LIMIT = 30.0
MAX_LAMBDA = 1e9


def poisson(lam, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw Poisson counts with mean ``lam`` (scalar or array)."""
    lam = np.asarray(lam, dtype=float)
    if size is not None:
        lam = np.broadcast_to(lam, size)
    if np.any(~np.isfinite(lam)) or np.any(lam < 0):
        raise ValueError("Poisson mean must be finite and non-negative")
    if np.any(lam > MAX_LAMBDA):
        raise OverflowError(f"Poisson mean exceeds supported range ({MAX_LAMBDA:g})")
    flat = lam.ravel()
    out = np.zeros(flat.shape, dtype=np.int64)
    small = (flat > 0) & (flat < INVERSION_LIMIT)
    large = flat >= INVERSION_LIMIT
    if small.any():
        out[small] = _inversion(flat[small], rng)
    if large.any():
        out[large] = _ptrs(flat[large], rng)
    if lam.ndim == 0:
        return out[0]
    return out.reshape(lam.shape)


def _inversion(lam: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(lam.shape)
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    while active.any():
        idx = np.flatnonzero(active)
        k[idx] += 1
        p[idx] *= lam[idx] / k[idx]
        cdf[idx] += p[idx]
        # cdf can stall just below 1 through rounding; the tail mass there is < 1e-16
        active[idx] = (u[idx] > cdf[idx]) & (p[idx] > 0)
    return k


def _ptrs(lam: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)

    out = np.empty(lam.shape, dtype=np.int64)
    pending = np.arange(lam.size)
    while pending.size:
        U = rng.random(pending.size) - 0.5
        V = rng.random(pending.size)
        a_, b_, lam_ = a[pending], b[pending], lam[pending]
        us = 0.5 - np.abs(U)
        k = np.floor((2.0 * a_ / us + b_) * U + lam_ + 0.43)

        accept = (us >= 0.07) & (V <= vr[pending])
        reject = (k < 0) | ((us < 0.013) & (V > us))
        test = ~accept & ~reject
        if test.any():
            kt = k[test]
            lhs = (np.log(V[test]) + np.log(inv_alpha[pending][test])
                   - np.log(a_[test] / (us[test] * us[test]) + b_[test]))
            rhs = -lam_[test] + kt * loglam[pending][test] - gammaln(kt + 1.0)
            accept[np.flatnonzero(test)[lhs <= rhs]] = True
        out[pending[accept]] = k[accept].astype(np.int64)
        pending = pending[~accept]
    return out
