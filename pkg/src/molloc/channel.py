"""Diffusion channel forward model: impulse response, peak counts, sampling.

Lengths and times are SI. A point release of ``Q`` molecules in unbounded 3-D
space gives the concentration ``Q / (4 pi D t)^1.5 * exp(-d^2 / (4 D t))``.
A sensor with detection volume ``V_s`` sees a Poisson count with mean
``V_s`` times that concentration.
"""
from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass

import numpy as np

from .poisson import poisson

# Internal length unit (1 um); keeps d^3 .. d^7 well inside double range.
LENGTH_SCALE = 1e-6

_PEAK_CONST = (3.0 / (2.0 * math.pi * math.e)) ** 1.5
_LOG_MIN = math.log(sys.float_info.min)
_LOG_MAX = math.log(sys.float_info.max)


class PeakModel(str, enum.Enum):
    DERIVED = "derived"
    PAPER_LITERAL = "paper-literal"


class UnrepresentableAlpha(ArithmeticError):
    """The peak coefficient under/overflows in linear space."""

    def __init__(self, log_value: float):
        super().__init__(f"alpha = exp({log_value:.6g}) is not representable as a double")
        self.log_value = log_value


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel parameters.

    Q: molecules per pulse. D: diffusion coefficient [m^2/s].
    T_s: sampling period [s]. V_s: sensor detection volume [m^3].
    noise_free: samplers return the exact Poisson mean instead of a draw.
    """

    Q: float = 5e5
    D: float = 1e-9
    T_s: float = 1e-4
    V_s: float = 1e-18
    peak_model: PeakModel = PeakModel.DERIVED
    noise_free: bool = False

    def __post_init__(self):
        for name in ("Q", "D", "T_s", "V_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        object.__setattr__(self, "peak_model", PeakModel(self.peak_model))


@dataclass(frozen=True)
class Measurement:
    sensor_index: int
    z: float
    lambda_true: float | None = None

    def __post_init__(self):
        if self.z < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class MeasurementSet:
    """One peak measurement per anchor, in anchor order."""

    measurements: tuple

    def __post_init__(self):
        ms = tuple(self.measurements)
        idx = [m.sensor_index for m in ms]
        if sorted(idx) != list(range(len(ms))):
            raise ValueError("sensor indices must be unique and cover 0..n-1")
        object.__setattr__(self, "measurements", tuple(sorted(ms, key=lambda m: m.sensor_index)))

    @classmethod
    def from_counts(cls, z, lambda_true=None) -> "MeasurementSet":
        lam = [None] * len(z) if lambda_true is None else list(lambda_true)
        return cls(tuple(Measurement(i, _count(v), l) for i, (v, l) in enumerate(zip(z, lam))))

    @property
    def counts(self) -> np.ndarray:
        return np.array([m.z for m in self.measurements], dtype=float)

    def __len__(self):
        return len(self.measurements)

    def __iter__(self):
        return iter(self.measurements)


def _count(v):
    return int(v) if isinstance(v, (int, np.integer)) else float(v)


def cir(d, t, params: ChannelParams):
    """Expected concentration [molecules/m^3] at distance ``d`` and time ``t``."""
    d = np.asarray(d, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(d <= 0) or np.any(t <= 0):
        raise ValueError("distance and time must be positive")
    D = params.D
    out = params.Q / (4.0 * np.pi * D * t) ** 1.5 * np.exp(-d * d / (4.0 * D * t))
    return out if out.ndim else float(out)


def peak_time(d, params: ChannelParams):
    """Time of maximum concentration, ``d^2 / (6 D)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = d * d / (6.0 * params.D)
    return out if out.ndim else float(out)


def log_alpha(params: ChannelParams) -> float:
    """Natural log of the peak coefficient (SI units, count * m^3)."""
    base = math.log(params.Q) + math.log(params.V_s)
    if params.peak_model is PeakModel.DERIVED:
        return base + math.log(_PEAK_CONST)
    # (3 / (2 pi D e^{1/D}))^{3/2}, kept in log space: e^{1/D} overflows for any physical D
    D = params.D
    return base + 1.5 * (math.log(3.0 / (2.0 * math.pi * D)) - 1.0 / D)


def alpha(params: ChannelParams, log: bool = False) -> float:
    """Coefficient such that the expected peak count at distance d is alpha / d^3.

    Raises :class:`UnrepresentableAlpha` (carrying the log value) when the
    linear value under/overflows, which happens for the literal peak model
    at any physical diffusion coefficient.
    """
    la = log_alpha(params)
    if log:
        return la
    return _checked_exp(la, la)


def alpha_scaled(params: ChannelParams) -> float:
    """alpha in internal units (count * um^3)."""
    la = log_alpha(params)
    return _checked_exp(la - 3.0 * math.log(LENGTH_SCALE), la)


def _checked_exp(x: float, log_value: float) -> float:
    if not _LOG_MIN < x < _LOG_MAX:
        raise UnrepresentableAlpha(log_value)
    return math.exp(x)


def expected_peak_count(d, params: ChannelParams):
    """Poisson mean ``alpha / d^3`` of a sensor's peak count."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("sensor coincides with the source (d = 0)")
    out = alpha_scaled(params) / (d / LENGTH_SCALE) ** 3
    return out if out.ndim else float(out)


def sample_peak_measurement(d, params: ChannelParams, rng: np.random.Generator,
                            sensor_index: int = 0) -> Measurement:
    lam = expected_peak_count(d, params)
    if params.noise_free:
        return Measurement(sensor_index, lam, lam)
    return Measurement(sensor_index, int(poisson(lam, rng)), lam)


def sample_peak_measurements(distances, params: ChannelParams,
                             rng: np.random.Generator) -> MeasurementSet:
    """Peak counts for all sensors at once (one draw per sensor)."""
    lam = np.atleast_1d(expected_peak_count(np.asarray(distances, dtype=float), params))
    z = lam.copy() if params.noise_free else poisson(lam, rng)
    return MeasurementSet(tuple(
        Measurement(i, float(z[i]) if params.noise_free else int(z[i]), float(lam[i]))
        for i in range(lam.size)))


def sample_time_series(d, M: int, params: ChannelParams, rng: np.random.Generator,
                       sensor_index: int = 0) -> list[Measurement]:
    """M samples at t = k T_s (k = 1..M), each Poisson with mean V_s * cir(d, t)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    t = params.T_s * np.arange(1, M + 1)
    lam = params.V_s * np.atleast_1d(cir(d, t, params))
    if params.noise_free:
        z = lam
    else:
        z = poisson(lam, rng)
    return [Measurement(sensor_index, float(z[k]) if params.noise_free else int(z[k]), float(lam[k]))
            for k in range(M)]


def peak_pick(series) -> tuple[int, Measurement]:
    """Index and element of the largest sample; ties go to the earliest."""
    series = list(series)
    if not series:
        raise ValueError("empty series")
    zs = np.array([m.z for m in series], dtype=float)
    k = int(np.argmax(zs))
    return k, series[k]


def as_counts(measurements) -> np.ndarray:
    """Count vector from a MeasurementSet or any sequence of numbers."""
    if isinstance(measurements, MeasurementSet):
        return measurements.counts
    z = np.asarray(measurements, dtype=float)
    if z.ndim != 1 or np.any(z < 0) or not np.all(np.isfinite(z)):
        raise ValueError("counts must be a finite non-negative vector")
    return z
