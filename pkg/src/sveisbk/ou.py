"""Exact simulation and stationary analysis of the log-transmission noise.

The deviation z(t) = ln(beta(t)) - ln(beta_bar) follows the mean-reverting
diffusion dz = -theta*z dt + delta dB, whose transition over any dt is the
Gaussian

    z(t+dt) | z(t) ~ N(z(t) * e^{-theta dt},
                       delta^2 (1 - e^{-2 theta dt}) / (2 theta)),

so z is always advanced exactly; there is no discretization error in the
noise channel. The stationary law is N(0, delta^2/(2 theta)) with density
pi(z) = sqrt(theta)/(delta*sqrt(pi)) * exp(-theta z^2 / delta^2) and
exponential moments E[e^{a z}] = exp(a^2 delta^2 / (4 theta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import PCG64, SeedSequence
from scipy.special import ndtri

from .errors import DegenerateStationary, NonPositiveParameter

__all__ = [
    "OuParams",
    "RngStream",
    "ou_transition",
    "ou_step_exact",
    "ou_stationary_sample",
    "ou_stationary_density",
    "ou_exp_moment",
    "abs_expm1_bound",
]


@dataclass(frozen=True)
class OuParams:
    """Reversion speed theta (> 0) and volatility delta (>= 0)."""

    theta: float
    delta: float

    def __post_init__(self):
        if not (self.theta > 0.0) or not math.isfinite(self.theta):
            raise NonPositiveParameter("theta", self.theta)
        if not (self.delta >= 0.0) or not math.isfinite(self.delta):
            raise NonPositiveParameter("delta", self.delta)


class RngStream:
    """Reproducible standard-normal stream keyed by (master_seed, stream_index).

    Identical keys replay the identical draw sequence; distinct stream
    indices give statistically independent streams (PCG64 under
    SeedSequence(master_seed, spawn_key=(stream_index,))).

    Normals come from a fixed, documented transform of the generator's raw
    64-bit words: the top 52 bits k map to the strictly interior uniform
    u = (k + 0.5) * 2**-52, and the draw is the inverse normal CDF at u.
    Every quantity in the transform is exactly representable, so one word
    yields one normal and batched draws equal the same number of scalar
    draws. Draws are bounded by |x| <= ndtri(2**-53) ~ 8.2.
    """

    def __init__(self, master_seed: int, stream_index: int = 0):
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        self._bg = PCG64(SeedSequence(self.master_seed,
                                      spawn_key=(self.stream_index,)))

    def standard_normal(self, size: int | None = None):
        """One draw (size=None) or a 1-D array of draws in stream order."""
        if size is None:
            word = self._bg.random_raw()
            u = ((word >> 12) + 0.5) * 2.0 ** -52
            return float(ndtri(u))
        words = self._bg.random_raw(size)
        u = ((words >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0 ** -52
        return ndtri(u)


def ou_transition(dt: float, p: OuParams) -> tuple[float, float]:
    """Exact transition coefficients (decay, sd) over a step of length dt.

    z' = z*decay + sd*xi with decay = e^{-theta dt} and
    sd^2 = delta^2 (1 - e^{-2 theta dt}) / (2 theta).
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    decay = math.exp(-p.theta * dt)
    var = p.delta ** 2 * (-math.expm1(-2.0 * p.theta * dt)) / (2.0 * p.theta)
    return decay, math.sqrt(var)


def ou_step_exact(z, dt: float, p: OuParams, rng: RngStream):
    """Advance z by one exact Gaussian transition of length dt.

    Accepts a scalar or an array of independent states; one fresh normal is
    consumed per state, in order.
    """
    decay, sd = ou_transition(dt, p)
    if np.ndim(z) == 0:
        return float(z) * decay + sd * rng.standard_normal()
    z = np.asarray(z, dtype=np.float64)
    return z * decay + sd * rng.standard_normal(z.size).reshape(z.shape)


def _require_noise(p: OuParams) -> None:
    if p.delta == 0.0:
        raise DegenerateStationary(
            "delta = 0: stationary law is a point mass at 0")


def ou_stationary_sample(p: OuParams, rng: RngStream, size: int | None = None):
    """Draw from the stationary law N(0, delta^2/(2 theta)); requires delta > 0."""
    _require_noise(p)
    sd = p.delta / math.sqrt(2.0 * p.theta)
    return sd * rng.standard_normal(size)


def ou_stationary_density(z, p: OuParams):
    """Stationary density sqrt(theta)/(delta*sqrt(pi)) * exp(-theta z^2/delta^2)."""
    _require_noise(p)
    norm = math.sqrt(p.theta) / (p.delta * math.sqrt(math.pi))
    return norm * np.exp(-(p.theta / p.delta ** 2) * np.square(z))


def ou_exp_moment(a: float, p: OuParams) -> float:
    """Stationary exponential moment E[e^{a z}] = exp((a*delta)^2/(4 theta))."""
    return math.exp((a * p.delta) ** 2 / (4.0 * p.theta))


def abs_expm1_bound(p: OuParams) -> float:
    """Upper bound on the stationary mean of |e^z - 1|.

    Equals sqrt(E[e^{2z}] - 2 E[e^z] + 1), the root of the stationary second
    moment of e^z - 1. Evaluated as sqrt(expm1(x) - 2*expm1(x/4)) with
    x = delta^2/theta, which is the same quantity without cancellation for
    small delta.
    """
    x = p.delta ** 2 / p.theta
    return math.sqrt(math.expm1(x) - 2.0 * math.expm1(0.25 * x))
