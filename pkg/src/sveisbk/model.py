"""SVEIS model core: parameters, drift field, equilibrium and thresholds.

The deterministic compartment dynamics with saturated incidence are

    dS/dt = Pi - alpha*S - beta*S*I/(1 + k*I) - m*S + omega*V
    dV/dt = alpha*S + gamma*I + xi*E - (m + omega)*V
    dE/dt = beta*S*I/(1 + k*I) - (m + sigma + xi)*E
    dI/dt = sigma*E - (m + gamma + eta)*I

with the transmission coefficient beta = beta_bar * exp(z) driven by the
log-transmission deviation z, itself a mean-reverting diffusion

    dz = -theta*z dt + delta dB.

Three threshold quantities classify the long-run behaviour:

    R0   = sigma*beta*Pi*(m+omega)
           / [m*(m+alpha+omega)*(m+gamma+eta)*(m+sigma+xi)]
    R0s  = R0(beta_bar) * exp(delta^2 / (16*theta))
    R0e  = sqrt(R0) + sigma*S0*beta_bar*sqrt(e^{d^2/th} - 2 e^{d^2/(4 th)} + 1)
           / [sqrt(R0)*(m+sigma+xi)*min(m+sigma+xi, m+gamma+eta)]

R0s > 1 predicts persistence (an ergodic stationary distribution exists);
R0e < 1 predicts exponential extinction of E and I. The two conditions are
not exhaustive; the gap is reported as Indeterminate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DegenerateR0, NonPositiveParameter
from .ou import OuParams, abs_expm1_bound

__all__ = [
    "ModelParams",
    "State",
    "Drift",
    "Regime",
    "ThresholdReport",
    "validate_params",
    "drift",
    "dfe",
    "default_init",
    "r0",
    "r0_s",
    "r0_e",
    "extinction_matrix",
    "extinction_weights",
    "thresholds",
    "in_gamma",
]

# Field order doubles as the validation order: the first violated field
# is the one reported.
PARAM_FIELDS = ("Pi", "alpha", "beta_bar", "m", "omega", "gamma", "xi",
                "sigma", "eta", "k", "theta", "delta")


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the model plus the transmission-noise parameters.

    Attributes
    ----------
    Pi : float
        Recruitment rate (individuals/time).
    alpha : float
        Vaccination rate (1/time).
    beta_bar : float
        Long-run mean transmission coefficient (1/(individuals*time)).
    m : float
        Natural death rate (1/time).
    omega : float
        Immunity-waning rate (1/time).
    gamma : float
        Recovery rate of the infectious class (1/time).
    xi : float
        Recovery rate of the exposed class (1/time).
    sigma : float
        Latency progression rate (1/time).
    eta : float
        Disease-induced death rate (1/time).
    k : float
        Saturation (inhibition) coefficient of the incidence (1/individuals).
        Must be strictly positive; callers wanting near-bilinear incidence
        pass a small k explicitly.
    theta : float
        Reversion speed of the log-transmission deviation (1/time).
    delta : float
        Volatility of the log-transmission deviation (1/sqrt(time));
        delta = 0 recovers the deterministic model.
    """

    Pi: float
    alpha: float
    beta_bar: float
    m: float
    omega: float
    gamma: float
    xi: float
    sigma: float
    eta: float
    k: float
    theta: float
    delta: float

    def kernel_tuple(self) -> tuple[float, ...]:
        """Packed positional layout consumed by the compiled kernels."""
        return (self.Pi, self.alpha, self.beta_bar, self.m, self.omega,
                self.gamma, self.xi, self.sigma, self.eta, self.k)

    def ou(self) -> OuParams:
        return OuParams(theta=self.theta, delta=self.delta)


def validate_params(p: ModelParams) -> ModelParams:
    """Return p unchanged iff every positivity constraint holds.

    All rates must be strictly positive; delta may be zero (deterministic
    limit). Raises NonPositiveParameter naming the first violated field.
    """
    for name in PARAM_FIELDS[:-1]:
        value = getattr(p, name)
        if not (value > 0.0) or not math.isfinite(value):
            raise NonPositiveParameter(name, value)
    if not (p.delta >= 0.0) or not math.isfinite(p.delta):
        raise NonPositiveParameter("delta", p.delta)
    return p


@dataclass(frozen=True)
class State:
    """One point (S, V, E, I, z) of the five-dimensional system.

    Compartments are nonnegative population counts; z is the dimensionless
    log-deviation of the transmission coefficient. Membership in the
    invariant region is a separate predicate (in_gamma), not enforced here.
    """

    S: float
    V: float
    E: float
    I: float
    z: float = 0.0

    @property
    def N(self) -> float:
        """Total population S + V + E + I."""
        return self.S + self.V + self.E + self.I

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.V, self.E, self.I, self.z])

    @classmethod
    def from_array(cls, a) -> "State":
        return cls(S=float(a[0]), V=float(a[1]), E=float(a[2]),
                   I=float(a[3]), z=float(a[4]))


class Drift(NamedTuple):
    """Componentwise time derivative of a State."""

    dS: float
    dV: float
    dE: float
    dI: float
    dz: float


def drift(s: State, p: ModelParams) -> Drift:
    """Evaluate the five drift components at state s.

    The compartment block sees beta = beta_bar * exp(s.z); the z component
    is the linear mean reversion -theta*z.
    """
    beta_eff = p.beta_bar * math.exp(s.z)
    ds, dv, de, di = _kernels.compartment_drift(s.S, s.V, s.E, s.I,
                                                beta_eff, p.kernel_tuple())
    return Drift(ds, dv, de, di, -p.theta * s.z)


def dfe(p: ModelParams) -> State:
    """Disease-free equilibrium (S0, V0, 0, 0, 0).

    S0 = Pi*(m+omega) / (m*(m+alpha+omega)), V0 = alpha*S0/(m+omega); these
    solve the linear balance of S and V with E = I = 0 and satisfy
    S0 + V0 = Pi/m.
    """
    s0 = p.Pi * (p.m + p.omega) / (p.m * (p.m + p.alpha + p.omega))
    v0 = p.alpha * s0 / (p.m + p.omega)
    return State(S=s0, V=v0, E=0.0, I=0.0, z=0.0)


def default_init(p: ModelParams, infected_fraction: float = 0.01) -> State:
    """Disease-free equilibrium with a fraction of the population moved to I.

    S and V are scaled down proportionally so the total stays at Pi/m,
    keeping the state inside the invariant region for any parameters.
    """
    eq = dfe(p)
    i0 = infected_fraction * p.Pi / p.m
    shrink = 1.0 - infected_fraction
    return State(S=eq.S * shrink, V=eq.V * shrink, E=0.0, I=i0, z=0.0)


def r0(p: ModelParams, beta: float) -> float:
    """Basic reproduction number at transmission coefficient beta.

    R0 = sigma*beta*Pi*(m+omega)
         / [m*(m+alpha+omega)*(m+gamma+eta)*(m+sigma+xi)],
    equivalently beta*S0*sigma / [(m+sigma+xi)*(m+gamma+eta)].
    """
    num = p.sigma * beta * p.Pi * (p.m + p.omega)
    den = (p.m * (p.m + p.alpha + p.omega) * (p.m + p.gamma + p.eta)
           * (p.m + p.sigma + p.xi))
    return num / den


def r0_s(p: ModelParams) -> float:
    """Persistence threshold: R0 at beta_bar inflated by exp(delta^2/(16*theta)).

    Values above 1 guarantee an ergodic stationary distribution. Strictly
    increasing in delta and decreasing in theta: transmission noise
    facilitates outbreak.
    """
    return r0(p, p.beta_bar) * math.exp(p.delta ** 2 / (16.0 * p.theta))


def r0_e(p: ModelParams) -> float:
    """Extinction threshold.

    R0e = sqrt(R0) + sigma*S0*beta_bar*B
          / [sqrt(R0)*(m+sigma+xi)*min(m+sigma+xi, m+gamma+eta)]

    where B = sqrt(e^{delta^2/theta} - 2 e^{delta^2/(4 theta)} + 1) bounds
    the stationary mean of |e^z - 1|. Values below 1 guarantee exponential
    extinction of E and I. Raises DegenerateR0 when R0 = 0.
    """
    base = r0(p, p.beta_bar)
    if base <= 0.0:
        raise DegenerateR0("r0(beta_bar) = 0: r0_e undefined")
    root = math.sqrt(base)
    s0 = dfe(p).S
    bound = abs_expm1_bound(p.ou())
    msx = p.m + p.sigma + p.xi
    mge = p.m + p.gamma + p.eta
    return root + p.sigma * s0 * p.beta_bar * bound / (root * msx * min(msx, mge))


def extinction_matrix(p: ModelParams) -> np.ndarray:
    """Next-generation-style 2x2 matrix whose spectral radius is sqrt(R0)."""
    s0 = dfe(p).S
    return np.array([
        [0.0, p.beta_bar * s0 / (p.m + p.sigma + p.xi)],
        [p.sigma / (p.m + p.gamma + p.eta), 0.0],
    ])


def extinction_weights(p: ModelParams) -> tuple[float, float]:
    """Left eigenvector (w1, w2) of extinction_matrix for eigenvalue sqrt(R0).

    w1 = sigma / ((m+gamma+eta) * sqrt(R0)), w2 = 1. Raises DegenerateR0
    when R0 = 0. The eigenvector identity is re-verified numerically on
    every call.
    """
    base = r0(p, p.beta_bar)
    if base <= 0.0:
        raise DegenerateR0("r0(beta_bar) = 0: extinction weights undefined")
    root = math.sqrt(base)
    w1 = p.sigma / ((p.m + p.gamma + p.eta) * root)
    w2 = 1.0
    w = np.array([w1, w2])
    residual = np.max(np.abs(w @ extinction_matrix(p) - root * w))
    assert residual <= 1e-9 * max(1.0, root), residual
    return w1, w2


class Regime(str, Enum):
    """Long-run classification implied by the thresholds."""

    PERSISTENCE = "PersistencePredicted"
    EXTINCTION = "ExtinctionPredicted"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ThresholdReport:
    """All three thresholds, the disease-free equilibrium, and the regime."""

    r0: float
    r0_s: float
    r0_e: float
    s0: float
    dfe: State
    regime: Regime

    def as_dict(self) -> dict:
        return {
            "r0": self.r0,
            "r0_s": self.r0_s,
            "r0_e": self.r0_e,
            "s0": self.s0,
            "dfe": {"S": self.dfe.S, "V": self.dfe.V, "E": self.dfe.E,
                    "I": self.dfe.I, "z": self.dfe.z},
            "regime": self.regime.value,
        }


def thresholds(p: ModelParams) -> ThresholdReport:
    """Compute R0, R0s, R0e and classify the predicted regime.

    PersistencePredicted when R0s > 1, ExtinctionPredicted when R0e < 1,
    Indeterminate otherwise (the two conditions are not exhaustive).
    """
    validate_params(p)
    eq = dfe(p)
    base = r0(p, p.beta_bar)
    rs = r0_s(p)
    re = r0_e(p)
    if rs > 1.0:
        regime = Regime.PERSISTENCE
    elif re < 1.0:
        regime = Regime.EXTINCTION
    else:
        regime = Regime.INDETERMINATE
    return ThresholdReport(r0=base, r0_s=rs, r0_e=re, s0=eq.S, dfe=eq,
                           regime=regime)


def in_gamma(s: State, p: ModelParams, rtol: float = 1e-9) -> bool:
    """Membership predicate for the invariant region.

    Requires nonnegative compartments, total population at most Pi/m and
    S at most S0, each up to a relative slack of rtol * Pi/m.
    """
    cap = p.Pi / p.m
    slack = rtol * cap
    if min(s.S, s.V, s.E, s.I) < -slack:
        return False
    if s.N > cap + slack:
        return False
    return s.S <= dfe(p).S + slack
