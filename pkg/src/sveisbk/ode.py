"""Fixed-step RK4 integration of the compartment dynamics with frozen noise.

Used standalone for the deterministic (delta = 0) baseline and as the
within-step propagator of the splitting scheme. Fixed step rather than
adaptive: reproducibility and reuse as the splitting propagator matter more
than adaptivity, and the stiffness ratio of epidemic rates at sensible
parameters is mild.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .errors import StepProducedNegative
from .model import ModelParams, State, extinction_weights, in_gamma

__all__ = [
    "Trajectory",
    "default_dt",
    "negativity_floor",
    "rk4_step",
    "integrate_deterministic",
]

# Column order of Trajectory.states and of the cumulative integrals
# (cumulative carries exp(z) as a sixth series).
STATE_COLUMNS = ("S", "V", "E", "I", "z")
CUM_COLUMNS = ("S", "V", "E", "I", "z", "ez")


def default_dt(p: ModelParams) -> float:
    """One percent of the smallest mean residence time among the four classes."""
    shortest = min(1.0 / p.m, 1.0 / (p.m + p.gamma + p.eta),
                   1.0 / (p.m + p.sigma + p.xi), 1.0 / (p.m + p.omega))
    return 0.01 * shortest


def negativity_floor(p: ModelParams) -> float:
    """Undershoot tolerance: compartments below -floor abort the step."""
    return 1e-12 * p.Pi / p.m


@dataclass
class Trajectory:
    """A time grid, the state at each node, and run provenance.

    Attributes
    ----------
    times : ndarray, shape (n,)
        Strictly increasing node times.
    states : ndarray, shape (n, 5)
        Columns S, V, E, I, z.
    meta : dict
        At least params, scheme, dt and seed ("deterministic" for noise-free
        runs, (master_seed, path_index) for stochastic paths).
    cumulative : ndarray, shape (n, 6), optional
        Running trapezoid integrals of S, V, E, I, z and exp(z) from t = 0,
        accumulated at full step resolution even when states are thinned by
        a record stride.
    """

    times: np.ndarray
    states: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    cumulative: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.shape != (self.times.size, 5):
            raise ValueError(
                f"states shape {self.states.shape} does not match "
                f"{self.times.size} nodes")
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("times must be strictly increasing")

    @property
    def S(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def V(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def E(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def I(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def z(self) -> np.ndarray:
        return self.states[:, 4]

    @property
    def N(self) -> np.ndarray:
        """Total population series."""
        return self.states[:, :4].sum(axis=1)

    @property
    def beta(self) -> np.ndarray:
        """Transmission coefficient series beta_bar * exp(z)."""
        p: ModelParams = self.meta["params"]
        return p.beta_bar * np.exp(self.z)

    @property
    def ve(self) -> np.ndarray:
        """Eigenvector-weighted extinction functional along the path."""
        p: ModelParams = self.meta["params"]
        w1, w2 = extinction_weights(p)
        return (w1 / (p.m + p.sigma + p.xi) * self.E
                + w2 / (p.m + p.gamma + p.eta) * self.I)

    @property
    def failed(self) -> bool:
        return self.meta.get("failure") is not None

    def final_state(self) -> State:
        return State.from_array(self.states[-1])


def rk4_step(s: State, dt: float, p: ModelParams, z_frozen: float) -> State:
    """One RK4 step of the compartments with z held at z_frozen.

    The z component is returned unchanged. Raises StepProducedNegative when
    any output compartment undershoots below -negativity_floor(p), which
    signals that dt is too large for the current state; no retry happens at
    this level.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    beta_eff = p.beta_bar * math.exp(z_frozen)
    s1, v1, e1, i1 = _kernels.rk4_compartments(s.S, s.V, s.E, s.I, beta_eff,
                                               dt, p.kernel_tuple())
    floor = negativity_floor(p)
    for name, value in zip(STATE_COLUMNS[:4], (s1, v1, e1, i1)):
        if value < -floor:
            raise StepProducedNegative(name, value)
    return State(S=s1, V=v1, E=e1, I=i1, z=s.z)


def time_grid(T: float, dt: float) -> tuple[int, float]:
    """Number of full dt steps and the length of the shortened last step.

    The last step is 0.0 when dt divides T (to within a 1e-9 relative
    tolerance); otherwise the grid ends with one shorter step landing
    exactly on T.
    """
    if not T > 0.0 or not dt > 0.0:
        raise ValueError("horizon and dt must be positive")
    n_full = int(math.floor(T / dt + 1e-9))
    rem = T - n_full * dt
    if rem <= 1e-9 * dt:
        return n_full, 0.0
    return n_full, rem


def integrate_deterministic(p: ModelParams, init: State, T: float,
                            dt: float) -> Trajectory:
    """Integrate the compartments on a uniform grid with z frozen at init.z.

    Every node is recorded, together with full-resolution cumulative
    integrals. The initial state must lie in the invariant region.
    StepProducedNegative propagates from any step.
    """
    if not in_gamma(init, p):
        raise ValueError("initial state is outside the invariant region")
    n_full, rem = time_grid(T, dt)
    n_steps = n_full + (1 if rem else 0)
    times = np.empty(n_steps + 1)
    times[:n_full + 1] = np.arange(n_full + 1) * dt
    times[-1] = T
    states = np.empty((n_steps + 1, 5))
    cumulative = np.zeros((n_steps + 1, 6))
    pars = p.kernel_tuple()
    floor = negativity_floor(p)
    beta_eff = p.beta_bar * math.exp(init.z)
    ez = math.exp(init.z)
    s, v, e, i, z = init.S, init.V, init.E, init.I, init.z
    states[0] = (s, v, e, i, z)
    acc = np.zeros(6)
    for n in range(n_steps):
        h = dt if n < n_full else rem
        s1, v1, e1, i1 = _kernels.rk4_compartments(s, v, e, i, beta_eff, h,
                                                   pars)
        low = min(s1, v1, e1, i1)
        if low < -floor:
            name = STATE_COLUMNS[int(np.argmin([s1, v1, e1, i1]))]
            raise StepProducedNegative(name, low, time=times[n + 1])
        half = 0.5 * h
        acc += half * np.array([s + s1, v + v1, e + e1, i + i1,
                                z + z, ez + ez])
        s, v, e, i = s1, v1, e1, i1
        states[n + 1] = (s, v, e, i, z)
        cumulative[n + 1] = acc
    meta = {"params": p, "scheme": "rk4", "dt": dt, "seed": "deterministic"}
    return Trajectory(times=times, states=states, meta=meta,
                      cumulative=cumulative)
