"""Splitting-scheme simulation of the noisy model and reproducible ensembles.

Noise enters only through z, so conditional on z the compartments follow an
ODE. Each step therefore (i) advances the compartments by one RK4 step with
the transmission coefficient frozen at a hold value of z, then (ii) advances
z by its exact Gaussian transition. Positivity is preserved structurally and
all scheme error lives in the smooth channel. A full-truncation
Euler-Maruyama scheme on all five coordinates is available behind
scheme="euler" purely for cross-validation.

Reproducibility contract: path i is driven by RngStream(master_seed, i) and
paths are advanced in fixed-width chunks whose composition depends only on
n_paths, so ensembles are bit-identical for any worker count or scheduling
order, and equal to the corresponding single-path runs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from queue import Empty, Queue
from threading import Thread
from typing import Iterator

import numpy as np

from . import _kernels
from .errors import StepProducedNegative
from .model import ModelParams, State, dfe, in_gamma, validate_params
from .ode import Trajectory, negativity_floor, time_grid
from .ou import RngStream, ou_transition

__all__ = [
    "SimConfig",
    "PathFailure",
    "Ensemble",
    "GammaReport",
    "validate_config",
    "simulate_path",
    "simulate_ensemble",
    "check_gamma",
]

Z_HOLDS = ("midpoint", "left-point")
SCHEMES = ("splitting", "euler")

# Paths are processed in fixed-width chunks; the width is part of the
# reproducibility contract (never derived from the worker count).
CHUNK_PATHS = 1024
# Per-chunk noise is generated in blocks of roughly this many doubles.
NOISE_BLOCK_WORDS = 1 << 21


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a simulation run.

    Attributes
    ----------
    params : ModelParams
    init : State
        Initial point; must lie in the invariant region.
    horizon : float
        Final time T.
    dt : float
        Step size; the last step is shortened when dt does not divide T.
    n_paths : int
    master_seed : int
        Root seed; path i uses the substream (master_seed, i).
    record_stride : int
        Store every record_stride-th node (plus the final one). Cumulative
        time integrals are still accumulated every step.
    z_hold : str
        How z enters the compartment sub-step: "midpoint" freezes it at the
        conditional mean over half a step, z * exp(-theta*dt/2);
        "left-point" freezes it at z.
    scheme : str
        "splitting" (default) or "euler" (full-truncation cross-check).
    """

    params: ModelParams
    init: State
    horizon: float
    dt: float
    n_paths: int = 1
    master_seed: int = 0
    record_stride: int = 1
    z_hold: str = "midpoint"
    scheme: str = "splitting"


def validate_config(cfg: SimConfig) -> SimConfig:
    """Check every config invariant; returns the config unchanged."""
    validate_params(cfg.params)
    if not cfg.horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {cfg.horizon!r}")
    if not cfg.dt > 0.0:
        raise ValueError(f"dt must be positive, got {cfg.dt!r}")
    if cfg.n_paths < 1:
        raise ValueError(f"n_paths must be at least 1, got {cfg.n_paths!r}")
    if cfg.record_stride < 1:
        raise ValueError(
            f"record_stride must be at least 1, got {cfg.record_stride!r}")
    if cfg.master_seed < 0:
        raise ValueError(f"master_seed must be nonnegative, got "
                         f"{cfg.master_seed!r}")
    if cfg.z_hold not in Z_HOLDS:
        raise ValueError(f"z_hold must be one of {Z_HOLDS}, got {cfg.z_hold!r}")
    if cfg.scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {cfg.scheme!r}")
    if not in_gamma(cfg.init, cfg.params):
        raise ValueError("init is outside the invariant region")
    return cfg


@dataclass(frozen=True)
class PathFailure:
    """One path whose retried step still undershot a compartment."""

    path_index: int
    step: int
    time: float
    component: str
    value: float


@dataclass(frozen=True)
class GammaReport:
    """Margins of a trajectory against the invariant region.

    n_excess = max over nodes of N - Pi/m, s_excess = max of S - S0,
    min_compartment = most negative compartment value. The trajectory
    passes when all three stay within tol * Pi/m.
    """

    n_excess: float
    s_excess: float
    min_compartment: float
    tol: float
    cap: float
    passes: bool


def _prefetch(iterator, depth: int = 2):
    """Run an iterator on a background thread, keeping depth items ready."""
    queue: Queue = Queue(maxsize=depth)
    sentinel = object()

    def produce():
        try:
            for item in iterator:
                queue.put(item)
            queue.put(sentinel)
        except BaseException as exc:  # surfaced on the consumer side
            queue.put(exc)

    worker = Thread(target=produce, daemon=True)
    worker.start()
    try:
        while True:
            item = queue.get()
            if item is sentinel:
                break
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        # Drain so the producer can never stay blocked on a full queue.
        while worker.is_alive():
            try:
                queue.get(timeout=0.05)
            except Empty:
                pass
        worker.join()


@dataclass
class _GridPlan:
    n_full: int
    rem: float
    n_steps: int
    rec_steps: np.ndarray
    times: np.ndarray
    extra_final: bool


def _plan(cfg: SimConfig) -> _GridPlan:
    n_full, rem = time_grid(cfg.horizon, cfg.dt)
    n_steps = n_full + (1 if rem else 0)
    rec = np.arange(0, n_steps + 1, cfg.record_stride, dtype=np.int64)
    extra_final = n_steps % cfg.record_stride != 0
    if extra_final:
        rec = np.append(rec, n_steps)
    times = rec * cfg.dt
    times[-1] = cfg.horizon
    return _GridPlan(n_full=n_full, rem=rem, n_steps=n_steps, rec_steps=rec,
                     times=times, extra_final=extra_final)


def _run_chunk(cfg: SimConfig, plan: _GridPlan, lo: int, hi: int,
               out_states: np.ndarray, out_cum: np.ndarray,
               fail_step: np.ndarray, fail_comp: np.ndarray,
               fail_value: np.ndarray) -> None:
    """Simulate paths [lo, hi) into the given output slices."""
    p = cfg.params
    w = hi - lo
    init = cfg.init
    S = np.full(w, init.S)
    V = np.full(w, init.V)
    E = np.full(w, init.E)
    I = np.full(w, init.I)
    Z = np.full(w, init.z)
    EZ = np.full(w, math.exp(init.z))
    ACC = np.zeros((w, 6))
    out_states[:, 0] = (init.S, init.V, init.E, init.I, init.z)
    out_cum[:, 0] = 0.0
    streams = [RngStream(cfg.master_seed, i) for i in range(lo, hi)]
    pars = p.kernel_tuple()
    eps_neg = negativity_floor(p)
    ou = p.ou()
    splitting = cfg.scheme == "splitting"
    if splitting:
        decay, sd = ou_transition(cfg.dt, ou)
        hold = math.exp(-p.theta * cfg.dt / 2.0) if cfg.z_hold == "midpoint" \
            else 1.0
    block = max(1, NOISE_BLOCK_WORDS // w)

    def noise_blocks():
        done = 0
        while done < plan.n_full:
            nb = min(block, plan.n_full - done)
            noise = np.empty((w, nb))
            for r, stream in enumerate(streams):
                noise[r] = stream.standard_normal(nb)
            yield noise
            done += nb

    done = 0
    # Draws happen strictly in stream order on the producer thread while the
    # GIL-free kernel consumes the previous block, so the overlap cannot
    # change any output.
    for noise in _prefetch(noise_blocks()):
        if splitting:
            _kernels.splitting_block(S, V, E, I, Z, EZ, ACC, noise, done,
                                     cfg.dt, decay, sd, hold,
                                     cfg.record_stride, out_states, out_cum,
                                     fail_step, fail_comp, fail_value, pars,
                                     eps_neg)
        else:
            _kernels.euler_block(S, V, E, I, Z, EZ, ACC, noise, done, cfg.dt,
                                 p.theta, p.delta, cfg.record_stride,
                                 out_states, out_cum, pars)
        done += noise.shape[1]
    if plan.rem:
        noise = np.empty((w, 1))
        for r, stream in enumerate(streams):
            noise[r] = stream.standard_normal(1)
        if splitting:
            decay_r, sd_r = ou_transition(plan.rem, ou)
            hold_r = math.exp(-p.theta * plan.rem / 2.0) \
                if cfg.z_hold == "midpoint" else 1.0
            _kernels.splitting_block(S, V, E, I, Z, EZ, ACC, noise, done,
                                     plan.rem, decay_r, sd_r, hold_r,
                                     cfg.record_stride, out_states, out_cum,
                                     fail_step, fail_comp, fail_value, pars,
                                     eps_neg)
        else:
            _kernels.euler_block(S, V, E, I, Z, EZ, ACC, noise, done,
                                 plan.rem, p.theta, p.delta,
                                 cfg.record_stride, out_states, out_cum, pars)
    if plan.extra_final:
        out_states[:, -1, 0] = S
        out_states[:, -1, 1] = V
        out_states[:, -1, 2] = E
        out_states[:, -1, 3] = I
        out_states[:, -1, 4] = Z
        out_cum[:, -1] = ACC


@dataclass
class Ensemble:
    """All recorded paths of one simulation run, plus provenance.

    states has shape (n_paths, n_nodes, 5) with columns S, V, E, I, z;
    cumulative has shape (n_paths, n_nodes, 6) carrying full-resolution
    running integrals of S, V, E, I, z and exp(z).
    """

    times: np.ndarray
    states: np.ndarray
    cumulative: np.ndarray
    config: SimConfig
    failures: list[PathFailure] = field(default_factory=list)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def failure_for(self, i: int) -> PathFailure | None:
        for f in self.failures:
            if f.path_index == i:
                return f
        return None

    def trajectory(self, i: int) -> Trajectory:
        """Zero-copy view of path i as a Trajectory."""
        meta = {
            "params": self.config.params,
            "scheme": self.config.scheme,
            "dt": self.config.dt,
            "seed": (self.config.master_seed, i),
            "z_hold": self.config.z_hold,
            "failure": self.failure_for(i),
        }
        return Trajectory(times=self.times, states=self.states[i], meta=meta,
                          cumulative=self.cumulative[i])

    @property
    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(i) for i in range(self.n_paths)]

    def ok_indices(self) -> np.ndarray:
        """Indices of paths that completed without failure."""
        bad = {f.path_index for f in self.failures}
        return np.array([i for i in range(self.n_paths) if i not in bad],
                        dtype=np.int64)

    def iter_ok(self) -> Iterator[Trajectory]:
        for i in self.ok_indices():
            yield self.trajectory(int(i))


def simulate_ensemble(cfg: SimConfig, threads: int = 1) -> Ensemble:
    """Simulate n_paths independent paths of the configured system.

    Output is bit-identical for any threads value: chunk composition is
    fixed, each chunk writes a disjoint slice, and no arithmetic crosses
    path boundaries. Per-path step failures are collected in
    Ensemble.failures (the failed path is NaN from the failing node on);
    they do not raise here.
    """
    validate_config(cfg)
    plan = _plan(cfg)
    n_nodes = plan.rec_steps.size
    states = np.empty((cfg.n_paths, n_nodes, 5))
    cumulative = np.empty((cfg.n_paths, n_nodes, 6))
    fail_step = np.full(cfg.n_paths, -1, dtype=np.int64)
    fail_comp = np.zeros(cfg.n_paths, dtype=np.int64)
    fail_value = np.zeros(cfg.n_paths)
    bounds = [(lo, min(lo + CHUNK_PATHS, cfg.n_paths))
              for lo in range(0, cfg.n_paths, CHUNK_PATHS)]

    def work(span):
        lo, hi = span
        _run_chunk(cfg, plan, lo, hi, states[lo:hi], cumulative[lo:hi],
                   fail_step[lo:hi], fail_comp[lo:hi], fail_value[lo:hi])

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    else:
        for span in bounds:
            work(span)

    failures = []
    for i in np.flatnonzero(fail_step >= 0):
        step = int(fail_step[i])
        t = cfg.horizon if step > plan.n_full else step * cfg.dt
        failures.append(PathFailure(
            path_index=int(i), step=step, time=min(t, cfg.horizon),
            component="SVEI"[int(fail_comp[i])], value=float(fail_value[i])))
    return Ensemble(times=plan.times, states=states, cumulative=cumulative,
                    config=cfg, failures=failures)


def simulate_path(cfg: SimConfig, path_index: int = 0) -> Trajectory:
    """Simulate the single path path_index of the configured ensemble.

    Bit-identical to Ensemble.trajectory(path_index) from the same config.
    Raises StepProducedNegative if the path's retried step fails.
    """
    if not 0 <= path_index < cfg.n_paths:
        raise ValueError(f"path_index {path_index} outside 0..{cfg.n_paths - 1}")
    validate_config(cfg)
    plan = _plan(cfg)
    n_nodes = plan.rec_steps.size
    states = np.empty((1, n_nodes, 5))
    cumulative = np.empty((1, n_nodes, 6))
    fail_step = np.full(1, -1, dtype=np.int64)
    fail_comp = np.zeros(1, dtype=np.int64)
    fail_value = np.zeros(1)
    _run_chunk(cfg, plan, path_index, path_index + 1, states, cumulative,
               fail_step, fail_comp, fail_value)
    if fail_step[0] >= 0:
        step = int(fail_step[0])
        t = min(cfg.horizon, step * cfg.dt)
        raise StepProducedNegative("SVEI"[int(fail_comp[0])],
                                   float(fail_value[0]), time=t)
    meta = {
        "params": cfg.params,
        "scheme": cfg.scheme,
        "dt": cfg.dt,
        "seed": (cfg.master_seed, path_index),
        "z_hold": cfg.z_hold,
        "failure": None,
    }
    return Trajectory(times=plan.times, states=states[0], meta=meta,
                      cumulative=cumulative[0])


def check_gamma(traj: Trajectory, p: ModelParams,
                tol: float = 1e-6) -> GammaReport:
    """Measure how far a trajectory strays outside the invariant region.

    Margins are absolute: n_excess and s_excess are the worst overshoots of
    N above Pi/m and of S above S0; min_compartment is the most negative
    recorded compartment. Passing means all three lie within tol * Pi/m.
    NaN nodes (failed paths) never pass.
    """
    cap = p.Pi / p.m
    s0 = dfe(p).S
    comp = traj.states[:, :4]
    with np.errstate(invalid="ignore"):
        n_excess = float(np.max(traj.N) - cap)
        s_excess = float(np.max(traj.S) - s0)
        min_comp = float(np.min(comp))
    slack = tol * cap
    ok = (n_excess <= slack) and (s_excess <= slack) and (min_comp >= -slack)
    if np.isnan(n_excess) or np.isnan(s_excess) or np.isnan(min_comp):
        ok = False
    return GammaReport(n_excess=n_excess, s_excess=s_excess,
                       min_compartment=min_comp, tol=tol, cap=cap, passes=ok)
