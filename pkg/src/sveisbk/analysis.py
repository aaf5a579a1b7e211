"""Ensemble statistics and verdicts on persistence and extinction.

Persistence evidence is indirect by necessity (no constructive target
distribution exists): the pooled distribution of I must stop moving between
two late time windows, and the per-path time average of I must stay above a
small occupancy level. Extinction is checked against the exponential decay
bound of the weighted functional

    Ve = w1/(m+sigma+xi) * E + w2/(m+gamma+eta) * I,

whose log-slope must not exceed min(m+sigma+xi, m+gamma+eta) * (R0e - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .engine import Ensemble
from .errors import EmptyFitWindow, IncompatibleBinning
from .model import ModelParams, State, extinction_weights, r0_e, r0_s
from .ode import Trajectory

__all__ = [
    "Histogram",
    "ExtinctionReport",
    "ExtinctionVerdict",
    "PersistenceVerdict",
    "extinction_functional",
    "ve_series",
    "extinction_rate_estimate",
    "extinction_verdict",
    "time_average",
    "stationary_histogram",
    "histogram_distance",
    "persistence_verdict",
]

Selector = Union[str, Callable[[Trajectory], np.ndarray]]

# Ve below this level counts as extinction achieved; the slope fit stops at
# the first such node.
VE_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class Histogram:
    """Normalized histogram of pooled samples."""

    edges: np.ndarray
    masses: np.ndarray
    n_samples: int
    burn_in: float

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        masses = np.asarray(self.masses, dtype=np.float64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "masses", masses)
        if edges.ndim != 1 or masses.ndim != 1 or edges.size != masses.size + 1:
            raise ValueError("edges must have one more entry than masses")
        if not np.all(np.isfinite(edges)) or not np.all(np.diff(edges) > 0.0):
            raise ValueError("edges must be finite and strictly increasing")
        if np.any(masses < 0.0) or abs(float(masses.sum()) - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to 1")


def extinction_functional(s: State, p: ModelParams) -> float:
    """Ve at a single state; zero exactly on the disease-free face."""
    w1, w2 = extinction_weights(p)
    return (w1 / (p.m + p.sigma + p.xi) * s.E
            + w2 / (p.m + p.gamma + p.eta) * s.I)


def ve_series(traj: Trajectory, p: ModelParams) -> np.ndarray:
    """Ve evaluated at every recorded node."""
    w1, w2 = extinction_weights(p)
    return (w1 / (p.m + p.sigma + p.xi) * traj.E
            + w2 / (p.m + p.gamma + p.eta) * traj.I)


@dataclass(frozen=True)
class ExtinctionReport:
    """Fitted decay rate of ln(Ve) against the theoretical bound.

    passed means slope <= bound + 2 * stderr, where bound is
    min(m+sigma+xi, m+gamma+eta) * (R0e - 1).
    """

    slope: float
    stderr: float
    bound: float
    margin: float
    passed: bool
    fit_window: tuple[float, float]
    n_nodes: int


def extinction_rate_estimate(traj: Trajectory, p: ModelParams,
                             fit_fraction: float = 0.5) -> ExtinctionReport:
    """Least-squares slope of ln(Ve) over the trailing part of the horizon.

    The fit uses nodes with t >= (1 - fit_fraction) * T, truncated at the
    first node anywhere on the path where Ve drops below 1e-300 (underflow
    counts as extinction achieved, not an error). Raises EmptyFitWindow
    when fewer than 10 usable nodes remain.
    """
    if not 0.0 < fit_fraction <= 1.0:
        raise ValueError(f"fit_fraction must be in (0, 1], got {fit_fraction!r}")
    times = traj.times
    ve = ve_series(traj, p)
    horizon = float(times[-1])
    start = (1.0 - fit_fraction) * horizon
    usable = times >= start
    under = ve < VE_UNDERFLOW
    if np.any(under):
        usable &= np.arange(times.size) < int(np.argmax(under))
    usable &= np.isfinite(ve)
    n = int(np.count_nonzero(usable))
    if n < 10:
        raise EmptyFitWindow(
            f"only {n} usable nodes in the fit window (need 10)")
    x = times[usable]
    y = np.log(ve[usable])
    xbar = x.mean()
    ybar = y.mean()
    dx = x - xbar
    sxx = float(np.dot(dx, dx))
    slope = float(np.dot(dx, y - ybar)) / sxx
    resid = y - ybar - slope * dx
    stderr = math.sqrt(float(np.dot(resid, resid)) / (n - 2) / sxx)
    msx = p.m + p.sigma + p.xi
    mge = p.m + p.gamma + p.eta
    bound = min(msx, mge) * (r0_e(p) - 1.0)
    passed = slope <= bound + 2.0 * stderr
    return ExtinctionReport(slope=slope, stderr=stderr, bound=bound,
                            margin=bound - slope, passed=passed,
                            fit_window=(float(x[0]), float(x[-1])), n_nodes=n)


@dataclass(frozen=True)
class ExtinctionVerdict:
    """Ensemble-level check of the extinction rate bound.

    A path satisfies the bound if its fitted slope passes, or if Ve
    underflowed (extinction already achieved within the horizon).
    """

    passed: bool
    fraction_passing: float
    min_path_fraction: float
    bound: float
    r0_e: float
    n_paths_used: int
    n_underflowed: int
    mean_slope: float
    max_slope: float
    warnings: tuple[str, ...] = ()


def extinction_verdict(ens: Ensemble, p: ModelParams,
                       fit_fraction: float = 0.5,
                       min_path_fraction: float = 0.95) -> ExtinctionVerdict:
    """Fraction of paths whose ln(Ve) slope respects the decay bound."""
    warnings: list[str] = []
    if ens.failures:
        warnings.append(f"{len(ens.failures)} failed paths excluded")
    n_pass = 0
    n_under = 0
    slopes = []
    indices = ens.ok_indices()
    for i in indices:
        traj = ens.trajectory(int(i))
        try:
            report = extinction_rate_estimate(traj, p, fit_fraction)
        except EmptyFitWindow:
            # Fit impossible because the disease died (or never existed):
            # the extinction claim is satisfied vacuously.
            n_under += 1
            n_pass += 1
            continue
        slopes.append(report.slope)
        if report.passed:
            n_pass += 1
    n_used = int(indices.size)
    if n_used == 0:
        raise EmptyFitWindow("no usable paths in the ensemble")
    fraction = n_pass / n_used
    msx = p.m + p.sigma + p.xi
    mge = p.m + p.gamma + p.eta
    re = r0_e(p)
    if re >= 1.0:
        warnings.append(f"r0_e = {re:.6g} >= 1: extinction not predicted")
    return ExtinctionVerdict(
        passed=fraction >= min_path_fraction,
        fraction_passing=fraction,
        min_path_fraction=min_path_fraction,
        bound=min(msx, mge) * (re - 1.0),
        r0_e=re,
        n_paths_used=n_used,
        n_underflowed=n_under,
        mean_slope=float(np.mean(slopes)) if slopes else math.nan,
        max_slope=float(np.max(slopes)) if slopes else math.nan,
        warnings=tuple(warnings),
    )


def _series(traj: Trajectory, component: Selector) -> np.ndarray:
    if callable(component):
        return np.asarray(component(traj), dtype=np.float64)
    if component in ("S", "V", "E", "I", "z"):
        return getattr(traj, component)
    if component == "N":
        return traj.N
    if component == "beta":
        return traj.beta
    if component == "Ve":
        return traj.ve
    raise ValueError(f"unknown component selector {component!r}")


def _cumulative_series(traj: Trajectory, component: Selector):
    """Full-resolution running integral of the component, if available."""
    if traj.cumulative is None or callable(component):
        return None
    cum = traj.cumulative
    if component in ("S", "V", "E", "I", "z"):
        return cum[:, ("S", "V", "E", "I", "z").index(component)]
    p: ModelParams = traj.meta.get("params")
    if component == "N":
        return cum[:, :4].sum(axis=1)
    if component == "beta" and p is not None:
        return p.beta_bar * cum[:, 5]
    if component == "Ve" and p is not None:
        w1, w2 = extinction_weights(p)
        return (w1 / (p.m + p.sigma + p.xi) * cum[:, 2]
                + w2 / (p.m + p.gamma + p.eta) * cum[:, 3])
    return None


def time_average(traj: Trajectory, component: Selector,
                 burn_in: float) -> float:
    """Trapezoidal time average of the selected series over [burn_in, T].

    When the trajectory carries full-resolution cumulative integrals (every
    engine trajectory does) and the component is a named series, the average
    uses them, so thinned storage loses no accuracy; otherwise it falls back
    to the trapezoid rule on the recorded nodes. The window starts at the
    first recorded node at or after burn_in.
    """
    times = traj.times
    if burn_in >= times[-1]:
        raise EmptyFitWindow(
            f"burn_in {burn_in!r} is not before the horizon {times[-1]!r}")
    j0 = int(np.searchsorted(times, burn_in, side="left"))
    if j0 >= times.size - 1:
        raise EmptyFitWindow("fewer than two nodes after burn_in")
    cum = _cumulative_series(traj, component)
    if cum is not None:
        return float((cum[-1] - cum[j0]) / (times[-1] - times[j0]))
    y = _series(traj, component)[j0:]
    t = times[j0:]
    deltas = np.diff(t)
    mid = 0.5 * (y[:-1] + y[1:])
    return float(np.sum(mid * deltas) / np.sum(deltas))


def stationary_histogram(ens: Ensemble, component: Selector, burn_in: float,
                         bins: int) -> Histogram:
    """Pooled histogram of post-burn-in samples across all completed paths.

    The bin range is the observed min/max padded by 1% of the span (or of
    max(|value|, 1) when every sample coincides).
    """
    if bins < 2:
        raise ValueError(f"bins must be at least 2, got {bins!r}")
    times = ens.times
    mask = times >= burn_in
    if burn_in >= times[-1] or not np.any(mask):
        raise EmptyFitWindow("no recorded nodes after burn_in")
    chunks = [_series(ens.trajectory(int(i)), component)[mask]
              for i in ens.ok_indices()]
    if not chunks:
        raise EmptyFitWindow("no usable paths in the ensemble")
    samples = np.concatenate(chunks)
    return _build_histogram(samples, bins, burn_in)


def _build_histogram(samples: np.ndarray, bins: int,
                     burn_in: float) -> Histogram:
    lo = float(np.min(samples))
    hi = float(np.max(samples))
    span = hi - lo
    pad = 0.01 * span if span > 0.0 else 0.01 * max(abs(lo), 1.0)
    edges = np.linspace(lo - pad, hi + pad, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    return Histogram(edges=edges, masses=counts / counts.sum(),
                     n_samples=int(samples.size), burn_in=burn_in)


def _project(h: Histogram, edges: np.ndarray) -> np.ndarray:
    """Masses of h redistributed onto a refinement containing h's edges."""
    widths = np.diff(h.edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    idx = np.searchsorted(h.edges, centers, side="right") - 1
    inside = (idx >= 0) & (idx < h.masses.size)
    out = np.zeros(edges.size - 1)
    j = idx[inside]
    out[inside] = h.masses[j] * (np.diff(edges)[inside] / widths[j])
    return out


def histogram_distance(a: Histogram, b: Histogram) -> float:
    """Total-variation distance between two histograms.

    Identical binnings compare mass vectors directly; otherwise both are
    projected (piecewise-uniformly) onto the common refinement of their
    edges, so partially or fully disjoint supports are handled exactly
    (fully disjoint gives 1).
    """
    for h in (a, b):
        if not np.all(np.isfinite(h.edges)):
            raise IncompatibleBinning("histogram edges are not finite")
    if a.edges.size == b.edges.size and np.array_equal(a.edges, b.edges):
        return 0.5 * float(np.abs(a.masses - b.masses).sum())
    edges = np.union1d(a.edges, b.edges)
    return 0.5 * float(np.abs(_project(a, edges) - _project(b, edges)).sum())


@dataclass(frozen=True)
class PersistenceVerdict:
    """Two-window stabilization plus occupancy check for persistence.

    passed requires (i) the pooled I histograms over [T/2, 3T/4) and
    [3T/4, T] to be within tv_threshold in total variation and (ii) the
    time-averaged I over [T/2, T] to exceed eps_persist on at least
    min_path_fraction of the paths.
    """

    passed: bool
    tv_distance: float
    tv_threshold: float
    persisting_fraction: float
    min_path_fraction: float
    eps_persist: float
    r0_s: float
    n_paths_used: int
    hist_early: Histogram
    hist_late: Histogram
    warnings: tuple[str, ...] = ()


def persistence_verdict(ens: Ensemble, p: ModelParams, *, bins: int = 50,
                        tv_threshold: float = 0.05,
                        eps_persist: float | None = None,
                        min_path_fraction: float = 0.95) -> PersistenceVerdict:
    """Evidence that the infectious level settled into a nondegenerate law.

    eps_persist defaults to 1e-4 * Pi / m. A warning (not an error) is
    recorded when r0_s <= 1, where persistence is not predicted.
    """
    warnings: list[str] = []
    if ens.failures:
        warnings.append(f"{len(ens.failures)} failed paths excluded")
    rs = r0_s(p)
    if rs <= 1.0:
        warnings.append(f"r0_s = {rs:.6g} <= 1: persistence not predicted")
    if eps_persist is None:
        eps_persist = 1e-4 * p.Pi / p.m
    times = ens.times
    horizon = float(times[-1])
    half = 0.5 * horizon
    threequarter = 0.75 * horizon
    mask_early = (times >= half) & (times < threequarter)
    mask_late = times >= threequarter
    if not np.any(mask_early) or not np.any(mask_late):
        raise EmptyFitWindow("too few recorded nodes in the two half-windows")
    indices = ens.ok_indices()
    if indices.size == 0:
        raise EmptyFitWindow("no usable paths in the ensemble")
    early = np.concatenate([ens.states[i, mask_early, 3] for i in indices])
    late = np.concatenate([ens.states[i, mask_late, 3] for i in indices])
    # Shared binning so the two windows are comparable.
    lo = float(min(early.min(), late.min()))
    hi = float(max(early.max(), late.max()))
    span = hi - lo
    pad = 0.01 * span if span > 0.0 else 0.01 * max(abs(lo), 1.0)
    edges = np.linspace(lo - pad, hi + pad, bins + 1)
    counts_e, _ = np.histogram(early, bins=edges)
    counts_l, _ = np.histogram(late, bins=edges)
    hist_early = Histogram(edges=edges, masses=counts_e / counts_e.sum(),
                           n_samples=int(early.size), burn_in=half)
    hist_late = Histogram(edges=edges, masses=counts_l / counts_l.sum(),
                          n_samples=int(late.size), burn_in=threequarter)
    tv = histogram_distance(hist_early, hist_late)
    averages = np.array([
        time_average(ens.trajectory(int(i)), "I", half) for i in indices])
    fraction = float(np.mean(averages > eps_persist))
    passed = (tv < tv_threshold) and (fraction >= min_path_fraction)
    return PersistenceVerdict(
        passed=passed, tv_distance=tv, tv_threshold=tv_threshold,
        persisting_fraction=fraction, min_path_fraction=min_path_fraction,
        eps_persist=eps_persist, r0_s=rs, n_paths_used=int(indices.size),
        hist_early=hist_early, hist_late=hist_late, warnings=tuple(warnings))
