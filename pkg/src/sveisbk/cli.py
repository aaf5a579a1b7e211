"""Command-line interface and serialization of runs, reports and histograms.

Subcommands: thresholds, dfe, simulate, persistence, extinction. Exit codes
partition outcomes: 0 success (verdict pass), 1 verdict fail, 2 config
error, 3 simulation or output error. CSV and JSON data outputs are
byte-stable for a fixed config, seed and worker count; the manifest also
records the wall-clock duration, which naturally varies between runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (Histogram, extinction_verdict, persistence_verdict,
                       stationary_histogram)
from .config import ExperimentOptions, dump_config, parse_config
from .engine import Ensemble, SimConfig, simulate_ensemble
from .errors import NonPositiveParameter, SchemaError, SveisError
from .model import ModelParams, dfe, extinction_weights, thresholds

__all__ = ["main", "console_main"]

CSV_HEADER = "t,S,V,E,I,z,beta,N,Ve"


def _fmt(x: float) -> str:
    """Fixed 17-significant-digit formatting; round-trips doubles exactly."""
    return f"{x:.17g}"


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


def write_trajectory_csv(path: Path, times: np.ndarray, states: np.ndarray,
                         p: ModelParams) -> None:
    """One row per node with the derived beta, N and Ve columns."""
    w1, w2 = extinction_weights(p)
    beta = p.beta_bar * np.exp(states[:, 4])
    total = states[:, :4].sum(axis=1)
    ve = (w1 / (p.m + p.sigma + p.xi) * states[:, 2]
          + w2 / (p.m + p.gamma + p.eta) * states[:, 3])
    lines = [CSV_HEADER]
    for j in range(times.size):
        s, v, e, i, z = states[j]
        lines.append(",".join(_fmt(x) for x in
                              (times[j], s, v, e, i, z, beta[j], total[j],
                               ve[j])))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_histogram_csv(path: Path, hist: Histogram) -> None:
    lines = ["bin_left,bin_right,mass"]
    for j in range(hist.masses.size):
        lines.append(",".join(_fmt(x) for x in
                              (hist.edges[j], hist.edges[j + 1],
                               hist.masses[j])))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _manifest(cfg: SimConfig, options: ExperimentOptions, ens: Ensemble,
              artifacts: list[str], started: float) -> dict:
    return {
        "tool": {"name": "sveisbk", "version": __version__},
        "config": dump_config(cfg, options),
        "thresholds": thresholds(cfg.params).as_dict(),
        "artifacts": artifacts,
        "failures": [
            {"path_index": f.path_index, "step": f.step, "time": f.time,
             "component": f.component, "value": f.value}
            for f in ens.failures
        ],
        "duration_seconds": time.perf_counter() - started,
    }


def cmd_thresholds(cfg: SimConfig, options: ExperimentOptions,
                   out: Path | None, threads: int) -> int:
    print(json.dumps(thresholds(cfg.params).as_dict(), indent=2,
                     sort_keys=True))
    return 0


def cmd_dfe(cfg: SimConfig, options: ExperimentOptions, out: Path | None,
            threads: int) -> int:
    eq = dfe(cfg.params)
    doc = {"S0": eq.S, "V0": eq.V,
           "dfe": {"S": eq.S, "V": eq.V, "E": eq.E, "I": eq.I, "z": eq.z}}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_simulate(cfg: SimConfig, options: ExperimentOptions, out: Path,
                 threads: int) -> int:
    started = time.perf_counter()
    ens = simulate_ensemble(cfg, threads=threads)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for i in range(ens.n_paths):
        name = f"path_{i:05d}.csv"
        write_trajectory_csv(out / name, ens.times, ens.states[i], cfg.params)
        artifacts.append(name)
    _write_json(out / "manifest.json",
                _manifest(cfg, options, ens, artifacts, started))
    return 3 if ens.failures else 0


def cmd_persistence(cfg: SimConfig, options: ExperimentOptions, out: Path,
                    threads: int) -> int:
    started = time.perf_counter()
    ens = simulate_ensemble(cfg, threads=threads)
    verdict = persistence_verdict(
        ens, cfg.params, bins=options.bins,
        tv_threshold=options.tv_threshold, eps_persist=options.eps_persist,
        min_path_fraction=options.min_path_fraction)
    out.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(out / "hist_window_early.csv", verdict.hist_early)
    write_histogram_csv(out / "hist_window_late.csv", verdict.hist_late)
    doc = {
        "verdict": "pass" if verdict.passed else "fail",
        "tv_distance": verdict.tv_distance,
        "tv_threshold": verdict.tv_threshold,
        "persisting_fraction": verdict.persisting_fraction,
        "min_path_fraction": verdict.min_path_fraction,
        "eps_persist": verdict.eps_persist,
        "n_paths_used": verdict.n_paths_used,
        "warnings": list(verdict.warnings),
        "thresholds": thresholds(cfg.params).as_dict(),
    }
    _write_json(out / "persistence.json", doc)
    artifacts = ["persistence.json", "hist_window_early.csv",
                 "hist_window_late.csv"]
    _write_json(out / "manifest.json",
                _manifest(cfg, options, ens, artifacts, started))
    if ens.failures:
        return 3
    return 0 if verdict.passed else 1


def cmd_extinction(cfg: SimConfig, options: ExperimentOptions, out: Path,
                   threads: int) -> int:
    started = time.perf_counter()
    ens = simulate_ensemble(cfg, threads=threads)
    verdict = extinction_verdict(ens, cfg.params,
                                 fit_fraction=options.fit_fraction,
                                 min_path_fraction=options.min_path_fraction)
    out.mkdir(parents=True, exist_ok=True)
    burn_in = options.burn_in
    if burn_in is None:
        burn_in = (1.0 - options.fit_fraction) * cfg.horizon
    hist = stationary_histogram(ens, "I", burn_in, options.bins)
    write_histogram_csv(out / "hist_infectious.csv", hist)
    doc = {
        "verdict": "pass" if verdict.passed else "fail",
        "fraction_passing": verdict.fraction_passing,
        "min_path_fraction": verdict.min_path_fraction,
        "slope_bound": verdict.bound,
        "mean_slope": verdict.mean_slope,
        "max_slope": verdict.max_slope,
        "n_paths_used": verdict.n_paths_used,
        "n_underflowed": verdict.n_underflowed,
        "warnings": list(verdict.warnings),
        "thresholds": thresholds(cfg.params).as_dict(),
    }
    _write_json(out / "extinction.json", doc)
    artifacts = ["extinction.json", "hist_infectious.csv"]
    _write_json(out / "manifest.json",
                _manifest(cfg, options, ens, artifacts, started))
    if ens.failures:
        return 3
    return 0 if verdict.passed else 1


COMMANDS = {
    "thresholds": cmd_thresholds,
    "dfe": cmd_dfe,
    "simulate": cmd_simulate,
    "persistence": cmd_persistence,
    "extinction": cmd_extinction,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH",
                        help="JSON configuration file")
    common.add_argument("--out", default="sveis-out", metavar="DIR",
                        help="output directory (file-writing commands)")
    common.add_argument("--seed", type=int, default=None, metavar="N",
                        help="override the config master_seed")
    common.add_argument("--threads", type=int, default=None, metavar="N",
                        help="worker threads (SVEIS_THREADS as fallback); "
                             "never changes outputs")
    parser = argparse.ArgumentParser(
        prog="sveis",
        description="SVEIS epidemic model with log-mean-reverting "
                    "transmission noise")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("thresholds", parents=[common],
                   help="print the threshold report as JSON")
    sub.add_parser("dfe", parents=[common],
                   help="print the disease-free equilibrium as JSON")
    sub.add_parser("simulate", parents=[common],
                   help="write one CSV per path plus a manifest")
    sub.add_parser("persistence", parents=[common],
                   help="run the ensemble and judge persistence")
    sub.add_parser("extinction", parents=[common],
                   help="run the ensemble and judge extinction")
    return parser


def _resolve_threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("SVEIS_THREADS")
        value = int(env) if env else 1
    return max(1, value)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, options = parse_config(args.config)
    except (SchemaError, NonPositiveParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config {args.config!r}: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0:
            print("config error: --seed must be nonnegative", file=sys.stderr)
            return 2
        cfg = replace(cfg, master_seed=args.seed)
    try:
        threads = _resolve_threads(args.threads)
    except ValueError:
        print("config error: SVEIS_THREADS must be an integer",
              file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, options, Path(args.out), threads)
    except OSError as exc:
        target = getattr(exc, "filename", None) or args.out
        print(f"i/o error on {target!r}: {exc}", file=sys.stderr)
        return 3
    except SveisError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
