"""Configuration documents: schema, strict parsing and round-trip dumping.

A run is configured by a single JSON document with three sections:

    {
      "params":     {"Pi": ..., "alpha": ..., ..., "theta": ..., "delta": ...},
      "sim":        {"horizon": ..., "dt": ..., "n_paths": ..., ...},
      "experiment": {"fit_fraction": ..., "bins": ..., ...}
    }

Unknown keys are rejected everywhere: a silent typo in a rate name (omega
vs alpha) would silently change the predicted regime.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .engine import SCHEMES, Z_HOLDS, SimConfig, validate_config
from .errors import SchemaError
from .model import PARAM_FIELDS, ModelParams, State, default_init, validate_params
from .ode import default_dt, time_grid

__all__ = [
    "ExperimentOptions",
    "parse_config",
    "parse_config_data",
    "dump_config",
    "DEFAULT_N_PATHS",
    "MAX_STORED_NODES",
]

DEFAULT_N_PATHS = 1000
# record_stride defaults to the smallest value keeping at most this many
# stored nodes per path.
MAX_STORED_NODES = 10_000

TOP_KEYS = ("params", "sim", "experiment")
SIM_KEYS = ("init", "horizon", "dt", "n_paths", "master_seed",
            "record_stride", "z_hold", "scheme")
INIT_KEYS = ("S", "V", "E", "I", "z")
EXPERIMENT_KEYS = ("fit_fraction", "bins", "tv_threshold", "eps_persist",
                   "min_path_fraction", "burn_in")


@dataclass(frozen=True)
class ExperimentOptions:
    """Tunables of the persistence/extinction verdicts and histogram output."""

    fit_fraction: float = 0.5
    bins: int = 50
    tv_threshold: float = 0.05
    eps_persist: float | None = None
    min_path_fraction: float = 0.95
    burn_in: float | None = None


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed, path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else key, "unknown key")


def _number(obj: dict, key: str, path: str, default=None) -> float | None:
    value = obj.get(key)
    if value is None:  # absent or explicit null: use the default
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}.{key}", "expected a number")
    if not math.isfinite(value):
        raise SchemaError(f"{path}.{key}", "must be finite")
    return float(value)


def _integer(obj: dict, key: str, path: str, default=None) -> int | None:
    value = obj.get(key)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}.{key}", "expected an integer")
    return int(value)


def _parse_params(doc: dict) -> ModelParams:
    raw = _require_mapping(doc.get("params"), "params")
    _reject_unknown(raw, PARAM_FIELDS, "params")
    values = {}
    for name in PARAM_FIELDS:
        if name not in raw:
            raise SchemaError(f"params.{name}", "missing required field")
        values[name] = _number(raw, name, "params")
    return validate_params(ModelParams(**values))


def _parse_init(raw, params: ModelParams) -> State:
    if raw is None:
        return default_init(params)
    init = _require_mapping(raw, "sim.init")
    _reject_unknown(init, INIT_KEYS, "sim.init")
    for name in ("S", "V", "E", "I"):
        if name not in init:
            raise SchemaError(f"sim.init.{name}", "missing required field")
    return State(S=_number(init, "S", "sim.init"),
                 V=_number(init, "V", "sim.init"),
                 E=_number(init, "E", "sim.init"),
                 I=_number(init, "I", "sim.init"),
                 z=_number(init, "z", "sim.init", default=0.0))


def _default_stride(horizon: float, dt: float) -> int:
    n_full, rem = time_grid(horizon, dt)
    n_steps = n_full + (1 if rem else 0)
    return max(1, -(-(n_steps + 1) // MAX_STORED_NODES))


def parse_config_data(doc: dict) -> tuple[SimConfig, ExperimentOptions]:
    """Validate a config mapping and fill defaults; see parse_config."""
    _require_mapping(doc, "<root>")
    _reject_unknown(doc, TOP_KEYS, "")
    params = _parse_params(doc)
    sim = _require_mapping(doc.get("sim"), "sim")
    _reject_unknown(sim, SIM_KEYS, "sim")
    horizon = _number(sim, "horizon", "sim")
    if horizon is None:
        raise SchemaError("sim.horizon", "missing required field")
    dt = _number(sim, "dt", "sim", default=None)
    if dt is None:
        dt = default_dt(params)
    n_paths = _integer(sim, "n_paths", "sim", default=DEFAULT_N_PATHS)
    master_seed = _integer(sim, "master_seed", "sim", default=0)
    stride = _integer(sim, "record_stride", "sim", default=None)
    if stride is None:
        stride = _default_stride(horizon, dt)
    z_hold = sim.get("z_hold", "midpoint")
    if z_hold not in Z_HOLDS:
        raise SchemaError("sim.z_hold", f"must be one of {list(Z_HOLDS)}")
    scheme = sim.get("scheme", "splitting")
    if scheme not in SCHEMES:
        raise SchemaError("sim.scheme", f"must be one of {list(SCHEMES)}")
    init = _parse_init(sim.get("init"), params)
    cfg = SimConfig(params=params, init=init, horizon=horizon, dt=dt,
                    n_paths=n_paths, master_seed=master_seed,
                    record_stride=stride, z_hold=z_hold, scheme=scheme)
    try:
        validate_config(cfg)
    except ValueError as exc:
        raise SchemaError("sim", str(exc)) from exc

    exp_raw = doc.get("experiment")
    if exp_raw is None:
        options = ExperimentOptions()
    else:
        exp = _require_mapping(exp_raw, "experiment")
        _reject_unknown(exp, EXPERIMENT_KEYS, "experiment")
        options = ExperimentOptions(
            fit_fraction=_number(exp, "fit_fraction", "experiment",
                                 default=0.5),
            bins=_integer(exp, "bins", "experiment", default=50),
            tv_threshold=_number(exp, "tv_threshold", "experiment",
                                 default=0.05),
            eps_persist=_number(exp, "eps_persist", "experiment",
                                default=None),
            min_path_fraction=_number(exp, "min_path_fraction", "experiment",
                                      default=0.95),
            burn_in=_number(exp, "burn_in", "experiment", default=None),
        )
    if not 0.0 < options.fit_fraction <= 1.0:
        raise SchemaError("experiment.fit_fraction", "must be in (0, 1]")
    if options.bins < 2:
        raise SchemaError("experiment.bins", "must be at least 2")
    if not 0.0 < options.min_path_fraction <= 1.0:
        raise SchemaError("experiment.min_path_fraction", "must be in (0, 1]")
    return cfg, options


def parse_config(path) -> tuple[SimConfig, ExperimentOptions]:
    """Load, validate and default-fill a JSON config file.

    Returns the fully resolved simulation config and experiment options.
    Raises SchemaError with the dotted field path on any schema violation
    and passes NonPositiveParameter through from parameter validation.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON: {exc}") from exc
    return parse_config_data(doc)


def dump_config(cfg: SimConfig, options: ExperimentOptions) -> dict:
    """Resolved config as a plain mapping; parse_config_data inverts it."""
    return {
        "params": {name: getattr(cfg.params, name) for name in PARAM_FIELDS},
        "sim": {
            "init": {"S": cfg.init.S, "V": cfg.init.V, "E": cfg.init.E,
                     "I": cfg.init.I, "z": cfg.init.z},
            "horizon": cfg.horizon,
            "dt": cfg.dt,
            "n_paths": cfg.n_paths,
            "master_seed": cfg.master_seed,
            "record_stride": cfg.record_stride,
            "z_hold": cfg.z_hold,
            "scheme": cfg.scheme,
        },
        "experiment": {
            "fit_fraction": options.fit_fraction,
            "bins": options.bins,
            "tv_threshold": options.tv_threshold,
            "eps_persist": options.eps_persist,
            "min_path_fraction": options.min_path_fraction,
            "burn_in": options.burn_in,
        },
    }
