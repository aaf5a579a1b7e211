"""CLI and configuration tests: schema, defaults, outputs, exit codes."""

import json

import numpy as np
import pytest

from sveisbk import (NonPositiveParameter, SchemaError, default_dt,
                     default_init, parse_config, parse_config_data,
                     dump_config)
from sveisbk.cli import main
from sveisbk.config import ExperimentOptions

from conftest import BASE, make_params, random_params

PARAMS = dict(BASE)


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParseConfig:
    def test_minimal_defaults(self, tmp_path):
        path = write_config(tmp_path, {"params": PARAMS,
                                       "sim": {"horizon": 100.0}})
        cfg, options = parse_config(path)
        p = make_params()
        assert cfg.dt == default_dt(p)
        assert cfg.n_paths == 1000
        assert cfg.z_hold == "midpoint"
        assert cfg.scheme == "splitting"
        assert cfg.master_seed == 0
        assert cfg.init == default_init(p)
        n_nodes = round(100.0 / cfg.dt) // cfg.record_stride + 1
        assert n_nodes <= 10_000
        assert options == ExperimentOptions()

    def test_stride_rule_keeps_under_cap(self, tmp_path):
        path = write_config(tmp_path, {
            "params": PARAMS, "sim": {"horizon": 2000.0, "dt": 0.01}})
        cfg, _ = parse_config(path)
        assert (round(2000.0 / 0.01) // cfg.record_stride + 1) <= 10_000
        assert cfg.record_stride >= 2

    def test_nonpositive_parameter_passthrough(self, tmp_path):
        bad = dict(PARAMS, m=-0.1)
        path = write_config(tmp_path, {"params": bad, "sim": {"horizon": 1.0}})
        with pytest.raises(NonPositiveParameter) as exc:
            parse_config(path)
        assert exc.value.name == "m"

    def test_unknown_keys_rejected(self):
        with pytest.raises(SchemaError) as exc:
            parse_config_data({"params": dict(PARAMS, mu=0.1),
                               "sim": {"horizon": 1.0}})
        assert "params.mu" in str(exc.value)
        with pytest.raises(SchemaError) as exc:
            parse_config_data({"params": PARAMS,
                               "sim": {"horizon": 1.0, "stride": 2}})
        assert "sim.stride" in str(exc.value)
        with pytest.raises(SchemaError) as exc:
            parse_config_data({"params": PARAMS, "sim": {"horizon": 1.0},
                               "extra": {}})
        assert "extra" in str(exc.value)

    def test_missing_sections(self):
        with pytest.raises(SchemaError):
            parse_config_data({"sim": {"horizon": 1.0}})
        with pytest.raises(SchemaError):
            parse_config_data({"params": PARAMS})
        with pytest.raises(SchemaError):
            parse_config_data({"params": PARAMS, "sim": {}})

    def test_type_checks(self):
        with pytest.raises(SchemaError):
            parse_config_data({"params": dict(PARAMS, m="0.1"),
                               "sim": {"horizon": 1.0}})
        with pytest.raises(SchemaError):
            parse_config_data({"params": PARAMS,
                               "sim": {"horizon": 1.0, "n_paths": 2.5}})
        with pytest.raises(SchemaError):
            parse_config_data({"params": PARAMS,
                               "sim": {"horizon": 1.0, "z_hold": "center"}})

    def test_init_outside_gamma(self):
        cap_state = {"S": 100.0, "V": 0.0, "E": 0.0, "I": 0.0, "z": 0.0}
        with pytest.raises(SchemaError):
            parse_config_data({"params": PARAMS,
                               "sim": {"horizon": 1.0, "init": cap_state}})

    def test_round_trip(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            p = random_params(rng)
            doc = {"params": {k: getattr(p, k) for k in PARAMS},
                   "sim": {"horizon": float(rng.uniform(5, 50)),
                           "n_paths": int(rng.integers(1, 50)),
                           "master_seed": int(rng.integers(0, 2 ** 62)),
                           "record_stride": int(rng.integers(1, 9)),
                           "z_hold": "left-point",
                           "scheme": "euler"}}
            cfg, options = parse_config_data(doc)
            cfg2, options2 = parse_config_data(dump_config(cfg, options))
            assert cfg2 == cfg
            assert options2 == options


class TestThresholdsCommand:
    def test_json_output_and_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, {"params": PARAMS,
                                       "sim": {"horizon": 1.0}})
        assert main(["thresholds", "--config", path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["r0"] == pytest.approx(0.740740741, rel=1e-9)
        assert doc["s0"] == pytest.approx(20.0 / 3.0, rel=1e-12)
        assert doc["regime"] == "Indeterminate"

    def test_delta_zero_collapses_thresholds(self, tmp_path, capsys):
        path = write_config(tmp_path, {
            "params": dict(PARAMS, delta=0.0), "sim": {"horizon": 1.0}})
        assert main(["thresholds", "--config", path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["r0_s"] == doc["r0"]

    def test_extinction_regime_reported(self, tmp_path, capsys):
        path = write_config(tmp_path, {
            "params": dict(PARAMS, beta_bar=0.05, delta=0.1),
            "sim": {"horizon": 1.0}})
        assert main(["thresholds", "--config", path]) == 0
        assert json.loads(capsys.readouterr().out)["regime"] == \
            "ExtinctionPredicted"

    def test_validation_failure_exit_2(self, tmp_path, capsys):
        path = write_config(tmp_path, {"params": dict(PARAMS, m=-0.1),
                                       "sim": {"horizon": 1.0}})
        assert main(["thresholds", "--config", path]) == 2
        assert "m" in capsys.readouterr().err

    def test_dfe_command(self, tmp_path, capsys):
        path = write_config(tmp_path, {"params": PARAMS,
                                       "sim": {"horizon": 1.0}})
        assert main(["dfe", "--config", path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["S0"] == pytest.approx(20.0 / 3.0, rel=1e-12)
        assert doc["V0"] == pytest.approx(10.0 / 3.0, rel=1e-12)


def simulate_doc(n_paths=1, horizon=1.0, dt=0.1, seed=5, delta=0.5):
    return {"params": dict(PARAMS, delta=delta),
            "sim": {"horizon": horizon, "dt": dt, "n_paths": n_paths,
                    "master_seed": seed, "record_stride": 1}}


class TestSimulateCommand:
    def test_csv_shape_and_header(self, tmp_path):
        path = write_config(tmp_path, simulate_doc())
        out = tmp_path / "out"
        assert main(["simulate", "--config", path, "--out", str(out)]) == 0
        csv = (out / "path_00000.csv").read_text().splitlines()
        assert len(csv) == 12  # header + 11 nodes
        assert csv[0] == "t,S,V,E,I,z,beta,N,Ve"
        first = csv[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[5]) == 0.0  # z column at t=0 equals init z
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["artifacts"] == ["path_00000.csv"]
        assert (out / "path_00000.csv").exists()
        assert manifest["failures"] == []

    def test_rerun_byte_identical(self, tmp_path):
        path = write_config(tmp_path, simulate_doc(n_paths=3, horizon=2.0))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", path, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", path, "--out", str(out2)]) == 0
        for i in range(3):
            name = f"path_{i:05d}.csv"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        path = write_config(tmp_path, simulate_doc())
        out1, out2, out3 = (tmp_path / x for x in ("a", "b", "c"))
        main(["simulate", "--config", path, "--out", str(out1)])
        main(["simulate", "--config", path, "--out", str(out2), "--seed", "9"])
        main(["simulate", "--config", path, "--out", str(out3), "--seed", "9"])
        a = (out1 / "path_00000.csv").read_bytes()
        b = (out2 / "path_00000.csv").read_bytes()
        c = (out3 / "path_00000.csv").read_bytes()
        assert a != b
        assert b == c

    def test_threads_flag_and_env(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, simulate_doc(n_paths=4, horizon=2.0))
        out1, out2, out3 = (tmp_path / x for x in ("a", "b", "c"))
        main(["simulate", "--config", path, "--out", str(out1),
              "--threads", "1"])
        main(["simulate", "--config", path, "--out", str(out2),
              "--threads", "8"])
        monkeypatch.setenv("SVEIS_THREADS", "3")
        main(["simulate", "--config", path, "--out", str(out3)])
        for i in range(4):
            name = f"path_{i:05d}.csv"
            data = (out1 / name).read_bytes()
            assert data == (out2 / name).read_bytes()
            assert data == (out3 / name).read_bytes()

    def test_malformed_config_exit_2_no_outputs(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(bad),
                     "--out", str(out)]) == 2
        assert not out.exists()

    def test_missing_config_exit_2(self, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(tmp_path / "nope.json"),
                     "--out", str(out)])
        assert code == 2
        assert not out.exists()


class TestVerdictCommands:
    def test_extinction_subcritical_pass(self, tmp_path):
        doc = {"params": dict(PARAMS, beta_bar=0.05, delta=0.1),
               "sim": {"horizon": 250.0, "n_paths": 40, "master_seed": 3,
                       "record_stride": 20}}
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["extinction", "--config", path, "--out", str(out)]) == 0
        verdict = json.loads((out / "extinction.json").read_text())
        assert verdict["verdict"] == "pass"
        assert verdict["thresholds"]["regime"] == "ExtinctionPredicted"
        assert verdict["max_slope"] <= verdict["slope_bound"] + 0.05
        hist = (out / "hist_infectious.csv").read_text().splitlines()
        assert hist[0] == "bin_left,bin_right,mass"
        manifest = json.loads((out / "manifest.json").read_text())
        for name in manifest["artifacts"]:
            assert (out / name).exists()

    def test_persistence_supercritical_pass(self, tmp_path):
        doc = {"params": dict(PARAMS, beta_bar=0.4, delta=0.5),
               "sim": {"horizon": 400.0, "n_paths": 120, "master_seed": 5,
                       "record_stride": 30}}
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["persistence", "--config", path, "--out", str(out)]) == 0
        verdict = json.loads((out / "persistence.json").read_text())
        assert verdict["verdict"] == "pass"
        assert verdict["tv_distance"] < verdict["tv_threshold"]
        assert (out / "hist_window_early.csv").exists()
        assert (out / "hist_window_late.csv").exists()

    def test_persistence_subcritical_fails_exit_1(self, tmp_path):
        doc = {"params": dict(PARAMS, beta_bar=0.05, delta=0.1),
               "sim": {"horizon": 200.0, "n_paths": 20, "master_seed": 6,
                       "record_stride": 20}}
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["persistence", "--config", path, "--out", str(out)]) == 1
        verdict = json.loads((out / "persistence.json").read_text())
        assert verdict["verdict"] == "fail"
        assert any("persistence not predicted" in w
                   for w in verdict["warnings"])

    def test_verdict_json_byte_stable_across_threads(self, tmp_path):
        doc = {"params": dict(PARAMS, beta_bar=0.05, delta=0.1),
               "sim": {"horizon": 150.0, "n_paths": 24, "master_seed": 3,
                       "record_stride": 20}}
        path = write_config(tmp_path, doc)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["extinction", "--config", path, "--out", str(out1),
              "--threads", "1"])
        main(["extinction", "--config", path, "--out", str(out2),
              "--threads", "8"])
        assert (out1 / "extinction.json").read_bytes() == \
            (out2 / "extinction.json").read_bytes()
        assert (out1 / "hist_infectious.csv").read_bytes() == \
            (out2 / "hist_infectious.csv").read_bytes()
