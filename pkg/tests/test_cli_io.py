from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from kpl.cli_io import (
    EXPERIMENTS,
    Experiment,
    RunResult,
    load_config,
    main,
    parse_config,
    plot,
    registry,
    run,
)
from kpl.errors import ConfigError
from kpl.identities import build_report
from kpl.montecarlo_stats import Estimate

TINY_GRID = {"dx": 0.2, "L": 4.0, "t": 0.25}


def tiny_config(experiment: str, **over) -> dict:
    cfg = {
        "experiment": experiment,
        "grid": dict(TINY_GRID),
        "replicas": 40,
        "master_seed": 5,
    }
    cfg.update(over)
    return cfg


class TestRegistry:
    def test_length_is_21(self):
        assert len(registry()) == 21

    def test_every_entry_has_a_summary(self):
        for entry in registry():
            assert entry["summary"].strip()

    def test_unknown_experiment_suggests_names(self):
        with pytest.raises(ConfigError, match="variance_identity"):
            parse_config(tiny_config("variance_identty"))


class TestConfigValidation:
    def test_unknown_top_level_key(self):
        cfg = tiny_config("variance_identity")
        cfg["bogus"] = 1
        with pytest.raises(ConfigError, match="bogus"):
            parse_config(cfg)

    def test_unknown_grid_key(self):
        cfg = tiny_config("variance_identity")
        cfg["grid"]["spacing"] = 0.1
        with pytest.raises(ConfigError, match="spacing"):
            parse_config(cfg)

    def test_missing_required_fields_named(self):
        for missing in ("experiment", "grid", "replicas", "master_seed"):
            cfg = tiny_config("variance_identity")
            del cfg[missing]
            with pytest.raises(ConfigError, match=missing):
                parse_config(cfg)

    def test_missing_t(self):
        cfg = tiny_config("variance_identity")
        del cfg["grid"]["t"]
        with pytest.raises(ConfigError, match="'t'"):
            parse_config(cfg)

    def test_unknown_parameter_rejected(self):
        cfg = tiny_config("free_energy", parameters={"thetas": [1.0]})
        with pytest.raises(ConfigError, match="thetas"):
            parse_config(cfg)

    def test_bad_replicas(self):
        with pytest.raises(ConfigError, match="replicas"):
            parse_config(tiny_config("variance_identity", replicas=0))

    def test_sweep_requires_t_list(self):
        cfg = tiny_config("exponent_sweep")
        with pytest.raises(ConfigError, match="t_list"):
            parse_config(cfg)

    def test_manifest_unwrapping(self):
        cfg = {"config": tiny_config("variance_identity")}
        parsed = parse_config(cfg)
        assert parsed.experiment == "variance_identity"


def test_stability_violation_exits_1(tmp_path, capsys):
    cfg = tiny_config("variance_identity")
    cfg["grid"]["dt"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    code = main(["run", str(path), "--out", str(tmp_path / "out")])
    assert code == 1
    assert "dt <= dx^2" in capsys.readouterr().err


def test_config_file_not_found(capsys):
    assert main(["run", "/nonexistent/config.json"]) == 1
    assert "not found" in capsys.readouterr().err


def test_list_command(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 21


class TestRunEndToEnd:
    def test_duality_selftest(self, tmp_path):
        cfg = parse_config(tiny_config("duality_selftest", replicas=10))
        code, out = run(cfg, tmp_path / "out")
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["reports"][0]["lhs"]["mean"] < 1e-9
        schema = json.loads(Path("docs/report.schema.json").read_text())
        jsonschema.validate(report, schema)
        assert (out / "tables" / "reports.csv").exists()
        assert (out / "manifest.json").exists()

    def test_free_energy_expected_column(self, tmp_path):
        cfg = parse_config(
            tiny_config(
                "free_energy",
                replicas=30,
                grid={"dx": 0.2, "L": 12.0, "t": 2.0},
                parameters={"theta_list": [0.0, 1.0]},
            )
        )
        code, out = run(cfg, tmp_path / "out")
        rows = (out / "tables" / "free_energy.csv").read_text().strip().splitlines()
        assert rows[0] == "theta,measured_shift,stderr,expected,passed"
        theta1 = [r for r in rows[1:] if r.startswith("1.0,")]
        assert len(theta1) == 1
        assert theta1[0].split(",")[3] == "1.0"

    def test_reproducible_csv_bytes(self, tmp_path):
        cfg = parse_config(tiny_config("variance_identity"))
        _, out_a = run(cfg, tmp_path / "a")
        _, out_b = run(cfg, tmp_path / "b")
        csv_a = (out_a / "tables" / "reports.csv").read_bytes()
        csv_b = (out_b / "tables" / "reports.csv").read_bytes()
        assert csv_a == csv_b

    def test_rerun_from_manifest_any_workers(self, tmp_path):
        cfg = parse_config(tiny_config("total_variance"))
        _, out_a = run(cfg, tmp_path / "a")
        manifest = json.loads((out_a / "manifest.json").read_text())
        cfg_b = parse_config(manifest)
        cfg_b.workers = 2
        _, out_b = run(cfg_b, tmp_path / "b")
        for name in ("reports.csv",):
            assert (out_a / "tables" / name).read_bytes() == (out_b / "tables" / name).read_bytes()

    def test_check_failure_exits_2(self, tmp_path, monkeypatch):
        def failing_runner(cfg):
            rep = build_report(
                "synthetic",
                Estimate.exact(1.0),
                Estimate.exact(0.0),
                mode="bound",
                tolerance=1e-10,
            )
            return RunResult(cfg.experiment, [rep])

        monkeypatch.setitem(
            EXPERIMENTS,
            "duality_selftest",
            Experiment("duality_selftest", "stub", failing_runner),
        )
        cfg = parse_config(tiny_config("duality_selftest", replicas=1))
        code, _ = run(cfg, tmp_path / "out")
        assert code == 2


class TestPlots:
    def test_exponent_sweep_plot(self, tmp_path):
        cfg = parse_config(
            {
                "experiment": "exponent_sweep",
                "grid": {"dx": 0.2, "t_list": [1.0, 2.0, 4.0], "L": 6.0},
                "replicas": 30,
                "master_seed": 5,
            }
        )
        _, out = run(cfg, tmp_path / "out")
        svg = out / "plots" / "exponent_sweep.svg"
        assert svg.exists()
        assert b"svg" in svg.read_bytes()[:500]
        sweep_rows = (out / "tables" / "sweep.csv").read_text().strip().splitlines()
        assert len(sweep_rows) == 4

    def test_burgers_plot(self, tmp_path):
        cfg = parse_config(tiny_config("burgers_density", replicas=30))
        _, out = run(cfg, tmp_path / "out")
        assert (out / "plots" / "burgers_density.svg").exists()

    def test_cov_decay_plot_and_table(self, tmp_path):
        cfg = parse_config(
            tiny_config("cov_decay", replicas=30, parameters={"x_list": [0.0, 1.0]})
        )
        _, out = run(cfg, tmp_path / "out")
        assert (out / "plots" / "cov_decay.svg").exists()
        assert (out / "tables" / "decay.csv").exists()

    def test_empty_report_warns_and_writes_nothing(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        report.write_text(json.dumps({"experiment": "x", "reports": []}))
        made = plot(report, tmp_path / "plots")
        assert made == []
        assert "nothing to plot" in capsys.readouterr().err
        assert not (tmp_path / "plots").exists()


def test_schema_rejects_malformed_report():
    schema = json.loads(Path("docs/report.schema.json").read_text())
    bad = {"schema_version": 1, "experiment": "x"}
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(tiny_config("variance_identity")))
    cfg = load_config(path)
    assert cfg.experiment == "variance_identity"
    assert cfg.replicas == 40


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv("KPL_WORKERS", "6")
    assert parse_config(tiny_config("variance_identity")).workers == 6
    monkeypatch.setenv("KPL_WORKERS", "junk")
    assert parse_config(tiny_config("variance_identity")).workers == 1
    monkeypatch.delenv("KPL_WORKERS")
    assert parse_config(tiny_config("variance_identity")).workers == 1
    assert parse_config(tiny_config("variance_identity", workers=3)).workers == 3


def test_density_table_is_two_column_plus_stderr(tmp_path):
    cfg = parse_config(tiny_config("gaussian_tail", replicas=60, grid={"dx": 0.1, "L": 6.0, "t": 1.0}))
    _, out = run(cfg, tmp_path / "out")
    header = (out / "tables" / "density.csv").read_text().splitlines()[0]
    assert header == "y,p,stderr"
