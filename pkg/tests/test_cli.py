"""Experiment runner tests: config parsing, sweep grids, CSV/manifest
reproducibility, curve comparison, presets, and the console entry point."""

import json
import math

import pytest

from fsorf.channels import GammaGammaPE, NegExp
from fsorf.cli import (
    CSV_HEADER,
    ExperimentSpec,
    PRESETS,
    UsageError,
    compare_report,
    crossing_db,
    load_experiment,
    main,
    preset_specs,
    read_curve,
    run_experiment,
)
from fsorf.system import SystemConfig

BASE_TOML = """\
schema_version = 1

[system]
n_users = 1
n_relays = 1
csi_mode = "Known"
gamma_th_db = 10.0

[system.turbulence]
family = "negexp"
lam = 1.0

[sweep]
start_db = 5.0
stop_db = 15.0
step_db = 5.0

[run]
metrics = ["Pout"]
methods = ["ClosedForm", "MonteCarlo"]
trials = 2000
seed = 3
output_path = "curve.csv"
"""


def write_toml(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def tiny_spec(**over):
    kw = dict(
        system=SystemConfig(1, 1, 1.0, 1.0, "Known", NegExp(1.0), 10.0),
        start_db=5.0, stop_db=15.0, step_db=5.0,
        metrics=("Pout",), methods=("ClosedForm", "MonteCarlo"),
        trials=2000, seed=3, output_path="curve.csv",
    )
    kw.update(over)
    return ExperimentSpec(**kw)


class TestGrid:
    def test_inclusive_endpoints(self):
        spec = tiny_spec(start_db=0.0, stop_db=40.0, step_db=2.5)
        grid = spec.grid_db()
        assert grid[0] == 0.0 and grid[-1] == 40.0 and len(grid) == 17

    def test_float_accumulation_keeps_last_point(self):
        # 3 * 0.1 overshoots 0.3 by one ulp without the slack
        spec = tiny_spec(start_db=0.0, stop_db=0.3, step_db=0.1)
        assert spec.grid_db() == [0.0, 0.1, 0.2, 0.3]


class TestSpecValidation:
    def test_sweep_order(self):
        with pytest.raises(ValueError):
            tiny_spec(start_db=20.0, stop_db=10.0)

    def test_step_positive(self):
        with pytest.raises(ValueError):
            tiny_spec(step_db=0.0)

    def test_metric_names(self):
        with pytest.raises(ValueError):
            tiny_spec(metrics=("pout",))
        with pytest.raises(ValueError):
            tiny_spec(metrics=())

    def test_method_names(self):
        with pytest.raises(ValueError):
            tiny_spec(methods=("Closed",))

    def test_monte_carlo_needs_trials(self):
        with pytest.raises(ValueError):
            tiny_spec(trials=0)
        # fine without the MonteCarlo method
        tiny_spec(methods=("ClosedForm",), trials=0)


class TestLoadExperiment:
    def test_happy_path(self, tmp_path):
        spec = load_experiment(write_toml(tmp_path, BASE_TOML))
        assert spec.system.n_users == 1
        assert spec.system.gamma_th == pytest.approx(10.0)
        assert isinstance(spec.system.fso_turbulence, NegExp)
        assert spec.methods == ("ClosedForm", "MonteCarlo")
        assert spec.trials == 2000
        assert spec.output_path == "curve.csv"

    def test_gamma_gamma_with_default_kappa(self, tmp_path):
        text = BASE_TOML.replace(
            'family = "negexp"\nlam = 1.0',
            'family = "gamma_gamma"\nalpha = 4.0\nbeta = 1.9\nxi = 10.45')
        spec = load_experiment(write_toml(tmp_path, text))
        turb = spec.system.fso_turbulence
        assert isinstance(turb, GammaGammaPE)
        x2 = turb.xi ** 2
        assert turb.kappa == pytest.approx(x2 / (x2 + 1.0), rel=1e-15)

    def test_unknown_csi_reads_gain(self, tmp_path):
        text = BASE_TOML.replace('csi_mode = "Known"',
                                 'csi_mode = "Unknown"\ngain_c = 1.0')
        spec = load_experiment(write_toml(tmp_path, text))
        assert spec.system.gain_c == 1.0

    def test_schema_version_required(self, tmp_path):
        text = BASE_TOML.replace("schema_version = 1\n", "")
        with pytest.raises(UsageError, match="schema_version"):
            load_experiment(write_toml(tmp_path, text))

    def test_missing_key_named_in_error(self, tmp_path):
        text = BASE_TOML.replace("n_users = 1\n", "")
        with pytest.raises(UsageError, match="system.n_users"):
            load_experiment(write_toml(tmp_path, text))

    def test_unknown_family(self, tmp_path):
        text = BASE_TOML.replace('family = "negexp"', 'family = "lognormal"')
        with pytest.raises(UsageError, match="lognormal"):
            load_experiment(write_toml(tmp_path, text))

    def test_invalid_system_wrapped(self, tmp_path):
        # gain_c is meaningless with known CSI and must be refused
        text = BASE_TOML.replace('csi_mode = "Known"',
                                 'csi_mode = "Known"\ngain_c = 1.0')
        with pytest.raises(UsageError, match="invalid config"):
            load_experiment(write_toml(tmp_path, text))

    def test_parse_error(self, tmp_path):
        with pytest.raises(UsageError, match="parse error"):
            load_experiment(write_toml(tmp_path, "schema_version = \n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError, match="cannot read"):
            load_experiment(str(tmp_path / "nope.toml"))


class TestRunExperiment:
    def test_reruns_are_byte_identical(self, tmp_path):
        spec = tiny_spec()
        p1, e1 = run_experiment(spec, out_dir=str(tmp_path / "a"), quiet=True)
        p2, e2 = run_experiment(spec, out_dir=str(tmp_path / "b"), quiet=True)
        assert e1 == e2 == 0
        assert open(p1, "rb").read() == open(p2, "rb").read()
        m1 = p1.rsplit(".", 1)[0] + ".manifest.json"
        m2 = p2.rsplit(".", 1)[0] + ".manifest.json"
        assert open(m1, "rb").read() == open(m2, "rb").read()

    def test_rows_round_trip(self, tmp_path):
        spec = tiny_spec()
        path, _ = run_experiment(spec, out_dir=str(tmp_path), quiet=True)
        rows = read_curve(path)
        assert len(rows) == 6  # 3 grid points x 2 methods
        assert {r["metric"] for r in rows} == {"Pout"}
        mc = [r for r in rows if r["method"] == "MonteCarlo"]
        assert all(r["stderr"] is not None and r["status"] == "ok" for r in mc)
        cf = [r for r in rows if r["method"] == "ClosedForm"]
        assert all(r["stderr"] is None for r in cf)
        assert [r["gamma_avg_db"] for r in cf] == [5.0, 10.0, 15.0]

    def test_manifest_contents(self, tmp_path):
        spec = tiny_spec()
        path, _ = run_experiment(spec, out_dir=str(tmp_path), quiet=True)
        doc = json.load(open(path.rsplit(".", 1)[0] + ".manifest.json"))
        assert doc["schema_version"] == 1
        assert doc["experiment"]["system"]["gamma_th_db"] == pytest.approx(10.0)
        assert doc["experiment"]["seed"] == 3
        assert doc["experiment"]["system"]["turbulence"]["family"] == "negexp"

    def test_unsupported_config_becomes_error_rows(self, tmp_path):
        # closed BER covers negexp/known only; a GG run must fail per point
        spec = tiny_spec(
            system=SystemConfig(1, 1, 1.0, 1.0, "Known",
                                GammaGammaPE(4.0, 1.9, 10.45), 10.0),
            metrics=("BER",), methods=("ClosedForm",), trials=0)
        path, n_err = run_experiment(spec, out_dir=str(tmp_path), quiet=True)
        assert n_err == 3
        rows = read_curve(path)
        assert all(r["status"].startswith("error:") and r["value"] is None
                   for r in rows)

    def test_structurally_undefined_pairs_skipped(self, tmp_path):
        spec = tiny_spec(metrics=("Pout",), methods=("Quadrature",), trials=0)
        path, n_err = run_experiment(spec, out_dir=str(tmp_path), quiet=True)
        assert n_err == 0 and read_curve(path) == []

    def test_out_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FSORF_OUT", str(tmp_path / "env"))
        path, _ = run_experiment(tiny_spec(methods=("ClosedForm",), trials=0),
                                 quiet=True)
        assert path.startswith(str(tmp_path / "env"))

    def test_absolute_output_path_wins(self, tmp_path):
        target = str(tmp_path / "deep" / "curve.csv")
        spec = tiny_spec(methods=("ClosedForm",), trials=0,
                         output_path=target)
        path, _ = run_experiment(spec, out_dir=str(tmp_path / "ignored"),
                                 quiet=True)
        assert path == target


class TestReadCurve:
    def test_rejects_foreign_csv(self, tmp_path):
        bad = tmp_path / "junk.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(UsageError, match="not a results CSV"):
            read_curve(str(bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError, match="cannot read"):
            read_curve(str(tmp_path / "nope.csv"))


class TestCrossing:
    def test_exact_decade_curve(self):
        gammas = [0.0, 10.0, 20.0, 30.0]
        values = [10.0 ** (-g / 10.0) for g in gammas]
        assert crossing_db(gammas, values, 1e-2) == pytest.approx(20.0,
                                                                  abs=1e-12)
        assert crossing_db(gammas, values, 10 ** -1.75) == pytest.approx(
            17.5, abs=1e-9)

    def test_level_not_reached(self):
        assert crossing_db([0.0, 10.0], [0.5, 0.2], 1e-3) is None

    def test_none_values_skipped(self):
        assert crossing_db([0.0, 10.0, 20.0], [0.5, None, 0.05],
                           0.1) is not None


def mkrow(g, value, method="ClosedForm", stderr=None, status="ok",
          metric="Pout"):
    return {"gamma_avg_db": g, "metric": metric, "method": method,
            "value": value, "stderr": stderr, "status": status}


class TestCompareReport:
    def test_identical_deterministic_curves(self):
        rows = [mkrow(g, 10.0 ** (-g / 10.0)) for g in (0.0, 10.0, 20.0)]
        rep = compare_report(rows, rows, "Pout", "ClosedForm", "ClosedForm")
        assert rep["n_pass"] == 3 and rep["n_fail"] == 0

    def test_three_sigma_rule(self):
        det = [mkrow(0.0, 0.5)]
        near = [mkrow(0.0, 0.5 + 2e-3, method="MonteCarlo", stderr=1e-3)]
        far = [mkrow(0.0, 0.5 + 5e-3, method="MonteCarlo", stderr=1e-3)]
        ok = compare_report(det, near, "Pout", "ClosedForm", "MonteCarlo")
        bad = compare_report(det, far, "Pout", "ClosedForm", "MonteCarlo")
        assert ok["n_pass"] == 1 and bad["n_fail"] == 1

    def test_error_status_propagates(self):
        det = [mkrow(0.0, 0.5)]
        err = [mkrow(0.0, None, method="MonteCarlo", status="error: boom")]
        rep = compare_report(det, err, "Pout", "ClosedForm", "MonteCarlo")
        assert rep["n_error"] == 1

    def test_grid_mismatch(self):
        a = [mkrow(0.0, 0.5)]
        b = [mkrow(5.0, 0.5)]
        with pytest.raises(UsageError, match="grid"):
            compare_report(a, b, "Pout", "ClosedForm", "ClosedForm")

    def test_no_matching_rows(self):
        a = [mkrow(0.0, 0.5)]
        with pytest.raises(UsageError, match="no"):
            compare_report(a, a, "BER", "ClosedForm", "ClosedForm")

    def test_gap_extraction(self):
        a = [mkrow(g, 10.0 ** (-g / 10.0)) for g in (0.0, 10.0, 20.0)]
        b = [mkrow(g, 10.0 ** (-(g - 3.0) / 10.0)) for g in (0.0, 10.0, 20.0)]
        rep = compare_report(a, b, "Pout", "ClosedForm", "ClosedForm",
                             targets=(1e-1,))
        gap = rep["gaps"][0]
        assert gap["gap_db"] == pytest.approx(3.0, abs=1e-9)


class TestPresets:
    def test_curve_counts(self):
        sizes = {"fig2": 6, "fig3": 6, "fig4": 4, "fig5": 6, "fig6": 6,
                 "fig7": 6}
        for name in PRESETS:
            specs = preset_specs(name, 1000, 0)
            assert len(specs) == sizes[name]
            names = [s.output_path for s in specs]
            assert len(set(names)) == len(names)
            assert all(n.startswith(name) for n in names)

    def test_common_settings(self):
        for spec in preset_specs("fig3", 1000, 0):
            assert (spec.start_db, spec.stop_db, spec.step_db) == (0.0, 40.0,
                                                                   2.5)
            assert spec.system.gamma_th == pytest.approx(10.0)
            assert spec.metrics == ("BER",)
            if spec.system.csi_mode == "Unknown":
                assert spec.system.gain_c == 1.0

    def test_unknown_preset(self):
        with pytest.raises(UsageError):
            preset_specs("fig9", 1000, 0)


class TestMain:
    def test_run_exit_zero(self, tmp_path, capsys):
        cfg = write_toml(tmp_path, BASE_TOML)
        assert main(["run", cfg, "--out", str(tmp_path)]) == 0
        assert "curve.csv" in capsys.readouterr().out

    def test_run_bad_config_exit_two(self, tmp_path, capsys):
        text = BASE_TOML.replace("schema_version = 1", "schema_version = 7")
        cfg = write_toml(tmp_path, text)
        assert main(["run", cfg]) == 2
        assert "schema_version" in capsys.readouterr().err

    def test_compare_self_passes(self, tmp_path, capsys):
        cfg = write_toml(tmp_path, BASE_TOML)
        main(["run", cfg, "--out", str(tmp_path)])
        curve = str(tmp_path / "curve.csv")
        code = main(["compare", curve, curve, "--metric", "Pout",
                     "--method-a", "ClosedForm", "--method-b", "ClosedForm"])
        assert code == 0
        assert "pass=3" in capsys.readouterr().out

    def test_compare_missing_file_exit_two(self, tmp_path):
        assert main(["compare", str(tmp_path / "a.csv"),
                     str(tmp_path / "b.csv")]) == 2

    def test_preset_small_run(self, tmp_path):
        assert main(["preset", "fig6", "--trials", "64", "--seed", "1",
                     "--out", str(tmp_path)]) == 0
        made = sorted(p.name for p in tmp_path.glob("fig6_*.csv"))
        assert len(made) == 6
