"""Experiment runner: SNR sweeps over every requested evaluator, CSV output
with a reproducibility manifest, figure presets, and curve comparison.

Config files are TOML, schema below (see README for the full reference):

    schema_version = 1
    [run]      # metrics, methods, trials, seed, output_path
    [system]   # n_users, n_relays, csi_mode, gain_c, gamma_th_db, eta
    [system.turbulence]  # family = "gamma_gamma" (alpha, beta, xi[, kappa])
                         # or "negexp" (lam)
    [sweep]    # start_db, stop_db, step_db
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:  # 3.10: same parser, published separately
    import tomli as tomllib

from . import __version__
from .analytic import (
    METHODS,
    METRICS,
    PerfPoint,
    UnsupportedCombinationError,
    ber_asymptotic,
    ber_closed_ne,
    ber_quadrature,
    ber_series_exact,
    pout_closed_form,
)
from .channels import GammaGammaPE, NegExp
from .montecarlo import simulate_ber, simulate_pout
from .specfun import EvaluationError
from .system import SystemConfig

__all__ = [
    "ExperimentSpec",
    "UsageError",
    "load_experiment",
    "run_experiment",
    "read_curve",
    "compare_report",
    "crossing_db",
    "PRESETS",
    "preset_specs",
    "main",
]

CSV_HEADER = ("gamma_avg_db", "metric", "method", "value", "stderr", "status")

# outage has no series/asymptotic/quadrature route; such pairs are skipped
# rather than reported as failures
SUPPORTED_METHODS = {"Pout": ("ClosedForm", "MonteCarlo"), "BER": METHODS}

MODERATE = GammaGammaPE(4.0, 1.9, 10.45)
STRONG = GammaGammaPE(4.2, 1.4, 2.45)


class UsageError(Exception):
    """Bad invocation or config; maps to exit status 2."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a system, a dB grid, and the methods to evaluate."""

    system: SystemConfig
    start_db: float
    stop_db: float
    step_db: float
    metrics: tuple
    methods: tuple
    trials: int
    seed: int
    output_path: str = "results.csv"

    def __post_init__(self):
        if not self.start_db < self.stop_db:
            raise ValueError("sweep start_db must be below stop_db")
        if not self.step_db > 0:
            raise ValueError("sweep step_db must be positive")
        if not self.metrics or any(m not in METRICS for m in self.metrics):
            raise ValueError(f"metrics must be a nonempty subset of {METRICS}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ValueError(f"methods must be a nonempty subset of {METHODS}")
        if "MonteCarlo" in self.methods and self.trials < 1:
            raise ValueError("MonteCarlo method requires trials >= 1")
        if self.trials < 0:
            raise ValueError("trials must be non-negative")

    def grid_db(self):
        out, k = [], 0
        while True:
            g = self.start_db + k * self.step_db
            if g > self.stop_db + 1e-9:
                return out
            out.append(round(g, 10))
            k += 1


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

def _require(table, key, where):
    if key not in table:
        raise UsageError(f"config is missing {where}.{key}")
    return table[key]


def _build_turbulence(tbl):
    family = _require(tbl, "family", "system.turbulence")
    if family == "gamma_gamma":
        kwargs = {}
        if "kappa" in tbl:
            kwargs["kappa"] = float(tbl["kappa"])
        return GammaGammaPE(
            float(_require(tbl, "alpha", "system.turbulence")),
            float(_require(tbl, "beta", "system.turbulence")),
            float(_require(tbl, "xi", "system.turbulence")),
            **kwargs,
        )
    if family == "negexp":
        return NegExp(float(_require(tbl, "lam", "system.turbulence")))
    raise UsageError(
        f"unknown turbulence family {family!r} (use gamma_gamma or negexp)"
    )


def load_experiment(path):
    """Parse and validate a TOML experiment file into an ExperimentSpec."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config parse error in {path}: {exc}") from exc
    if doc.get("schema_version") != 1:
        raise UsageError("config must declare schema_version = 1")
    sys_tbl = _require(doc, "system", "top level")
    run_tbl = _require(doc, "run", "top level")
    sweep_tbl = _require(doc, "sweep", "top level")
    turb = _build_turbulence(_require(sys_tbl, "turbulence", "system"))
    gamma_th_db = float(_require(sys_tbl, "gamma_th_db", "system"))
    try:
        system = SystemConfig(
            n_users=int(_require(sys_tbl, "n_users", "system")),
            n_relays=int(_require(sys_tbl, "n_relays", "system")),
            mean_snr_fso=1.0,  # placeholder; the sweep sets both means
            mean_snr_rf=1.0,
            csi_mode=_require(sys_tbl, "csi_mode", "system"),
            fso_turbulence=turb,
            gamma_th=10.0 ** (gamma_th_db / 10.0),
            gain_c=(float(sys_tbl["gain_c"]) if "gain_c" in sys_tbl else None),
            eta=float(sys_tbl.get("eta", 1.0)),
        )
        return ExperimentSpec(
            system=system,
            start_db=float(_require(sweep_tbl, "start_db", "sweep")),
            stop_db=float(_require(sweep_tbl, "stop_db", "sweep")),
            step_db=float(_require(sweep_tbl, "step_db", "sweep")),
            metrics=tuple(_require(run_tbl, "metrics", "run")),
            methods=tuple(_require(run_tbl, "methods", "run")),
            trials=int(run_tbl.get("trials", 1_000_000)),
            seed=int(run_tbl.get("seed", 0)),
            output_path=str(run_tbl.get("output_path", "results.csv")),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# evaluation and output
# ---------------------------------------------------------------------------

def _evaluate(metric, method, cfg, spec, snr_db, point_index, threads):
    if metric == "Pout":
        if method == "ClosedForm":
            return pout_closed_form(cfg), None
        if method == "MonteCarlo":
            est = simulate_pout(cfg, snr_db, spec.trials,
                                spec.seed + point_index, threads=threads)
            return est.mean, est.stderr
        raise UnsupportedCombinationError(
            f"no {method} evaluator for outage probability"
        )
    if method == "Quadrature":
        return ber_quadrature(cfg), None
    if method == "SeriesExact":
        return ber_series_exact(cfg), None
    if method == "Asymptotic":
        return ber_asymptotic(cfg).value, None
    if method == "ClosedForm":
        return ber_closed_ne(cfg), None
    est = simulate_ber(cfg, snr_db, spec.trials, spec.seed + point_index,
                       threads=threads)
    return est.mean, est.stderr


def _spec_echo(spec: ExperimentSpec):
    turb = spec.system.fso_turbulence
    if isinstance(turb, GammaGammaPE):
        turb_doc = {"family": "gamma_gamma", "alpha": turb.alpha,
                    "beta": turb.beta, "xi": turb.xi, "kappa": turb.kappa}
    else:
        turb_doc = {"family": "negexp", "lam": turb.lam}
    return {
        "system": {
            "n_users": spec.system.n_users,
            "n_relays": spec.system.n_relays,
            "csi_mode": spec.system.csi_mode,
            "gain_c": spec.system.gain_c,
            "eta": spec.system.eta,
            "gamma_th_db": 10.0 * math.log10(spec.system.gamma_th),
            "turbulence": turb_doc,
        },
        "sweep": {"start_db": spec.start_db, "stop_db": spec.stop_db,
                  "step_db": spec.step_db},
        "metrics": list(spec.metrics),
        "methods": list(spec.methods),
        "trials": spec.trials,
        "seed": spec.seed,
        "output_path": spec.output_path,
    }


def run_experiment(spec: ExperimentSpec, out_dir=None, threads=1, quiet=False):
    """Evaluate the sweep, write CSV + manifest, return (csv_path, errors).

    Rows are written in grid order: SNR point, then metric, then method in
    canonical order. Evaluation failures become status="error: ..." rows
    and the run keeps going.
    """
    out_dir = out_dir or os.environ.get("FSORF_OUT") or "."
    csv_path = spec.output_path
    if not os.path.isabs(csv_path):
        csv_path = os.path.join(out_dir, csv_path)
    os.makedirs(os.path.dirname(csv_path) or ".", exist_ok=True)

    rows, n_err = [], 0
    for i, snr_db in enumerate(spec.grid_db()):
        lin = 10.0 ** (snr_db / 10.0)
        cfg = replace(spec.system, mean_snr_fso=lin, mean_snr_rf=lin)
        for metric in METRICS:
            if metric not in spec.metrics:
                continue
            for method in METHODS:
                if method not in spec.methods:
                    continue
                if method not in SUPPORTED_METHODS[metric]:
                    continue
                try:
                    value, stderr = _evaluate(metric, method, cfg, spec,
                                              snr_db, i, threads)
                    point = PerfPoint(avg_snr_db=snr_db, metric=metric,
                                      value=value, method=method,
                                      stderr=stderr)
                    rows.append((
                        format(snr_db, ".10g"), metric, method,
                        f"{point.value:.12e}",
                        "" if stderr is None else f"{stderr:.6e}", "ok",
                    ))
                except (EvaluationError, ValueError) as exc:
                    n_err += 1
                    msg = " ".join(str(exc).split())[:120]
                    rows.append((format(snr_db, ".10g"), metric, method,
                                 "", "", f"error: {msg}"))

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    manifest_path = os.path.splitext(csv_path)[0] + ".manifest.json"
    manifest = {"schema_version": 1, "library_version": __version__,
                "experiment": _spec_echo(spec)}
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not quiet:
        print(f"wrote {csv_path} ({len(rows)} rows, {n_err} errors)")
        seen = {}
        for r in rows:
            key = (r[1], r[2])
            ok = r[5] == "ok"
            a, b = seen.get(key, (0, 0))
            seen[key] = (a + ok, b + (not ok))
        for (metric, method), (ok, bad) in sorted(seen.items()):
            print(f"  {metric:5s} {method:12s} ok={ok} err={bad}")
    return csv_path, n_err


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

def read_curve(path):
    """Load a results CSV into a list of row dicts (floats parsed)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise UsageError(f"{path} is not a results CSV")
            rows = []
            for raw in reader:
                rows.append({
                    "gamma_avg_db": float(raw["gamma_avg_db"]),
                    "metric": raw["metric"],
                    "method": raw["method"],
                    "value": float(raw["value"]) if raw["value"] else None,
                    "stderr": float(raw["stderr"]) if raw["stderr"] else None,
                    "status": raw["status"],
                })
            return rows
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _select(rows, metric, method):
    sel = [r for r in rows if r["metric"] == metric and r["method"] == method]
    return sorted(sel, key=lambda r: r["gamma_avg_db"])


def crossing_db(gammas_db, values, target):
    """SNR (dB) where a decreasing curve crosses `target`, interpolating
    linearly in log10(value). None when the curve never reaches it."""
    lt = math.log10(target)
    pts = [(g, math.log10(v)) for g, v in zip(gammas_db, values)
           if v is not None and v > 0.0]
    pts.sort()
    for (g0, v0), (g1, v1) in zip(pts[:-1], pts[1:]):
        if (v0 - lt) * (v1 - lt) <= 0.0 and v0 != v1:
            return g0 + (g1 - g0) * (lt - v0) / (v1 - v0)
    return None


def compare_report(rows_a, rows_b, metric, method_a, method_b,
                   rel_tol=1e-3, targets=()):
    """Point-by-point verdicts between two curves plus level crossings.

    Monte Carlo pairs pass within 3 combined standard errors; deterministic
    pairs within rel_tol. Grids must match exactly.
    """
    a = _select(rows_a, metric, method_a)
    b = _select(rows_b, metric, method_b)
    if not a or not b:
        raise UsageError(f"no {metric}/{method_a} vs {method_b} rows to compare")
    if [r["gamma_avg_db"] for r in a] != [r["gamma_avg_db"] for r in b]:
        raise UsageError("curves do not share a gamma_avg grid")
    points = []
    for ra, rb in zip(a, b):
        if ra["status"] != "ok" or rb["status"] != "ok":
            verdict = "error"
        else:
            va, vb = ra["value"], rb["value"]
            se = math.hypot(ra["stderr"] or 0.0, rb["stderr"] or 0.0)
            if se > 0.0:
                verdict = "pass" if abs(va - vb) <= 3.0 * se else "fail"
            else:
                tol = rel_tol * max(abs(va), abs(vb))
                verdict = "pass" if abs(va - vb) <= tol else "fail"
        points.append({"gamma_avg_db": ra["gamma_avg_db"],
                       "a": ra["value"], "b": rb["value"],
                       "verdict": verdict})
    gaps = []
    for tgt in targets:
        ga = crossing_db([p["gamma_avg_db"] for p in points],
                         [p["a"] for p in points], tgt)
        gb = crossing_db([p["gamma_avg_db"] for p in points],
                         [p["b"] for p in points], tgt)
        gaps.append({"target": tgt, "a_db": ga, "b_db": gb,
                     "gap_db": None if ga is None or gb is None else gb - ga})
    return {"points": points, "gaps": gaps,
            "n_pass": sum(p["verdict"] == "pass" for p in points),
            "n_fail": sum(p["verdict"] == "fail" for p in points),
            "n_error": sum(p["verdict"] == "error" for p in points)}


# ---------------------------------------------------------------------------
# presets: the six reference figures
# ---------------------------------------------------------------------------

def _preset_spec(name, turb, csi, n_users, n_relays, metric, methods,
                 trials, seed, stop_db=40.0):
    gain = 1.0 if csi == "Unknown" else None
    system = SystemConfig(n_users, n_relays, 1.0, 1.0, csi, turb, 10.0,
                          gain_c=gain)
    return ExperimentSpec(system=system, start_db=0.0, stop_db=stop_db,
                          step_db=2.5, metrics=(metric,), methods=methods,
                          trials=trials, seed=seed,
                          output_path=f"{name}.csv")


def preset_specs(preset, trials, seed):
    """Named curve specs for one reference figure."""
    pout_m = ("ClosedForm", "MonteCarlo")
    ber_m = ("Quadrature", "MonteCarlo")
    out = []
    if preset == "fig2":
        for csi in ("Known", "Unknown"):
            for m in (1, 2, 3):
                out.append(_preset_spec(
                    f"fig2_{csi.lower()}_m{m}", MODERATE, csi, 2, m,
                    "Pout", pout_m, trials, seed))
    elif preset == "fig3":
        for csi in ("Known", "Unknown"):
            for n in (1, 2, 4):
                out.append(_preset_spec(
                    f"fig3_{csi.lower()}_n{n}", MODERATE, csi, n, 2,
                    "BER", ber_m, trials, seed))
    elif preset == "fig4":
        for csi in ("Known", "Unknown"):
            for label, turb in (("moderate", MODERATE), ("strong", STRONG)):
                out.append(_preset_spec(
                    f"fig4_{csi.lower()}_{label}", turb, csi, 2, 2,
                    "BER", ber_m, trials, seed))
    elif preset == "fig5":
        for csi in ("Known", "Unknown"):
            for n in (1, 2, 4):
                out.append(_preset_spec(
                    f"fig5_{csi.lower()}_n{n}", NegExp(1.0), csi, n, 2,
                    "Pout", pout_m, trials, seed))
    elif preset == "fig6":
        for csi in ("Known", "Unknown"):
            for m in (1, 2, 3):
                out.append(_preset_spec(
                    f"fig6_{csi.lower()}_m{m}", NegExp(1.0), csi, 2, m,
                    "Pout", pout_m, trials, seed))
    elif preset == "fig7":
        for csi in ("Known", "Unknown"):
            for lam in (1.0, 2.0, 5.0):
                out.append(_preset_spec(
                    f"fig7_{csi.lower()}_lam{lam:g}", NegExp(lam), csi, 2, 2,
                    "BER", ber_m, trials, seed))
    else:
        raise UsageError(f"unknown preset {preset!r} (fig2..fig7)")
    return out


PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="fsorf",
        description="Outage/BER curves for multi-hop hybrid FSO/RF links",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a TOML experiment file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--threads", type=int, default=1)

    p_pre = sub.add_parser("preset", help="run a built-in figure preset")
    p_pre.add_argument("name", choices=PRESETS)
    p_pre.add_argument("--trials", type=int, default=1_000_000)
    p_pre.add_argument("--seed", type=int, default=1234)
    p_pre.add_argument("--out", default=None)
    p_pre.add_argument("--threads", type=int, default=1)

    p_cmp = sub.add_parser("compare", help="compare two result curves")
    p_cmp.add_argument("csv_a")
    p_cmp.add_argument("csv_b")
    p_cmp.add_argument("--metric", default="Pout", choices=METRICS)
    p_cmp.add_argument("--method-a", default="ClosedForm", choices=METHODS)
    p_cmp.add_argument("--method-b", default="MonteCarlo", choices=METHODS)
    p_cmp.add_argument("--rel-tol", type=float, default=1e-3)
    p_cmp.add_argument("--target-pout", type=float, action="append",
                       default=[], help="extract dB crossings at this level")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            spec = load_experiment(args.config)
            _, n_err = run_experiment(spec, out_dir=args.out,
                                      threads=args.threads)
            return 1 if n_err else 0
        if args.command == "preset":
            n_err = 0
            for spec in preset_specs(args.name, args.trials, args.seed):
                _, errs = run_experiment(spec, out_dir=args.out,
                                         threads=args.threads)
                n_err += errs
            return 1 if n_err else 0
        rep = compare_report(
            read_curve(args.csv_a), read_curve(args.csv_b), args.metric,
            args.method_a, args.method_b, rel_tol=args.rel_tol,
            targets=args.target_pout,
        )
        for p in rep["points"]:
            print(f"  {p['gamma_avg_db']:7.2f} dB  a={p['a']}  b={p['b']}  "
                  f"{p['verdict']}")
        for g in rep["gaps"]:
            print(f"  level {g['target']:g}: a@{g['a_db']} dB  "
                  f"b@{g['b_db']} dB  gap={g['gap_db']}")
        print(f"pass={rep['n_pass']} fail={rep['n_fail']} "
              f"error={rep['n_error']}")
        return 0 if rep["n_fail"] == 0 and rep["n_error"] == 0 else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
