"""Config-driven experiment runner.

Subcommands: run | verify | sweep | stability | report.  Exit codes:
0 success, 1 audit failure, 2 configuration error, 3 solver error.
All CSV artifacts are written atomically with repr-stable float
formatting, so repeated runs of one config are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import calibration
from . import presets
from . import scheme as sc
from . import spectral as sp
from . import uniqueness
from . import verify
from .config import AUDIT_NAMES, RunConfig, load_config
from .errors import (
    ConditionViolated,
    ConfigError,
    InvalidConstants,
    InvalidParams,
    MhdSplitError,
    NoConvergence,
    UnsupportedTestFunction,
    WindowCollapse,
)
from .snapshots import atomic_write_text, export_trajectory, import_trajectory

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_SOLVER_ERRORS = (WindowCollapse, NoConvergence, ConditionViolated, InvalidConstants, InvalidParams)

MAIN_CSV_COLUMNS = [
    "t",
    "E_v2",
    "E_H2",
    "Diss_v2",
    "Diss_H2",
    "lhs_global",
    "rhs_global",
    "residual_global",
    "L3_v",
    "L3_H",
    "picard_iters",
]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def _build_initial(cfg: RunConfig):
    grid = cfg.make_grid()
    return grid, presets.initial_data(
        grid, cfg.preset, seed=cfg.seed, amplitude=cfg.amplitude, decay=cfg.decay
    )


def _default_phi(traj: sc.Trajectory) -> verify.BumpTestFunction:
    w = traj.windows[0]
    t0 = float(w.times[0])
    span = w.horizon - t0
    return verify.BumpTestFunction(t_center=t0 + 0.5 * span, t_halfwidth=0.4 * span)


def _main_rows(traj: sc.Trajectory, rep: verify.EnergyReport) -> list:
    rows = []
    i = 0
    for wi, w in enumerate(traj.windows):
        iters = w.certificate.iterations
        for m in range(len(w.times)):
            v, H = w.total(m)
            rows.append(
                [
                    float(w.times[m]),
                    sp.l2_norm(w.states[m].v2) ** 2,
                    sp.l2_norm(w.states[m].H2) ** 2,
                    sp.sobolev_seminorm(w.states[m].v2, 1.0) ** 2,
                    sp.sobolev_seminorm(w.states[m].H2, 1.0) ** 2,
                    float(rep.lhs[i]),
                    float(rep.rhs[i]),
                    float(rep.residual[i]),
                    sp.lp_norm(v, 3.0),
                    sp.lp_norm(H, 3.0),
                    iters,
                ]
            )
            i += 1
    return rows


def _run_audits(traj: sc.Trajectory, cfg: RunConfig, out: Path) -> dict:
    """Execute the configured audits, writing one CSV each; returns the summary map."""
    results: dict = {}
    decomposition = None
    global_report = None
    for name, opts in cfg.audits:
        if name == "global_energy":
            rep = verify.global_energy_audit(traj)
            global_report = rep
            header, rows = rep.to_rows()
            write_csv(out / "audit_global_energy.csv", header, rows)
            results[name] = {
                "passed": rep.passed,
                "min_residual": float(np.min(rep.residual)),
                "max_abs_residual": float(np.max(np.abs(rep.residual))),
            }
        elif name == "local_energy":
            w0 = traj.windows[0]
            if opts:
                phi = verify.BumpTestFunction(
                    t_center=float(opts["t_center"]),
                    t_halfwidth=float(opts["t_halfwidth"]),
                    space_center=(tuple(opts["space_center"]) if opts.get("space_center") else None),
                    space_halfwidth=(
                        tuple(opts["space_halfwidth"]) if opts.get("space_halfwidth") else None
                    ),
                )
            else:
                t0 = float(w0.times[0])
                span = w0.horizon - t0
                L = traj.grid.box_length
                phi = verify.BumpTestFunction(
                    t_center=t0 + 0.5 * span,
                    t_halfwidth=0.4 * span,
                    space_center=(0.5 * L, 0.5 * L, 0.5 * L),
                    space_halfwidth=(0.4 * L, 0.4 * L, 0.4 * L),
                )
            rep = verify.local_energy_audit(traj, phi)
            header, rows = rep.to_rows()
            write_csv(out / "audit_local_energy.csv", header, rows)
            results[name] = {
                "passed": rep.passed,
                "min_residual": float(np.min(rep.residual)),
                "caloric_deficit": float(rep.extras["caloric_deficit"][-1]),
            }
        elif name == "energy_identity":
            eid = sc.energy_identity_residuals(traj)
            ok = bool(np.all(np.abs(eid["residuals"]) <= eid["tolerances"]))
            write_csv(
                out / "audit_energy_identity.csv",
                ["step", "residual", "tolerance"],
                [[i, float(r), float(t)] for i, (r, t) in enumerate(zip(eid["residuals"], eid["tolerances"]))],
            )
            results[name] = {"passed": ok, "max_abs_residual": eid["max_residual"]}
        elif name == "apriori":
            rep = verify.apriori_audit(traj)
            header, rows = rep.to_rows()
            write_csv(out / "audit_apriori.csv", header, rows)
            results[name] = {
                "passed": rep.passed,
                "sup_ratio": [float(x) for x in rep.sup_ratio],
                "xt_ratio": [float(x) for x in rep.xt_ratio],
            }
        elif name == "caloric_bounds":
            rep = verify.caloric_bounds_audit(traj.windows[0].caloric)
            header, rows = rep.to_rows()
            write_csv(out / "audit_caloric_bounds.csv", header, rows)
            results[name] = {"passed": rep.passed}
        elif name == "nonlinear_norms":
            pairs = opts.get("pairs") or calibration.SCALING_PAIRS
            pairs = tuple((float(l), float(s)) for l, s in pairs)
            rep = verify.nonlinear_norm_audit(traj, pairs)
            header, rows = rep.to_rows()
            write_csv(out / "audit_nonlinear_norms.csv", header, rows)
            results[name] = {"passed": rep.passed}
        elif name == "oscillation":
            if decomposition is None:
                decomposition = sc.pressure_decompose(traj)
            R = float(opts.get("R", traj.grid.box_length / 4.0))
            rep = verify.oscillation_audit(decomposition.parts, decomposition.times, R)
            header, rows = rep.to_rows()
            write_csv(out / "audit_oscillation.csv", header, rows)
            results[name] = {
                "passed": rep.passed,
                "sum_vs_total": decomposition.sum_vs_total,
                "solonnikov_ratios": {
                    str(k): v["ratio"] for k, v in decomposition.regularity.items()
                },
            }
        else:  # pragma: no cover - names validated by the config layer
            raise ConfigError(f"unknown audit {name!r}")
    if global_report is None:
        global_report = verify.global_energy_audit(traj)
    write_csv(out / "run.csv", MAIN_CSV_COLUMNS, _main_rows(traj, global_report))
    return results


def _summary(cfg: RunConfig, traj: sc.Trajectory | None, audits: dict, wall: float) -> dict:
    consts = calibration.grid_constants(cfg.make_grid(), cfg.scheme.mollifier_kind)
    out = {
        "version": __version__,
        "calibration_digest": consts.digest(),
        "config": cfg.raw,
        "audits": audits,
        "all_passed": all(a.get("passed", False) for a in audits.values()) if audits else True,
        "wall_time_s": wall,
    }
    if traj is not None:
        out["certificates"] = [
            {
                "window": wi,
                "t0": float(w.times[0]),
                "horizon": w.horizon,
                "iterations": w.certificate.iterations,
                "gamma": w.certificate.gamma,
                "x1": w.certificate.x1,
                "final_residual": w.certificate.final_residual,
                "c1": w.constants.c1,
                "c2": w.constants.c2,
                "r_norm": w.constants.r_norm,
            }
            for wi, w in enumerate(traj.windows)
        ]
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    grid, (v0, h0) = _build_initial(cfg)
    traj = sc.solve_to_horizon(v0, h0, cfg.scheme)
    export_trajectory(traj, out / "trajectory")
    audits = _run_audits(traj, cfg, out)
    summary = _summary(cfg, traj, audits, time.perf_counter() - start)
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(f"run: {len(traj.windows)} window(s), horizon {traj.horizon}")
    for name, res in audits.items():
        print(f"  audit {name}: {'PASS' if res['passed'] else 'FAIL'}")
    return EXIT_OK if summary["all_passed"] else EXIT_AUDIT


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir or cfg.out_dir)
    traj_dir = out / "trajectory"
    if not (traj_dir / "manifest.json").exists():
        raise ConfigError(f"no exported trajectory under {traj_dir}")
    traj = import_trajectory(traj_dir)
    start = time.perf_counter()
    audits = _run_audits(traj, cfg, out)
    summary = _summary(cfg, traj, audits, time.perf_counter() - start)
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    for name, res in audits.items():
        print(f"audit {name}: {'PASS' if res['passed'] else 'FAIL'}")
    return EXIT_OK if summary["all_passed"] else EXIT_AUDIT


# ============================================================
# Sweeps
# ============================================================


def _solve_level(cfg_raw: dict, dimension: str, level: float):
    """Worker: solve one sweep level with a fixed window; returns raw series."""
    cfg = load_config(data=cfg_raw)
    params = cfg.scheme
    if dimension == "epsilon":
        params = replace(params, epsilon=float(level))
    elif dimension == "dt":
        params = replace(params, dt=float(level))
    elif dimension == "n":
        cfg = RunConfig(
            grid_n=int(level),
            box_length=cfg.box_length,
            scheme=params,
            preset=cfg.preset,
            seed=cfg.seed,
            amplitude=cfg.amplitude,
            decay=cfg.decay,
            audits=cfg.audits,
            out_dir=cfg.out_dir,
            raw=cfg.raw,
        )
    params = replace(params, window_policy="fixed", window_length=params.horizon)
    grid, (v0, h0) = _build_initial(cfg)
    traj = sc.solve_window(v0, h0, params)
    w = traj.windows[0]
    series = w.as_series()
    return np.asarray(w.times), series.v, series.H, grid.n


def _restrict_coeff(coeff: np.ndarray, n_coarse: int) -> np.ndarray:
    """Spectral truncation of (…, n, n, n) coefficients onto a coarser grid."""
    n = coeff.shape[-1]
    if n == n_coarse:
        return coeff
    half = n_coarse // 2
    idx = np.concatenate([np.arange(0, half), np.arange(n - half, n)])
    return coeff[..., idx, :, :][..., :, idx, :][..., :, :, idx]


def _series_distance(ta, va, Ha, tb, vb, Hb, volume: float) -> float:
    """Mixed L2-in-time L2 distance of two state series on aligned nodes."""
    ratio = int(round((len(tb) - 1) / (len(ta) - 1))) if len(ta) > 1 else 1
    sel = np.arange(len(ta)) * ratio
    if not np.allclose(ta, tb[sel], atol=1e-12):
        raise ValueError("sweep levels do not share common nodes")
    dt = float(ta[1] - ta[0]) if len(ta) > 1 else 1.0
    dv = np.array([volume * np.sum(np.abs(va[m] - vb[sel[m]]) ** 2) for m in range(len(ta))])
    dH = np.array([volume * np.sum(np.abs(Ha[m] - Hb[sel[m]]) ** 2) for m in range(len(ta))])
    return float(np.sqrt(np.trapezoid(dv, dx=dt)) + np.sqrt(np.trapezoid(dH, dx=dt)))


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dimension = args.dimension
    if args.levels:
        levels = [float(x) for x in args.levels.split(",")]
    else:
        base = {"epsilon": cfg.scheme.epsilon, "dt": cfg.scheme.dt, "n": cfg.grid_n}[dimension]
        levels = [base, base / 2.0, base / 4.0] if dimension != "n" else [base, 2 * base, 4 * base]
    if len(levels) < 3:
        raise ConfigError("sweep needs at least 3 levels")
    if dimension == "n":
        levels = [int(x) for x in levels]

    tasks = [(cfg.raw, dimension, lev) for lev in levels]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            solved = list(pool.map(_solve_level, *zip(*tasks)))
    else:
        solved = [_solve_level(*t) for t in tasks]

    volume = cfg.box_length**3
    dists = []
    for i in range(len(levels) - 1):
        ta, va, Ha, na = solved[i]
        tb, vb, Hb, nb = solved[i + 1]
        if dimension == "n":
            ncomm = min(na, nb)
            va, Ha = _restrict_coeff(va, ncomm), _restrict_coeff(Ha, ncomm)
            vb, Hb = _restrict_coeff(vb, ncomm), _restrict_coeff(Hb, ncomm)
        if dimension == "dt" and len(ta) > len(tb):
            ta, va, Ha, tb, vb, Hb = tb, vb, Hb, ta, va, Ha
        dists.append(_series_distance(ta, va, Ha, tb, vb, Hb, volume))
    ratio = 2.0
    if dimension != "n" and len(levels) >= 2 and levels[1] != 0:
        ratio = levels[0] / levels[1]
    orders = tuple(
        (math.log(dists[i] / dists[i + 1]) / math.log(ratio)) if dists[i + 1] > 0 else math.inf
        for i in range(len(dists) - 1)
    )
    report = verify.SweepReport(
        dimension=dimension, levels=tuple(levels), distances=tuple(dists), orders=orders
    )
    header, rows = report.to_rows()
    write_csv(out / f"sweep_{dimension}.csv", header, rows)
    atomic_write_text(
        out / f"sweep_{dimension}.json",
        json.dumps(
            {
                "dimension": dimension,
                "levels": levels,
                "distances": list(dists),
                "orders": [o if math.isfinite(o) else None for o in orders],
                "passed": report.passed,
            },
            indent=1,
        )
        + "\n",
    )
    print(f"sweep {dimension}: distances {dists} orders {list(orders)}")
    return EXIT_OK if report.passed else EXIT_AUDIT


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    deltas = tuple(float(x) for x in args.deltas.split(",")) if args.deltas else (1e-4, 1e-5)
    grid, (v0, h0) = _build_initial(cfg)
    reports, verdict = uniqueness.stability_experiment(v0, h0, cfg.scheme, deltas=deltas)
    for d, rep in zip(deltas, reports):
        header, rows = rep.to_rows()
        write_csv(out / f"stability_delta_{d:g}.csv", header, rows)
    atomic_write_text(out / "stability_verdict.json", json.dumps(verdict.to_jsonable(), indent=1) + "\n")
    print(f"stability: {'PASS' if verdict.passed else 'FAIL'} "
          f"K={list(verdict.envelope_constants)} rates={list(verdict.rates)}")
    return EXIT_OK if verdict.passed else EXIT_AUDIT


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    summary_path = out / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"no summary.json under {out}")
    summary = json.loads(summary_path.read_text())
    print(f"mhdsplit {summary.get('version')} summary from {summary_path}")
    print(f"calibration digest: {summary.get('calibration_digest', '')[:16]}…")
    for name, res in summary.get("audits", {}).items():
        print(f"  {name:>18}: {'PASS' if res.get('passed') else 'FAIL'}")
    for cert in summary.get("certificates", []):
        print(
            f"  window {cert['window']}: iters={cert['iterations']} gamma={cert['gamma']:.4g} "
            f"x1={cert['x1']:.4g} residual={cert['final_residual']:.3g}"
        )
    return EXIT_OK if summary.get("all_passed") else EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhdsplit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mhdsplit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to a JSON run config")
        p.add_argument("--out-dir", default=None, help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, default=1, help="concurrent jobs for sweep levels")

    p_run = sub.add_parser("run", help="solve and audit one configuration")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="re-run audits on an exported trajectory")
    add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="convergence sweep over epsilon, dt, or n")
    add_common(p_sweep)
    p_sweep.add_argument("--dimension", choices=("epsilon", "dt", "n"), required=True)
    p_sweep.add_argument("--levels", default=None, help="comma-separated level values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_stab = sub.add_parser("stability", help="two-run Gronwall stability experiment")
    add_common(p_stab)
    p_stab.add_argument("--deltas", default=None, help="comma-separated perturbation sizes")
    p_stab.set_defaults(func=cmd_stability)

    p_rep = sub.add_parser("report", help="print the summary of a finished run")
    p_rep.add_argument("--out-dir", required=True)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedTestFunction as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SOLVER_ERRORS as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MhdSplitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
