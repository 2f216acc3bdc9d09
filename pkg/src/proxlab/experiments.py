"""Experiment runners: predicted against observed identification and rates.

Each runner takes a plain config dict, writes CSV and ``report.json`` files
into an output directory when one is given, and returns the report dict.
Reports carry a hash of the canonical config so results can be matched to
their inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import instances
from .admm import (
    AffineSolver,
    QuadraticSolver,
    admm_rate_prediction,
    dual_dr_sequence,
    reference_admm,
    run_admm,
)
from .dr import (
    ParamSequence,
    ReferenceSolution,
    StepSchedule,
    default_window,
    identification_iteration,
    observed_rate,
    product_lift,
    reference_fixed_point,
    run_dr,
    steps_to_exact_fixed_point,
)
from .io import write_csv, write_json
from .prox import AffineIndicator, FunctionOracle, L1Ball, L1Norm, from_dict
from .rates import classify, linearize_dr, nd_certificate, polyhedral_rate

SUBLINEAR_R2 = 0.99


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _out(config: dict, out):
    out = out if out is not None else config.get("out")
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def analyze_dr(
    G: FunctionOracle,
    J: FunctionOracle,
    z0,
    schedule: StepSchedule,
    max_iter: int | None = None,
    reference: ReferenceSolution | None = None,
    extra_iters: int = 20,
):
    """Reference, traced run, identification, linearization and rate fit for one problem.

    Stationary runs are fitted on ``||z_k - z*||``. Non-stationary runs may
    settle on a different fixed point than the stationary reference, so they
    are fitted on the fixed-point residual instead.

    Returns ``(report, trace, reference, linearization)``.
    """
    gamma, lam = schedule.gamma.base, schedule.lam.base
    if reference is None:
        reference = reference_fixed_point(G, J, z0, gamma, lam=lam)
    if max_iter is None:
        max_iter = reference.iterations + extra_iters
    trace, _ = run_dr(G, J, z0, schedule, max_iter=max_iter, reference=reference)
    K_J, K_G = identification_iteration(trace)
    lin, chart_G, chart_J = linearize_dr(G, J, reference.x, reference.z, gamma, lam)
    nd = nd_certificate(G, J, reference.x, reference.z, gamma)
    start = max(K_J or 0, K_G or 0) + 5
    if schedule.is_stationary:
        series, name = trace.dist_z, "dist_z"
        window = default_window(series, start, reference.residual)
    else:
        series, name = trace.residual, "residual"
        window = default_window(series, start, 0.0, rel_floor=1e-12)
    fit = observed_rate(series, window)
    classification = classify(G, J)
    report = {
        "nd_margins": {"G": nd[0].to_dict(), "J": nd[1].to_dict()},
        "certified": bool(nd[0].certified and nd[1].certified),
        "identification": {"K_J": K_J, "K_G": K_G},
        "predicted_rho": lin.rho,
        "classification": classification,
        "lambda": lam,
        "gamma": gamma,
        "observed": {**fit.to_dict(), "series": name},
        "reference": {
            "residual": reference.residual,
            "iterations": reference.iterations,
            "converged": reference.converged,
        },
        "schedule": schedule.to_dict(),
        "schedule_diagnostics": trace.diagnostics,
        "iterations": len(trace),
    }
    if classification == "OPTIMAL":
        poly = polyhedral_rate(chart_J, chart_G, lam)
        report["cos_friedrichs"] = poly.cos_friedrichs
        report["polyhedral_rho"] = poly.rho
        report["friedrichs_degenerate"] = poly.degenerate
    else:
        report["cos_friedrichs"] = None
    if not report["certified"]:
        report["status"] = "NON-CERTIFIED"
    # a posteriori check that the schedule perturbation decays faster than the predicted rate
    if not schedule.is_stationary:
        report["schedule_faster_than_rate"] = _schedule_faster(schedule, lin.rho)
    return report, trace, reference, lin


def _schedule_faster(schedule: StepSchedule, rho: float) -> bool:
    seq = schedule.gamma
    if seq.kind == "geometric":
        return abs(seq.ratio) < rho
    return seq.kind == "constant"


def _save_run(path: Path, config: dict, G, J, reference, trace, report) -> None:
    write_json(path / "config.json", config)
    write_json(path / "problem.json", {"G": G.to_dict(), "J": J.to_dict()})
    write_json(path / "reference.json", {**reference.to_dict(), "lambda": report["lambda"]})
    write_csv(path / "trace.csv", trace.CSV_HEADER, trace.rows())
    write_json(path / "report.json", report)


def exp_affine_constrained(config: dict, out=None) -> dict:
    reg = config.get("regularizer", "l1")
    seed = int(config.get("seed", 0))
    inst = instances.affine_constrained(reg, seed, **config.get("dims", {}))
    sched = StepSchedule.from_dict(config.get("schedule", {"gamma": config.get("gamma", 1.0)}))
    z0 = np.zeros(inst.x_ob.size) if "z0" not in config else np.asarray(config["z0"], float)
    report, trace, ref, _ = analyze_dr(inst.G, inst.J, z0, sched, config.get("max_iter"))
    report.update(name="affine_constrained", regularizer=reg, seed=seed, config_hash=config_hash(config))
    path = _out(config, out)
    if path:
        _save_run(path, config, inst.G, inst.J, ref, trace, report)
    return report


def exp_tv_denoise(config: dict, out=None) -> dict:
    p = str(config.get("p", "inf"))
    seed = int(config.get("seed", 0))
    inst = instances.tv_denoise(
        p, seed, n=config.get("n", 64), jumps=config.get("jumps", 4), noise=config.get("noise"), tau=config.get("tau")
    )
    sched = StepSchedule.from_dict(config.get("schedule", {"gamma": config.get("gamma", 1.0)}))
    y = inst.meta["y"]
    report, trace, ref, _ = analyze_dr(inst.G, inst.J, y.copy(), sched, config.get("max_iter"))
    report.update(name="tv_denoise", p=p, seed=seed, tau=inst.meta["tau"], config_hash=config_hash(config))
    path = _out(config, out)
    if path:
        _save_run(path, config, inst.G, inst.J, ref, trace, report)
    return report


def exp_finite_convergence_map(config: dict, out=None) -> dict:
    inst = instances.finite_convergence_instance()
    gammas = config.get("gammas", [0.25, 5.0])
    res = int(config.get("grid", 41))
    half = float(config.get("half_width", 10.0))
    cap = int(config.get("max_iter", 10**5))
    axis = np.linspace(-half, half, res)
    rows, summary = [], {}
    for gamma in gammas:
        counts, capped = [], 0
        for a in axis:
            for b in axis:
                k = steps_to_exact_fixed_point(inst.G, inst.J, np.array([a, b]), gamma, cap)
                if k is None:
                    capped += 1
                    k = -1
                else:
                    counts.append(k)
                rows.append((float(gamma), float(a), float(b), int(k)))
        summary[str(gamma)] = {
            "mean_iterations": float(np.mean(counts)) if counts else None,
            "max_iterations": int(max(counts)) if counts else None,
            "capped_cells": capped,
            "all_finite": capped == 0,
        }
    report = {"name": "finite_convergence_map", "grid": res, "gammas": gammas, "per_gamma": summary,
              "config_hash": config_hash(config)}
    path = _out(config, out)
    if path:
        write_csv(path / "iterations.csv", ("gamma", "z0_1", "z0_2", "iterations"), rows)
        write_json(path / "report.json", report)
    return report


def exp_gamma_sweep(config: dict, out=None) -> dict:
    reg = config.get("regularizer", "l1")
    seed = int(config.get("seed", 0))
    inst = instances.affine_constrained(reg, seed, **config.get("dims", {}))
    z0 = np.zeros(inst.x_ob.size)
    table = []
    for gamma in config.get("gammas", [0.1, 0.5, 1.0, 5.0]):
        rep, *_ = analyze_dr(inst.G, inst.J, z0, StepSchedule.constant(gamma))
        table.append({
            "gamma": gamma,
            "K": rep["identification"]["K_J"],
            "rho_observed": rep["observed"]["rate"],
            "rho_predicted": rep["predicted_rho"],
            "classification": rep["classification"],
            "certified": rep["certified"],
        })
    rates = [r["rho_observed"] for r in table]
    spread = (max(rates) - min(rates)) / min(rates) if rates else math.nan
    report = {"name": "gamma_sweep", "regularizer": reg, "seed": seed, "table": table,
              "max_relative_spread": spread, "config_hash": config_hash(config)}
    path = _out(config, out)
    if path:
        write_csv(path / "gamma_sweep.csv", ("gamma", "K", "rho_observed", "rho_predicted"),
                  [(r["gamma"], -1 if r["K"] is None else r["K"], r["rho_observed"], r["rho_predicted"]) for r in table])
        write_json(path / "report.json", report)
    return report


def schedule_cases(gamma: float) -> dict:
    """Stationary plus the four vanishing step-size perturbations."""
    return {
        "stationary": ParamSequence(gamma),
        "case1": ParamSequence(gamma, "power_decay", 1.0, exponent=1.1),
        "case2": ParamSequence(gamma, "power_decay", 1.0, exponent=2.0),
        "case3": ParamSequence(gamma, "geometric", 1.0, ratio=0.95),
        "case4": ParamSequence(gamma, "geometric", 1.0, ratio=0.5),
    }


def exp_schedule_comparison(config: dict, out=None) -> dict:
    """Slopes of the fixed-point residual under each schedule.

    Residuals are used because every schedule may converge to its own fixed
    point; the residual needs no reference.
    """
    reg = config.get("regularizer", "l1")
    seed = int(config.get("seed", 0))
    gamma = float(config.get("gamma", 1.0))
    iters = int(config.get("max_iter", 2000))
    inst = instances.affine_constrained(reg, seed, **config.get("dims", {}))
    z0 = np.zeros(inst.x_ob.size)
    table, residuals = {}, {}
    for name, seq in schedule_cases(gamma).items():
        trace, _ = run_dr(inst.G, inst.J, z0, StepSchedule(seq), max_iter=iters)
        K, _ = identification_iteration(trace)
        window = default_window(trace.residual, (K or 0) + 5, 0.0, rel_floor=1e-12)
        fit = observed_rate(trace.residual, window)
        residuals[name] = trace.residual
        table[name] = {"K": K, **fit.to_dict(), "sublinear": bool(fit.r_squared < SUBLINEAR_R2)}
    stat = table["stationary"]["rate"]
    report = {
        "name": "schedule_comparison",
        "regularizer": reg,
        "seed": seed,
        "gamma": gamma,
        "cases": table,
        "case4_slope_gap": abs(table["case4"]["rate"] - stat) / stat,
        "case1_flagged_sublinear": table["case1"]["sublinear"],
        "config_hash": config_hash(config),
    }
    path = _out(config, out)
    if path:
        names = list(residuals)
        n = max(len(r) for r in residuals.values())
        rows = [(k, *[(residuals[c][k] if k < len(residuals[c]) else math.nan) for c in names]) for k in range(n)]
        write_csv(path / "residuals.csv", ("k", *names), rows)
        write_json(path / "report.json", report)
    return report


def default_product_functions():
    """Two planes and an l1 ball in R^3 meeting along a segment."""
    return [
        AffineIndicator([[1.0, 1.0, 1.0]], [1.0]),
        AffineIndicator([[1.0, -2.0, 0.5]], [0.2]),
        L1Ball([0.6, 0.3, 0.4], 0.5),
    ]


def exp_product_space_demo(config: dict, out=None) -> dict:
    if "functions" in config:
        funcs = [from_dict(f) for f in config["functions"]]
    else:
        funcs = default_product_functions()
    lift = product_lift(funcs)
    seed = int(config.get("seed", 0))
    z0 = instances.make_rng(seed).standard_normal(lift.m * lift.n) * float(config.get("scale", 3.0))
    sched = StepSchedule.from_dict(config.get("schedule", {"gamma": config.get("gamma", 1.0)}))
    report, trace, ref, _ = analyze_dr(lift.G_diag, lift.J_prod, z0, sched, config.get("max_iter"))
    report.update(name="product_space_demo", m=lift.m, n=lift.n, solution=lift.average(ref.x).tolist(),
                  config_hash=config_hash(config))
    path = _out(config, out)
    if path:
        _save_run(path, config, lift.G_diag, lift.J_prod, ref, trace, report)
    return report


def admm_instance(kind: str, seed: int, n: int = 10, m: int = 20, rows: int = 15, constraints: int = 4):
    """Seeded ADMM problem with ``J = ||.||_1`` on ``R^m`` and injective Gaussian ``L``."""
    rng = instances.make_rng(seed)
    L = rng.standard_normal((m, n))
    if kind == "quadratic":
        A = rng.standard_normal((rows, n))
        b = 3.0 * rng.standard_normal(rows)
        solver = QuadraticSolver(A, b, L)
    elif kind == "affine":
        C = rng.standard_normal((constraints, n))
        d = rng.standard_normal(constraints)
        solver = AffineSolver(C, d, L)
    else:
        raise ValueError("ADMM instance kind must be 'quadratic' or 'affine'")
    w0 = rng.standard_normal(m)
    return solver, L1Norm(m), w0


def analyze_admm(solver, J, gamma: float, w0, max_iter: int | None = None):
    ref = reference_admm(solver, J, gamma, w0)
    iters = max_iter or ref.iterations
    trace, state = run_admm(solver, J, gamma, w0, max_iter=iters, reference=ref, keep_w=True)
    from .dr import _stable_from

    K_G, K_J = _stable_from(trace.fp_G), _stable_from(trace.fp_J)
    pred = admm_rate_prediction(solver, J, gamma, ref)
    window = default_window(trace.dist_w, max(K_G or 0, K_J or 0) + 5, ref.residual)
    fit = observed_rate(trace.dist_w, window)
    dual = dual_dr_sequence(solver, J, gamma, w0, len(trace))
    polyhedral = solver.oracle.polyhedral and J.polyhedral
    report = {
        "identification": {"K_G": K_G, "K_J": K_J},
        "predicted_rho": pred.linearization.rho,
        "cos_friedrichs": pred.cos_friedrichs,
        "classification": "OPTIMAL" if polyhedral else "UPPER-ESTIMATE",
        "observed_w": fit.to_dict(),
        "dual_dr_max_deviation": float(np.max(np.abs(trace.w - dual))),
        "final_primal_residual": float(trace.primal_residual[-1]),
        "reference": {"residual": ref.residual, "iterations": ref.iterations, "converged": ref.converged},
        "gamma": gamma,
    }
    return report, trace, ref, pred


def exp_admm_demo(config: dict, out=None) -> dict:
    kind = config.get("kind", "affine")
    seed = int(config.get("seed", 0))
    gamma = float(config.get("gamma", 1.0))
    solver, J, w0 = admm_instance(kind, seed, **config.get("dims", {}))
    report, trace, *_ = analyze_admm(solver, J, gamma, w0, config.get("max_iter"))
    report.update(name="admm_demo", kind=kind, seed=seed, config_hash=config_hash(config))
    path = _out(config, out)
    if path:
        write_csv(path / "admm.csv", trace.CSV_HEADER, trace.rows())
        write_json(path / "report.json", report)
    return report


EXPERIMENTS = {
    "affine_constrained": exp_affine_constrained,
    "tv_denoise": exp_tv_denoise,
    "finite_convergence_map": exp_finite_convergence_map,
    "gamma_sweep": exp_gamma_sweep,
    "schedule_comparison": exp_schedule_comparison,
    "product_space_demo": exp_product_space_demo,
    "admm_demo": exp_admm_demo,
}


def run_experiment(name: str, config: dict | None = None, out=None) -> dict:
    try:
        runner = EXPERIMENTS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from None
    config = dict(config or {})
    config.setdefault("experiment", name)
    return runner(config, out)
