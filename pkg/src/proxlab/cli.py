"""Command-line entry point ``proxlab``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import instances
from .admm import reference_admm, run_admm, solver_from_dict
from .dr import ReferenceSolution, StepSchedule, reference_fixed_point, run_dr
from .experiments import EXPERIMENTS, _save_run, analyze_dr, run_experiment
from .io import dumps_json, read_json, read_matrix, write_csv
from .prox import from_dict
from .rates import classify, linearize_dr, nd_certificate, polyhedral_rate
from .subspace import orthonormal_basis, principal_angles


def _emit(obj) -> None:
    print(dumps_json(obj))


def cmd_angles(args) -> int:
    a, b = read_matrix(args.a), read_matrix(args.b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"ambient dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    n = a.shape[1]
    rep = principal_angles(orthonormal_basis(list(a), ambient_dim=n), orthonormal_basis(list(b), ambient_dim=n))
    _emit(rep.to_dict())
    return 0


def _problem(cfg: dict, base: Path):
    prob = cfg["problem"]
    if "generator" in prob:
        gen = prob["generator"]
        if gen == "affine_constrained":
            inst = instances.affine_constrained(prob.get("regularizer", "l1"), prob.get("seed", 0), **prob.get("dims", {}))
        elif gen == "tv_denoise":
            inst = instances.tv_denoise(str(prob.get("p", "inf")), prob.get("seed", 0), n=prob.get("n", 64),
                                        jumps=prob.get("jumps", 4), noise=prob.get("noise"), tau=prob.get("tau"))
        elif gen == "finite_convergence":
            inst = instances.finite_convergence_instance()
        else:
            raise ValueError(f"unknown generator {gen!r}")
        G, J = inst.G, inst.J
    else:
        G, J = from_dict(prob["G"], base), from_dict(prob["J"], base)
    if prob.get("swap", False):
        G, J = J, G
    return G, J


def _dimension(G, J) -> int:
    for f in (J, G):
        if f.dim is not None:
            return f.dim
    raise ValueError("cannot infer the problem dimension; give z0 explicitly")


def _start(cfg: dict, n: int) -> np.ndarray:
    if "z0" in cfg:
        z0 = np.asarray(cfg["z0"], dtype=float).ravel()
        if z0.size != n:
            raise ValueError(f"z0 has length {z0.size}, expected {n}")
        return z0
    return instances.make_rng(int(cfg.get("seed", 0))).standard_normal(n)


def _write_stdout_csv(header, rows) -> None:
    w = csv.writer(sys.stdout)
    w.writerow(header)
    for row in rows:
        w.writerow([str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row])


def cmd_run(args) -> int:
    cfg_path = Path(args.config)
    cfg = read_json(cfg_path)
    base = cfg_path.parent
    G, J = _problem(cfg, base)
    n = len(cfg["z0"]) if "z0" in cfg else _dimension(G, J)
    z0 = _start(cfg, n)
    sched = StepSchedule.from_dict(cfg.get("schedule", {"gamma": 1.0}))
    ref_cfg = cfg.get("reference", "auto")
    if ref_cfg == "auto":
        ref = reference_fixed_point(G, J, z0, sched.gamma.base, lam=sched.lam.base)
    else:
        d = read_json(base / ref_cfg)
        if "x" not in d:
            d["x"] = J.prox(np.asarray(d["z"], float), sched.gamma.base).tolist()
        d.setdefault("residual", float("nan"))
        d.setdefault("iterations", 0)
        d.setdefault("converged", True)
        d.setdefault("gamma", sched.gamma.base)
        ref = ReferenceSolution.from_dict(d)
    max_iter = int(cfg.get("max_iter", 1000))
    out = args.out or cfg.get("out")
    if out is None:
        trace, _ = run_dr(G, J, z0, sched, max_iter=max_iter, stop_tol=float(cfg.get("stop_tol", 0.0)), reference=ref)
        _write_stdout_csv(trace.CSV_HEADER, trace.rows())
        return 0
    report, trace, ref, _ = analyze_dr(G, J, z0, sched, max_iter, reference=ref)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    _save_run(path, cfg, G, J, ref, trace, report)
    print(path / "trace.csv")
    return 0


def cmd_rate(args) -> int:
    path = Path(args.run_dir)
    prob = read_json(path / "problem.json")
    refd = read_json(path / "reference.json")
    G, J = from_dict(prob["G"], path), from_dict(prob["J"], path)
    ref = ReferenceSolution.from_dict(refd)
    lam = float(refd.get("lambda", 1.0))
    lin, chart_G, chart_J = linearize_dr(G, J, ref.x, ref.z, ref.gamma, lam)
    nd = nd_certificate(G, J, ref.x, ref.z, ref.gamma)
    cls = classify(G, J)
    cos_f = polyhedral_rate(chart_J, chart_G, lam).cos_friedrichs if cls == "OPTIMAL" else None
    _emit({
        "predicted_rho": lin.rho,
        "cos_friedrichs": cos_f,
        "lambda": lam,
        "classification": cls,
        "nd_margins": {"G": nd[0].to_dict(), "J": nd[1].to_dict()},
    })
    return 0


def cmd_admm(args) -> int:
    cfg_path = Path(args.config)
    cfg = read_json(cfg_path)
    base = cfg_path.parent
    L = read_matrix(base / cfg["L"]) if isinstance(cfg["L"], str) else np.atleast_2d(np.asarray(cfg["L"], float))
    solver = solver_from_dict({**cfg["G_solver"], "_base": base}, L)
    J = from_dict(cfg["J"], base)
    gamma = float(cfg.get("gamma", 1.0))
    init = cfg.get("init", {})
    m = L.shape[0]
    if "w0" in init:
        w0 = np.asarray(init["w0"], dtype=float)
    else:
        w0 = instances.make_rng(int(init.get("seed", 0))).standard_normal(m)
    ref = reference_admm(solver, J, gamma, w0)
    trace, _ = run_admm(solver, J, gamma, w0, max_iter=int(cfg.get("max_iter", 500)), reference=ref)
    out = args.out or cfg.get("out")
    if out is None:
        _write_stdout_csv(trace.CSV_HEADER, trace.rows())
    else:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        write_csv(path / "admm.csv", trace.CSV_HEADER, trace.rows())
        print(path / "admm.csv")
    return 0


def cmd_experiment(args) -> int:
    cfg = read_json(args.config) if args.config else {}
    report = run_experiment(args.name, cfg, args.out)
    _emit(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proxlab", description="Douglas-Rachford and ADMM rate laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="run a named experiment")
    e.add_argument("name", choices=sorted(EXPERIMENTS))
    e.add_argument("--config", help="JSON config file")
    e.add_argument("--out", help="output directory")
    e.set_defaults(func=cmd_experiment)

    a = sub.add_parser("angles", help="principal angles between two row-spanned subspaces")
    a.add_argument("a")
    a.add_argument("b")
    a.set_defaults(func=cmd_angles)

    r = sub.add_parser("run", help="run DR from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="write a run directory instead of CSV on stdout")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("rate", help="rate prediction for a saved run directory")
    t.add_argument("run_dir")
    t.set_defaults(func=cmd_rate)

    d = sub.add_parser("admm", help="run ADMM from a JSON config")
    d.add_argument("config")
    d.add_argument("--out", help="output directory")
    d.set_defaults(func=cmd_admm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream reader (e.g. ``head``) closed early
        sys.stderr.close()
        return 0
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"proxlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
