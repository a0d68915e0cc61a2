"""Command-line surface: generate problems, solve, verify against the
rate/accuracy theory, train and query the alpha predictor, run benchmarks.

Traces are JSON-lines (one record per outer iteration), summaries are CSV
rows; both carry a schema_version field so files stay append-safe.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .alphaselect import (AlphaSelectConfig, GprModel, gpr_fit,
                          grid_search_alpha, make_features, predict_alpha,
                          select_alpha)
from .analysis import (condition_estimate, dense_iteration_operator,
                       lambda_sequence, theory_bounds)
from .gadi import GadiConfig, SolveReport, gadi_solve
from .precision import FORMATS, resolve_format
from .problems import Problem, build_cd_3d, build_cdr_2d, build_complex_rd
from .sparsemat import mm_read, mm_write
from .splitting import make_hss_splitting

SCHEMA_VERSION = 1

_PRECISIONS = sorted(FORMATS)


def _apply_thread_cap():
    cap = os.environ.get("GADI_MP_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def build_problem(family: str, n_g: int, r: float = 1.0, s: float = 1.0e4,
                  seed: int = 0, laplacian_scaling: str = "nu_over_h2") -> Problem:
    if family == "cdr2d":
        return build_cdr_2d(n_g, r)
    if family == "cd3d":
        return build_cd_3d(n_g)
    if family == "crd":
        return build_complex_rd(n_g, s, seed, laplacian_scaling)
    raise click.BadParameter(f"unknown problem family {family!r}")


def load_problem(path: str) -> Problem:
    """Read a Matrix Market file plus its params/b sidecar JSON."""
    a = mm_read(path)
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        b = np.asarray(meta["b"], dtype=float)
        exact = meta.get("exact_solution")
        return Problem(A=a, b=b,
                       exact_solution=None if exact is None
                       else np.asarray(exact, dtype=float),
                       label=meta.get("label", "external"),
                       params=meta.get("params", {}))
    ones = np.ones(a.nrows)
    return Problem(A=a, b=a.to_scipy() @ ones, exact_solution=ones,
                   label="external", params={})


def _history_records(report: SolveReport) -> list[dict]:
    return [{
        "schema_version": SCHEMA_VERSION,
        "k": h.k,
        "residual_norm": h.residual_norm,
        "relative_residual": h.relative_residual,
        "backward_error": h.backward_error,
        "forward_error": h.forward_error,
        "mu": h.mu,
        "inner_h_iterations": h.inner_h_iterations,
        "inner_s_iterations": h.inner_s_iterations,
        "inner_breakdown": h.inner_breakdown,
    } for h in report.history]


@click.group()
@click.version_option(__version__)
def main():
    """Mixed-precision alternating-direction implicit solver."""
    _apply_thread_cap()


@main.command()
@click.option("--problem", "family", required=True,
              type=click.Choice(["cdr2d", "cd3d", "crd"]))
@click.option("--ng", required=True, type=int)
@click.option("--r", default=1.0, show_default=True, type=float)
@click.option("--s", default=1.0e4, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--laplacian-scaling", default="nu_over_h2", show_default=True,
              type=click.Choice(["nu_over_h2", "nu"]))
@click.option("--out", required=True, type=click.Path())
def gen(family, ng, r, s, seed, laplacian_scaling, out):
    """Generate a benchmark system: Matrix Market file + params sidecar."""
    problem = build_problem(family, ng, r, s, seed, laplacian_scaling)
    mm_write(out, problem.A)
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "label": problem.label,
        "params": problem.params,
        "b": problem.b.tolist(),
        "exact_solution": None if problem.exact_solution is None
        else problem.exact_solution.tolist(),
    }
    Path(str(out) + ".json").write_text(json.dumps(sidecar))
    click.echo(f"wrote {out} (n={problem.n}, nnz={problem.A.nnz}) and sidecar")


def _solve_options(f):
    for opt in reversed([
        click.option("--alpha", required=True, type=float),
        click.option("--omega", default=1.0, show_default=True, type=float),
        click.option("--us", default="fp64", show_default=True,
                     type=click.Choice(_PRECISIONS)),
        click.option("--u", default="fp64", show_default=True,
                     type=click.Choice(_PRECISIONS)),
        click.option("--ur", default="fp64", show_default=True,
                     type=click.Choice(_PRECISIONS)),
        click.option("--outer-tol", default=1.0e-10, show_default=True,
                     type=float),
        click.option("--outer-maxit", default=2000, show_default=True,
                     type=int),
        click.option("--inner-tol", default=1.0e-4, show_default=True,
                     type=float),
        click.option("--strict-model/--no-strict-model", default=True,
                     show_default=True),
    ]):
        f = opt(f)
    return f


def _make_config(alpha, omega, us, u, ur, outer_tol, outer_maxit, inner_tol,
                 strict_model) -> GadiConfig:
    return GadiConfig(alpha=alpha, omega=omega, u=u, u_r=ur, u_s=us,
                      outer_tol=outer_tol, outer_maxit=outer_maxit,
                      inner_tol=inner_tol, strict_model=strict_model)


@main.command()
@click.option("--problem", "path", required=True, type=click.Path(exists=True))
@_solve_options
@click.option("--report", type=click.Path())
def solve(path, report, **kw):
    """Solve a system from a Matrix Market file."""
    problem = load_problem(path)
    cfg = _make_config(**kw)
    result = gadi_solve(problem, cfg=cfg)
    click.echo(f"status={result.status} outer={result.iterations} "
               f"inner={result.total_inner_iterations} "
               f"relres={result.final_relative_residual:.3e}")
    if report:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "config": {k: str(v) if k in ("u", "u_r", "u_s") else v
                       for k, v in dataclasses.asdict(cfg).items()},
            "status": result.status,
            "outer_iterations": result.iterations,
            "total_inner_iterations": result.total_inner_iterations,
            "history": _history_records(result),
            "wallclock": result.wallclock,
        }
        Path(report).write_text(json.dumps(payload, indent=2))
    raise SystemExit(0 if result.status == "Converged" else 1)


@main.command()
@click.option("--problem", "path", required=True, type=click.Path(exists=True))
@_solve_options
@click.option("--report", type=click.Path())
def verify(path, report, **kw):
    """Solve and confront the run with the theoretical rate/accuracy bounds
    (dense oracle; desk-scale problems only)."""
    problem = load_problem(path)
    cfg = _make_config(**kw)
    split = make_hss_splitting(problem.A, cfg.alpha, cfg.u_s)
    result = gadi_solve(problem, cfg=cfg, keep_iterates=True)
    op = dense_iteration_operator(problem.A, split.M, split.N, cfg.alpha,
                                  cfg.omega, problem.b)
    kappa_a = condition_estimate(problem.A)
    kappa_h = condition_estimate(split.H)
    kappa_s = condition_estimate(split.S)
    hs = split.H.to_dense() @ split.S.to_dense()
    kappa_hs = float(np.linalg.cond(hs, 2))
    mus = [h.mu for h in result.history if h.mu is not None]
    bounds = theory_bounds(
        n=problem.n, kappa_A=kappa_a, kappa_H=kappa_h, kappa_S=kappa_s,
        kappa_HS=kappa_hs, mu=max(mus) if mus else 1.0,
        u=cfg.u, u_r=cfg.u_r, u_s=cfg.u_s, c_F=op.c_F, c_B=op.c_B,
        lambda_F=op.rho, lambda_B=op.rho)
    lam = None
    if problem.exact_solution is not None and result.iterates:
        errs = [problem.exact_solution - x for x in result.iterates]
        errs = [e for e in errs if np.linalg.norm(e) > 0]
        if errs:
            lam = lambda_sequence(op, errs, "F").tolist()
    payload = {
        "schema_version": SCHEMA_VERSION,
        "status": result.status,
        "rho": op.rho, "c_F": op.c_F, "c_B": op.c_B,
        "kappa_A": kappa_a, "kappa_H": kappa_h, "kappa_S": kappa_s,
        "kappa_HS": kappa_hs,
        "bounds": {k: v for k, v in dataclasses.asdict(bounds).items()
                   if k != "inputs"},
        "measured": {
            "final_relative_residual": result.final_relative_residual,
            "final_backward_error": result.history[-1].backward_error
            if result.history else None,
            "final_forward_error": result.history[-1].forward_error
            if result.history else None,
            "lambda_F": lam,
        },
    }
    click.echo(json.dumps({k: payload[k] for k in
                           ("status", "rho", "kappa_A", "kappa_H", "kappa_S")},
                          indent=2))
    if report:
        Path(report).write_text(json.dumps(payload, indent=2))


@main.command("train-alpha")
@click.option("--family", required=True,
              type=click.Choice(["cdr2d", "cd3d", "crd"]))
@click.option("--ng", required=True, help="comma-separated training sizes")
@click.option("--us", default="fp64", show_default=True,
              type=click.Choice(_PRECISIONS))
@click.option("--grid", default="-2,2,13", show_default=True,
              help="log10 lo, log10 hi, count for the alpha search grid")
@click.option("--outer-tol", default=1.0e-8, show_default=True, type=float)
@click.option("--inner-tol", default=1.0e-4, show_default=True, type=float)
@click.option("--outer-maxit", default=500, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
def train_alpha(family, ng, us, grid, outer_tol, inner_tol, outer_maxit, out):
    """Grid-search optimal alphas on small instances and fit the GPR model."""
    sizes = [int(v) for v in ng.split(",")]
    lo, hi, count = grid.split(",")
    candidates = np.logspace(float(lo), float(hi), int(count))
    feats, targets = [], []
    for n_g in sizes:
        problem = build_problem(family, n_g)
        cfg = GadiConfig(alpha=1.0, u_s=us, outer_tol=outer_tol,
                         inner_tol=inner_tol, outer_maxit=outer_maxit)
        best, _ = grid_search_alpha(problem, candidates, cfg)
        feats.append(make_features(n_g, us))
        targets.append(np.log(best))
        click.echo(f"n_g={n_g}: best alpha {best:.4g}")
    model = gpr_fit(np.array(feats), np.array(targets))
    model.save(out)
    click.echo(f"wrote model to {out}")


@main.command("predict-alpha")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--ng", required=True, type=int)
@click.option("--us", default="fp64", show_default=True,
              type=click.Choice(_PRECISIONS))
def predict_alpha_cmd(model_path, ng, us):
    """Predict a near-optimal alpha from a trained model."""
    model = GprModel.load(model_path)
    alpha = predict_alpha(model, make_features(ng, us, families=model.families))
    click.echo(f"{alpha:.6g}")


def _require(config: dict, key: str, path: str):
    if key not in config:
        raise click.ClickException(f"config {path}: missing field {key!r}")
    return config[key]


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("--out-dir", default=".", show_default=True, type=click.Path())
def bench(config_path, out_dir):
    """Run a configured experiment: one warm-up, timed repeats, JSONL trace
    and CSV summary."""
    raw = json.loads(Path(config_path).read_text())
    pspec = _require(raw, "problem", config_path)
    family = _require(pspec, "family", config_path)
    n_g = int(_require(pspec, "ng", config_path))
    problem = build_problem(family, n_g, pspec.get("r", 1.0),
                            pspec.get("s", 1.0e4), pspec.get("seed", 0),
                            pspec.get("laplacian_scaling", "nu_over_h2"))
    cfg = GadiConfig(
        alpha=float(_require(raw, "alpha", config_path)),
        omega=raw.get("omega", 1.0),
        u=raw.get("u", "fp64"), u_r=raw.get("ur", "fp64"),
        u_s=raw.get("us", "fp64"),
        outer_tol=raw.get("outer_tol", 1.0e-10),
        outer_maxit=raw.get("outer_maxit", 2000),
        inner_tol=raw.get("inner_tol", 1.0e-4),
        strict_model=raw.get("strict_model", True),
    )
    if "alpha_model" in raw:
        model = GprModel.load(raw["alpha_model"])
        alpha, _ = select_alpha(problem, model, AlphaSelectConfig(), cfg)
        cfg = dataclasses.replace(cfg, alpha=alpha)
    repeat = int(raw.get("repeat", 1))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    split = make_hss_splitting(problem.A, cfg.alpha, cfg.u_s)

    gadi_solve(problem, split, cfg)  # warm-up (not reported)
    summary = out / "summary.csv"
    new_file = not summary.exists()
    last = None
    with summary.open("a", newline="") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow([
                "schema_version", "problem", "n", "alpha", "omega", "u_s",
                "u", "u_r", "status", "outer_iterations", "inner_iterations",
                "final_relative_residual", "final_backward_error",
                "final_forward_error", "wall_time_s", "repeat_index"])
        for rep in range(repeat):
            t0 = time.perf_counter()
            last = gadi_solve(problem, split, cfg)
            wall = time.perf_counter() - t0
            h = last.history[-1]
            writer.writerow([
                SCHEMA_VERSION, problem.label, problem.n, cfg.alpha,
                cfg.omega, cfg.u_s.name, cfg.u.name, cfg.u_r.name,
                last.status, last.iterations, last.total_inner_iterations,
                h.relative_residual, h.backward_error, h.forward_error,
                wall, rep])
    trace = out / f"{problem.label}_ng{n_g}_{cfg.u_s.name}_trace.jsonl"
    with trace.open("w") as f:
        for rec in _history_records(last):
            f.write(json.dumps(rec) + "\n")
    click.echo(f"wrote {summary} and {trace}")
    raise SystemExit(0 if last.status == "Converged" else 1)


if __name__ == "__main__":
    main()
