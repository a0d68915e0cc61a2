"""The three-precision outer iteration.

Each outer step computes the residual r = b - A x in precision u_r, casts it
once to u_s, solves the two shifted subsystems in u_s, and applies the
update x <- x + y in working precision u.  Stopping decisions are made on a
monitoring residual that is always evaluated in plain float64 so runs with
different precision sets are comparable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import backward_error, forward_error, matrix_norm_2, mu_k
from .errors import ZeroError
from .inner import cg_normal_skew, cg_spd
from .precision import PrecisionFormat, quantize, resolve_format
from .problems import Problem
from .splitting import Splitting, make_hss_splitting
from .sparsemat import residual as fl_residual

__all__ = ["GadiConfig", "IterationRecord", "SolveReport", "gadi_solve",
           "stagnation_check"]

_DIVERGENCE_FACTOR = 1.0e3


@dataclass
class GadiConfig:
    alpha: float
    omega: float = 1.0
    u: PrecisionFormat | str = "fp64"
    u_r: PrecisionFormat | str = "fp64"
    u_s: PrecisionFormat | str = "fp64"
    outer_tol: float = 1.0e-10
    outer_maxit: int = 2000
    inner_tol: float = 1.0e-4
    inner_maxit: int | None = None
    stagnation_window: int = 10
    stagnation_factor: float = 0.99
    strict_model: bool = True

    def __post_init__(self):
        self.u = resolve_format(self.u)
        self.u_r = resolve_format(self.u_r)
        self.u_s = resolve_format(self.u_s)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.omega < 2.0:
            raise ValueError(f"omega must lie in [0, 2), got {self.omega}")
        if not (self.u_r.unit_roundoff <= self.u.unit_roundoff
                <= self.u_s.unit_roundoff):
            raise ValueError(
                "precisions must satisfy u_r <= u <= u_s (by unit roundoff), "
                f"got u_r={self.u_r}, u={self.u}, u_s={self.u_s}")


@dataclass
class IterationRecord:
    k: int
    residual_norm: float          # algorithmic residual, precision u_r
    relative_residual: float      # fp64 monitoring residual / ||r0||
    backward_error: float
    forward_error: float | None
    mu: float | None
    inner_h_iterations: int
    inner_s_iterations: int
    inner_breakdown: bool


@dataclass
class SolveReport:
    x: np.ndarray
    status: str                   # Converged | Stagnated | MaxIt | Diverged
    history: list[IterationRecord] = field(default_factory=list)
    wallclock: dict = field(default_factory=dict)
    norm_A: float = float("nan")
    iterates: list | None = None   # populated when keep_iterates is set

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def total_inner_iterations(self) -> int:
        return sum(r.inner_h_iterations + r.inner_s_iterations
                   for r in self.history)

    @property
    def final_relative_residual(self) -> float:
        return self.history[-1].relative_residual if self.history else 1.0

    @property
    def relative_residuals(self) -> np.ndarray:
        return np.array([r.relative_residual for r in self.history])


def stagnation_check(residual_history, window: int = 10,
                     factor: float = 0.99) -> bool:
    """True iff the best residual of the last ``window`` entries failed to
    improve on the best before the window by at least ``factor``."""
    if window < 2:
        raise ValueError("window must be >= 2")
    hist = list(residual_history)
    if len(hist) <= window:
        return False
    best_recent = min(hist[-window:])
    best_before = min(hist[:-window])
    return best_recent > factor * best_before


def gadi_solve(problem: Problem, splitting: Splitting | None = None,
               cfg: GadiConfig | None = None,
               keep_iterates: bool = False) -> SolveReport:
    """Run the three-precision outer iteration from x = 0."""
    if cfg is None:
        raise ValueError("cfg is required")
    if splitting is None:
        splitting = make_hss_splitting(problem.A, cfg.alpha, cfg.u_s)
    if abs(splitting.alpha - cfg.alpha) > 1e-15 * max(1.0, cfg.alpha):
        raise ValueError("splitting was built with a different alpha")

    a = problem.A
    b = np.asarray(problem.b, dtype=np.float64)
    a_res = a.quantized(cfg.u_r)       # operands of the u_r residual
    b_res = quantize(b, cfg.u_r)
    exact = problem.exact_solution
    norm_a = matrix_norm_2(a)
    r0_norm = float(np.linalg.norm(b))  # x0 = 0
    if r0_norm == 0.0:
        raise ZeroError("right-hand side is zero")
    coeff = quantize((2.0 - cfg.omega) * cfg.alpha, cfg.u_s)

    x = np.zeros(a.nrows)
    history: list[IterationRecord] = []
    iterates: list[np.ndarray] = []
    relres_hist: list[float] = []
    status = "MaxIt"
    timers = {"residual": 0.0, "inner_h": 0.0, "inner_s": 0.0,
              "update": 0.0, "monitor": 0.0}

    for k in range(cfg.outer_maxit):
        t0 = time.perf_counter()
        r = fl_residual(a_res, x, b_res, cfg.u_r)
        # Exact power-of-two scaling keeps the low-precision inner solves
        # away from the subnormal/overflow edges of u_s once the residual
        # has shrunk (or if b is badly scaled).  Undone after the S-solve.
        rmax = float(np.max(np.abs(r)))
        scale = 2.0 ** -np.ceil(np.log2(rmax)) if rmax > 0.0 else 1.0
        r_s = quantize(scale * r, cfg.u_s)  # one cast u_r -> u_s
        t1 = time.perf_counter()
        z, st_h = cg_spd(splitting.H_low, r_s, cfg.inner_tol, cfg.inner_maxit,
                         cfg.u_s, cfg.strict_model)
        t2 = time.perf_counter()
        rhs2 = quantize(coeff * z, cfg.u_s)
        y, st_s = cg_normal_skew(splitting.S_low, rhs2, cfg.inner_tol,
                                 cfg.inner_maxit, cfg.u_s, cfg.strict_model,
                                 splitting.S_low_T)
        t3 = time.perf_counter()
        x = quantize(x + y / scale, cfg.u)
        t4 = time.perf_counter()

        r_mon = b - a.to_scipy() @ x    # fp64 monitoring residual
        relres = float(np.linalg.norm(r_mon)) / r0_norm
        berr = float(np.linalg.norm(r_mon)) / (
            norm_a * float(np.linalg.norm(x)) + r0_norm)
        ferr = mu = None
        if exact is not None:
            e = exact - x
            ne = float(np.linalg.norm(e))
            if ne > 0.0:
                ferr = ne / float(np.linalg.norm(exact))
                mu = float(np.linalg.norm(a.to_scipy() @ e)) / (norm_a * ne)
        t5 = time.perf_counter()

        timers["residual"] += t1 - t0
        timers["inner_h"] += t2 - t1
        timers["inner_s"] += t3 - t2
        timers["update"] += t4 - t3
        timers["monitor"] += t5 - t4

        history.append(IterationRecord(
            k=k, residual_norm=float(np.linalg.norm(r)),
            relative_residual=relres, backward_error=berr,
            forward_error=ferr, mu=mu,
            inner_h_iterations=st_h.iterations,
            inner_s_iterations=st_s.iterations,
            inner_breakdown=st_h.breakdown or st_s.breakdown,
        ))
        if keep_iterates:
            iterates.append(x.copy())
        relres_hist.append(relres)

        if relres <= cfg.outer_tol:
            status = "Converged"
            break
        if relres > _DIVERGENCE_FACTOR:
            status = "Diverged"
            break
        if stagnation_check(relres_hist, cfg.stagnation_window,
                            cfg.stagnation_factor):
            status = "Stagnated"
            break

    return SolveReport(x=x, status=status, history=history, wallclock=timers,
                       norm_A=norm_a, iterates=iterates if keep_iterates else None)
