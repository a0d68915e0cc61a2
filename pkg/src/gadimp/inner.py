"""Low-precision inner solvers for the two shifted subsystems.

Plain conjugate gradients for the symmetric positive definite H-system and
CG on the normal equations (two SpMVs per iteration, one with S and one with
S^T) for the shifted skew-symmetric S-system.  Every SpMV, dot, axpy, and
scalar update is executed through the round-after-op emulation in the
requested format.  Stopping uses the recurrence residual; the true residual
is recomputed once at exit for the stats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .precision import FORMATS, fl_dot, fl_op, quantize, resolve_format
from .sparsemat import SparseMatrix, spmv, transpose

__all__ = ["InnerSolveStats", "cg_spd", "cg_normal_skew", "default_maxit"]

_MAXIT_CAP = 10_000


def default_maxit(n: int) -> int:
    return min(_MAXIT_CAP, max(1, math.ceil(5.0 * math.sqrt(n))))


@dataclass
class InnerSolveStats:
    iterations: int
    final_relative_residual: float
    converged: bool
    breakdown: bool
    true_relative_residual: float = float("nan")


def _dot_format(fmt, strict_model: bool):
    # Optional relaxation: accumulate dots one precision tier up when the
    # solve format is below fp32 (mimics hardware with wide accumulators).
    if not strict_model and fmt.unit_roundoff > FORMATS["fp32"].unit_roundoff:
        return FORMATS["fp32"]
    return fmt


def cg_spd(h: SparseMatrix, rhs: np.ndarray, tol: float, maxit: int | None = None,
           fmt="fp64", strict_model: bool = True):
    """CG on H x = rhs with H symmetric positive definite, zero initial guess."""
    fmt = resolve_format(fmt)
    dfmt = _dot_format(fmt, strict_model)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    if maxit is None:
        maxit = default_maxit(n)
    nrhs = float(np.linalg.norm(rhs))
    x = np.zeros(n)
    if nrhs == 0.0:
        return x, InnerSolveStats(0, 0.0, True, False, 0.0)

    r = rhs.copy()
    p = r.copy()
    rs = fl_dot(r, r, dfmt)
    relres = 1.0
    converged = breakdown = False
    it = 0
    while it < maxit:
        hp = spmv(h, p, fmt)
        php = fl_dot(p, hp, dfmt)
        if php <= 0.0:
            breakdown = True
            break
        alpha = fl_op("div", rs, php, fmt)
        x = quantize(x + quantize(alpha * p, fmt), fmt)
        r = quantize(r - quantize(alpha * hp, fmt), fmt)
        rs_new = fl_dot(r, r, dfmt)
        it += 1
        relres = math.sqrt(max(rs_new, 0.0)) / nrhs
        if relres <= tol:
            converged = True
            break
        if rs_new <= 0.0:
            break  # fully stagnated at working precision
        beta = fl_op("div", rs_new, rs, fmt)
        p = quantize(r + quantize(beta * p, fmt), fmt)
        rs = rs_new

    true_rel = float(np.linalg.norm(rhs - h.to_scipy() @ x)) / nrhs
    return x, InnerSolveStats(it, relres, converged, breakdown, true_rel)


def cg_normal_skew(s: SparseMatrix, rhs: np.ndarray, tol: float,
                   maxit: int | None = None, fmt="fp64",
                   strict_model: bool = True, s_transpose: SparseMatrix | None = None):
    """CG on the normal equations S^T S y = S^T rhs, without forming S^T S.

    Stopping rule is on the original system residual ||rhs - S y|| / ||rhs||,
    maintained by recurrence.
    """
    fmt = resolve_format(fmt)
    dfmt = _dot_format(fmt, strict_model)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    if maxit is None:
        maxit = default_maxit(n)
    if s_transpose is None:
        s_transpose = transpose(s)
    nrhs = float(np.linalg.norm(rhs))
    y = np.zeros(n)
    if nrhs == 0.0:
        return y, InnerSolveStats(0, 0.0, True, False, 0.0)

    r = rhs.copy()               # residual of S y = rhs
    rbar = spmv(s_transpose, r, fmt)  # normal-equations residual
    p = rbar.copy()
    rs = fl_dot(rbar, rbar, dfmt)
    relres = 1.0
    converged = breakdown = False
    it = 0
    while it < maxit:
        w = spmv(s, p, fmt)
        denom = fl_dot(w, w, dfmt)
        if denom <= 0.0:
            breakdown = True
            break
        alpha = fl_op("div", rs, denom, fmt)
        y = quantize(y + quantize(alpha * p, fmt), fmt)
        r = quantize(r - quantize(alpha * w, fmt), fmt)
        it += 1
        relres = float(np.linalg.norm(r)) / nrhs
        if relres <= tol:
            converged = True
            break
        rbar = spmv(s_transpose, r, fmt)
        rs_new = fl_dot(rbar, rbar, dfmt)
        if rs_new <= 0.0:
            break
        beta = fl_op("div", rs_new, rs, fmt)
        p = quantize(rbar + quantize(beta * p, fmt), fmt)
        rs = rs_new

    true_rel = float(np.linalg.norm(rhs - s.to_scipy() @ y)) / nrhs
    return y, InnerSolveStats(it, relres, converged, breakdown, true_rel)
