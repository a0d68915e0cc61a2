"""Error metrics, dense oracles, and evaluation of the convergence-rate and
limiting-accuracy bound formulas.

Dense computations are gated by a size cap (default 2048).  The 2-norm of a
sparse matrix is estimated by power iteration on A^T A with a fixed seed so
backward errors are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (DenseCapExceeded, SingularMatrix, ZeroError,
                     ZeroReference)
from .precision import resolve_format
from .sparsemat import SparseMatrix

__all__ = [
    "DENSE_CAP",
    "forward_error",
    "backward_error",
    "mu_k",
    "matrix_norm_2",
    "spectral_radius",
    "condition_estimate",
    "DenseIterationOperator",
    "dense_iteration_operator",
    "lambda_sequence",
    "TheoryBounds",
    "theory_bounds",
]

DENSE_CAP = 2048
_POWER_TOL = 1.0e-6
_POWER_MAXIT = 1000
_POWER_SEED = 12345


def forward_error(xhat: np.ndarray, x: np.ndarray) -> float:
    """||xhat - x|| / ||x|| in the 2-norm."""
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ZeroReference("reference solution has zero norm")
    return float(np.linalg.norm(np.asarray(xhat) - np.asarray(x))) / nx


def matrix_norm_2(a: SparseMatrix, tol: float = _POWER_TOL,
                  maxit: int = _POWER_MAXIT) -> float:
    """2-norm estimate by power iteration on A^T A (fixed seed)."""
    rng = np.random.default_rng(_POWER_SEED)
    c = a.to_scipy()
    ct = c.T.tocsr()
    v = rng.standard_normal(a.ncols)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(maxit):
        w = ct @ (c @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        sigma_new = np.sqrt(nw)
        v = w / nw
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return float(sigma_new)
        sigma = sigma_new
    return float(sigma)


def backward_error(a: SparseMatrix, b: np.ndarray, xhat: np.ndarray,
                   norm_a: float | None = None) -> float:
    """Normwise backward error ||b - A xhat|| / (||A|| ||xhat|| + ||b||)."""
    b = np.asarray(b, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if norm_a is None:
        norm_a = matrix_norm_2(a)
    nb = float(np.linalg.norm(b))
    denom = norm_a * float(np.linalg.norm(xhat)) + nb
    if denom == 0.0:
        raise ZeroReference("both A and b have zero norm")
    return float(np.linalg.norm(b - a.to_scipy() @ xhat)) / denom


def mu_k(a: SparseMatrix, b: np.ndarray, xhat: np.ndarray, x: np.ndarray,
         norm_a: float | None = None) -> float:
    """mu = ||A (x - xhat)|| / (||A|| ||x - xhat||), in [kappa(A)^-1, 1]."""
    e = np.asarray(x, dtype=np.float64) - np.asarray(xhat, dtype=np.float64)
    ne = float(np.linalg.norm(e))
    if ne == 0.0:
        raise ZeroError("xhat equals x; mu is undefined")
    if norm_a is None:
        norm_a = matrix_norm_2(a)
    return float(np.linalg.norm(a.to_scipy() @ e)) / (norm_a * ne)


def spectral_radius(t: np.ndarray) -> float:
    t = np.asarray(t)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    return float(np.max(np.abs(np.linalg.eigvals(t))))


def condition_estimate(a: SparseMatrix, dense_cap: int = DENSE_CAP) -> float:
    """2-norm condition number: dense SVD below the cap, otherwise power
    iteration on A^T A combined with inverse iteration through a sparse LU."""
    if a.nrows <= dense_cap:
        s = np.linalg.svd(a.to_dense(), compute_uv=False)
        if s[-1] == 0.0:
            raise SingularMatrix("zero singular value")
        return float(s[0] / s[-1])
    norm_a = matrix_norm_2(a)
    try:
        lu = spla.splu(a.to_scipy().tocsc())
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(a.nrows)
    v /= np.linalg.norm(v)
    sigma_inv = 0.0
    for _ in range(_POWER_MAXIT):
        w = lu.solve(lu.solve(v, trans="N"), trans="T")
        nw = np.linalg.norm(w)
        if not np.isfinite(nw):
            raise SingularMatrix("inverse iteration diverged")
        sigma_new = np.sqrt(nw)
        v = w / nw
        if abs(sigma_new - sigma_inv) <= _POWER_TOL * sigma_new:
            sigma_inv = sigma_new
            break
        sigma_inv = sigma_new
    return float(norm_a * sigma_inv)


@dataclass
class DenseIterationOperator:
    """Dense forward/backward iteration operators of the two-step scheme."""

    T_F: np.ndarray
    T_B: np.ndarray
    G: np.ndarray | None
    c_F: float
    c_B: float
    rho: float


def dense_iteration_operator(a: SparseMatrix, m: SparseMatrix, n: SparseMatrix,
                             alpha: float, omega: float,
                             b: np.ndarray | None = None,
                             dense_cap: int = DENSE_CAP) -> DenseIterationOperator:
    """Form T_F = (aI+N)^-1 (aI+M)^-1 (a^2 I + MN - (1-w) a A), its
    similarity transform T_B = A T_F A^-1, and (optionally) the affine part
    G = (2-w) a (HS)^-1 b, by dense solves."""
    if a.nrows > dense_cap:
        raise DenseCapExceeded(f"n={a.nrows} exceeds dense cap {dense_cap}")
    ad = a.to_dense()
    md = m.to_dense()
    nd = n.to_dense()
    eye = np.eye(a.nrows)
    h = alpha * eye + md
    s = alpha * eye + nd
    core = alpha**2 * eye + md @ nd - (1.0 - omega) * alpha * ad
    t_f = np.linalg.solve(s, np.linalg.solve(h, core))
    t_b = ad @ np.linalg.solve(ad.T, t_f.T).T  # A T_F A^-1
    g = None
    if b is not None:
        g = (2.0 - omega) * alpha * np.linalg.solve(s, np.linalg.solve(h, b))
    c_f = float(np.linalg.norm(eye - t_f, 2))
    c_b = float(np.linalg.norm(eye - t_b, 2))
    return DenseIterationOperator(T_F=t_f, T_B=t_b, G=g, c_F=c_f, c_B=c_b,
                                  rho=spectral_radius(t_f))


def lambda_sequence(op: DenseIterationOperator,
                    error_vectors: Sequence[np.ndarray],
                    which: str = "F") -> np.ndarray:
    """Per-iteration contraction ratios ||T e_k|| / ||e_k||.

    ``which`` selects T_F applied to forward-error vectors or T_B applied to
    residual vectors.
    """
    if which not in ("F", "B"):
        raise ValueError("which must be 'F' or 'B'")
    t = op.T_F if which == "F" else op.T_B
    out = np.empty(len(error_vectors))
    for k, e in enumerate(error_vectors):
        ne = np.linalg.norm(e)
        if ne == 0.0:
            raise ZeroError(f"error vector {k} is zero")
        out[k] = np.linalg.norm(t @ e) / ne
    return out


def _default_c_of_n(n: int) -> float:
    return float(np.sqrt(n))


@dataclass
class TheoryBounds:
    """Evaluated convergence-rate and limiting-accuracy bound expressions."""

    beta_F: float
    zeta_F: float
    beta_B: float
    zeta_B: float
    beta_F_simple: float
    zeta_F_simple: float
    beta_B_simple: float
    zeta_B_simple: float
    inputs: dict


def theory_bounds(n: int, kappa_A: float, kappa_H: float, kappa_S: float,
                  kappa_HS: float, mu: float, u, u_r, u_s,
                  c_F: float, c_B: float,
                  lambda_F: float, lambda_B: float,
                  c_of_n: Callable[[int], float] = _default_c_of_n) -> TheoryBounds:
    """Evaluate the rate/accuracy bound formulas with a configurable c(n).

    ``u``, ``u_r``, ``u_s`` may be precision formats, names, or plain unit
    roundoffs.  The default c(n) = sqrt(n) is a calibration choice; worst-case
    constants are pessimistic, so the bounds are meant for ratio checks.
    """
    def as_u(v):
        if isinstance(v, (int, float)):
            return float(v)
        return resolve_format(v).unit_roundoff

    u, u_r, u_s = as_u(u), as_u(u_r), as_u(u_s)
    c = c_of_n(n)
    min_f = min(kappa_HS * kappa_H, kappa_A * (kappa_H + kappa_S),
                kappa_H * kappa_S)
    min_b = min(kappa_HS * kappa_S, kappa_A * (kappa_H + kappa_S),
                kappa_H * kappa_S)
    beta_f = (lambda_F + c * c_F * min_f * u_s + c * c_F * mu * kappa_A * u_s
              + c * c_F * kappa_A * u_r + c * c_F * u)
    zeta_f = c * (u + c_F * kappa_A * u_r)
    beta_b = lambda_B + c * c_B * min_b * u_s + c * c_B * kappa_A * u
    zeta_b = c * (u + c_B * u_r)
    return TheoryBounds(
        beta_F=beta_f, zeta_F=zeta_f, beta_B=beta_b, zeta_B=zeta_b,
        beta_F_simple=lambda_F + c * kappa_H * kappa_S * u_s,
        zeta_F_simple=c * (u + kappa_A * u_r),
        beta_B_simple=lambda_B + c * kappa_H * kappa_S * u_s,
        zeta_B_simple=c * u,
        inputs={
            "n": n, "kappa_A": kappa_A, "kappa_H": kappa_H,
            "kappa_S": kappa_S, "kappa_HS": kappa_HS, "mu": mu,
            "u": u, "u_r": u_r, "u_s": u_s, "c_F": c_F, "c_B": c_B,
            "lambda_F": lambda_F, "lambda_B": lambda_B,
        },
    )
