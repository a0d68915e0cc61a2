"""Splitting operators for the alternating-direction iteration.

A = M + N with M the symmetric and N the skew-symmetric part, and shifted
operators H = alpha*I + M, S = alpha*I + N.  Low-precision copies of H, S,
and alpha*I - N are precomputed once so the inner solvers work against the
stored (quantized) operators, matching an implementation that keeps these
matrices in low-precision memory.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonPositiveAlpha, NonSquare
from .precision import PrecisionFormat, resolve_format
from .sparsemat import (SparseMatrix, shift_diagonal, symm_skew_split,
                        transpose)

__all__ = ["Splitting", "make_hss_splitting"]


@dataclass(frozen=True)
class Splitting:
    M: SparseMatrix
    N: SparseMatrix
    H: SparseMatrix
    S: SparseMatrix
    alphaI_minus_N: SparseMatrix
    alpha: float
    u_s: PrecisionFormat
    # u_s-quantized copies used by the inner solvers
    H_low: SparseMatrix
    S_low: SparseMatrix
    S_low_T: SparseMatrix
    alphaI_minus_N_low: SparseMatrix


def make_hss_splitting(a: SparseMatrix, alpha: float, u_s="fp64") -> Splitting:
    """Build the symmetric/skew-symmetric splitting of A with shift alpha."""
    if not a.is_square:
        raise NonSquare("splitting needs a square matrix")
    if not alpha > 0:
        raise NonPositiveAlpha(f"alpha must be > 0, got {alpha}")
    u_s = resolve_format(u_s)
    m, n = symm_skew_split(a)
    h = shift_diagonal(m, alpha)
    s = shift_diagonal(n, alpha)
    ami_n = shift_diagonal(
        SparseMatrix.from_scipy(-n.to_scipy()), alpha)
    s_low = s.quantized(u_s)
    return Splitting(
        M=m, N=n, H=h, S=s, alphaI_minus_N=ami_n, alpha=float(alpha), u_s=u_s,
        H_low=h.quantized(u_s), S_low=s_low, S_low_T=transpose(s_low),
        alphaI_minus_N_low=ami_n.quantized(u_s),
    )
