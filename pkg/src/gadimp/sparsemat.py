"""Compressed-sparse-row matrices and the structural kernels on top of them.

A single CSR type over float64 values serves every precision: low-precision
matrices are stored as float64 values that are exact images of
``quantize(., fmt)`` (emulation by value, not by bit width).  Accumulation
order inside a row is ascending column index, so runs are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DimensionMismatch, NonSquare
from .precision import quantize, resolve_format, two_prod, two_sum

__all__ = [
    "SparseMatrix",
    "identity",
    "tridiag",
    "kron",
    "transpose",
    "symm_skew_split",
    "shift_diagonal",
    "spmv",
    "residual",
    "mm_read",
    "mm_write",
]

_KRON_SIZE_CAP = 2**62


class SparseMatrix:
    """Immutable CSR matrix: row_offsets, col_indices (sorted, unique per
    row), float64 values, no stored explicit zeros."""

    __slots__ = ("nrows", "ncols", "row_offsets", "col_indices", "values",
                 "_csr", "_segments")

    def __init__(self, row_offsets, col_indices, values, shape):
        self.nrows, self.ncols = int(shape[0]), int(shape[1])
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if self.row_offsets.shape != (self.nrows + 1,):
            raise ValueError("row_offsets must have length nrows + 1")
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != self.values.size:
            raise ValueError("row_offsets must start at 0 and end at nnz")
        if self.col_indices.size != self.values.size:
            raise ValueError("col_indices and values must have equal length")
        self._csr = None
        self._segments = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return cls(m.indptr, m.indices, m.data, m.shape)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        return cls.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=shape))

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.float64)))

    # -- views -------------------------------------------------------------

    def to_scipy(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.nrows, self.ncols),
            )
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    @property
    def nnz(self) -> int:
        return self.values.size

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def is_square(self) -> bool:
        return self.nrows == self.ncols

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    def quantized(self, fmt) -> "SparseMatrix":
        """Copy whose values are the quantized images in ``fmt``."""
        fmt = resolve_format(fmt)
        if fmt.significand_bits >= 53:
            return self
        return SparseMatrix(self.row_offsets, self.col_indices,
                            quantize(self.values, fmt),
                            (self.nrows, self.ncols))

    def _row_segments(self):
        """Per-position index arrays for vectorized left-to-right row sums.

        Level j selects all rows holding more than j entries, together with
        the CSR position of their (j+1)-th entry.
        """
        if self._segments is None:
            lens = np.diff(self.row_offsets)
            maxlen = int(lens.max()) if lens.size else 0
            segs = []
            for j in range(maxlen):
                rows = np.nonzero(lens > j)[0]
                segs.append((rows, self.row_offsets[rows] + j))
            self._segments = segs
        return self._segments

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def identity(n: int) -> SparseMatrix:
    return SparseMatrix.from_scipy(sp.identity(n, format="csr"))


def tridiag(n: int, lower: float, diag: float, upper: float) -> SparseMatrix:
    """n x n tridiagonal matrix with constant bands; zero constants are not
    stored."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = sp.diags([np.full(n - 1, lower), np.full(n, diag), np.full(n - 1, upper)],
                 offsets=[-1, 0, 1], shape=(n, n), format="csr")
    return SparseMatrix.from_scipy(m)


def transpose(a: SparseMatrix) -> SparseMatrix:
    return SparseMatrix.from_scipy(a.to_scipy().T.tocsr())


def kron(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    if a.nrows * b.nrows > _KRON_SIZE_CAP or a.ncols * b.ncols > _KRON_SIZE_CAP:
        raise ValueError("kron result dimension overflows the size guard")
    return SparseMatrix.from_scipy(sp.kron(a.to_scipy(), b.to_scipy(), format="csr"))


def symm_skew_split(a: SparseMatrix):
    """A = M + N with M = (A + A^T)/2 symmetric, N = (A - A^T)/2 skew."""
    if not a.is_square:
        raise NonSquare("symmetric/skew split needs a square matrix")
    c = a.to_scipy()
    ct = c.T.tocsr()
    m = SparseMatrix.from_scipy((c + ct) * 0.5)
    n = SparseMatrix.from_scipy((c - ct) * 0.5)
    return m, n


def shift_diagonal(a: SparseMatrix, alpha: float) -> SparseMatrix:
    """alpha*I + A, with diagonal entries materialized."""
    if not a.is_square:
        raise NonSquare("diagonal shift needs a square matrix")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    return SparseMatrix.from_scipy(a.to_scipy() + alpha * sp.identity(a.nrows))


# -- matrix-vector kernels -------------------------------------------------


def spmv(a: SparseMatrix, x: np.ndarray, fmt="fp64") -> np.ndarray:
    """y = A x with every multiply and add rounded in ``fmt``.

    Row sums accumulate left-to-right in ascending column order.  fp64 is
    native arithmetic; fp64x2 uses compensated row accumulation.
    """
    fmt = resolve_format(fmt)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.ncols,):
        raise DimensionMismatch(f"matrix is {a.shape}, vector has shape {x.shape}")
    if fmt.compensated:
        return _spmv_compensated(a, x)
    if fmt.significand_bits >= 53:
        return a.to_scipy() @ x
    prods = quantize(a.values * x[a.col_indices], fmt)
    y = np.zeros(a.nrows)
    for j, (rows, pos) in enumerate(a._row_segments()):
        if j == 0:
            y[rows] = prods[pos]
        else:
            y[rows] = quantize(y[rows] + prods[pos], fmt)
    return y


def _accumulate_compensated(a: SparseMatrix, x: np.ndarray, init: np.ndarray,
                            sign: float) -> np.ndarray:
    """init + sign * (A x) per row with error-free transformations."""
    prods, errs = two_prod(a.values, sign * x[a.col_indices])
    s = init.copy()
    c = np.zeros(a.nrows)
    for rows, pos in a._row_segments():
        s_r, e = two_sum(s[rows], prods[pos])
        s[rows] = s_r
        c[rows] += e + errs[pos]
    return s + c


def _spmv_compensated(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    return _accumulate_compensated(a, x, np.zeros(a.nrows), 1.0)


def residual(a: SparseMatrix, x: np.ndarray, b: np.ndarray, fmt="fp64") -> np.ndarray:
    """fl(b - A x) evaluated in ``fmt``.

    ``b`` and ``x`` are assumed representable in ``fmt``.  With fp64x2 the
    whole expression b_i - sum_j a_ij x_j is a single compensated sum rounded
    once on the final float64 store.
    """
    fmt = resolve_format(fmt)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (a.nrows,):
        raise DimensionMismatch("right-hand side has wrong length")
    if fmt.compensated:
        return _accumulate_compensated(a, np.asarray(x, dtype=np.float64), b, -1.0)
    if fmt.significand_bits >= 53:
        return b - a.to_scipy() @ np.asarray(x, dtype=np.float64)
    return quantize(b - spmv(a, x, fmt), fmt)


# -- Matrix Market interchange ----------------------------------------------


def mm_write(path, a: SparseMatrix) -> None:
    scipy.io.mmwrite(str(path), a.to_scipy())


def mm_read(path) -> SparseMatrix:
    return SparseMatrix.from_scipy(scipy.io.mmread(str(path)))
