"""Generators for the benchmark linear systems.

All three families use a manufactured all-ones solution, b = A @ 1, so the
forward error of a computed iterate is always measurable.  Generators are
deterministic: the random potential of the complex reaction-diffusion
problem comes from the counter-based Philox generator keyed by ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .sparsemat import SparseMatrix, identity, kron, tridiag

__all__ = ["Problem", "build_cdr_2d", "build_cd_3d", "build_complex_rd"]

_SIZE_CAP = 2**62


@dataclass
class Problem:
    """A linear system A x = b with provenance metadata."""

    A: SparseMatrix
    b: np.ndarray
    exact_solution: np.ndarray | None
    label: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.b.shape != (self.A.nrows,) or not self.A.is_square:
            raise ValueError("b must match a square A")

    @property
    def n(self) -> int:
        return self.A.nrows


def _manufactured(a: SparseMatrix, label: str, params: dict) -> Problem:
    ones = np.ones(a.nrows)
    return Problem(A=a, b=a.to_scipy() @ ones, exact_solution=ones,
                   label=label, params=params)


def build_cdr_2d(n_g: int, r: float = 1.0) -> Problem:
    """2D convection-diffusion-reaction system on an n_g x n_g grid.

    T = Tridiag(-1,2,-1) + 2r*Tridiag(0.5,0,-0.5) + 100/(n_g+1)^2 * I,
    A = I (x) T + T (x) I, dimension n = n_g**2.
    """
    if n_g < 2:
        raise ValueError("n_g must be >= 2")
    react = 100.0 / (n_g + 1) ** 2
    t = SparseMatrix.from_scipy(
        tridiag(n_g, -1.0, 2.0, -1.0).to_scipy()
        + 2.0 * r * tridiag(n_g, 0.5, 0.0, -0.5).to_scipy()
        + react * sp.identity(n_g)
    )
    eye = identity(n_g)
    a = SparseMatrix.from_scipy(
        kron(eye, t).to_scipy() + kron(t, eye).to_scipy()
    )
    return _manufactured(a, "cdr2d", {"n_g": n_g, "r": r})


def build_cd_3d(n_g: int) -> Problem:
    """3D convection-diffusion system, n = n_g**3.

    With r = 1/(2 n_g + 2): T_x = Tridiag(-1-r, 6, -1+r),
    T_y = T_z = Tridiag(-1-r, 0, -1+r),
    A = T_x (x) I (x) I + I (x) T_y (x) I + I (x) I (x) T_z.

    The whole diagonal of the seven-point Laplacian (6/h^2, after scaling
    by h^2) is carried by T_x; with a diagonal of 2 instead, A would be
    indefinite and no shift alpha could make the iteration converge.
    """
    if n_g < 2:
        raise ValueError("n_g must be >= 2")
    if n_g**3 > _SIZE_CAP:
        raise ValueError("n_g**3 exceeds the size guard")
    r = 1.0 / (2 * n_g + 2)
    tx = tridiag(n_g, -1.0 - r, 6.0, -1.0 + r)
    tyz = tridiag(n_g, -1.0 - r, 0.0, -1.0 + r)
    eye = identity(n_g)
    a = SparseMatrix.from_scipy(
        kron(kron(tx, eye), eye).to_scipy()
        + kron(kron(eye, tyz), eye).to_scipy()
        + kron(kron(eye, eye), tyz).to_scipy()
    )
    return _manufactured(a, "cd3d", {"n_g": n_g, "r": r})


def build_complex_rd(n_g: int, s: float = 1.0e4, seed: int = 0,
                     laplacian_scaling: str = "nu_over_h2") -> Problem:
    """Complex reaction-diffusion system in real block form, n = 2 n_g**2.

    L is the five-point Laplacian scaled by nu = 1e-5 * (64/n_g)^2 (and by
    1/h^2 unless ``laplacian_scaling`` is "nu"), V = s * diag(xi) with
    xi ~ Uniform[0,1] from Philox(seed), and A = [[L, -V], [V, L]].
    """
    if n_g < 2:
        raise ValueError("n_g must be >= 2")
    if laplacian_scaling not in ("nu_over_h2", "nu"):
        raise ValueError("laplacian_scaling must be 'nu_over_h2' or 'nu'")
    nu = 1.0e-5 * (64.0 / n_g) ** 2
    h = 1.0 / (n_g + 1)
    scale = nu / h**2 if laplacian_scaling == "nu_over_h2" else nu
    t = tridiag(n_g, -1.0, 2.0, -1.0)
    eye = identity(n_g)
    lap = scale * (kron(eye, t).to_scipy() + kron(t, eye).to_scipy())
    xi = np.random.Generator(np.random.Philox(key=seed)).uniform(size=n_g**2)
    v = sp.diags(s * xi)
    a = SparseMatrix.from_scipy(sp.bmat([[lap, -v], [v, lap]], format="csr"))
    return _manufactured(a, "crd", {
        "n_g": n_g, "s": s, "seed": seed, "nu": nu,
        "laplacian_scaling": laplacian_scaling,
    })
