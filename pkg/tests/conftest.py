"""Shared constructions for the test suite.

The graded/mixed families below are synthetic systems whose condition
number is dialed in exactly through a handful of distinct scales, so the
inner CG solvers see clustered spectra and converge in a few steps even
in low precision.
"""

import numpy as np
import scipy.sparse as sp

from gadimp import Problem, SparseMatrix


def graded_problem(n_pairs, kappa, levels=5, seed=7):
    """Block-diagonal 2x2 blocks [[d, 1], [-1, d]] with d on ``levels``
    log-spaced scales from 1 to kappa; kappa_2(A) ~= kappa."""
    ds = np.logspace(0.0, np.log10(kappa), levels)
    d = np.repeat(ds, int(np.ceil(n_pairs / levels)))[:n_pairs]
    blocks = [np.array([[dj, 1.0], [-1.0, dj]]) for dj in d]
    a = SparseMatrix.from_scipy(sp.block_diag(blocks, format="csr"))
    rng = np.random.default_rng(seed)
    xs = 1.0 + rng.uniform(-0.5, 0.5, a.nrows)
    return Problem(A=a, b=a.to_scipy() @ xs, exact_solution=xs,
                   label=f"graded(kappa={kappa:.0e})",
                   params={"kappa": kappa, "levels": levels})


def mixed_problem(n_blocks, kappa, levels=5, seed=7):
    """4x4 blocks I + Q^T K Q where K pairs the top rotation speed with a
    smaller one and Q is a random orthogonal factor.  The mixing couples
    the scales inside each row, so the forward error genuinely feels the
    normwise condition number (unlike graded_problem, whose blocks are
    componentwise well conditioned)."""
    nus = np.concatenate(
        [[0.0], np.logspace(0.0, np.log10(np.sqrt(kappa**2 - 1.0)),
                            levels - 1)])
    rng = np.random.default_rng(seed)
    blocks = []
    for j in range(n_blocks):
        k = np.zeros((4, 4))
        v1, v2 = nus[-1], nus[j % levels]
        k[0, 1], k[1, 0] = v1, -v1
        k[2, 3], k[3, 2] = v2, -v2
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        km = q.T @ k @ q
        km = 0.5 * (km - km.T)      # exactly skew after rounding
        blocks.append(np.eye(4) + km)
    a = SparseMatrix.from_scipy(sp.block_diag(blocks, format="csr"))
    xs = 1.0 + rng.uniform(-0.5, 0.5, a.nrows)
    return Problem(A=a, b=a.to_scipy() @ xs, exact_solution=xs,
                   label=f"mixed(kappa={kappa:.0e})",
                   params={"kappa": kappa, "levels": levels})


def random_spd(n, rng, lo=1.0, hi=4.0):
    """Dense SPD matrix with eigenvalues uniform in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(lo, hi, n)
    return q @ np.diag(lam) @ q.T


def random_skew(n, rng, scale=1.0):
    g = rng.standard_normal((n, n))
    return scale * 0.5 * (g - g.T)
