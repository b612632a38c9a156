"""Shared covariance-matrix assembly for the limit recursion and the sampler.

Both the N→∞ predictor and the finite-N simulator condition the block of
(function value, directional derivatives) at a new point on the same block at
all previous points.  The only difference between them is where the point
coordinates come from — limiting representation vectors versus realized
previsible coordinates — so the matrix assembly lives here once and is fed
coordinate rows.

Coordinates are with respect to an orthonormal direction system v_0, …,
v_{D−1}: a point with coordinate row y has ⟨y, v_i⟩ = y[i], ⟨y, y'⟩ = y·y',
and ⟨v_i, v_j⟩ = δ_ij.  Matrix layout is row-major over derivative type then
point: the flattened vector reads (f at all points, D_{v_0} at all points, …,
D_{v_{D−1}} at all points).  All outputs are on the dimension-free scale; the
1/N covariance factor is applied by callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .gaussianops import DEFAULT_POLICY, condition


def coordinate_inner_products(reps):
    """Norm-halves s_k = ‖y_k‖²/2 and the Gram ⟨y_k, y_l⟩ of coordinate rows."""
    Y = np.atleast_2d(np.asarray(reps, dtype=float))
    ip = Y @ Y.T
    return 0.5 * np.diagonal(ip).copy(), ip


def cov_block(kernel, Y, s, ip, A, B):
    """Covariance between the (f, D_{v_0..D−1}) rows at points A and points B.

    Y holds coordinate rows for all points; s, ip their norm-halves and Gram.
    Returns shape ((D+1)·|A|, (D+1)·|B|) in the row-major layout.
    """
    A = np.asarray(A, dtype=int)
    B = np.asarray(B, dtype=int)
    D = Y.shape[1]
    na, nb = len(A), len(B)
    s_a = s[A][:, None]                       # (na, 1)
    s_b = s[B][None, :]                       # (1, nb)
    ip_ab = ip[np.ix_(A, B)]                  # (na, nb)

    T = np.empty((D + 1, na, D + 1, nb))
    T[0, :, 0, :] = kernel.cov_ff(s_a, s_b, ip_ab)

    if D > 0:
        Ya = Y[A]                             # (na, D)
        Yb = Y[B]                             # (nb, D)
        # D_{v_i} at a against f at b: (i, a, b)
        T[1:, :, 0, :] = kernel.cov_df_f(
            s_a[None], s_b[None], ip_ab[None],
            Ya.T[:, :, None], Yb.T[:, None, :])
        # f at a against D_{v_j} at b: differentiate at b — (j, b, a) transposed
        f_df = kernel.cov_df_f(
            s_b.T[None], s_a.T[None], ip_ab.T[None],
            Yb.T[:, :, None], Ya.T[:, None, :])
        T[0, :, 1:, :] = np.moveaxis(f_df, [0, 1, 2], [1, 2, 0])
        # D_{v_i} at a against D_{v_j} at b: axes (i, a, j, b)
        eye = np.eye(D)[:, None, :, None]
        T[1:, :, 1:, :] = kernel.cov_df_df(
            s_a[None, :, None, :], s_b[None, :, None, :], ip_ab[None, :, None, :],
            Ya.T[:, :, None, None], Yb.T[:, None, None, :],
            Ya[None, :, :, None], Yb.T[None, None, :, :],
            eye)
    return T.reshape((D + 1) * na, (D + 1) * nb)


def mean_block(kernel, Y, s, A):
    """Mean of the flattened (f, D_{v_i}) rows at points A."""
    A = np.asarray(A, dtype=int)
    D = Y.shape[1]
    m = np.empty((D + 1, len(A)))
    m[0] = kernel.mean(s[A])
    if D > 0:
        m[1:] = kernel.mean_prime(s[A])[None, :] * Y[A].T
    return m.ravel()


@dataclass
class AssembledStep:
    """Blocks for conditioning the new point's rows on the history rows."""

    mean_hist: np.ndarray
    mean_new: np.ndarray
    S_hh: np.ndarray
    S_hn: np.ndarray
    S_nn: np.ndarray


def joint_blocks(kernel, reps, new_rep) -> AssembledStep:
    """Assemble history/new covariance blocks from coordinate rows.

    reps: (n, D) rows of the n history points; new_rep: (D,) row of the new
    point.  Domain validity of every pairwise configuration is checked once.
    """
    reps = np.atleast_2d(np.asarray(reps, dtype=float))
    new_rep = np.asarray(new_rep, dtype=float)
    n, D = reps.shape
    Y = np.vstack([reps, new_rep[None, :]])
    s, ip = coordinate_inner_products(Y)
    kernels.check_domain(s[:, None], s[None, :], ip)
    hist = np.arange(n)
    new = np.array([n])
    return AssembledStep(
        mean_hist=mean_block(kernel, Y, s, hist),
        mean_new=mean_block(kernel, Y, s, new),
        S_hh=cov_block(kernel, Y, s, ip, hist, hist),
        S_hn=cov_block(kernel, Y, s, ip, hist, new),
        S_nn=cov_block(kernel, Y, s, ip, new, new),
    )


def flatten_history(values, coord_rows):
    """Lay out observed (f values, derivative coordinates) row-major.

    values: length-n f values; coord_rows: (n, D) derivative coordinates
    (structural zeros included).  Order matches cov_block/mean_block.
    """
    coord_rows = np.atleast_2d(np.asarray(coord_rows, dtype=float))
    return np.concatenate([np.asarray(values, dtype=float), coord_rows.T.ravel()])


def split_new_block(vec, D):
    """Inverse layout for a single point: (f, derivative coordinates)."""
    vec = np.asarray(vec, dtype=float)
    return float(vec[0]), vec[1:1 + D]


def k3_matrix(kernel, reps):
    """Matrix of κ₃(s_k, s_l, ⟨y_k, y_l⟩) over all point pairs."""
    reps = np.atleast_2d(np.asarray(reps, dtype=float))
    s, ip = coordinate_inner_products(reps)
    kernels.check_domain(s[:, None], s[None, :], ip)
    return kernel.k3(s[:, None], s[None, :], ip)


def residual_variance(kernel, reps, policy=DEFAULT_POLICY):
    """Variance of the new point's gradient component outside the visited span.

    reps: (n+1, D) coordinate rows with the newest point last.  Returns
    κ₃(new, new) minus the quadratic form of the history κ₃ block — the
    Schur complement of the newest entry in the κ₃ matrix.
    """
    W = k3_matrix(kernel, reps)
    n = W.shape[0] - 1
    if n == 0:
        return float(W[0, 0])
    res = condition(mu1=np.zeros(n), mu2=np.zeros(1),
                    S11=W[:n, :n], S12=W[:n, n:], S22=W[n:, n:],
                    observed=np.zeros(n), policy=policy)
    return float(res.cond_cov[0, 0])
