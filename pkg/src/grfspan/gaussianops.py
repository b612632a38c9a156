"""Conditional Gaussian linear algebra and sampling primitives.

Everything the limit recursion and the finite-N sampler share: conditioning a
Gaussian block on observed blocks, Cholesky factorization with a jitter
escalation ladder, multivariate-normal and chi-square draws, and reproducible
per-trajectory random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPsdError


@dataclass(frozen=True)
class ConditionPolicy:
    """How to factorize/solve the observed-block covariance S11.

    ``jitter_start``/``jitter_max`` define the escalation ladder
    {0, start, 10·start, …, max}; ``jitter_start=None`` disables jitter (the
    ladder is just {0}).  When the ladder is exhausted: raise unless
    ``pseudo_fallback`` is set, in which case solves go through an
    eigenvalue-thresholded pseudo-inverse (threshold 1e−10·‖S11‖) and the
    result is flagged ``rank_deficient``.
    """

    jitter_start: float | None = 1e-12
    jitter_max: float = 1e-8
    pseudo_fallback: bool = False

    def ladder(self):
        yield 0.0
        if self.jitter_start is None:
            return
        j = self.jitter_start
        while j <= self.jitter_max * (1 + 1e-12):
            yield j
            j *= 10.0


DEFAULT_POLICY = ConditionPolicy()


@dataclass
class ConditioningResult:
    """Conditional law N(cond_mean, cond_cov) of the new block given observed.

    ``log_jitter_used`` is log10 of the diagonal jitter that made S11
    factorizable: −inf if none was needed, +inf if escalation failed and the
    pseudo-inverse path was taken.
    """

    cond_mean: np.ndarray
    cond_cov: np.ndarray
    log_jitter_used: float
    rank_deficient: bool


def cholesky_psd(A, policy: ConditionPolicy = DEFAULT_POLICY):
    """Lower-triangular L with LLᵀ = A + jI for the smallest ladder jitter j.

    Returns (L, j).  Raises NotPsdError when every ladder entry fails.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    for j in policy.ladder():
        try:
            L = np.linalg.cholesky(A if j == 0.0 else A + j * np.eye(n))
            return L, j
        except np.linalg.LinAlgError:
            continue
    raise NotPsdError(
        f"matrix of size {n} not positive definite within jitter ladder "
        f"(start={policy.jitter_start}, max={policy.jitter_max})")


def _pseudo_solve(S11, B):
    """Solve S11·X = B through an eigenvalue-thresholded pseudo-inverse."""
    w, V = np.linalg.eigh(S11)
    threshold = 1e-10 * float(np.max(np.abs(w))) if w.size else 0.0
    inv_w = np.where(w > threshold, 1.0 / np.where(w > threshold, w, 1.0), 0.0)
    return V @ (inv_w[:, None] * (V.T @ B))


def condition(mu1, mu2, S11, S12, S22, observed,
              policy: ConditionPolicy = DEFAULT_POLICY) -> ConditioningResult:
    """Condition the block with mean mu2 on the observed block with mean mu1.

    cond_mean = mu2 + S12ᵀ·S11⁻¹·(observed − mu1)
    cond_cov  = S22 − S12ᵀ·S11⁻¹·S12

    The solve uses Cholesky with the policy's jitter ladder; on exhaustion it
    either raises NotPsdError or (with ``pseudo_fallback``) switches to the
    thresholded pseudo-inverse.  cond_cov is symmetrized and diagonal entries
    in [−1e−12, 0) are clamped to zero.
    """
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    S11 = np.asarray(S11, dtype=float)
    S12 = np.asarray(S12, dtype=float)
    S22 = np.asarray(S22, dtype=float)
    observed = np.asarray(observed, dtype=float)
    for name, arr in (("mu1", mu1), ("mu2", mu2), ("S11", S11), ("S12", S12),
                      ("S22", S22), ("observed", observed)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite entries in {name}")

    # one solve covers both the innovation and S12
    B = np.concatenate([(observed - mu1)[:, None], S12], axis=1)
    rank_deficient = False
    try:
        L, jitter = cholesky_psd(S11, policy)
        n = S11.shape[0]
        X = np.linalg.solve(S11 if jitter == 0.0 else S11 + jitter * np.eye(n), B)
        log_jitter = math.log10(jitter) if jitter > 0.0 else -math.inf
    except NotPsdError:
        if not policy.pseudo_fallback:
            raise
        X = _pseudo_solve(S11, B)
        rank_deficient = True
        log_jitter = math.inf

    cond_mean = mu2 + S12.T @ X[:, 0]
    cond_cov = S22 - S12.T @ X[:, 1:]
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    d = np.diagonal(cond_cov).copy()
    d[(d < 0.0) & (d >= -1e-12)] = 0.0
    np.fill_diagonal(cond_cov, d)
    return ConditioningResult(cond_mean=cond_mean, cond_cov=cond_cov,
                              log_jitter_used=log_jitter, rank_deficient=rank_deficient)


def sample_mvn(mean, cov, rng, policy: ConditionPolicy = DEFAULT_POLICY):
    """Draw mean + L·z with LLᵀ = cov; cov = 0 returns the mean exactly."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if not np.any(cov):
        return mean.copy()
    L, _ = cholesky_psd(cov, policy)
    return mean + L @ rng.standard_normal(mean.shape[0])


def sample_chi_square(dof, rng):
    """Chi-square draw valid for any real dof > 0 (dof of order 10⁹ included)."""
    if dof <= 0:
        raise ValueError(f"dof must be positive, got {dof}")
    return float(rng.gamma(dof / 2.0, 2.0))


def make_rng(master_seed: int, stream_id: int) -> np.random.Generator:
    """Independent, reproducible stream: counter-based generator keyed by
    (master_seed, stream_id).  Same pair ⇒ same sequence; distinct stream ids
    ⇒ independent sequences."""
    key = np.array([master_seed % 2 ** 64, stream_id % 2 ** 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
