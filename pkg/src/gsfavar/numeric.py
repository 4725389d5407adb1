"""Seedable numerical kernels shared by every stage of the pipeline.

All routines work in float64, reject NaN/Inf inputs, and are reproducible
given identical inputs and :class:`RngStream`.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import (
    DofTooSmall,
    KOutOfRange,
    NonFiniteError,
    NotPositiveDefinite,
    RankDeficient,
    SeriesTooShort,
    ShapeMismatch,
)

JITTER_BASE = 1e-10
JITTER_ESCALATIONS = 3


class RngStream:
    """A seeded random stream identified by ``(seed, stream)``.

    Distinct stream ids spawn statistically independent PCG64 generators from
    the same seed, so parallel workers never share state.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed is None:
            raise ValueError("a seed is mandatory")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RngStream":
        """Derive an independent stream keyed by ``keys`` (e.g. an origin index)."""
        sub = self.stream
        for k in keys:
            sub = (sub * 1_000_003 + int(k) + 1) % (2**63)
        return RngStream(self.seed, sub)

    def standard_normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self.generator.random(size)

    def chisquare(self, df, size=None):
        return self.generator.chisquare(df, size)

    def gamma(self, shape, scale=1.0, size=None):
        return self.generator.gamma(shape, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def as_rng(rng: "RngStream | int") -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return a


def _check_square_symmetric(m: np.ndarray, name: str) -> np.ndarray:
    m = check_finite(m, name)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-10 * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric")
    return m


def cholesky(m: np.ndarray, jitter: bool = False) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    With ``jitter=True`` a failed factorisation is retried after adding
    ``1e-10 * trace/n * I``, escalating by 10x at most three times.
    """
    m = _check_square_symmetric(m, "matrix")
    m = 0.5 * (m + m.T)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        if not jitter:
            raise NotPositiveDefinite("leading minor is not positive") from None
    n = m.shape[0]
    base = JITTER_BASE * max(float(np.trace(m)) / n, np.finfo(float).tiny)
    for k in range(JITTER_ESCALATIONS + 1):
        try:
            return np.linalg.cholesky(m + base * 10.0**k * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite("matrix not positive definite even after jitter")


def sample_mvn(mean: np.ndarray, cov: np.ndarray, rng: RngStream, jitter: bool = True) -> np.ndarray:
    mean = check_finite(mean, "mean").reshape(-1)
    cov = np.atleast_2d(cov)
    if cov.shape != (mean.size, mean.size):
        raise ShapeMismatch(f"cov shape {cov.shape} does not match mean length {mean.size}")
    chol = cholesky(cov, jitter=jitter)
    return mean + chol @ rng.standard_normal(mean.size)


def sample_mvn_precision(b: np.ndarray, precision: np.ndarray, rng: RngStream) -> np.ndarray:
    """Draw from N(P^{-1} b, P^{-1}) given the precision P; avoids forming the inverse."""
    chol = cholesky(precision, jitter=True)
    mean = linalg.cho_solve((chol, True), b)
    z = rng.standard_normal(mean.size)
    return mean + linalg.solve_triangular(chol.T, z, lower=False)


def sample_inverse_wishart(scale: np.ndarray, dof: float, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Draw Q ~ IW(scale, dof), density proportional to |Q|^{-(dof+n+1)/2} exp(-tr(scale Q^{-1})/2).

    Sampled as the inverse of a Wishart(scale^{-1}, dof) draw built from the
    Bartlett decomposition. With ``size`` a (size, n, n) batch is returned.
    """
    scale = np.atleast_2d(scale)
    scale = _check_square_symmetric(scale, "scale")
    n = scale.shape[0]
    if not dof > n - 1:
        raise DofTooSmall(f"dof={dof} must exceed n-1={n - 1}")
    c = cholesky(scale, jitter=True)
    batch = () if size is None else (int(size),)
    bartlett = np.zeros(batch + (n, n))
    rows, cols = np.tril_indices(n, -1)
    diag = np.arange(n)
    bartlett[..., diag, diag] = np.sqrt(rng.chisquare(dof - diag, size=batch + (n,)))
    bartlett[..., rows, cols] = rng.standard_normal(batch + (rows.size,))
    # W = C^{-T} A A' C^{-1} ~ Wishart(scale^{-1}), so W^{-1} = M' M with M = A^{-1} C'
    if size is None:
        m = linalg.solve_triangular(bartlett, c.T, lower=True)
    else:
        m = np.linalg.solve(bartlett, np.broadcast_to(c.T, bartlett.shape))
    draw = np.swapaxes(m, -1, -2) @ m
    return 0.5 * (draw + np.swapaxes(draw, -1, -2))


def sample_wishart(scale: np.ndarray, dof: float, rng: RngStream) -> np.ndarray:
    scale = _check_square_symmetric(np.atleast_2d(scale), "scale")
    n = scale.shape[0]
    if not dof > n - 1:
        raise DofTooSmall(f"dof={dof} must exceed n-1={n - 1}")
    c = cholesky(scale, jitter=True)
    bartlett = np.zeros((n, n))
    bartlett[np.diag_indices(n)] = np.sqrt(rng.chisquare(dof - np.arange(n)))
    rows, cols = np.tril_indices(n, -1)
    bartlett[rows, cols] = rng.standard_normal(rows.size)
    la = c @ bartlett
    return la @ la.T


def ols(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via a QR factorisation of ``x``."""
    x = check_finite(x, "X")
    y = check_finite(y, "y")
    if x.ndim != 2:
        raise ShapeMismatch("X must be 2-D")
    if y.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"X has {x.shape[0]} rows but y has {y.shape[0]}")
    t, p = x.shape
    if t < p:
        raise RankDeficient(f"T={t} < p={p}")
    q, r = np.linalg.qr(x, mode="reduced")
    d = np.abs(np.diag(r))
    if d.size and (d.min() == 0.0 or d.max() / d.min() > 1e12):
        raise RankDeficient("design matrix is rank deficient")
    if np.linalg.cond(r) > 1e12:
        raise RankDeficient("design matrix is ill-conditioned")
    return linalg.solve_triangular(r, q.T @ y, lower=False)


class PcaResult(NamedTuple):
    scores: np.ndarray
    loadings: np.ndarray
    explained_variance: np.ndarray


def pca(x: np.ndarray, k: int) -> PcaResult:
    """Principal components of a column-standardised panel via SVD.

    ``explained_variance`` holds each component's share of total panel
    variance. Each loading vector is signed so its largest-magnitude entry is
    positive.
    """
    x = check_finite(x, "X")
    t, n = x.shape
    if not 1 <= k <= min(t, n):
        raise KOutOfRange(f"K={k} outside [1, {min(t, n)}]")
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    loadings = vt[:k].T.copy()
    for j in range(k):
        idx = np.argmax(np.abs(loadings[:, j]))
        if loadings[idx, j] < 0:
            loadings[:, j] = -loadings[:, j]
    total = float(np.sum(s**2))
    share = s[:k] ** 2 / total if total > 0 else np.zeros(k)
    return PcaResult(x @ loadings, loadings, share)


def ar2_residual_variance(series: np.ndarray) -> float:
    """Residual variance of an OLS AR(2) with intercept, denominator T-2-3."""
    x = check_finite(series, "series").reshape(-1)
    t = x.size
    if t < 10:
        raise SeriesTooShort(f"need at least 10 observations, got {t}")
    design = np.column_stack([np.ones(t - 2), x[1:-1], x[:-2]])
    target = x[2:]
    try:
        coef = ols(design, target)
    except RankDeficient:
        warnings.warn("AR(2) regressors are rank deficient; returning 0 variance", RuntimeWarning)
        return 0.0
    resid = target - design @ coef
    return float(resid @ resid / (t - 2 - 3))
