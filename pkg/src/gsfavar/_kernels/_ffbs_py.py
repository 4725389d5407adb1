"""Pure NumPy forward-filtering backward-sampling kernel.

Reference implementation and fallback for the compiled ``_ffbs_ext`` module;
both expose the same ``ffbs`` and ``psd_cholesky`` signatures.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg


def psd_cholesky(m: np.ndarray, ref: float = 0.0) -> np.ndarray:
    """Lower factor L with L L' = m for symmetric positive semi-definite m.

    Pivots that vanish to rounding are treated as exact zeros and their column
    is dropped, so degenerate (e.g. zero) covariances yield a zero factor.
    "Vanish" is measured against ``ref`` when it exceeds the diagonal of m,
    which lets a caller flag a difference of nearly equal matrices as zero.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    out = np.zeros((n, n))
    tol = 1e-13 * max(float(np.max(np.abs(np.diag(m)), initial=0.0)), ref, 1e-300)
    for j in range(n):
        d = m[j, j] - out[j, :j] @ out[j, :j]
        if d <= tol:
            continue
        s = np.sqrt(d)
        out[j, j] = s
        if j + 1 < n:
            out[j + 1 :, j] = (m[j + 1 :, j] - out[j + 1 :, :j] @ out[j, :j]) / s
    return out


def _chol_spd(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        n = m.shape[0]
        base = 1e-10 * max(float(np.trace(m)) / n, 1e-300)
        for k in range(4):
            try:
                return np.linalg.cholesky(m + base * 10.0**k * np.eye(n))
            except np.linalg.LinAlgError:
                continue
        raise


def ffbs(y, z, r, q, m0, p0, normals):
    """Sample a random-walk state path from its joint smoothing distribution.

    Model: ``x_t = x_{t-1} + w_t``, ``w_t ~ N(0, q)``; ``y_t = z_t x_t + v_t``,
    ``v_t ~ N(0, r_t)`` for t = 1..T, and ``x_0 ~ N(m0, p0)``.

    ``normals`` is a (T+1, k) array of standard normal variates; row t drives
    the draw of x_t. Returns ``(path, filtered_means, filtered_covs, ok)``
    where ``ok`` is False when the filter produced non-finite values.
    """
    t_len, _ = y.shape
    k = m0.shape[0]
    means = np.empty((t_len + 1, k))
    covs = np.empty((t_len + 1, k, k))
    m = m0.astype(float).copy()
    p = p0.astype(float).copy()
    means[0] = m
    covs[0] = p
    for t in range(t_len):
        zt = z[t]
        pp = p + q
        zp = zt @ pp
        s = zp @ zt.T + r[t]
        cs = _chol_spd(0.5 * (s + s.T))
        innov = y[t] - zt @ m
        kt = linalg.cho_solve((cs, True), zp)
        m = m + kt.T @ innov
        p = pp - zp.T @ kt
        p = 0.5 * (p + p.T)
        means[t + 1] = m
        covs[t + 1] = p
    if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
        return None, means, covs, False

    path = np.empty((t_len + 1, k))
    x = means[t_len] + psd_cholesky(covs[t_len]) @ normals[t_len]
    path[t_len] = x
    for t in range(t_len - 1, -1, -1):
        pt = covs[t]
        pp = pt + q
        cp = _chol_spd(0.5 * (pp + pp.T))
        jt = linalg.cho_solve((cp, True), pt).T  # P_t (P_t + Q)^{-1}
        mean = means[t] + jt @ (x - means[t])
        cov = pt - jt @ pt
        cov = 0.5 * (cov + cov.T)
        x = mean + psd_cholesky(cov, float(np.max(np.diag(pt)))) @ normals[t]
        path[t] = x
    return path, means, covs, True
