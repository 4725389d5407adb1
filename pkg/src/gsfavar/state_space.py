"""Linear-Gaussian random-walk state space: filtering, smoothing and FFBS.

State ``x_t = x_{t-1} + w_t``, ``w_t ~ N(0, Q)`` for t = 1..T with
``x_0 ~ N(m0, P0)``; observation ``y_t = Z_t x_t + v_t``, ``v_t ~ N(0, R_t)``.
Paths are indexed 0..T, so observation ``t`` (0-based) informs ``path[t + 1]``.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels
from .errors import FilterBlewUp, ShapeMismatch
from .numeric import as_rng


class StackedObs(NamedTuple):
    y: np.ndarray  # T x n
    z: np.ndarray  # T x n x k
    r: np.ndarray  # T x n x n


def stack_obs(obs_builder, state_dim: int) -> StackedObs:
    """Accept a ``StackedObs`` or any iterable of per-period ``(y_t, Z_t, R_t)`` triples."""
    if isinstance(obs_builder, StackedObs):
        obs = obs_builder
    else:
        ys, zs, rs = [], [], []
        for y_t, z_t, r_t in obs_builder:
            y_t = np.atleast_1d(np.asarray(y_t, dtype=float))
            ys.append(y_t)
            zs.append(np.asarray(z_t, dtype=float).reshape(y_t.size, state_dim))
            rs.append(np.asarray(r_t, dtype=float).reshape(y_t.size, y_t.size))
        if not ys:
            raise ShapeMismatch("observation sequence is empty")
        obs = StackedObs(np.array(ys), np.array(zs), np.array(rs))
    t_len, n = obs.y.shape
    if obs.z.shape != (t_len, n, state_dim) or obs.r.shape != (t_len, n, n):
        raise ShapeMismatch(f"design {obs.z.shape} / covariance {obs.r.shape} inconsistent with y {obs.y.shape}")
    return obs


def kalman_ffbs(obs_builder: StackedObs | Iterable, state_dim: int, q: np.ndarray, prior_mean: np.ndarray,
                prior_cov: np.ndarray, rng) -> np.ndarray:
    """Draw a state path (T+1 x state_dim) from its joint smoothing distribution."""
    rng = as_rng(rng)
    obs = stack_obs(obs_builder, state_dim)
    normals = rng.standard_normal((obs.y.shape[0] + 1, state_dim))
    path, _, _, ok = _kernels.ffbs(obs.y, obs.z, obs.r, np.asarray(q, dtype=float),
                                   np.asarray(prior_mean, dtype=float), np.asarray(prior_cov, dtype=float), normals)
    if not ok or not np.all(np.isfinite(path)):
        raise FilterBlewUp("Kalman recursion produced a non-finite or indefinite covariance")
    return path


def kalman_filter(obs_builder, state_dim: int, q, prior_mean, prior_cov) -> tuple[np.ndarray, np.ndarray]:
    """Filtered means and covariances for t = 0..T (index 0 is the prior)."""
    obs = stack_obs(obs_builder, state_dim)
    t_len = obs.y.shape[0]
    means = np.empty((t_len + 1, state_dim))
    covs = np.empty((t_len + 1, state_dim, state_dim))
    means[0], covs[0] = prior_mean, prior_cov
    for t in range(t_len):
        pp = covs[t] + q
        z = obs.z[t]
        s = z @ pp @ z.T + obs.r[t]
        gain = np.linalg.solve(s, z @ pp).T
        means[t + 1] = means[t] + gain @ (obs.y[t] - z @ means[t])
        cov = pp - gain @ z @ pp
        covs[t + 1] = 0.5 * (cov + cov.T)
        if not np.all(np.isfinite(covs[t + 1])):
            raise FilterBlewUp(f"non-finite filtered covariance at t={t + 1}")
    return means, covs


def rts_smoother(obs_builder, state_dim: int, q, prior_mean, prior_cov) -> tuple[np.ndarray, np.ndarray]:
    """Rauch-Tung-Striebel smoothed means and covariances for t = 0..T."""
    means, covs = kalman_filter(obs_builder, state_dim, q, prior_mean, prior_cov)
    sm, sc = means.copy(), covs.copy()
    for t in range(len(means) - 2, -1, -1):
        pp = covs[t] + q
        gain = np.linalg.solve(pp, covs[t]).T
        sm[t] = means[t] + gain @ (sm[t + 1] - means[t])
        sc[t] = covs[t] + gain @ (sc[t + 1] - pp) @ gain.T
    return sm, sc
