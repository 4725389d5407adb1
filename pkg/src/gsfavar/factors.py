"""Factor sets, PCA extraction, the slow-moving adjustment and linear loadings."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, ShapeMismatch
from .numeric import as_rng, check_finite, ols, pca

METHODS = ("pca", "plain_ae", "gs_ae_linear", "gs_ae_nonlinear")


class DegenerateFactorWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FactorSet:
    latent: np.ndarray  # T x K
    observable: np.ndarray  # T x M
    method: str
    anchor_names: tuple[str, ...] | None = None
    observable_names: tuple[str, ...] = ()
    degenerate: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown extraction method {self.method!r}")
        if self.latent.shape[0] != self.observable.shape[0]:
            raise ShapeMismatch("latent and observable factors must share T")

    @property
    def n_obs(self) -> int:
        return self.latent.shape[0]

    @property
    def stacked(self) -> np.ndarray:
        """VAR state ordering: latent (slow) factors first, then observables."""
        return np.column_stack([self.latent, self.observable])

    @property
    def names(self) -> list[str]:
        latent = list(self.anchor_names) if self.anchor_names else [f"f{k + 1}" for k in range(self.latent.shape[1])]
        obs = list(self.observable_names) or [f"y{m + 1}" for m in range(self.observable.shape[1])]
        return latent + obs


def standardize_factors(f: np.ndarray) -> tuple[np.ndarray, tuple[bool, ...]]:
    """Centre and scale columns to unit variance; zero-variance columns are flagged, not scaled."""
    f = np.asarray(f, dtype=float)
    centred = f - f.mean(axis=0)
    sd = centred.std(axis=0)
    scale = np.maximum(np.abs(f).max(axis=0, initial=0.0), 1.0)
    degenerate = sd <= 1e-10 * scale
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} factor(s) have zero variance", DegenerateFactorWarning)
    out = np.where(degenerate, 0.0, centred / np.where(degenerate, 1.0, sd))
    return out, tuple(bool(d) for d in degenerate)


def pca_factors(panel, k: int, slow_adjust: bool = True) -> FactorSet:
    """First K principal components of the panel block, scaled so F'F = T I.

    With ``slow_adjust`` and observables present, the components are purged
    of their contemporaneous dependence on the observables using components
    of the slow-moving sub-panel.
    """
    scores = pca(panel.x, k).scores
    f, degenerate = standardize_factors(scores)
    y = panel.y
    if slow_adjust and y.shape[1] > 0:
        slow = panel.slow_x_index
        if slow.size < k:
            raise ConfigError(f"slow sub-panel has {slow.size} variables, fewer than K={k}")
        fs = standardize_factors(pca(panel.x[:, slow], k).scores)[0]
        f, degenerate = slow_moving_adjust(f, fs, y)
    return FactorSet(f, y.copy(), "pca", None, tuple(panel.y_names), degenerate)


def slow_moving_adjust(fhat: np.ndarray, fhat_slow: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, tuple[bool, ...]]:
    """Regress ``fhat`` on (``fhat_slow``, ``y``) and remove the observable part.

    Returns ``fhat - y B_y`` re-standardised, plus degenerate flags.
    """
    fhat = check_finite(fhat, "fhat")
    fhat_slow = check_finite(fhat_slow, "fhat_slow")
    y = check_finite(y, "y")
    if not (fhat.shape[0] == fhat_slow.shape[0] == y.shape[0]):
        raise ShapeMismatch("fhat, fhat_slow and y must share T")
    design = np.column_stack([np.ones(fhat.shape[0]), fhat_slow, y])
    coef = ols(design, fhat)
    b_y = coef[1 + fhat_slow.shape[1]:]
    return standardize_factors(fhat - y @ b_y)


def _abs_corr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = (a - a.mean(0)) / np.where(a.std(0) > 0, a.std(0), 1.0)
    b = (b - b.mean(0)) / np.where(b.std(0) > 0, b.std(0), 1.0)
    return np.abs(a.T @ b) / a.shape[0]


def align_permutation(factors: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Permutation and signs matching ``factors`` columns to ``reference`` columns.

    Maximises the summed absolute correlation (exact assignment). Returns
    ``perm`` with ``factors[:, perm[j]]`` matched to reference ``j`` and the
    sign that makes each matched correlation positive.
    """
    corr = _abs_corr(reference, factors)
    rows, cols = linear_sum_assignment(-corr)
    perm = cols[np.argsort(rows)]
    signs = np.array([np.sign(np.corrcoef(reference[:, j], factors[:, perm[j]])[0, 1]) or 1.0
                      for j in range(reference.shape[1])])
    return perm, signs


def brute_force_permutation(factors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    corr = _abs_corr(reference, factors)
    k = reference.shape[1]
    best = max(itertools.permutations(range(factors.shape[1]), k),
               key=lambda p: sum(corr[j, p[j]] for j in range(k)))
    return np.array(best)


def align_factors(fs: FactorSet, reference: FactorSet) -> FactorSet:
    perm, signs = align_permutation(fs.latent, reference.latent)
    return FactorSet(fs.latent[:, perm] * signs, fs.observable, fs.method, reference.anchor_names,
                     fs.observable_names, tuple(np.array(fs.degenerate or [False] * len(perm))[perm]))


# ------------------------------------------------------------------ loadings


@dataclass(frozen=True)
class LoadingDraws:
    lam: np.ndarray  # draws x N x (K+M)
    sigma2: np.ndarray  # draws x N, diagonal of Sigma

    @property
    def n_draws(self) -> int:
        return self.lam.shape[0]

    def mean(self) -> np.ndarray:
        return self.lam.mean(axis=0)


def gibbs_lambda_sigma(factors: FactorSet, x: np.ndarray, n_draws: int, rng, n_burn: int = 100,
                       prior_var: float = 4.0, gamma_shape: float = 0.01, gamma_rate: float = 0.01) -> LoadingDraws:
    """Gibbs sampler for the linear loading model ``x_t = Lambda (f_t, y_t) + eps_t``.

    Rows of Lambda have independent N(0, prior_var I) priors and are
    conditionally independent given the diagonal Sigma, whose precisions have
    Gamma(shape, rate) priors.
    """
    rng = as_rng(rng)
    w = factors.stacked
    x = check_finite(x, "x")
    if w.shape[0] != x.shape[0]:
        raise ShapeMismatch("factors and panel must share T")
    t_len, n = x.shape
    q = w.shape[1]
    d, u = np.linalg.eigh(w.T @ w)
    d = np.maximum(d, 0.0)
    proj = u.T @ (w.T @ x)  # q x N
    prec = np.ones(n)
    lam_draws = np.empty((n_draws, n, q))
    sig_draws = np.empty((n_draws, n))
    for it in range(n_burn + n_draws):
        denom = 1.0 / prior_var + prec[None, :] * d[:, None]  # q x N
        coords = prec[None, :] * proj / denom + rng.standard_normal((q, n)) / np.sqrt(denom)
        lam = (u @ coords).T
        resid = x - w @ lam.T
        rate = gamma_rate + 0.5 * np.sum(resid**2, axis=0)
        prec = rng.gamma(gamma_shape + 0.5 * t_len, 1.0 / rate)
        if it >= n_burn:
            lam_draws[it - n_burn] = lam
            sig_draws[it - n_burn] = 1.0 / prec
    return LoadingDraws(lam_draws, sig_draws)
