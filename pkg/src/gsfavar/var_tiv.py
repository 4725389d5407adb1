"""Time-invariant Bayesian VAR with a Minnesota-type prior, estimated by Gibbs sampling.

Coefficients are stored equation-major: for equation ``i``, lag ``p`` (1-based)
and variable ``j`` the entry ``a[i*n*P + (p-1)*n + j]`` is ``A_p[i, j]``. This
matches the design ``Z_t = I_n kron x_t'`` with
``x_t = (y_{t-1}', ..., y_{t-P}')'``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ChainDiverged, ConfigError, NotPositiveDefinite, ShapeMismatch
from .numeric import ar2_residual_variance, as_rng, sample_inverse_wishart, sample_mvn_precision


# ------------------------------------------------------------------ layout


def lagged_design(data: np.ndarray, lags: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressors ``x_t = (y_{t-1}, ..., y_{t-P})`` and targets ``y_t`` for t = P..T-1."""
    data = np.asarray(data, dtype=float)
    t_total, n = data.shape
    if t_total <= lags:
        raise ShapeMismatch("not enough observations for the lag order")
    x = np.column_stack([data[lags - p:t_total - p] for p in range(1, lags + 1)])
    return x, data[lags:]


def coef_matrices(a: np.ndarray, n: int, lags: int) -> np.ndarray:
    """Unpack a coefficient vector into ``A`` of shape (P, n, n)."""
    big = np.asarray(a).reshape(n, lags * n)  # row i = equation i
    return big.reshape(n, lags, n).transpose(1, 0, 2)


def coef_vector(a_mats: np.ndarray) -> np.ndarray:
    lags, n, _ = a_mats.shape
    return a_mats.transpose(1, 0, 2).reshape(n * lags * n)


def minnesota_variance(p: int, i: int, j: int, xi1: float, xi2: float, sigma: np.ndarray) -> float:
    """Prior variance of ``A_p[i, j]``: xi1/p^2 on own lags, (xi2/p^2) sigma_i/sigma_j otherwise."""
    if p < 1:
        raise ConfigError("lag index p starts at 1")
    if i == j:
        return xi1 / p**2
    return xi2 / p**2 * sigma[i] / sigma[j]


def minnesota_prior_diag(n: int, lags: int, xi1: float, xi2: float, sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    p = np.arange(1, lags + 1)[None, :, None]
    i = np.arange(n)[:, None, None]
    j = np.arange(n)[None, None, :]
    own = np.broadcast_to(xi1 / p**2, (n, lags, n))
    cross = xi2 / p**2 * sigma[i] / sigma[j]
    return np.where(i == j, own, cross).reshape(-1)


def ar2_sigmas(data: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Per-series AR(2) residual standard deviations used to scale the Minnesota prior."""
    return np.sqrt(np.maximum([ar2_residual_variance(col) for col in np.asarray(data).T], floor))


# ------------------------------------------------------------------ sampler


@dataclass(frozen=True)
class TivPrior:
    lags: int = 2
    xi1: float = 0.7
    xi2: float = 0.1
    sample_xi: bool = False
    xi_shape: float = 0.01
    xi_rate: float = 0.01
    xi_step: float = 0.3
    sigma: tuple[float, ...] | None = None  # AR(2) residual sds; estimated from data when None

    def __post_init__(self):
        if self.lags < 1:
            raise ConfigError("lag order must be at least 1")
        if not (self.xi1 > 0 and self.xi2 > 0):
            raise ConfigError("Minnesota multipliers must be positive")


@dataclass(frozen=True)
class TivDraws:
    a: np.ndarray  # draws x n^2 P
    omega: np.ndarray  # draws x n x n
    xi: np.ndarray  # draws x 2
    n: int
    lags: int
    history: np.ndarray  # data the chain was fitted on
    xi_acceptance: float = float("nan")

    @property
    def n_draws(self) -> int:
        return self.a.shape[0]

    def coef(self, d: int) -> np.ndarray:
        return coef_matrices(self.a[d], self.n, self.lags)


def gibbs_tiv(data: np.ndarray, prior: TivPrior, n_burn: int, n_draws: int, rng, thin: int = 1,
              fixed_omega: np.ndarray | None = None) -> TivDraws:
    """Gibbs sampler alternating ``a | Omega`` and ``Omega | a``.

    ``Omega`` has the flat inverse-Wishart prior, so ``Omega | a ~ IW(E'E, T)``.
    ``fixed_omega`` freezes Omega (used to validate the coefficient block).
    With ``prior.sample_xi`` the multipliers get a random-walk Metropolis step
    on their logs under Gamma(shape, rate) priors.
    """
    rng = as_rng(rng)
    data = np.asarray(getattr(data, "stacked", data), dtype=float)
    t_total, n = data.shape
    lags = prior.lags
    if t_total - lags <= lags * n + 10:
        raise ConfigError(f"T={t_total - lags} too short for a {n}-variable VAR({lags})")
    x, y = lagged_design(data, lags)
    t_len = y.shape[0]
    sigma = np.asarray(prior.sigma) if prior.sigma is not None else ar2_sigmas(data)
    xtx = x.T @ x
    xi = np.array([prior.xi1, prior.xi2])
    v_diag = minnesota_prior_diag(n, lags, xi[0], xi[1], sigma)

    coef0 = np.linalg.lstsq(x, y, rcond=None)[0]
    resid = y - x @ coef0
    omega = fixed_omega if fixed_omega is not None else resid.T @ resid / t_len
    a = coef0.T.reshape(-1)

    kept = n_draws
    a_out = np.empty((kept, n * n * lags))
    om_out = np.empty((kept, n, n))
    xi_out = np.empty((kept, 2))
    accepted = proposed = 0
    total = n_burn + n_draws * thin
    for sweep in range(total):
        try:
            om_inv = np.linalg.inv(omega)
            precision = np.diag(1.0 / v_diag) + np.kron(om_inv, xtx)
            rhs = (x.T @ y @ om_inv).reshape(-1, order="F")
            a = sample_mvn_precision(rhs, precision, rng)
            if fixed_omega is None:
                resid = y - x @ a.reshape(n, n * lags).T
                omega = sample_inverse_wishart(resid.T @ resid, t_len, rng)
        except (NotPositiveDefinite, np.linalg.LinAlgError) as e:
            raise ChainDiverged(str(e), sweep) from None
        if prior.sample_xi:
            prop = xi * np.exp(prior.xi_step * rng.standard_normal(2))
            v_prop = minnesota_prior_diag(n, lags, prop[0], prop[1], sigma)
            log_ratio = (_xi_log_target(a, v_prop, prop, prior) + np.log(prop).sum()
                         - _xi_log_target(a, v_diag, xi, prior) - np.log(xi).sum())
            proposed += 1
            if np.log(rng.uniform()) < log_ratio:
                xi, v_diag = prop, v_prop
                accepted += 1
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(omega))):
            raise ChainDiverged("non-finite draw", sweep)
        if sweep >= n_burn and (sweep - n_burn) % thin == 0:
            d = (sweep - n_burn) // thin
            a_out[d], om_out[d], xi_out[d] = a, omega, xi
    rate = accepted / proposed if proposed else float("nan")
    return TivDraws(a_out, om_out, xi_out, n, lags, data, rate)


def _xi_log_target(a: np.ndarray, v_diag: np.ndarray, xi: np.ndarray, prior: TivPrior) -> float:
    loglik = -0.5 * np.sum(np.log(v_diag) + a * a / v_diag)
    logprior = stats.gamma.logpdf(xi, prior.xi_shape, scale=1.0 / prior.xi_rate).sum()
    return float(loglik + logprior)


def conditional_posterior_mean(data: np.ndarray, prior: TivPrior, omega: np.ndarray) -> np.ndarray:
    """Mean of ``a | Omega`` under the Minnesota prior (GLS posterior mean)."""
    data = np.asarray(getattr(data, "stacked", data), dtype=float)
    n = data.shape[1]
    x, y = lagged_design(data, prior.lags)
    sigma = np.asarray(prior.sigma) if prior.sigma is not None else ar2_sigmas(data)
    v_diag = minnesota_prior_diag(n, prior.lags, prior.xi1, prior.xi2, sigma)
    om_inv = np.linalg.inv(omega)
    precision = np.diag(1.0 / v_diag) + np.kron(om_inv, x.T @ x)
    rhs = (x.T @ y @ om_inv).reshape(-1, order="F")
    return np.linalg.solve(precision, rhs)
