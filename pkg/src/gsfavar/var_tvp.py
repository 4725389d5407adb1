"""Time-varying-parameter VAR with stochastic volatility.

    y_t = A_t x_t + H_t S_t eps_t,   eps_t ~ N(0, I)

``a_t`` (coefficients, equation-major as in ``var_tiv``), the free entries of
the unit-lower-triangular ``H_t^{-1}`` and ``log s_t`` each follow random walks
with innovation covariances ``Q_a``, block-diagonal ``Q_h`` and ``Q_s``. The
Gibbs sweep draws, in order: coefficients, covariance rows, the mixture
indicators given the new residuals, log volatilities (through a
seven-component normal mixture for log chi-square(1)), the indicators again
given the new volatility path, and the innovation covariances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import ChainDiverged, ConfigError, FilterBlewUp, NotPositiveDefinite
from .numeric import as_rng, sample_inverse_wishart
from .state_space import StackedObs, kalman_ffbs
from .var_tiv import ar2_sigmas, lagged_design, minnesota_prior_diag

# Seven-component normal approximation to log chi-square(1)
MIX_PROB = np.array([0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750])
MIX_MEAN = np.array([-10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819]) - 1.2704
MIX_VAR = np.array([5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261])
OFFSET = 1e-3


# ------------------------------------------------------------------ priors


@dataclass(frozen=True)
class TvpPrior:
    lags: int = 2
    xi1: float = 0.7
    xi2: float = 0.1
    k_a: float = 1e-4
    k_h: float = 1e-4
    k_s: float = 1e-2
    init_var: float = 4.0  # prior variance of h_0 and log s_0, also the Q_h, Q_s scale
    offset: float = OFFSET
    sv_mh: bool = False  # accept/reject the mixture proposal against exact log chi-square(1)
    sigma: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.lags < 1:
            raise ConfigError("lag order must be at least 1")
        if min(self.xi1, self.xi2, self.k_a, self.k_h, self.k_s, self.init_var, self.offset) <= 0:
            raise ConfigError("prior hyperparameters must be positive")

    def scaled(self, factor: float) -> "TvpPrior":
        """Same prior with every innovation-covariance scale multiplied by ``factor``."""
        return replace(self, k_a=self.k_a * factor, k_h=self.k_h * factor, k_s=self.k_s * factor)


class PriorMatrices(NamedTuple):
    v_a: np.ndarray  # prior covariance of a_0 (diagonal Minnesota)
    scale_a: np.ndarray
    dof_a: float
    scale_h: list  # per row m = 2..n, (m-1) x (m-1)
    dof_h: list
    scale_s: np.ndarray
    dof_s: float
    init_var: float


def prior_matrices(prior: TvpPrior, data: np.ndarray) -> PriorMatrices:
    n = data.shape[1]
    sigma = np.asarray(prior.sigma) if prior.sigma is not None else ar2_sigmas(data)
    v_diag = minnesota_prior_diag(n, prior.lags, prior.xi1, prior.xi2, sigma)
    dim_a = v_diag.size
    v_a = np.diag(v_diag)
    scale_h = [prior.k_h * m * prior.init_var * np.eye(m - 1) for m in range(2, n + 1)]
    dof_h = [float(m) for m in range(2, n + 1)]
    return PriorMatrices(v_a, prior.k_a * (dim_a + 1) * v_a, float(dim_a + 1), scale_h, dof_h,
                         prior.k_s * (n + 1) * prior.init_var * np.eye(n), float(n + 1), prior.init_var)


# ------------------------------------------------------------------ structure helpers


class TvpData(NamedTuple):
    x: np.ndarray  # T x nP
    y: np.ndarray  # T x n
    z: np.ndarray  # T x n x n^2 P, the design I_n kron x_t'

    @property
    def n(self) -> int:
        return self.y.shape[1]


def tvp_data(data: np.ndarray, lags: int) -> TvpData:
    x, y = lagged_design(data, lags)
    t_len, n = y.shape
    k = x.shape[1]
    z = np.zeros((t_len, n, n * k))
    for i in range(n):
        z[:, i, i * k:(i + 1) * k] = x
    return TvpData(x, y, z)


def h_offsets(n: int) -> list[slice]:
    """Slices of the stacked h vector holding row m (m = 2..n) of H^{-1}."""
    return [slice((m - 1) * (m - 2) // 2, m * (m - 1) // 2) for m in range(2, n + 1)]


def hinv_matrices(h: np.ndarray, n: int) -> np.ndarray:
    """Assemble unit-lower-triangular H^{-1} from stacked rows; works on (..., n(n-1)/2)."""
    h = np.asarray(h)
    out = np.zeros(h.shape[:-1] + (n, n))
    out[..., np.arange(n), np.arange(n)] = 1.0
    rows, cols = np.tril_indices(n, -1)
    out[..., rows, cols] = h  # tril order is row-major: row m holds h_{m,1..m-1}
    return out


def omega_matrices(h: np.ndarray, log_s: np.ndarray) -> np.ndarray:
    """``Omega_t = H_t S_t S_t' H_t'`` for stacked states."""
    n = log_s.shape[-1]
    hinv = hinv_matrices(h, n)
    hs = np.linalg.solve(hinv, np.eye(n) * np.exp(log_s)[..., None, :])
    return hs @ np.swapaxes(hs, -1, -2)


def impact_matrices(h: np.ndarray, log_s: np.ndarray) -> np.ndarray:
    """Lower-triangular ``H_t S_t``."""
    n = log_s.shape[-1]
    return np.linalg.solve(hinv_matrices(h, n), np.eye(n) * np.exp(log_s)[..., None, :])


def residuals(d: TvpData, a_path: np.ndarray) -> np.ndarray:
    n, k = d.n, d.x.shape[1]
    coefs = a_path[1:].reshape(-1, n, k)
    return d.y - np.einsum("tik,tk->ti", coefs, d.x)


# ------------------------------------------------------------------ Gibbs blocks


def draw_coefficients(d: TvpData, h_path: np.ndarray, log_s_path: np.ndarray, q_a: np.ndarray,
                      mats: PriorMatrices, rng) -> np.ndarray:
    omega = omega_matrices(h_path[1:], log_s_path[1:])
    dim = q_a.shape[0]
    return kalman_ffbs(StackedObs(d.y, d.z, omega), dim, q_a, np.zeros(dim), mats.v_a, rng)


def draw_covariance_rows(d: TvpData, a_path: np.ndarray, log_s_path: np.ndarray, q_h: list,
                         mats: PriorMatrices, rng) -> np.ndarray:
    """FFBS per row m of H^{-1}: ``yhat_m = -yhat_{1:m-1}' h_m + s_m eps``."""
    n = d.n
    t_len = d.y.shape[0]
    resid = residuals(d, a_path)
    var = np.exp(2.0 * log_s_path[1:])
    out = np.empty((t_len + 1, n * (n - 1) // 2))
    for m, sl in zip(range(1, n), h_offsets(n)):
        obs = StackedObs(resid[:, m:m + 1], -resid[:, None, :m], var[:, m, None, None])
        out[:, sl] = kalman_ffbs(obs, m, q_h[m - 1], np.zeros(m), mats.init_var * np.eye(m), rng)
    return out


def orthogonal_residuals(d: TvpData, a_path: np.ndarray, h_path: np.ndarray) -> np.ndarray:
    hinv = hinv_matrices(h_path[1:], d.n)
    return np.einsum("tij,tj->ti", hinv, residuals(d, a_path))


def log_squared(u: np.ndarray, offset: float = OFFSET) -> np.ndarray:
    return np.log(u * u + offset)


def draw_indicators(ystar: np.ndarray, log_s: np.ndarray, rng) -> np.ndarray:
    """Mixture component per (t, equation) from its posterior given ``y* - 2 log s``."""
    e = (ystar - 2.0 * log_s)[..., None]
    logw = np.log(MIX_PROB) - 0.5 * np.log(MIX_VAR) - 0.5 * (e - MIX_MEAN) ** 2 / MIX_VAR
    logw -= logw.max(axis=-1, keepdims=True)
    w = np.exp(logw)
    cdf = np.cumsum(w, axis=-1)
    u = rng.uniform(ystar.shape)[..., None] * cdf[..., -1:]
    return np.minimum((u > cdf).sum(axis=-1), len(MIX_PROB) - 1).astype(np.int8)


def _log_chi2_1(e: np.ndarray) -> np.ndarray:
    """Log density of log(eps^2), eps ~ N(0,1), evaluated at e."""
    return -0.5 * np.log(2.0 * np.pi) + 0.5 * e - 0.5 * np.exp(e)


def _log_mixture(e: np.ndarray) -> np.ndarray:
    comp = np.log(MIX_PROB) - 0.5 * np.log(2 * np.pi * MIX_VAR) - 0.5 * (e[..., None] - MIX_MEAN) ** 2 / MIX_VAR
    return special.logsumexp(comp, axis=-1)


class VolatilityDraw(NamedTuple):
    log_s: np.ndarray
    indicators: np.ndarray
    accepted: bool


def draw_log_volatilities(d: TvpData, a_path: np.ndarray, h_path: np.ndarray, q_s: np.ndarray,
                          indicators: np.ndarray, mats: PriorMatrices, rng, offset: float = OFFSET,
                          current: np.ndarray | None = None, mh: bool = False) -> VolatilityDraw:
    """Mixture-conditional FFBS for log s, followed by an indicator redraw.

    With ``mh`` the FFBS path is a proposal accepted against the exact
    log chi-square(1) likelihood relative to the marginal mixture (requires
    ``current``).
    """
    n = d.n
    ystar = log_squared(orthogonal_residuals(d, a_path, h_path), offset)
    ind = np.asarray(indicators, dtype=np.intp)
    obs_y = ystar - MIX_MEAN[ind]
    r = np.zeros(ystar.shape + (n,))
    r[:, np.arange(n), np.arange(n)] = MIX_VAR[ind]
    z = np.broadcast_to(2.0 * np.eye(n), (ystar.shape[0], n, n))
    proposal = kalman_ffbs(StackedObs(obs_y, z, r), n, q_s, np.zeros(n), mats.init_var * np.eye(n), rng)
    accepted = True
    if mh:
        if current is None:
            raise ConfigError("MH volatility step needs the current path")

        def weight(ls):
            e = ystar - 2.0 * ls[1:]
            return float(np.sum(_log_chi2_1(e) - _log_mixture(e)))

        accepted = bool(np.log(rng.uniform()) < weight(proposal) - weight(current))
        if not accepted:
            proposal = current
    new_ind = draw_indicators(ystar, proposal[1:], rng)
    return VolatilityDraw(proposal, new_ind, accepted)


def draw_innovation_covs(a_path: np.ndarray, h_path: np.ndarray, log_s_path: np.ndarray,
                         mats: PriorMatrices, rng) -> tuple[np.ndarray, list, np.ndarray]:
    """Each Q ~ IW(prior scale + sum of squared increments, prior dof + T)."""
    def post(path, scale, dof):
        inc = np.diff(path, axis=0)
        return sample_inverse_wishart(scale + inc.T @ inc, dof + inc.shape[0], rng)

    n = log_s_path.shape[1]
    q_a = post(a_path, mats.scale_a, mats.dof_a)
    q_h = [post(h_path[:, sl], s, v) for sl, s, v in zip(h_offsets(n), mats.scale_h, mats.dof_h)]
    q_s = post(log_s_path, mats.scale_s, mats.dof_s)
    return q_a, q_h, q_s


# ------------------------------------------------------------------ chain


@dataclass(frozen=True)
class TvpDraw:
    a: np.ndarray
    h: np.ndarray
    log_s: np.ndarray
    q_a: np.ndarray
    q_h: list
    q_s: np.ndarray
    indicators: np.ndarray


@dataclass
class TvpChain:
    n: int
    lags: int
    history: np.ndarray
    a: np.ndarray  # draws x (T+1) x n^2 P
    h: np.ndarray  # draws x (T+1) x n(n-1)/2
    log_s: np.ndarray  # draws x (T+1) x n
    q_a: np.ndarray
    q_h: list  # per row: draws x (m-1) x (m-1)
    q_s: np.ndarray
    indicators: np.ndarray  # draws x T x n
    mh_acceptance: float = float("nan")
    stats: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.a.shape[0]

    def draw(self, d: int) -> TvpDraw:
        return TvpDraw(self.a[d], self.h[d], self.log_s[d], self.q_a[d], [q[d] for q in self.q_h],
                       self.q_s[d], self.indicators[d])

    def __iter__(self):
        return (self.draw(d) for d in range(self.n_draws))

    def __len__(self) -> int:
        return self.n_draws


def _initial_state(d: TvpData, mats: PriorMatrices, lags: int):
    t_len, n = d.y.shape
    coef = np.linalg.lstsq(d.x, d.y, rcond=None)[0]  # k x n
    resid = d.y - d.x @ coef
    omega = resid.T @ resid / t_len + 1e-8 * np.eye(n)
    chol = np.linalg.cholesky(omega)
    scale = np.diag(chol)
    hinv = np.linalg.inv(chol / scale)
    a = np.tile(coef.T.reshape(-1), (t_len + 1, 1))
    h = np.tile(hinv[np.tril_indices(n, -1)], (t_len + 1, 1))
    log_s = np.tile(np.log(scale), (t_len + 1, 1))
    q_a = mats.scale_a / mats.dof_a
    q_h = [s / v for s, v in zip(mats.scale_h, mats.dof_h)]
    q_s = mats.scale_s / mats.dof_s
    return a, h, log_s, q_a, q_h, q_s


def tvp_mcmc(data, prior: TvpPrior, n_burn: int, n_draws: int, thin: int, rng) -> TvpChain:
    """Run the Gibbs sampler and keep every ``thin``-th sweep after burn-in."""
    rng = as_rng(rng)
    data = np.asarray(getattr(data, "stacked", data), dtype=float)
    n = data.shape[1]
    if data.shape[0] - prior.lags <= 3 * prior.lags * n:
        raise ConfigError(f"T={data.shape[0] - prior.lags} too short for a {n}-variable TVP-VAR({prior.lags})")
    if thin < 1 or n_draws < 1 or n_burn < 0:
        raise ConfigError("need n_draws >= 1, thin >= 1 and n_burn >= 0")
    d = tvp_data(data, prior.lags)
    mats = prior_matrices(prior, data)
    a, h, log_s, q_a, q_h, q_s = _initial_state(d, mats, prior.lags)
    t_len = d.y.shape[0]
    ind = draw_indicators(log_squared(orthogonal_residuals(d, a, h), prior.offset), log_s[1:], rng)

    store_a = np.empty((n_draws,) + a.shape)
    store_h = np.empty((n_draws,) + h.shape)
    store_s = np.empty((n_draws,) + log_s.shape)
    store_qa = np.empty((n_draws,) + q_a.shape)
    store_qh = [np.empty((n_draws,) + q.shape) for q in q_h]
    store_qs = np.empty((n_draws,) + q_s.shape)
    store_ind = np.empty((n_draws, t_len, n), dtype=np.int8)
    accepted = 0
    total = n_burn + n_draws * thin
    for sweep in range(total):
        try:
            a = draw_coefficients(d, h, log_s, q_a, mats, rng)
            h = draw_covariance_rows(d, a, log_s, q_h, mats, rng)
            # indicators must match the residuals implied by the new (a, h)
            ystar = log_squared(orthogonal_residuals(d, a, h), prior.offset)
            ind = draw_indicators(ystar, log_s[1:], rng)
            vol = draw_log_volatilities(d, a, h, q_s, ind, mats, rng, prior.offset, current=log_s, mh=prior.sv_mh)
            log_s, ind = vol.log_s, vol.indicators
            accepted += vol.accepted
            q_a, q_h, q_s = draw_innovation_covs(a, h, log_s, mats, rng)
        except (FilterBlewUp, NotPositiveDefinite, np.linalg.LinAlgError) as e:
            raise ChainDiverged(str(e), sweep) from None
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(log_s)) and np.all(np.isfinite(h))):
            raise ChainDiverged("non-finite state draw", sweep)
        if sweep >= n_burn and (sweep - n_burn) % thin == 0:
            k = (sweep - n_burn) // thin
            store_a[k], store_h[k], store_s[k] = a, h, log_s
            store_qa[k], store_qs[k], store_ind[k] = q_a, q_s, ind
            for buf, q in zip(store_qh, q_h):
                buf[k] = q
    rate = accepted / total if prior.sv_mh else float("nan")
    return TvpChain(n, prior.lags, data, store_a, store_h, store_s, store_qa, store_qh, store_qs, store_ind, rate)


# ------------------------------------------------------------------ diagnostics


def batch_means_se(x: np.ndarray, n_batches: int = 20) -> np.ndarray:
    """Monte Carlo standard error of the mean of each column by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    b = max(1, min(n_batches, n // 2))
    size = n // b
    means = x[: b * size].reshape((b, size) + x.shape[1:]).mean(axis=1)
    if b < 2:
        return np.full(x.shape[1:], np.nan)
    return means.std(axis=0, ddof=1) / np.sqrt(b)


def chain_diagnostics(chain: TvpChain) -> list[dict]:
    """Per-parameter trace summaries for the terminal state and the innovation covariances."""
    rows = []

    def add(name, trace):
        trace = np.asarray(trace, dtype=float)
        se = float(batch_means_se(trace[:, None])[0])
        sd = float(trace.std(ddof=1)) if trace.size > 1 else float("nan")
        ess = (sd / se) ** 2 if se and np.isfinite(se) and se > 0 else float("nan")
        rows.append({"parameter": name, "mean": float(trace.mean()), "sd": sd, "mcse": se,
                     "ess": ess, "q05": float(np.quantile(trace, 0.05)), "q95": float(np.quantile(trace, 0.95))})

    for j in range(chain.a.shape[2]):
        add(f"a_T[{j}]", chain.a[:, -1, j])
    for j in range(chain.h.shape[2]):
        add(f"h_T[{j}]", chain.h[:, -1, j])
    for j in range(chain.n):
        add(f"log_s_T[{j}]", chain.log_s[:, -1, j])
        add(f"Q_s[{j},{j}]", chain.q_s[:, j, j])
    add("trace_Q_a", np.trace(chain.q_a, axis1=1, axis2=2))
    if np.isfinite(chain.mh_acceptance):
        rows.append({"parameter": "mh_acceptance", "mean": chain.mh_acceptance, "sd": float("nan"),
                     "mcse": float("nan"), "ess": float("nan"), "q05": float("nan"), "q95": float("nan")})
    return rows
