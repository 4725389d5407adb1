"""Predictive simulation, expanding-window forecasting and MAE / ALPL metrics.

All quantities are in the standardised units of the estimation window.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import ConfigError, ExplosiveForecast, GsFavarError, OriginMismatch, ShapeMismatch
from .numeric import as_rng
from .pipeline import PipelineConfig, fit_factors, fit_var
from .var_tiv import TivDraws
from .var_tvp import TvpChain, h_offsets, omega_matrices

EXPLOSIVE_LIMIT = 1e6
LOG_2PI = math.log(2.0 * math.pi)


class Predictive(NamedTuple):
    means: np.ndarray  # D x H x n conditional mean of the terminal step
    covs: np.ndarray  # D x H x n x n conditional covariance of the terminal step
    samples: np.ndarray  # D x H x n one simulated path per draw
    n_discarded: int


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    """A square root ``R`` with ``R R' = m`` for a batch of symmetric PSD matrices."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        w, u = np.linalg.eigh(m)
        return u * np.sqrt(np.maximum(w, 0.0))[..., None, :]


def _companion_step(coefs: np.ndarray, lagged: np.ndarray) -> np.ndarray:
    # coefs: D x n x nP, lagged: D x nP
    return np.einsum("dik,dk->di", coefs, lagged)


def simulate_predictive(draws: TivDraws | TvpChain, horizons: int, rng, history: np.ndarray | None = None) -> Predictive:
    """Simulate ``horizons`` steps ahead for every retained draw.

    Intermediate steps draw shocks; each horizon keeps the Gaussian of its
    final step given the simulated past. TVP draws also move their
    coefficient, covariance and volatility states forward as random walks.
    """
    rng = as_rng(rng)
    n, lags = draws.n, draws.lags
    hist = np.asarray(draws.history if history is None else history, dtype=float)[-lags:]
    if hist.shape != (lags, n):
        raise ShapeMismatch(f"history must be the last {lags} rows of a {n}-variable series")
    n_draws = draws.n_draws
    lagged = np.tile(hist[::-1].reshape(-1), (n_draws, 1))  # (y_T, y_{T-1}, ...)
    means = np.empty((n_draws, horizons, n))
    covs = np.empty((n_draws, horizons, n, n))
    samples = np.empty((n_draws, horizons, n))
    tvp = isinstance(draws, TvpChain)
    if tvp:
        a = draws.a[:, -1].copy()
        h = draws.h[:, -1].copy()
        log_s = draws.log_s[:, -1].copy()
        root_a = _sqrt_psd(draws.q_a)
        root_h = [_sqrt_psd(q) for q in draws.q_h]
        root_s = _sqrt_psd(draws.q_s)
        slices = h_offsets(n)
    else:
        coefs = draws.a.reshape(n_draws, n, n * lags)
        omega = draws.omega
    for step in range(horizons):
        if tvp:
            a = a + np.einsum("dij,dj->di", root_a, rng.standard_normal(a.shape))
            for sl, root in zip(slices, root_h):
                h[:, sl] += np.einsum("dij,dj->di", root, rng.standard_normal((n_draws, sl.stop - sl.start)))
            log_s = log_s + np.einsum("dij,dj->di", root_s, rng.standard_normal(log_s.shape))
            coefs = a.reshape(n_draws, n, n * lags)
            omega = omega_matrices(h, log_s)
        mu = _companion_step(coefs, lagged)
        means[:, step] = mu
        covs[:, step] = omega
        y_next = mu + np.einsum("dij,dj->di", _sqrt_psd(omega), rng.standard_normal((n_draws, n)))
        samples[:, step] = y_next
        lagged = np.concatenate([y_next, lagged[:, : n * (lags - 1)]], axis=1)
    with np.errstate(invalid="ignore"):
        bad = ~(np.all(np.abs(means) <= EXPLOSIVE_LIMIT, axis=(1, 2))
                & np.all(np.abs(samples) <= EXPLOSIVE_LIMIT, axis=(1, 2))
                & np.all(np.isfinite(covs), axis=(1, 2, 3)))
    if bad.all():
        raise ExplosiveForecast(f"all {n_draws} predictive draws exceeded {EXPLOSIVE_LIMIT:g}")
    keep = ~bad
    return Predictive(means[keep], covs[keep], samples[keep], int(bad.sum()))


def point_forecast(pred: Predictive, kind: str = "mean") -> np.ndarray:
    """H x n point forecasts: the predictive mean (default) or the median of simulated paths."""
    if kind == "mean":
        return pred.means.mean(axis=0)
    if kind == "median":
        return np.median(pred.samples, axis=0)
    raise ConfigError(f"unknown point forecast {kind!r}")


def log_predictive_density(pred: Predictive, realized: np.ndarray, joint: bool = False) -> np.ndarray:
    """Log of the draw-averaged terminal Gaussian density at ``realized`` (H x n).

    Per-variable marginals by default (H x n); ``joint`` returns H values.
    NaN realisations give NaN.
    """
    realized = np.asarray(realized, dtype=float)
    n_draws = pred.means.shape[0]
    if joint:
        out = np.full(realized.shape[0], np.nan)
        for h in range(realized.shape[0]):
            if np.any(np.isnan(realized[h])):
                continue
            diff = realized[h] - pred.means[:, h]
            chol = np.linalg.cholesky(pred.covs[:, h])
            z = np.linalg.solve(chol, diff[..., None])[..., 0]
            logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
            comp = -0.5 * (diff.shape[1] * LOG_2PI + logdet + np.sum(z * z, axis=1))
            out[h] = special.logsumexp(comp) - math.log(n_draws)
        return out
    var = np.diagonal(pred.covs, axis1=2, axis2=3)
    comp = -0.5 * (LOG_2PI + np.log(var) + (realized[None] - pred.means) ** 2 / var)
    return special.logsumexp(comp, axis=0) - math.log(n_draws)


# ------------------------------------------------------------------ expanding window


@dataclass
class ForecastRun:
    model: str
    origins: tuple[int, ...]
    origin_dates: tuple[str, ...]
    variables: tuple[str, ...]
    horizons: int
    point: np.ndarray  # O x H x M
    realized: np.ndarray  # O x H x M, NaN where not yet observed
    logdens: np.ndarray  # O x H x M
    n_discarded: np.ndarray  # O
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.origins, self.origins[1:])):
            raise ConfigError("origins must be strictly increasing")


def run_expanding_window(panel, cfg: PipelineConfig, rng, first_origin: int, last_origin: int | None = None,
                         point_kind: str = "mean") -> ForecastRun:
    """Refit factors and VAR on rows ``0..o`` for every origin ``o`` and forecast the observables.

    Standardisation statistics are recomputed per window, so nothing after
    ``o`` enters the origin's forecasts. Failures are recorded per origin.
    """
    rng = as_rng(rng)
    last = panel.n_obs - 2 if last_origin is None else last_origin
    if not 0 <= first_origin <= last < panel.n_obs - 1:
        raise ConfigError(f"origins must satisfy 0 <= first <= last < {panel.n_obs - 1}")
    y_cols = panel.y_index
    if y_cols.size == 0:
        raise ConfigError("panel has no observable variables to forecast")
    raw = panel.transformed()
    origins = list(range(first_origin, last + 1))
    n_o, n_h, n_m = len(origins), cfg.horizons, y_cols.size
    point = np.full((n_o, n_h, n_m), np.nan)
    realized = np.full((n_o, n_h, n_m), np.nan)
    logdens = np.full((n_o, n_h, n_m), np.nan)
    discarded = np.zeros(n_o, dtype=int)
    failures = {}
    for i, o in enumerate(origins):
        window = panel.window(0, o + 1)
        avail = min(n_h, panel.n_obs - 1 - o)
        realized[i, :avail] = (raw[o + 1:o + 1 + avail, y_cols] - window.means[y_cols]) / window.stds[y_cols]
        try:
            factors, _ = fit_factors(window, cfg, rng.child(o, 0))
            draws = fit_var(factors, cfg, rng.child(o, 1))
            pred = simulate_predictive(draws, n_h, rng.child(o, 2))
        except GsFavarError as e:
            failures[o] = f"{type(e).__name__}: {e}"
            continue
        m_slice = slice(draws.n - n_m, draws.n)
        sub = Predictive(pred.means[..., m_slice], pred.covs[..., m_slice, m_slice], pred.samples[..., m_slice],
                         pred.n_discarded)
        point[i] = point_forecast(sub, point_kind)
        logdens[i] = log_predictive_density(sub, realized[i])
        discarded[i] = pred.n_discarded
    return ForecastRun(cfg.model_id, tuple(origins), tuple(panel.dates[o] for o in origins), tuple(panel.y_names),
                       n_h, point, realized, logdens, discarded, failures)


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class MetricTable:
    model: str
    benchmark: str
    variables: tuple[str, ...]
    mae: np.ndarray  # H x M
    alpl: np.ndarray
    rel_mae: np.ndarray
    rel_alpl: np.ndarray
    cumulative_alpl: np.ndarray  # O x H x M, running sum of model minus benchmark log densities


def _mae_alpl(run: ForecastRun) -> tuple[np.ndarray, np.ndarray]:
    err = np.abs(run.point - run.realized)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN horizons
        return np.nanmean(err, axis=0), np.nanmean(run.logdens, axis=0)


def compute_metrics(run: ForecastRun, benchmark: ForecastRun | None = None) -> MetricTable:
    """MAE, ALPL and their ratios / differences against ``benchmark`` (itself when omitted)."""
    benchmark = run if benchmark is None else benchmark
    if run.origins != benchmark.origins or run.horizons != benchmark.horizons:
        raise OriginMismatch(f"{run.model} and {benchmark.model} do not share origins and horizons")
    if run.variables != benchmark.variables:
        raise OriginMismatch("runs forecast different variables")
    mae, alpl = _mae_alpl(run)
    b_mae, b_alpl = _mae_alpl(benchmark)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_mae = np.where(mae == b_mae, 1.0, mae / b_mae)
    rel_alpl = np.where(alpl == b_alpl, 0.0, alpl - b_alpl)
    diff = np.nan_to_num(run.logdens - benchmark.logdens, nan=0.0)
    return MetricTable(run.model, benchmark.model, run.variables, mae, alpl, rel_mae, rel_alpl, np.cumsum(diff, axis=0))


# ------------------------------------------------------------------ export


def run_to_csv(run: ForecastRun, path) -> None:
    """Tidy long format: model, variable, horizon, origin, quantity, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "variable", "horizon", "origin", "quantity", "value"])
        for i, date in enumerate(run.origin_dates):
            for h in range(run.horizons):
                for m, var in enumerate(run.variables):
                    for name, arr in (("point", run.point), ("realized", run.realized), ("log_density", run.logdens)):
                        w.writerow([run.model, var, h + 1, date, name, repr(float(arr[i, h, m]))])


def metrics_to_csv(table: MetricTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "benchmark", "variable", "horizon", "metric", "value"])
        for h in range(table.mae.shape[0]):
            for m, var in enumerate(table.variables):
                for name, arr in (("MAE", table.mae), ("ALPL", table.alpl),
                                  ("relative_MAE", table.rel_mae), ("relative_ALPL", table.rel_alpl)):
                    w.writerow([table.model, table.benchmark, var, h + 1, name, repr(float(arr[h, m]))])


def metrics_summary(tables: list[MetricTable]) -> dict:
    """Nested ``{model: {variable: {"h=1": {...}}}}`` mirroring a model-by-variable results table."""
    out = {}
    for t in tables:
        per_var = {}
        for m, var in enumerate(t.variables):
            per_var[var] = {
                f"h={h + 1}": {"MAE": _num(t.mae[h, m]), "ALPL": _num(t.alpl[h, m]),
                               "relative_MAE": _num(t.rel_mae[h, m]), "relative_ALPL": _num(t.rel_alpl[h, m])}
                for h in range(t.mae.shape[0])
            }
        out[t.model] = {"benchmark": t.benchmark, "variables": per_var}
    return out


def _num(v: float):
    v = float(v)
    return v if math.isfinite(v) else None


def write_metrics_json(tables: list[MetricTable], path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics_summary(tables), fh, indent=2, sort_keys=True)
        fh.write("\n")
