"""Recursively identified impulse responses for the VAR block and the panel."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BadOrdering, DrawCountMismatch, ShapeMismatch, TimeOutOfRange
from .var_tiv import TivDraws, coef_matrices
from .var_tvp import TvpChain, impact_matrices

QUANTILES = (0.16, 0.5, 0.84)


@dataclass(frozen=True)
class ShockSpec:
    """Shock to ``target`` of ``size`` original units; ``scale`` converts to standardised units."""

    target: int = -1
    size: float = -1.0
    scale: float = 1.0  # sample std of the target series
    require_last: bool = True

    def standardized_size(self) -> float:
        return self.size / self.scale


def companion(coefs: np.ndarray) -> np.ndarray:
    lags, n, _ = coefs.shape
    top = np.concatenate(list(coefs), axis=1)
    if lags == 1:
        return top
    bottom = np.eye(n * (lags - 1), n * lags)
    return np.vstack([top, bottom])


def _target_index(shock: ShockSpec, n: int) -> int:
    idx = shock.target % n
    if shock.require_last and idx != n - 1:
        raise BadOrdering(f"shocked variable {idx} is not last in the recursive ordering of {n}")
    return idx


def irf_var(coefs: np.ndarray, impact: np.ndarray, shock: ShockSpec, horizons: int) -> np.ndarray:
    """Responses for h = 0..horizons, shape (horizons+1, n).

    ``impact`` is the lower-triangular ``H S`` (or the Cholesky factor of
    Omega). The target's column is scaled so the target moves by the
    standardised shock size on impact, then propagated through the
    companion form of ``coefs`` (P x n x n).
    """
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 3 or coefs.shape[1] != coefs.shape[2]:
        raise ShapeMismatch("coefs must be P x n x n")
    n = coefs.shape[1]
    j = _target_index(shock, n)
    col = np.asarray(impact, dtype=float)[:, j]
    vec = col / col[j] * shock.standardized_size()
    comp = companion(coefs)
    state = np.zeros(comp.shape[0])
    state[:n] = vec
    out = np.empty((horizons + 1, n))
    for h in range(horizons + 1):
        out[h] = state[:n]
        state = comp @ state
    return out


@dataclass(frozen=True)
class IrfResult:
    responses: np.ndarray  # draws x times x (H+1) x variables
    times: tuple[int, ...]
    variables: tuple[str, ...]

    def quantiles(self, probs=QUANTILES) -> np.ndarray:
        """probs x times x (H+1) x variables."""
        return np.quantile(self.responses, probs, axis=0)

    def median(self) -> np.ndarray:
        return np.median(self.responses, axis=0)


def irf_over_time(draws: TivDraws | TvpChain, shock: ShockSpec, horizons: int, times=None,
                  names=None) -> IrfResult:
    """IRFs per retained draw at each requested sample index (0-based, observation time).

    TVP parameters are frozen at ``t`` over the horizon. TIV draws give the
    same surface at every ``t``.
    """
    if isinstance(draws, TvpChain):
        t_len = draws.a.shape[1] - 1
    else:
        t_len = draws.history.shape[0] - draws.lags
    times = tuple(range(t_len)) if times is None else tuple(int(t) for t in times)
    bad = [t for t in times if not 0 <= t < t_len]
    if bad:
        raise TimeOutOfRange(f"times {bad} outside 0..{t_len - 1}")
    n, lags = draws.n, draws.lags
    out = np.empty((draws.n_draws, len(times), horizons + 1, n))
    for d in range(draws.n_draws):
        if isinstance(draws, TvpChain):
            for i, t in enumerate(times):
                coefs = coef_matrices(draws.a[d, t + 1], n, lags)
                impact = impact_matrices(draws.h[d, t + 1], draws.log_s[d, t + 1])
                out[d, i] = irf_var(coefs, impact, shock, horizons)
        else:
            resp = irf_var(draws.coef(d), np.linalg.cholesky(draws.omega[d]), shock, horizons)
            out[d, :] = resp
    names = tuple(names) if names is not None else tuple(f"v{i + 1}" for i in range(n))
    return IrfResult(out, times, names)


def irf_panel(var_irfs: np.ndarray, loadings: np.ndarray, mean_loadings: bool = False,
              stds: np.ndarray | None = None) -> np.ndarray:
    """Map VAR responses (draws x ... x q) to the panel through ``Lambda`` (draws x N x q).

    Draws are paired by index. With ``mean_loadings`` the posterior mean of
    Lambda is used for every draw. ``stds`` rescales to original units.
    """
    var_irfs = np.asarray(var_irfs, dtype=float)
    lam = np.asarray(loadings, dtype=float)
    if lam.ndim == 2:
        lam = lam[None]
    if mean_loadings:
        lam = lam.mean(axis=0, keepdims=True)
    elif lam.shape[0] != var_irfs.shape[0]:
        raise DrawCountMismatch(f"{lam.shape[0]} loading draws vs {var_irfs.shape[0]} VAR draws")
    if lam.shape[-1] != var_irfs.shape[-1]:
        raise ShapeMismatch("loadings and VAR responses disagree on the number of factors")
    lam = np.broadcast_to(lam, (var_irfs.shape[0],) + lam.shape[1:])
    out = np.einsum("dnq,d...q->d...n", lam, var_irfs)
    if stds is not None:
        out = out * np.asarray(stds)
    return out


def irf_to_csv(result: IrfResult, path, time_labels=None, panel_responses: np.ndarray | None = None,
               panel_names=None) -> None:
    """Tidy draw summary: time, horizon, variable, q16, q50, q84."""
    labels = list(time_labels) if time_labels is not None else [str(t) for t in result.times]
    blocks = [(result.variables, result.responses)]
    if panel_responses is not None:
        blocks.append((tuple(panel_names), panel_responses))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "horizon", "variable", "q16", "q50", "q84"])
        for names, resp in blocks:
            q = np.quantile(resp, QUANTILES, axis=0)
            for i, lab in enumerate(labels):
                for h in range(q.shape[2]):
                    for v, name in enumerate(names):
                        w.writerow([lab, h, name, *(repr(float(q[k, i, h, v])) for k in range(3))])
