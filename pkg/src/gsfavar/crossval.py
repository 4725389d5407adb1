"""Two-stage k-fold cross-validation for the autoencoders.

Stage 1 picks (K, L, activation) with plain autoencoders. Stage 2 fixes those
and picks (lambda0, lambda1) for the grouped sparse autoencoder. Validation
loss is reconstruction MSE on the held-out fold; the held-out ELBO is
recorded alongside.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import autoencoder as ae
from .errors import ConfigError, EmptyGrid
from .numeric import as_rng
from .pipeline import resolve_anchor_groups


@dataclass(frozen=True)
class CvGrids:
    factors: tuple[int, ...] = (2, 3, 4, 5)
    depths: tuple[int, ...] = (2, 3, 4, 5, 6)
    activations: tuple[str, ...] = ("tanh", "leaky_relu(0.01)", "leaky_relu(1e-16)")
    lambda0s: tuple[float, ...] = (100.0, 500.0, 1000.0)
    lambda1s: tuple[float, ...] = (1.0, 0.1, 0.01, 0.001)

    @property
    def stage1_cells(self) -> list[tuple[int, int, str]]:
        return list(itertools.product(self.factors, self.depths, self.activations))

    @property
    def stage2_cells(self) -> list[tuple[float, float]]:
        return list(itertools.product(self.lambda0s, self.lambda1s))


@dataclass
class CvResult:
    stage1: list[dict] = field(default_factory=list)
    stage2: list[dict] = field(default_factory=list)
    best_stage1: tuple | None = None
    best_stage2: tuple | None = None


def make_folds(t_len: int, n_folds: int, rng, blocked: bool = False) -> list[np.ndarray]:
    if not 2 <= n_folds <= t_len:
        raise ConfigError(f"need 2 <= folds <= T, got {n_folds}")
    idx = np.arange(t_len) if blocked else as_rng(rng).permutation(t_len)
    return [np.sort(f) for f in np.array_split(idx, n_folds)]


def _fold_losses(x, folds, build, ssl, train_cfg, rng) -> tuple[float, float]:
    mses, elbos = [], []
    for j, held in enumerate(folds):
        keep = np.setdiff1d(np.arange(x.shape[0]), held)
        params = build(rng.child(j, 0))
        cfg = replace(train_cfg, batch_size=min(train_cfg.batch_size, keep.size))
        params, _ = ae.train(x[keep], params, ssl, cfg, rng.child(j, 1))
        mses.append(ae.reconstruction_mse(params, x[held]))
        elbos.append(ae.elbo(params, ssl, x[held]))
    return float(np.mean(mses)), float(np.mean(elbos))


def cross_validate(panel, grids: CvGrids, rng, n_folds: int = 5, train_cfg: ae.TrainConfig | None = None,
                   blocked: bool = False, anchor_groups=()) -> CvResult:
    rng = as_rng(rng)
    train_cfg = train_cfg or ae.TrainConfig()
    cells1, cells2 = grids.stage1_cells, grids.stage2_cells
    if not cells1 or not cells2:
        raise EmptyGrid("both cross-validation grids need at least one cell")
    x = panel.x
    n = x.shape[1]
    folds = make_folds(x.shape[0], n_folds, rng.child(0), blocked)
    result = CvResult()

    for c, (k, depth, act) in enumerate(cells1):
        arch = ae.GsAeArchitecture.evenly_spaced(n, k, depth, ae.Activation.parse(act), 1, grouped=False)
        mse, elbo = _fold_losses(x, folds, lambda r: ae.init_params(arch, np.zeros(n, dtype=int), r),
                                 None, train_cfg, rng.child(1, c))
        result.stage1.append({"K": k, "L": depth, "activation": act, "mse": mse, "elbo": elbo})
    best = min(result.stage1, key=lambda r: r["mse"])
    result.best_stage1 = (best["K"], best["L"], best["activation"])

    k, depth, act = result.best_stage1
    anchors = resolve_anchor_groups(panel, anchor_groups, k)
    groups, order = ae.group_layout(panel.x_groups, anchors)
    arch = ae.GsAeArchitecture.evenly_spaced(n, k, depth, ae.Activation.parse(act), len(order), grouped=True)
    for c, (lam0, lam1) in enumerate(cells2):
        ssl = ae.SslConfig(lam0, lam1)
        mse, elbo = _fold_losses(x, folds, lambda r: ae.init_params(arch, groups, r, ssl),
                                 ssl, train_cfg, rng.child(2, c))
        result.stage2.append({"lambda0": lam0, "lambda1": lam1, "mse": mse, "elbo": elbo})
    best = min(result.stage2, key=lambda r: r["mse"])
    result.best_stage2 = (best["lambda0"], best["lambda1"])
    return result
