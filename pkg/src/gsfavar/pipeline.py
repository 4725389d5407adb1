"""Configuration of a full factor-extraction + VAR pipeline and its two fitting steps."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import autoencoder as ae
from .errors import ConfigError
from .factors import METHODS, FactorSet, pca_factors, slow_moving_adjust, standardize_factors
from .numeric import as_rng, pca
from .var_tiv import TivDraws, TivPrior, gibbs_tiv
from .var_tvp import TvpChain, TvpPrior, tvp_mcmc

VAR_SPECS = ("tiv", "tvp")
MODEL_LABELS = {"pca": "PCA", "plain_ae": "AE", "gs_ae_linear": "Linear GS AE", "gs_ae_nonlinear": "Nonlinear GS AE"}


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "pca"
    var_spec: str = "tiv"
    k: int = 5
    depth: int = 3
    activation: str = "leaky_relu(1e-16)"
    lambda0: float = 1000.0
    lambda1: float = 1.0
    anchor_groups: tuple = ()
    hard_zero_anchors: bool = False
    epochs: int = 200
    batch_size: int = 24
    lags: int = 2
    n_burn: int = 1000
    n_draws: int = 5000
    thin: int = 5
    slow_adjust: bool | None = None  # None: on for PCA, off for autoencoders
    sample_xi: bool = False
    sv_mh: bool = False
    horizons: int = 4

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.var_spec not in VAR_SPECS:
            raise ConfigError(f"var_spec must be one of {VAR_SPECS}, got {self.var_spec!r}")
        if self.k < 1 or self.depth < 1 or self.lags < 1 or self.horizons < 1:
            raise ConfigError("k, depth, lags and horizons must be positive")
        if self.n_draws < 1 or self.thin < 1 or self.n_burn < 0:
            raise ConfigError("invalid MCMC sizes")
        ae.Activation.parse(self.activation)
        object.__setattr__(self, "anchor_groups", tuple(self.anchor_groups))

    @property
    def model_id(self) -> str:
        return f"{self.var_spec.upper()}-{MODEL_LABELS[self.method]}"

    @property
    def use_slow_adjust(self) -> bool:
        return self.method == "pca" if self.slow_adjust is None else self.slow_adjust

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["anchor_groups"] = list(self.anchor_groups)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown pipeline settings {sorted(unknown)}")
        return cls(**d)


def resolve_anchor_groups(panel, anchors, k: int) -> list[int]:
    """Map anchor group names or ids to manifest group ids; default to the first K groups."""
    present = sorted(set(int(g) for g in panel.x_groups))
    if not anchors:
        if len(present) < k:
            raise ConfigError(f"panel has {len(present)} groups, fewer than K={k}")
        return present[:k]
    by_name = {str(v): int(g) for g, v in (panel.group_names or {}).items()}
    out = []
    for a in anchors:
        if isinstance(a, str) and not a.lstrip("-").isdigit():
            if a not in by_name:
                raise ConfigError(f"anchor group {a!r} not in manifest")
            out.append(by_name[a])
        else:
            out.append(int(a))
    missing = [g for g in out if g not in present]
    if missing:
        raise ConfigError(f"anchor groups {missing} not present in the panel")
    if len(out) != k:
        raise ConfigError(f"{len(out)} anchor groups given for K={k} factors")
    return out


def build_autoencoder(panel, cfg: PipelineConfig, rng) -> tuple[ae.GsAeParams, ae.SslConfig | None, list[str] | None]:
    n = panel.x.shape[1]
    if cfg.method == "plain_ae":
        arch = ae.GsAeArchitecture.evenly_spaced(n, cfg.k, cfg.depth, ae.Activation.parse(cfg.activation), 1, grouped=False)
        return ae.init_params(arch, np.zeros(n, dtype=int), rng), None, None
    act = ae.Activation("identity") if cfg.method == "gs_ae_linear" else ae.Activation.parse(cfg.activation)
    anchors = resolve_anchor_groups(panel, cfg.anchor_groups, cfg.k)
    groups, order = ae.group_layout(panel.x_groups, anchors)
    arch = ae.GsAeArchitecture.evenly_spaced(n, cfg.k, cfg.depth, act, len(order), grouped=True)
    ssl = ae.SslConfig(cfg.lambda0, cfg.lambda1, hard_zero_anchors=cfg.hard_zero_anchors)
    names = [panel.group_names.get(g, f"group{g}") for g in anchors]
    return ae.init_params(arch, groups, rng, ssl), ssl, names


def fit_factors(panel, cfg: PipelineConfig, rng) -> tuple[FactorSet, ae.GsAeParams | None]:
    """Extract latent factors from ``panel`` (uses only the rows it is given)."""
    rng = as_rng(rng)
    if cfg.method == "pca":
        return pca_factors(panel, cfg.k, slow_adjust=cfg.use_slow_adjust), None
    params, ssl, _ = build_autoencoder(panel, cfg, rng.child(0))
    train_cfg = ae.TrainConfig(epochs=cfg.epochs, batch_size=min(cfg.batch_size, panel.n_obs))
    params, _ = ae.train(panel.x, params, ssl, train_cfg, rng.child(1))
    return factors_from_params(panel, params, cfg), params


def factors_from_params(panel, params: ae.GsAeParams, cfg: PipelineConfig) -> FactorSet:
    """Encode ``panel`` with trained parameters, then apply the optional slow-moving adjustment."""
    names = None
    if params.arch.grouped:
        anchors = resolve_anchor_groups(panel, cfg.anchor_groups, cfg.k)
        names = [panel.group_names.get(g, f"group{g}") for g in anchors]
    fs = ae.extract_factors(params, panel.x, panel.y, cfg.method, names)
    fs = FactorSet(fs.latent, fs.observable, fs.method, fs.anchor_names, tuple(panel.y_names), fs.degenerate)
    if cfg.use_slow_adjust and panel.y.shape[1] > 0:
        slow = panel.slow_x_index
        if slow.size < cfg.k:
            raise ConfigError(f"slow sub-panel has {slow.size} variables, fewer than K={cfg.k}")
        fs_slow = standardize_factors(pca(panel.x[:, slow], cfg.k).scores)[0]
        latent, degenerate = slow_moving_adjust(fs.latent, fs_slow, panel.y)
        fs = FactorSet(latent, fs.observable, fs.method, fs.anchor_names, fs.observable_names, degenerate)
    return fs


def fit_var(factors: FactorSet, cfg: PipelineConfig, rng) -> TivDraws | TvpChain:
    if cfg.var_spec == "tiv":
        prior = TivPrior(lags=cfg.lags, sample_xi=cfg.sample_xi)
        return gibbs_tiv(factors, prior, cfg.n_burn, cfg.n_draws, rng, thin=cfg.thin)
    return tvp_mcmc(factors, TvpPrior(lags=cfg.lags, sv_mh=cfg.sv_mh), cfg.n_burn, cfg.n_draws, cfg.thin, rng)
