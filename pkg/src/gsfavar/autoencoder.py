"""Grouped sparse autoencoder with a spike-and-slab lasso prior on group masks.

The encoder is a plain MLP ending in a linear K-dimensional layer. The decoder
multiplies the factors element-wise by the mask row ``B[c]`` of the variable's
group, runs the result through shared hidden layers, and finishes with a
per-variable affine map to a scalar. The plain (ungrouped) autoencoder is the
special case of one group with a fixed all-ones mask and no prior.

Gradients are computed by hand-written reverse-mode passes; everything is
float64 NumPy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import expit, xlogy

from .errors import ConfigError, DivergedLoss, ShapeMismatch
from .numeric import RngStream, as_rng


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class Activation:
    kind: str = "leaky_relu"
    slope: float = 1e-16

    def __post_init__(self):
        if self.kind not in ("tanh", "leaky_relu", "identity"):
            raise ConfigError(f"unknown activation {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Activation":
        """Parse ``tanh``, ``identity``, ``relu`` or ``leaky_relu(<slope>)``."""
        text = text.strip().lower()
        if text in ("tanh", "identity", "linear"):
            return cls("identity" if text == "linear" else text, 0.0)
        if text == "relu":
            return cls("leaky_relu", 0.0)
        if text.startswith("leaky_relu"):
            inner = text[len("leaky_relu"):].strip("():= ")
            return cls("leaky_relu", float(inner) if inner else 0.01)
        raise ConfigError(f"cannot parse activation {text!r}")

    def __str__(self) -> str:
        return f"leaky_relu({self.slope:g})" if self.kind == "leaky_relu" else self.kind

    @property
    def injective(self) -> bool:
        if self.kind == "leaky_relu":
            return 0.0 < self.slope < 1.0
        return True

    def forward(self, pre: np.ndarray) -> np.ndarray:
        if self.kind == "tanh":
            return np.tanh(pre)
        if self.kind == "leaky_relu":
            return np.where(pre > 0, pre, self.slope * pre)
        return pre

    def backward(self, pre: np.ndarray, out: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.kind == "tanh":
            return grad * (1.0 - out * out)
        if self.kind == "leaky_relu":
            return grad * np.where(pre > 0, 1.0, self.slope)
        return grad


@dataclass(frozen=True)
class GsAeArchitecture:
    """Layer sizes. ``encoder_dims`` ends at K; ``decoder_dims`` lists the shared hidden widths."""

    n_vars: int
    n_factors: int
    n_groups: int
    encoder_dims: tuple[int, ...]
    decoder_dims: tuple[int, ...]
    activation: Activation = field(default_factory=Activation)
    grouped: bool = True

    def __post_init__(self):
        if not self.encoder_dims or self.encoder_dims[-1] != self.n_factors:
            raise ConfigError("the last encoder layer must have K units")
        if len(self.decoder_dims) != len(self.encoder_dims) - 1:
            raise ConfigError("decoder needs L-1 shared layers for an L-layer encoder")
        if not self.grouped and self.n_groups != 1:
            raise ConfigError("the plain autoencoder has a single group")

    @property
    def depth(self) -> int:
        return len(self.encoder_dims)

    @classmethod
    def evenly_spaced(cls, n_vars: int, n_factors: int, depth: int, activation: Activation,
                      n_groups: int = 1, grouped: bool = True) -> "GsAeArchitecture":
        """Encoder widths shrink linearly from N to K; the decoder mirrors them.

        For N=165, K=5, L=3 this gives encoder (111, 58, 5), decoder (58, 111).
        """
        step = (n_vars - n_factors) / depth
        enc = tuple(int(n_vars - step * l) for l in range(1, depth)) + (n_factors,)
        dec = tuple(reversed(enc[:-1]))
        return cls(n_vars, n_factors, n_groups, enc, dec, activation, grouped)


@dataclass(frozen=True)
class SslConfig:
    lambda0: float = 1000.0
    lambda1: float = 1.0
    bernoulli_prior: float = 0.5
    hard_zero_anchors: bool = False

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.lambda1 > 0):
            raise ConfigError("SSL rates must be positive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 24
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle: bool = True


# ------------------------------------------------------------------ params


@dataclass
class GsAeParams:
    arch: GsAeArchitecture
    enc_w: list[np.ndarray]
    enc_b: list[np.ndarray]
    dec_w: list[np.ndarray]
    dec_b: list[np.ndarray]
    out_w: np.ndarray  # N x D_{L-1}: one output row per variable
    out_b: np.ndarray
    B: np.ndarray
    P: np.ndarray
    anchor_mask: np.ndarray  # C x K, True on every cell of an anchor row
    groups: np.ndarray  # group index 0..C-1 of each variable
    hard_zero: bool = False

    @property
    def anchor_rows(self) -> int:
        return int(self.anchor_mask.any(axis=1).sum())

    @property
    def anchor_pattern(self) -> np.ndarray:
        """Fixed inclusion probabilities of anchor rows: identity over the first rows."""
        pat = np.zeros_like(self.P)
        for k in range(self.anchor_rows):
            pat[k, k] = 1.0
        return pat

    @property
    def hard_zero_mask(self) -> np.ndarray:
        """Cells pinned to exactly zero (off-anchor cells of anchor rows in hard-zero mode)."""
        if not self.hard_zero:
            return np.zeros_like(self.anchor_mask)
        return self.anchor_mask & (self.anchor_pattern == 0)

    def trainable(self) -> list[np.ndarray]:
        arrays = [*self.enc_w, *self.enc_b, *self.dec_w, *self.dec_b, self.out_w, self.out_b]
        if self.arch.grouped:
            arrays.append(self.B)
        return arrays

    def trainable_names(self) -> list[str]:
        names = [f"enc_w{l}" for l in range(len(self.enc_w))] + [f"enc_b{l}" for l in range(len(self.enc_b))]
        names += [f"dec_w{l}" for l in range(len(self.dec_w))] + [f"dec_b{l}" for l in range(len(self.dec_b))]
        names += ["out_w", "out_b"]
        if self.arch.grouped:
            names.append("B")
        return names

    def copy(self) -> "GsAeParams":
        return replace(
            self,
            enc_w=[w.copy() for w in self.enc_w],
            enc_b=[b.copy() for b in self.enc_b],
            dec_w=[w.copy() for w in self.dec_w],
            dec_b=[b.copy() for b in self.dec_b],
            out_w=self.out_w.copy(),
            out_b=self.out_b.copy(),
            B=self.B.copy(),
            P=self.P.copy(),
        )


def group_layout(group_ids: Sequence[int], anchor_group_ids: Sequence[int] | None) -> tuple[np.ndarray, list[int]]:
    """Re-index raw group ids so anchor groups come first, in factor order.

    Returns the per-variable group index and the raw id of each index.
    """
    raw = [int(g) for g in group_ids]
    present = sorted(set(raw))
    anchors = [int(a) for a in (anchor_group_ids or [])]
    missing = [a for a in anchors if a not in present]
    if missing:
        raise ConfigError(f"anchor groups {missing} have no variables")
    if len(set(anchors)) != len(anchors):
        raise ConfigError("anchor groups must be distinct")
    order = anchors + [g for g in present if g not in anchors]
    lookup = {g: i for i, g in enumerate(order)}
    return np.array([lookup[g] for g in raw], dtype=int), order


def _glorot(rng: RngStream, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rng.uniform((fan_out, fan_in)) - 1.0) * limit


def init_params(arch: GsAeArchitecture, groups: np.ndarray, rng, ssl: SslConfig | None = None,
                n_anchors: int | None = None) -> GsAeParams:
    """Glorot-uniform weights, zero biases; B starts at 0.5 on anchor cells and 0.1 elsewhere."""
    rng = as_rng(rng)
    groups = np.asarray(groups, dtype=int)
    if groups.shape != (arch.n_vars,):
        raise ShapeMismatch(f"groups must have length {arch.n_vars}")
    if groups.min() < 0 or groups.max() >= arch.n_groups:
        raise ConfigError("group index out of range")
    k, c = arch.n_factors, arch.n_groups
    enc_w, enc_b, prev = [], [], arch.n_vars
    for d in arch.encoder_dims:
        enc_w.append(_glorot(rng, d, prev))
        enc_b.append(np.zeros(d))
        prev = d
    dec_w, dec_b, prev = [], [], k
    for d in arch.decoder_dims:
        dec_w.append(_glorot(rng, d, prev))
        dec_b.append(np.zeros(d))
        prev = d
    # each variable's output layer is its own (1 x D) map
    out_w = (2.0 * rng.uniform((arch.n_vars, prev)) - 1.0) * np.sqrt(6.0 / (prev + 1))
    out_b = np.zeros(arch.n_vars)

    anchor_mask = np.zeros((c, k), dtype=bool)
    if arch.grouped:
        n_anchors = k if n_anchors is None else n_anchors
        if n_anchors > min(c, k):
            raise ConfigError("more anchor groups than groups or factors")
        anchor_mask[:n_anchors] = True
        b = np.full((c, k), 0.1)
        for j in range(n_anchors):
            b[j, j] = 0.5
    else:
        b = np.ones((c, k))
    params = GsAeParams(arch, enc_w, enc_b, dec_w, dec_b, out_w, out_b, b, np.zeros((c, k)),
                        anchor_mask, groups, hard_zero=bool(ssl and ssl.hard_zero_anchors and arch.grouped))
    params.B[params.hard_zero_mask] = 0.0
    if arch.grouped and ssl is not None:
        params.P = gamma_posterior(params.B, ssl, params)
    return params


# ------------------------------------------------------------------ forward


def _encode_pass(params: GsAeParams, x: np.ndarray):
    act = params.arch.activation
    h = x
    cache = []
    last = len(params.enc_w) - 1
    for l, (w, b) in enumerate(zip(params.enc_w, params.enc_b)):
        pre = h @ w.T + b
        out = pre if l == last else act.forward(pre)
        cache.append((h, pre, out))
        h = out
    return h, cache


def encode(params: GsAeParams, x_batch: np.ndarray) -> np.ndarray:
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    if x_batch.shape[1] != params.arch.n_vars:
        raise ShapeMismatch(f"expected {params.arch.n_vars} columns, got {x_batch.shape[1]}")
    return _encode_pass(params, x_batch)[0]


def _decode_pass(params: GsAeParams, f: np.ndarray):
    act = params.arch.activation
    z = f[None, :, :] * params.B[:, None, :]  # C x batch x K
    u = z
    cache = []
    for w, b in zip(params.dec_w, params.dec_b):
        pre = u @ w.T + b
        out = act.forward(pre)
        cache.append((u, pre, out))
        u = out
    sel = u[params.groups]  # N x batch x D
    xhat = np.einsum("nbd,nd->bn", sel, params.out_w) + params.out_b
    return xhat, z, u, cache


def decode(params: GsAeParams, factors: np.ndarray) -> np.ndarray:
    factors = np.atleast_2d(np.asarray(factors, dtype=float))
    if factors.shape[1] != params.arch.n_factors:
        raise ShapeMismatch(f"expected {params.arch.n_factors} factors, got {factors.shape[1]}")
    return _decode_pass(params, factors)[0]


def reconstruct(params: GsAeParams, x: np.ndarray) -> np.ndarray:
    return decode(params, encode(params, x))


# ------------------------------------------------------------------ objective


def _log_laplace(beta: np.ndarray, lam: float) -> np.ndarray:
    return np.log(lam / 2.0) - lam * np.abs(beta)


def gamma_posterior(B: np.ndarray, ssl: SslConfig, params: GsAeParams | None = None) -> np.ndarray:
    """Posterior slab probability psi1/(psi0+psi1) of every mask entry.

    Anchor rows are overwritten with their fixed identity pattern when
    ``params`` is given.
    """
    B = np.asarray(B, dtype=float)
    logit = np.log(ssl.lambda1 / ssl.lambda0) + (ssl.lambda0 - ssl.lambda1) * np.abs(B)
    p = expit(logit)
    if params is not None and params.anchor_mask.any():
        p = np.where(params.anchor_mask, params.anchor_pattern, p)
    return p


def ssl_penalty(B: np.ndarray, P: np.ndarray, ssl: SslConfig) -> float:
    """Sum over cells of p(log psi1 - log p) + (1-p)(log psi0 - log(1-p)), unscaled."""
    terms = (P * _log_laplace(B, ssl.lambda1) - xlogy(P, P)
             + (1.0 - P) * _log_laplace(B, ssl.lambda0) - xlogy(1.0 - P, 1.0 - P))
    return float(np.sum(terms))


@dataclass(frozen=True)
class ElboParts:
    elbo: float
    reconstruction: float  # (1/2T') * sum_t MSE_t
    regularization: float  # scaled SSL term as it enters the ELBO


def elbo_parts(params: GsAeParams, ssl: SslConfig | None, x_batch: np.ndarray) -> ElboParts:
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    if x_batch.shape[0] == 0:
        raise ShapeMismatch("empty batch")
    nb, n = x_batch.shape
    xhat = reconstruct(params, x_batch)
    recon = float(np.sum((x_batch - xhat) ** 2) / (2.0 * nb * n))
    reg = 0.0
    if params.arch.grouped and ssl is not None:
        reg = ssl_penalty(params.B, params.P, ssl) / (nb * n)
    return ElboParts(-recon + reg, recon, reg)


def elbo(params: GsAeParams, ssl: SslConfig | None, x_batch: np.ndarray) -> float:
    """Batch ELBO: -(1/2T') sum_t MSE(x_t, xhat_t) + (1/(T' N)) * SSL expectation term."""
    return elbo_parts(params, ssl, x_batch).elbo


def grad_elbo(params: GsAeParams, ssl: SslConfig | None, x_batch: np.ndarray) -> list[np.ndarray]:
    """Exact gradient of :func:`elbo` w.r.t. ``params.trainable()``, holding P fixed."""
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    nb, n = x_batch.shape
    if nb == 0:
        raise ShapeMismatch("empty batch")
    act = params.arch.activation
    f, enc_cache = _encode_pass(params, x_batch)
    xhat, z, u, dec_cache = _decode_pass(params, f)

    g = (x_batch - xhat) / (nb * n)  # d elbo / d xhat
    sel = u[params.groups]
    g_out_w = np.einsum("bn,nbd->nd", g, sel)
    g_out_b = g.sum(axis=0)

    c = params.arch.n_groups
    du = np.zeros_like(u)
    for gi in range(c):
        idx = np.flatnonzero(params.groups == gi)
        if idx.size:
            du[gi] = g[:, idx] @ params.out_w[idx]

    g_dec_w = [None] * len(params.dec_w)
    g_dec_b = [None] * len(params.dec_b)
    for l in range(len(params.dec_w) - 1, -1, -1):
        inp, pre, out = dec_cache[l]
        dpre = act.backward(pre, out, du)
        g_dec_w[l] = np.einsum("cbo,cbi->oi", dpre, inp)
        g_dec_b[l] = dpre.sum(axis=(0, 1))
        du = dpre @ params.dec_w[l]
    dz = du  # C x batch x K

    df = np.einsum("cbk,ck->bk", dz, params.B)
    grads_tail = []
    if params.arch.grouped:
        g_b = np.einsum("cbk,bk->ck", dz, f)
        if ssl is not None:
            rate = params.P * ssl.lambda1 + (1.0 - params.P) * ssl.lambda0
            g_b -= rate * np.sign(params.B) / (nb * n)
        g_b[params.hard_zero_mask] = 0.0
        grads_tail.append(g_b)

    g_enc_w = [None] * len(params.enc_w)
    g_enc_b = [None] * len(params.enc_b)
    last = len(params.enc_w) - 1
    dh = df
    for l in range(last, -1, -1):
        inp, pre, out = enc_cache[l]
        dpre = dh if l == last else act.backward(pre, out, dh)
        g_enc_w[l] = dpre.T @ inp
        g_enc_b[l] = dpre.sum(axis=0)
        dh = dpre @ params.enc_w[l]

    return [*g_enc_w, *g_enc_b, *g_dec_w, *g_dec_b, g_out_w, g_out_b, *grads_tail]


# ------------------------------------------------------------------ optimiser


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_step(state: AdamState, params: GsAeParams, grads: Sequence[np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> tuple[GsAeParams, AdamState]:
    """One bias-corrected Adam *ascent* step, applied in place."""
    arrays = params.trainable()
    if len(arrays) != len(grads) or len(state.m) != len(arrays):
        raise ShapeMismatch("optimizer state does not match parameters")
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        a += lr * (m / c1) / (np.sqrt(v / c2) + eps)
    if params.hard_zero:
        params.B[params.hard_zero_mask] = 0.0
    return params, state


# ------------------------------------------------------------------ training


@dataclass
class LossTrace:
    total: list[float] = field(default_factory=list)
    reconstruction: list[float] = field(default_factory=list)
    regularization: list[float] = field(default_factory=list)

    @property
    def elbo(self) -> list[float]:
        return [-v for v in self.total]


def train(x: np.ndarray, params: GsAeParams, ssl: SslConfig | None, cfg: TrainConfig, rng) -> tuple[GsAeParams, LossTrace]:
    """Mini-batch Adam ascent on the ELBO, refreshing P after every step.

    Losses recorded per epoch are batch means of ``reconstruction`` (half the
    MSE), ``regularization`` (minus the scaled SSL term) and their sum.
    """
    rng = as_rng(rng)
    x = np.asarray(x, dtype=float)
    t_len = x.shape[0]
    if cfg.batch_size < 1 or cfg.batch_size > t_len:
        raise ConfigError(f"batch size {cfg.batch_size} outside [1, {t_len}]")
    if cfg.epochs < 0:
        raise ConfigError("epochs must be non-negative")
    params = params.copy()
    use_ssl = params.arch.grouped and ssl is not None
    if use_ssl:
        params.P = gamma_posterior(params.B, ssl, params)
    state = AdamState.zeros_like(params.trainable())
    trace = LossTrace()
    for epoch in range(cfg.epochs):
        order = rng.permutation(t_len) if cfg.shuffle else np.arange(t_len)
        rec_sum = reg_sum = 0.0
        n_batches = 0
        for start in range(0, t_len, cfg.batch_size):
            batch = x[order[start:start + cfg.batch_size]]
            parts = elbo_parts(params, ssl, batch)
            if not np.isfinite(parts.elbo):
                raise DivergedLoss(f"non-finite loss in epoch {epoch + 1}")
            grads = grad_elbo(params, ssl, batch)
            adam_step(state, params, grads, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            if use_ssl:
                params.P = gamma_posterior(params.B, ssl, params)
            rec_sum += parts.reconstruction
            reg_sum += -parts.regularization
            n_batches += 1
        trace.reconstruction.append(rec_sum / n_batches)
        trace.regularization.append(reg_sum / n_batches)
        trace.total.append((rec_sum + reg_sum) / n_batches)
    return params, trace


def reconstruction_mse(params: GsAeParams, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.mean((x - reconstruct(params, x)) ** 2))


# ------------------------------------------------------------------ injectivity


@dataclass(frozen=True)
class InjectivityReport:
    activation_injective: bool
    layer_min_singular_values: tuple[float, ...]
    layer_full_column_rank: tuple[bool, ...]
    note: str

    @property
    def passed(self) -> bool:
        return self.activation_injective and all(self.layer_full_column_rank)


def check_injectivity(params: GsAeParams, rtol: float = 1e-8) -> InjectivityReport:
    """Check the conditions under which the anchor decoders are injective.

    The activation must be injective and each shared decoder weight must have
    full column rank (smallest singular value above ``rtol`` times the
    largest). The identity rows stacked under each per-variable output weight
    are a theoretical device: they hold by construction and are never stored.
    """
    mins, ranks = [], []
    for w in params.dec_w:
        s = np.linalg.svd(w, compute_uv=False)
        full = w.shape[0] >= w.shape[1] and s.size == w.shape[1] and s[-1] > rtol * s[0]
        mins.append(float(s[-1]) if s.size else 0.0)
        ranks.append(bool(full))
    note = ("output-layer identity augmentation satisfied by construction "
            "(appended identity rows are never materialised)")
    return InjectivityReport(params.arch.activation.injective, tuple(mins), tuple(ranks), note)


# ------------------------------------------------------------------ extraction


def extract_factors(params: GsAeParams, x: np.ndarray, observable: np.ndarray | None = None,
                    method: str | None = None, anchor_names: Sequence[str] | None = None):
    """Encode the panel, standardise each factor and fix its sign.

    A factor with an anchor group is signed to correlate positively with the
    mean of that group's variables; otherwise with the variable it tracks
    most closely.
    """
    from .factors import FactorSet, standardize_factors

    x = np.asarray(x, dtype=float)
    f, degenerate = standardize_factors(encode(params, x))
    for k in range(f.shape[1]):
        if degenerate[k]:
            continue
        if k < params.anchor_rows:
            ref = x[:, params.groups == k].mean(axis=1)
        else:
            corr = np.nan_to_num((x - x.mean(0)).T @ f[:, k])
            ref = x[:, int(np.argmax(np.abs(corr)))]
        if np.dot(ref - ref.mean(), f[:, k]) < 0:
            f[:, k] = -f[:, k]
    if observable is None:
        observable = np.zeros((x.shape[0], 0))
    if method is None:
        if not params.arch.grouped:
            method = "plain_ae"
        else:
            method = "gs_ae_linear" if params.arch.activation.kind == "identity" else "gs_ae_nonlinear"
    return FactorSet(f, np.asarray(observable, dtype=float), method,
                     tuple(anchor_names) if anchor_names else None, (), degenerate)
