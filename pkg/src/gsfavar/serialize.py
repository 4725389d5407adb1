"""Round-trip domain objects through the binary artifact format."""

from __future__ import annotations

import numpy as np

from . import autoencoder as ae
from .artifacts import read_artifact, write_artifact
from .data import Panel, VariableSpec
from .factors import FactorSet, LoadingDraws
from .var_tiv import TivDraws
from .var_tvp import TvpChain


def save_panel(path, panel: Panel, meta: dict) -> None:
    specs = [[s.name, s.group, s.transform_code, s.speed, s.role] for s in panel.specs]
    groups = {str(k): v for k, v in sorted(panel.group_names.items())}
    write_artifact(path, "panel", {"values": panel.values, "means": panel.means, "stds": panel.stds},
                   {**meta, "specs": specs, "dates": list(panel.dates), "group_names": groups})


def load_panel(path) -> tuple[Panel, dict]:
    arrays, header = read_artifact(path, "panel")
    meta = header["meta"]
    specs = tuple(VariableSpec(*rec) for rec in meta["specs"])
    groups = {int(k): v for k, v in meta["group_names"].items()}
    return Panel(arrays["values"], specs, tuple(meta["dates"]), arrays["means"], arrays["stds"], groups), header


def save_factors(path, fs: FactorSet, meta: dict) -> None:
    write_artifact(path, "factors", {"latent": fs.latent, "observable": fs.observable,
                                     "degenerate": np.array(fs.degenerate or [False] * fs.latent.shape[1])},
                   {**meta, "method": fs.method, "anchor_names": list(fs.anchor_names or []),
                    "observable_names": list(fs.observable_names)})


def load_factors(path) -> tuple[FactorSet, dict]:
    arrays, header = read_artifact(path, "factors")
    m = header["meta"]
    fs = FactorSet(arrays["latent"], arrays["observable"], m["method"], tuple(m["anchor_names"]) or None,
                   tuple(m["observable_names"]), tuple(bool(v) for v in arrays["degenerate"]))
    return fs, header


def save_params(path, p: ae.GsAeParams, meta: dict) -> None:
    a = p.arch
    arrays = {}
    for l, (w, b) in enumerate(zip(p.enc_w, p.enc_b)):
        arrays[f"enc_w{l}"], arrays[f"enc_b{l}"] = w, b
    for l, (w, b) in enumerate(zip(p.dec_w, p.dec_b)):
        arrays[f"dec_w{l}"], arrays[f"dec_b{l}"] = w, b
    arrays.update(out_w=p.out_w, out_b=p.out_b, B=p.B, P=p.P, anchor_mask=p.anchor_mask, groups=p.groups)
    arch = {"n_vars": a.n_vars, "n_factors": a.n_factors, "n_groups": a.n_groups,
            "encoder_dims": list(a.encoder_dims), "decoder_dims": list(a.decoder_dims),
            "activation": [a.activation.kind, a.activation.slope], "grouped": a.grouped}
    write_artifact(path, "gs_ae", arrays, {**meta, "arch": arch, "hard_zero": p.hard_zero})


def load_params(path) -> tuple[ae.GsAeParams, dict]:
    arrays, header = read_artifact(path, "gs_ae")
    m = header["meta"]
    a = m["arch"]
    arch = ae.GsAeArchitecture(a["n_vars"], a["n_factors"], a["n_groups"], tuple(a["encoder_dims"]),
                               tuple(a["decoder_dims"]), ae.Activation(*a["activation"]), a["grouped"])
    n_enc, n_dec = len(arch.encoder_dims), len(arch.decoder_dims)
    params = ae.GsAeParams(
        arch,
        [arrays[f"enc_w{l}"] for l in range(n_enc)], [arrays[f"enc_b{l}"] for l in range(n_enc)],
        [arrays[f"dec_w{l}"] for l in range(n_dec)], [arrays[f"dec_b{l}"] for l in range(n_dec)],
        arrays["out_w"], arrays["out_b"], arrays["B"], arrays["P"], arrays["anchor_mask"].astype(bool),
        arrays["groups"].astype(int), bool(m["hard_zero"]),
    )
    return params, header


def save_var(path, draws: TivDraws | TvpChain, meta: dict) -> None:
    if isinstance(draws, TivDraws):
        write_artifact(path, "tiv_draws", {"a": draws.a, "omega": draws.omega, "xi": draws.xi, "history": draws.history},
                       {**meta, "n": draws.n, "lags": draws.lags, "xi_acceptance": draws.xi_acceptance})
        return
    arrays = {"a": draws.a, "h": draws.h, "log_s": draws.log_s, "q_a": draws.q_a, "q_s": draws.q_s,
              "indicators": draws.indicators, "history": draws.history}
    for m, q in enumerate(draws.q_h):
        arrays[f"q_h{m}"] = q
    write_artifact(path, "tvp_draws", arrays, {**meta, "n": draws.n, "lags": draws.lags,
                                               "mh_acceptance": draws.mh_acceptance})


def load_var(path) -> tuple[TivDraws | TvpChain, dict]:
    arrays, header = read_artifact(path)
    m = header["meta"]
    if header["kind"] == "tiv_draws":
        return TivDraws(arrays["a"], arrays["omega"], arrays["xi"], m["n"], m["lags"], arrays["history"],
                        m["xi_acceptance"]), header
    if header["kind"] != "tvp_draws":
        from .errors import StaleArtifact
        raise StaleArtifact(f"{path} holds {header['kind']!r}, not VAR draws")
    q_h = [arrays[f"q_h{i}"] for i in range(m["n"] - 1)]
    chain = TvpChain(m["n"], m["lags"], arrays["history"], arrays["a"], arrays["h"], arrays["log_s"], arrays["q_a"],
                     q_h, arrays["q_s"], arrays["indicators"].astype(np.int8), m["mh_acceptance"])
    return chain, header


def save_loadings(path, draws: LoadingDraws, meta: dict) -> None:
    write_artifact(path, "loadings", {"lam": draws.lam, "sigma2": draws.sigma2}, meta)


def load_loadings(path) -> tuple[LoadingDraws, dict]:
    arrays, header = read_artifact(path, "loadings")
    return LoadingDraws(arrays["lam"], arrays["sigma2"]), header
