"""Command-line entry point: ``gsfavar <verb> [options]``.

Verbs run the pipeline stage by stage inside an artifact directory (``--root``,
or ``$GSFAVAR_ARTIFACT_ROOT``). Every artifact records the digest of the
artifacts it was built from; consuming one whose inputs have changed is an
error. Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import autoencoder as ae
from . import serialize as ser
from .artifacts import check_upstream, config_hash, file_digest, update_manifest
from .crossval import CvGrids, cross_validate
from .data import load_panel as load_panel_csv
from .errors import ConfigError, GsFavarError, StaleArtifact
from .factors import METHODS, gibbs_lambda_sigma
from .forecast import compute_metrics, metrics_to_csv, run_expanding_window, run_to_csv, write_metrics_json
from .irf import ShockSpec, irf_over_time, irf_panel, irf_to_csv
from .numeric import RngStream
from .pipeline import (VAR_SPECS, PipelineConfig, build_autoencoder, factors_from_params, fit_factors, fit_var,
                       resolve_anchor_groups)
from .var_tvp import TvpChain, batch_means_se, chain_diagnostics

ROOT_ENV = "GSFAVAR_ARTIFACT_ROOT"
PANEL = "panel.gsf"


# ------------------------------------------------------------------ helpers


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _strs(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(";" if ";" in text else ",") if v.strip())


class Stage:
    """Context for one verb: root dir, pipeline config, seed and provenance."""

    def __init__(self, args):
        self.root = Path(args.root or os.environ.get(ROOT_ENV) or "artifacts")
        self.root.mkdir(parents=True, exist_ok=True)
        self.args = args
        self.cfg = pipeline_config(args)
        self.seed = args.seed

    def rng(self, stream: int) -> RngStream:
        if self.seed is None:
            raise ConfigError("--seed is required")
        return RngStream(self.seed, stream)

    def meta(self, stage: str, settings: dict, upstream: list[str]) -> dict:
        ups = {name: file_digest(self.root / name) for name in upstream}
        return {"stage": stage, "seed": self.seed, "settings": settings, "upstream": ups,
                "config_hash": config_hash({"stage": stage, "seed": self.seed, "settings": settings, "upstream": ups})}

    def record(self, name: str, meta: dict, outputs: list[str]) -> None:
        update_manifest(self.root, name, {"config_hash": meta["config_hash"], "seed": meta["seed"],
                                          "outputs": {o: file_digest(self.root / o) for o in outputs}})

    def panel(self):
        panel, header = ser.load_panel(self.root / PANEL)
        return panel, header


def pipeline_config(args) -> PipelineConfig:
    base = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = yaml.safe_load(fh) or {}
        if not isinstance(base, dict):
            raise ConfigError(f"{args.config}: expected a mapping")
        base = dict(base.get("pipeline", base))
        base.pop("seed", None)
    overrides = {
        "method": args.method, "var_spec": args.var_spec, "k": args.factors, "depth": args.layers,
        "activation": args.activation, "lambda0": args.lambda0, "lambda1": args.lambda1,
        "anchor_groups": _strs(args.anchor_groups) if args.anchor_groups else None,
        "hard_zero_anchors": args.hard_zero or None, "epochs": args.epochs, "batch_size": args.batch_size,
        "lags": args.lags, "n_burn": args.burn, "n_draws": args.draws, "thin": args.thin,
        "slow_adjust": args.slow_adjust, "sample_xi": args.sample_xi or None, "sv_mh": args.sv_mh or None,
        "horizons": args.horizons,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "anchor_groups" in base:
        base["anchor_groups"] = tuple(base["anchor_groups"])
    return PipelineConfig.from_dict(base)


def _method_tag(cfg: PipelineConfig) -> str:
    return cfg.method


def _var_tag(cfg: PipelineConfig) -> str:
    return f"{cfg.method}_{cfg.var_spec}"


def _factor_settings(cfg: PipelineConfig) -> dict:
    keys = ["method", "k", "depth", "activation", "lambda0", "lambda1", "anchor_groups", "hard_zero_anchors",
            "epochs", "batch_size", "slow_adjust"]
    d = cfg.to_dict()
    return {k: d[k] for k in keys}


# ------------------------------------------------------------------ verbs


def cmd_prepare(st: Stage) -> int:
    a = st.args
    if not a.data or not a.manifest:
        raise ConfigError("prepare needs --data and --manifest")
    panel = load_panel_csv(a.data, a.manifest, forward_fill=a.forward_fill)
    settings = {"data_digest": file_digest(a.data), "manifest_digest": file_digest(a.manifest),
                "forward_fill": bool(a.forward_fill)}
    meta = st.meta("prepare", settings, [])
    ser.save_panel(st.root / PANEL, panel, meta)
    panel.to_csv(st.root / "panel.csv")
    rows = [(s.name, "" if s.group is None else s.group, panel.group_names.get(s.group, ""), s.transform_code,
             s.speed, s.role, float(panel.means[i]), float(panel.stds[i]), panel.dates[0], panel.dates[-1])
            for i, s in enumerate(panel.specs)]
    _write_csv(st.root / "panel_audit.csv",
               ["variable", "group", "group_name", "tcode", "speed", "role", "mean", "std", "first", "last"], rows)
    st.record("prepare", meta, [PANEL, "panel.csv", "panel_audit.csv"])
    print(f"prepared {panel.n_obs} quarters x {len(panel.specs)} variables ({panel.dates[0]}..{panel.dates[-1]})")
    return 0


def cmd_crossval(st: Stage) -> int:
    a = st.args
    panel, _ = st.panel()
    grids = CvGrids(
        factors=_ints(a.grid_factors) if a.grid_factors else CvGrids.factors,
        depths=_ints(a.grid_layers) if a.grid_layers else CvGrids.depths,
        activations=_strs(a.grid_activations) if a.grid_activations else CvGrids.activations,
        lambda0s=_floats(a.grid_lambda0) if a.grid_lambda0 else CvGrids.lambda0s,
        lambda1s=_floats(a.grid_lambda1) if a.grid_lambda1 else CvGrids.lambda1s,
    )
    cfg = st.cfg
    train_cfg = ae.TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size)
    res = cross_validate(panel, grids, st.rng(1), n_folds=a.folds, train_cfg=train_cfg, blocked=a.blocked,
                         anchor_groups=cfg.anchor_groups)
    settings = {"grids": dataclasses.asdict(grids), "folds": a.folds, "blocked": a.blocked,
                "epochs": cfg.epochs, "batch_size": cfg.batch_size, "anchor_groups": list(cfg.anchor_groups)}
    meta = st.meta("crossval", settings, [PANEL])
    _write_csv(st.root / "crossval_stage1.csv", ["K", "L", "activation", "mse", "elbo"],
               [(r["K"], r["L"], r["activation"], r["mse"], r["elbo"]) for r in res.stage1])
    _write_csv(st.root / "crossval_stage2.csv", ["lambda0", "lambda1", "mse", "elbo"],
               [(r["lambda0"], r["lambda1"], r["mse"], r["elbo"]) for r in res.stage2])
    k, depth, act = res.best_stage1
    _write_json(st.root / "crossval_best.json", {"K": k, "L": depth, "activation": act,
                                                 "lambda0": res.best_stage2[0], "lambda1": res.best_stage2[1],
                                                 "config_hash": meta["config_hash"], "seed": st.seed})
    st.record("crossval", meta, ["crossval_stage1.csv", "crossval_stage2.csv", "crossval_best.json"])
    print(f"best K={k} L={depth} activation={act} lambda0={res.best_stage2[0]:g} lambda1={res.best_stage2[1]:g}")
    return 0


def cmd_train(st: Stage) -> int:
    cfg = st.cfg
    if cfg.method == "pca":
        raise ConfigError("train applies to autoencoder methods; PCA needs no training")
    panel, _ = st.panel()
    params, ssl, _ = build_autoencoder(panel, cfg, st.rng(2).child(0))
    train_cfg = ae.TrainConfig(epochs=cfg.epochs, batch_size=min(cfg.batch_size, panel.n_obs))
    params, trace = ae.train(panel.x, params, ssl, train_cfg, st.rng(2).child(1))
    tag = _method_tag(cfg)
    meta = st.meta("train", _factor_settings(cfg), [PANEL])
    name = f"model_{tag}.gsf"
    ser.save_params(st.root / name, params, meta)
    _write_csv(st.root / f"train_{tag}_loss.csv", ["epoch", "total", "reconstruction", "regularization"],
               [(e + 1, t, r, g) for e, (t, r, g) in enumerate(zip(trace.total, trace.reconstruction, trace.regularization))])
    rep = ae.check_injectivity(params)
    _write_json(st.root / f"injectivity_{tag}.json", {
        "passed": rep.passed, "activation_injective": rep.activation_injective,
        "layer_min_singular_values": list(rep.layer_min_singular_values),
        "layer_full_column_rank": list(rep.layer_full_column_rank), "note": rep.note,
        "config_hash": meta["config_hash"], "seed": st.seed})
    st.record(f"train_{tag}", meta, [name, f"train_{tag}_loss.csv", f"injectivity_{tag}.json"])
    final = trace.reconstruction[-1] if trace.reconstruction else float("nan")
    print(f"trained {tag}: final reconstruction loss {final:.6f}; injectivity {'ok' if rep.passed else 'FAILED'}")
    return 0


def _top_correlations(panel, fs, top: int = 15):
    x = panel.x
    xs = (x - x.mean(0)) / np.where(x.std(0) > 0, x.std(0), 1.0)
    names = [s.name for s in panel.x_specs]
    groups = [s.group for s in panel.x_specs]
    rows = []
    for k, fname in enumerate(fs.names[: fs.latent.shape[1]]):
        f = fs.latent[:, k]
        sd = f.std()
        corr = xs.T @ ((f - f.mean()) / (sd if sd > 0 else 1.0)) / x.shape[0]
        order = np.argsort(-np.abs(corr), kind="stable")[:top]
        for rank, j in enumerate(order, start=1):
            rows.append((fname, rank, names[j], groups[j], panel.group_names.get(groups[j], ""), float(corr[j])))
    return rows


def cmd_factors(st: Stage) -> int:
    cfg = st.cfg
    panel, _ = st.panel()
    tag = _method_tag(cfg)
    upstream = [PANEL]
    params = None
    if cfg.method == "pca":
        fs, _ = fit_factors(panel, cfg, st.rng(3))
    else:
        model = f"model_{tag}.gsf"
        params, header = ser.load_params(st.root / model)
        check_upstream(header, st.root)
        if header["meta"]["settings"] != _factor_settings(cfg) or header["meta"]["seed"] != st.seed:
            raise StaleArtifact(f"{model} was trained with a different configuration or seed; rerun train")
        fs = factors_from_params(panel, params, cfg)
        upstream.append(model)
    settings = {**_factor_settings(cfg), "loading_draws": st.args.loading_draws}
    meta = st.meta("factors", settings, upstream)
    outputs = [f"factors_{tag}.gsf", f"factors_{tag}.csv", f"correlations_{tag}.csv"]
    ser.save_factors(st.root / outputs[0], fs, meta)
    _write_csv(st.root / outputs[1], ["date", *fs.names],
               [(d, *map(float, row)) for d, row in zip(panel.dates, fs.stacked)])
    _write_csv(st.root / outputs[2], ["factor", "rank", "variable", "group", "group_name", "correlation"],
               _top_correlations(panel, fs))
    if params is not None and params.arch.grouped:
        _, order = ae.group_layout(panel.x_groups, _anchor_ids(panel, cfg))
        rows = [(panel.group_names.get(g, f"group{g}"), fs.names[k], float(params.B[c, k]), float(params.P[c, k]))
                for c, g in enumerate(order) for k in range(params.B.shape[1])]
        _write_csv(st.root / f"b_matrix_{tag}.csv", ["group", "factor", "beta", "inclusion_probability"], rows)
        outputs.append(f"b_matrix_{tag}.csv")
    if st.args.loading_draws > 0:
        lam = gibbs_lambda_sigma(fs, panel.x, st.args.loading_draws, st.rng(4))
        ser.save_loadings(st.root / f"loadings_{tag}.gsf", lam, meta)
        outputs.append(f"loadings_{tag}.gsf")
    st.record(f"factors_{tag}", meta, outputs)
    print(f"extracted {fs.latent.shape[1]} factors with {tag}")
    return 0


def _anchor_ids(panel, cfg):
    return resolve_anchor_groups(panel, cfg.anchor_groups, cfg.k)


def cmd_estimate_var(st: Stage) -> int:
    cfg = st.cfg
    src = f"factors_{_method_tag(cfg)}.gsf"
    fs, header = ser.load_factors(st.root / src)
    check_upstream(header, st.root)
    if header["meta"]["settings"]["method"] != cfg.method:
        raise StaleArtifact(f"{src} was built for another method")
    draws = fit_var(fs, cfg, st.rng(5))
    settings = {k: cfg.to_dict()[k] for k in ("var_spec", "lags", "n_burn", "n_draws", "thin", "sample_xi", "sv_mh")}
    meta = st.meta("estimate-var", settings, [src])
    tag = _var_tag(cfg)
    ser.save_var(st.root / f"var_{tag}.gsf", draws, {**meta, "names": fs.names})
    outputs = [f"var_{tag}.gsf", f"var_{tag}_diagnostics.csv"]
    if isinstance(draws, TvpChain):
        rows = chain_diagnostics(draws)
    else:
        rows = _tiv_diagnostics(draws)
    keys = ["parameter", "mean", "sd", "mcse", "ess", "q05", "q95"]
    _write_csv(st.root / outputs[1], keys, [[r[k] for k in keys] for r in rows])
    st.record(f"estimate_{tag}", meta, outputs)
    print(f"estimated {cfg.var_spec.upper()} VAR on {fs.stacked.shape[1]} variables: {draws.n_draws} draws")
    return 0


def _tiv_diagnostics(draws) -> list[dict]:
    rows = []
    traces = [(f"a[{j}]", draws.a[:, j]) for j in range(draws.a.shape[1])]
    traces += [(f"omega[{i},{i}]", draws.omega[:, i, i]) for i in range(draws.n)]
    for name, tr in traces:
        se = float(batch_means_se(tr[:, None])[0])
        sd = float(tr.std(ddof=1)) if tr.size > 1 else float("nan")
        rows.append({"parameter": name, "mean": float(tr.mean()), "sd": sd, "mcse": se,
                     "ess": (sd / se) ** 2 if se > 0 else float("nan"),
                     "q05": float(np.quantile(tr, 0.05)), "q95": float(np.quantile(tr, 0.95))})
    if np.isfinite(draws.xi_acceptance):
        rows.append({"parameter": "xi_acceptance", "mean": draws.xi_acceptance, "sd": float("nan"),
                     "mcse": float("nan"), "ess": float("nan"), "q05": float("nan"), "q95": float("nan")})
    return rows


def _origin_index(panel, text: str | None, default: int) -> int:
    if text is None:
        return default
    if text.lstrip("-").isdigit():
        return int(text)
    if text not in panel.dates:
        raise ConfigError(f"origin {text!r} not among panel dates")
    return panel.dates.index(text)


def cmd_forecast(st: Stage) -> int:
    a = st.args
    panel, _ = st.panel()
    cfg = st.cfg
    first = _origin_index(panel, a.first_origin, max(panel.n_obs // 2, 0))
    last = _origin_index(panel, a.last_origin, panel.n_obs - 2)
    bench_cfg = dataclasses.replace(cfg, method=a.benchmark_method, var_spec=a.benchmark_spec)
    models = [cfg] if (cfg.method, cfg.var_spec) == (bench_cfg.method, bench_cfg.var_spec) else [bench_cfg, cfg]
    runs = {}
    for m in models:
        stream = 6 if (m.method, m.var_spec) == (bench_cfg.method, bench_cfg.var_spec) else 7
        runs[m.model_id] = run_expanding_window(panel, m, st.rng(stream), first, last, a.point)
    bench = runs[bench_cfg.model_id]
    settings = {"model": cfg.to_dict(), "benchmark": [bench_cfg.method, bench_cfg.var_spec],
                "first_origin": first, "last_origin": last, "point": a.point}
    meta = st.meta("forecast", settings, [PANEL])
    outputs, tables = [], []
    for model_id, run in runs.items():
        slug = model_id.lower().replace(" ", "_")
        run_to_csv(run, st.root / f"forecast_{slug}.csv")
        table = compute_metrics(run, bench)
        tables.append(table)
        metrics_to_csv(table, st.root / f"metrics_{slug}.csv")
        rows = [(run.origin_dates[o], h + 1, var, float(table.cumulative_alpl[o, h, m]))
                for o in range(len(run.origins)) for h in range(run.horizons) for m, var in enumerate(run.variables)]
        _write_csv(st.root / f"cumulative_alpl_{slug}.csv", ["origin", "horizon", "variable", "cumulative_alpl"], rows)
        outputs += [f"forecast_{slug}.csv", f"metrics_{slug}.csv", f"cumulative_alpl_{slug}.csv"]
        if run.failures:
            print(f"{model_id}: {len(run.failures)} origin(s) failed", file=sys.stderr)
    tag = _var_tag(cfg)
    write_metrics_json(tables, st.root / f"metrics_{tag}.json")
    outputs.append(f"metrics_{tag}.json")
    st.record(f"forecast_{tag}", meta, outputs)
    for t in tables:
        print(f"{t.model}: relative MAE h=1 " + ", ".join(f"{v}={r:.3f}" for v, r in zip(t.variables, t.rel_mae[0])))
    return 0


def cmd_irf(st: Stage) -> int:
    a = st.args
    cfg = st.cfg
    tag = _var_tag(cfg)
    src = f"var_{tag}.gsf"
    draws, header = ser.load_var(st.root / src)
    check_upstream(header, st.root)
    panel, _ = st.panel()
    names = header["meta"].get("names") or [f"v{i + 1}" for i in range(draws.n)]
    target = a.target or (panel.y_names[-1] if panel.y_names else names[-1])
    if target not in names:
        raise ConfigError(f"shock target {target!r} is not a VAR variable ({', '.join(names)})")
    col = panel.column(target) if target in panel.names else None
    scale = float(panel.stds[col]) if col is not None else 1.0
    shock = ShockSpec(names.index(target) - draws.n, a.shock_size, scale)
    offset = draws.lags
    if a.times:
        times = []
        for lab in _strs(a.times):
            if lab not in panel.dates:
                raise ConfigError(f"date {lab!r} not in the panel")
            times.append(panel.dates.index(lab) - offset)
    else:
        times = None
    result = irf_over_time(draws, shock, a.irf_horizons, times, names)
    labels = [panel.dates[t + offset] for t in result.times]
    upstream = [src]
    panel_resp, panel_names = None, None
    if a.panel_vars:
        lname = f"loadings_{_method_tag(cfg)}.gsf"
        lam, lheader = ser.load_loadings(st.root / lname)
        check_upstream(lheader, st.root)
        x_names = [s.name for s in panel.x_specs]
        panel_names = list(_strs(a.panel_vars))
        missing = [v for v in panel_names if v not in x_names]
        if missing:
            raise ConfigError(f"unknown panel variables {missing}")
        idx = [x_names.index(v) for v in panel_names]
        lam_sel = lam.lam[:, idx]
        if not a.mean_loadings and lam_sel.shape[0] != result.responses.shape[0]:
            take = np.arange(result.responses.shape[0]) % lam_sel.shape[0] if a.cycle_loadings else None
            if take is not None:
                lam_sel = lam_sel[take]
        stds = panel.stds[panel.x_index[idx]] if a.original_units else None
        panel_resp = irf_panel(result.responses, lam_sel, a.mean_loadings, stds)
        upstream.append(lname)
    settings = {"target": target, "shock_size": a.shock_size, "horizons": a.irf_horizons, "times": labels,
                "panel_vars": panel_names, "mean_loadings": a.mean_loadings, "original_units": a.original_units}
    meta = st.meta("irf", settings, upstream)
    out = f"irf_{tag}.csv"
    irf_to_csv(result, st.root / out, labels, panel_resp, panel_names)
    _write_json(st.root / f"irf_{tag}.json", {"config_hash": meta["config_hash"], "seed": st.seed, **settings})
    st.record(f"irf_{tag}", meta, [out, f"irf_{tag}.json"])
    print(f"wrote impulse responses for {len(labels)} date(s) to {out}")
    return 0


COMMANDS = {
    "prepare": cmd_prepare, "crossval": cmd_crossval, "train": cmd_train, "factors": cmd_factors,
    "estimate-var": cmd_estimate_var, "forecast": cmd_forecast, "irf": cmd_irf,
}


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--root", help=f"artifact directory (default ${ROOT_ENV} or ./artifacts)")
    g.add_argument("--seed", type=int, help="random seed (mandatory for stochastic stages)")
    g.add_argument("--config", help="YAML file with pipeline settings; flags override it")
    m = p.add_argument_group("model")
    m.add_argument("--method", choices=METHODS)
    m.add_argument("--var-spec", choices=VAR_SPECS)
    m.add_argument("-K", "--factors", type=int)
    m.add_argument("--layers", type=int)
    m.add_argument("--activation")
    m.add_argument("--lambda0", type=float)
    m.add_argument("--lambda1", type=float)
    m.add_argument("--anchor-groups", help="comma-separated group ids or names, one per factor")
    m.add_argument("--hard-zero", action="store_true", help="pin off-anchor cells of anchor rows at zero")
    m.add_argument("--epochs", type=int)
    m.add_argument("--batch-size", type=int)
    m.add_argument("--lags", type=int)
    m.add_argument("--burn", type=int)
    m.add_argument("--draws", type=int)
    m.add_argument("--thin", type=int)
    m.add_argument("--slow-adjust", dest="slow_adjust", action="store_true", default=None)
    m.add_argument("--no-slow-adjust", dest="slow_adjust", action="store_false")
    m.add_argument("--sample-xi", action="store_true")
    m.add_argument("--sv-mh", action="store_true")
    m.add_argument("--horizons", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsfavar", description="Factor-augmented VARs with grouped sparse autoencoders")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="transform, align and standardise a raw panel")
    _add_common(p)
    p.add_argument("--data", help="CSV with a date column followed by one column per series")
    p.add_argument("--manifest", help="YAML manifest of variables")
    p.add_argument("--forward-fill", action="store_true")

    p = sub.add_parser("crossval", help="two-stage k-fold cross-validation of the autoencoders")
    _add_common(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--blocked", action="store_true", help="contiguous folds instead of random ones")
    p.add_argument("--grid-factors")
    p.add_argument("--grid-layers")
    p.add_argument("--grid-activations", help="e.g. 'tanh;leaky_relu(0.01)'")
    p.add_argument("--grid-lambda0")
    p.add_argument("--grid-lambda1")

    p = sub.add_parser("train", help="train an autoencoder on the prepared panel")
    _add_common(p)

    p = sub.add_parser("factors", help="extract factors, correlation tables and loadings")
    _add_common(p)
    p.add_argument("--loading-draws", type=int, default=500)

    p = sub.add_parser("estimate-var", help="sample the TIV or TVP VAR on extracted factors")
    _add_common(p)

    p = sub.add_parser("forecast", help="expanding-window forecasts and metrics against a benchmark")
    _add_common(p)
    p.add_argument("--first-origin", help="date label or row index of the first forecast origin")
    p.add_argument("--last-origin")
    p.add_argument("--benchmark-method", choices=METHODS, default="pca")
    p.add_argument("--benchmark-spec", choices=VAR_SPECS, default="tiv")
    p.add_argument("--point", choices=("mean", "median"), default="mean")

    p = sub.add_parser("irf", help="impulse responses of the VAR block and selected panel variables")
    _add_common(p)
    p.add_argument("--target", help="shocked variable (default: last observable)")
    p.add_argument("--shock-size", type=float, default=-1.0, help="shock in original units")
    p.add_argument("--irf-horizons", type=int, default=20)
    p.add_argument("--times", help="comma-separated date labels (default: every date)")
    p.add_argument("--panel-vars", help="comma-separated panel variables to map responses to")
    p.add_argument("--mean-loadings", action="store_true")
    p.add_argument("--cycle-loadings", action="store_true",
                   help="reuse loading draws cyclically when counts differ")
    p.add_argument("--original-units", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        st = Stage(args)
        return COMMANDS[args.command](st)
    except GsFavarError as e:
        print(f"gsfavar {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
