"""Macroeconomic panel loading, stationarity transforms and synthetic panels."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import yaml

from .errors import (
    ConfigError,
    MissingValue,
    MissingVariable,
    NonNumericCell,
    NonPositiveForLog,
    UnknownCode,
    UnstableSpec,
    WindowTooShort,
)
from .numeric import RngStream, as_rng

TRANSFORM_CODES = (1, 5, 7, 50)
TRANSFORM_LAGS = {1: 0, 5: 1, 7: 2, 50: 4}
MIN_WINDOW = 40
_MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "."}


@dataclass(frozen=True)
class VariableSpec:
    name: str
    group: int | None
    transform_code: int = 1
    speed: str = "slow"
    role: str = "panel_x"

    def __post_init__(self):
        if self.transform_code not in TRANSFORM_CODES:
            raise UnknownCode(f"{self.name}: unknown transform code {self.transform_code}")
        if self.speed not in ("slow", "fast"):
            raise ConfigError(f"{self.name}: speed must be 'slow' or 'fast'")
        if self.role not in ("panel_x", "observable_y"):
            raise ConfigError(f"{self.name}: role must be 'panel_x' or 'observable_y'")
        if self.role == "panel_x" and self.group is None:
            raise ConfigError(f"{self.name}: panel_x variables need a group")


@dataclass(frozen=True)
class Panel:
    """Balanced, transformed and standardised panel.

    ``values`` covers every variable in ``specs`` order; ``x`` and ``y`` slice
    out the high-dimensional block and the observable factors.
    """

    values: np.ndarray
    specs: tuple[VariableSpec, ...]
    dates: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    group_names: dict = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def x_index(self) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.specs) if s.role == "panel_x"], dtype=int)

    @property
    def y_index(self) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.specs) if s.role == "observable_y"], dtype=int)

    @property
    def x(self) -> np.ndarray:
        return self.values[:, self.x_index]

    @property
    def y(self) -> np.ndarray:
        return self.values[:, self.y_index]

    @property
    def x_specs(self) -> list[VariableSpec]:
        return [self.specs[i] for i in self.x_index]

    @property
    def y_names(self) -> list[str]:
        return [self.specs[i].name for i in self.y_index]

    @property
    def x_groups(self) -> np.ndarray:
        return np.array([s.group for s in self.x_specs], dtype=int)

    @property
    def slow_x_index(self) -> np.ndarray:
        """Positions within ``x`` of slow-moving variables."""
        return np.array([j for j, s in enumerate(self.x_specs) if s.speed == "slow"], dtype=int)

    def column(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingVariable(f"no variable named {name!r}") from None

    def transformed(self) -> np.ndarray:
        """Undo the standardisation, returning the stationary-transformed data."""
        return self.values * self.stds + self.means

    def window(self, start: int, stop: int) -> "Panel":
        """Rows ``start:stop`` re-standardised with statistics of that window only."""
        raw = self.transformed()[start:stop]
        values, means, stds = standardize(raw)
        return replace(self, values=values, dates=self.dates[start:stop], means=means, stds=stds)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *self.names])
            for d, row in zip(self.dates, self.values):
                w.writerow([d, *(repr(float(v)) for v in row)])


def standardize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    safe = np.where(stds > 0, stds, 1.0)
    if np.any(stds == 0):
        warnings.warn("constant column(s) left unscaled during standardisation", RuntimeWarning)
    return (raw - means) / safe, means, safe


def apply_transform(raw: Sequence[float], code: int) -> np.ndarray:
    """Stationarity transform; the output is shorter by the transform's lag count.

    Codes: 1 level, 5 first difference of logs, 7 change in the growth rate
    ``x_t/x_{t-1} - 1``, 50 quarterly year-over-year log difference.
    """
    x = np.asarray(raw, dtype=float)
    if code not in TRANSFORM_CODES:
        raise UnknownCode(f"unknown transform code {code}")
    if code == 1:
        return x.copy()
    if code in (5, 50):
        finite = x[np.isfinite(x)]
        if np.any(finite <= 0):
            raise NonPositiveForLog("log transform of non-positive values")
        lx = np.log(x)
        return lx[1:] - lx[:-1] if code == 5 else lx[4:] - lx[:-4]
    growth = x[1:] / x[:-1] - 1.0
    return growth[1:] - growth[:-1]


def _parse_cell(cell: str, line: int, col: str) -> float:
    token = cell.strip()
    if token.lower() in _MISSING_TOKENS:
        return math.nan
    try:
        return float(token)
    except ValueError:
        raise NonNumericCell(f"line {line}, column {col!r}: non-numeric cell {cell!r}") from None


def read_manifest(path) -> tuple[list[VariableSpec], dict]:
    """Read a YAML manifest: ``variables: [{name, group, tcode, speed, role}, ...]``."""
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    records = doc.get("variables")
    if not records:
        raise ConfigError(f"{path}: manifest lists no variables")
    specs = []
    for rec in records:
        try:
            specs.append(
                VariableSpec(
                    name=str(rec["name"]),
                    group=None if rec.get("group") is None else int(rec["group"]),
                    transform_code=int(rec.get("tcode", rec.get("transform_code", 1))),
                    speed=str(rec.get("speed", "slow")),
                    role=str(rec.get("role", "panel_x")),
                )
            )
        except KeyError as e:
            raise ConfigError(f"{path}: manifest record missing field {e}") from None
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate variable names in manifest")
    groups = {int(k): str(v) for k, v in (doc.get("group_names") or {}).items()}
    return specs, groups


def read_csv(path) -> tuple[list[str], dict[str, np.ndarray]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        dates: list[str] = []
        cols: list[list[float]] = [[] for _ in header[1:]]
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise NonNumericCell(f"{path}, line {line}: expected {len(header)} cells, got {len(row)}")
            dates.append(row[0].strip())
            for j, cell in enumerate(row[1:]):
                cols[j].append(_parse_cell(cell, line, header[j + 1]))
    return dates, {name: np.array(vals) for name, vals in zip(header[1:], cols)}


def _forward_fill_once(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    for t in range(1, out.size):
        if np.isnan(out[t]) and not np.isnan(x[t - 1]):
            out[t] = x[t - 1]
    return out


def load_panel(csv_path, manifest_path, forward_fill: bool = False, min_window: int = MIN_WINDOW) -> Panel:
    """Load, transform, align and standardise a quarterly panel.

    All series are trimmed to the latest transformed start and earliest end.
    A missing cell inside that window is an error unless ``forward_fill`` is
    set, which fills isolated one-quarter gaps in the raw data.
    """
    specs, group_names = read_manifest(manifest_path)
    dates, columns = read_csv(csv_path)
    transformed = []
    for spec in specs:
        if spec.name not in columns:
            raise MissingVariable(f"{spec.name!r} in manifest but not in {csv_path}")
        raw = columns[spec.name]
        if forward_fill:
            raw = _forward_fill_once(raw)
        try:
            out = apply_transform(raw, spec.transform_code)
        except NonPositiveForLog as e:
            raise NonPositiveForLog(f"{spec.name}: {e}") from None
        pad = np.full(len(raw) - len(out), np.nan)
        transformed.append(np.concatenate([pad, out]))
    mat = np.column_stack(transformed)
    valid = np.isfinite(mat)
    starts = [int(np.argmax(valid[:, j])) if valid[:, j].any() else len(dates) for j in range(mat.shape[1])]
    ends = [len(dates) - int(np.argmax(valid[::-1, j])) if valid[:, j].any() else 0 for j in range(mat.shape[1])]
    start, stop = max(starts), min(ends)
    if stop - start < min_window:
        raise WindowTooShort(f"only {max(stop - start, 0)} usable quarters (< {min_window})")
    block = mat[start:stop]
    if not np.all(np.isfinite(block)):
        bad_t, bad_j = np.argwhere(~np.isfinite(block))[0]
        raise MissingValue(f"missing value for {specs[bad_j].name} at {dates[start + bad_t]} inside the common window")
    values, means, stds = standardize(block)
    return Panel(values, tuple(specs), tuple(dates[start:stop]), means, stds, group_names)


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticConfig:
    n_obs: int = 400
    n_vars: int = 36
    n_groups: int = 6
    n_factors: int = 3
    n_observable: int = 0
    noise_std: float = 0.2
    decoder_kind: str = "monotone_nonlinear"
    spectral_radius: float = 0.8
    burn_in: int = 100


@dataclass(frozen=True)
class SyntheticTruth:
    true_factors: np.ndarray
    true_B: np.ndarray
    noise_std: float
    decoder_kind: str
    var_matrix: np.ndarray
    observables: np.ndarray | None = None


def _monotone(u: np.ndarray) -> np.ndarray:
    return np.tanh(1.5 * u) + 0.3 * u


def _stable_matrix(dim: int, radius: float, rng: RngStream) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = np.linspace(0.5 * radius, radius, dim)
    return q @ np.diag(eig) @ q.T


def generate_synthetic(config: SyntheticConfig, rng) -> tuple[Panel, SyntheticTruth]:
    """Simulate a grouped panel with anchor groups for the first K groups.

    Factors (and any observables) follow a stable VAR(1). Variable ``i`` in
    group ``c`` is ``d_i(f_t * B_c)`` plus Gaussian noise, where ``d_i`` is
    affine or a sum of per-factor monotone maps.
    """
    rng = as_rng(rng)
    cfg = config
    k, c, n = cfg.n_factors, cfg.n_groups, cfg.n_vars
    if not cfg.spectral_radius < 1.0:
        raise UnstableSpec(f"spectral radius {cfg.spectral_radius} >= 1")
    if k > c:
        raise ConfigError("need at least as many groups as factors")
    if cfg.decoder_kind not in ("linear", "monotone_nonlinear"):
        raise ConfigError(f"unknown decoder kind {cfg.decoder_kind!r}")
    if n < c:
        raise ConfigError("need at least one variable per group")
    dim = k + cfg.n_observable
    a = _stable_matrix(dim, cfg.spectral_radius, rng)
    shock_scale = np.sqrt(1.0 - cfg.spectral_radius**2)
    total = cfg.n_obs + cfg.burn_in
    states = np.zeros((total, dim))
    for t in range(1, total):
        states[t] = a @ states[t - 1] + shock_scale * rng.standard_normal(dim)
    states = states[cfg.burn_in :]
    states = (states - states.mean(axis=0)) / states.std(axis=0)
    factors = states[:, :k]

    true_b = np.zeros((c, k))
    for g in range(k):
        true_b[g, g] = 1.0
    for g in range(k, c):
        active = rng.permutation(k)[: min(2, k)]
        true_b[g, active] = 0.5 + 0.5 * rng.uniform(size=active.size)

    groups = np.arange(n) % c
    groups.sort()
    weights = np.where(rng.uniform(size=(n, k)) < 0.5, -1.0, 1.0) * (0.5 + rng.uniform(size=(n, k)))
    bias = 0.5 * rng.standard_normal(n)
    x = np.empty((cfg.n_obs, n))
    for i in range(n):
        z = factors * true_b[groups[i]]
        mapped = z if cfg.decoder_kind == "linear" else _monotone(z)
        x[:, i] = mapped @ weights[i] + bias[i]
    x += cfg.noise_std * rng.standard_normal(x.shape)

    specs = [VariableSpec(f"x{i:03d}", int(groups[i]) + 1, 1, "slow", "panel_x") for i in range(n)]
    raw = x
    if cfg.n_observable:
        obs = states[:, k:]
        specs += [VariableSpec(f"y{j}", None, 1, "fast", "observable_y") for j in range(cfg.n_observable)]
        raw = np.column_stack([x, obs])
    values, means, stds = standardize(raw)
    dates = tuple(quarter_labels("1960Q1", cfg.n_obs))
    panel = Panel(values, tuple(specs), dates, means, stds, {g + 1: f"group{g + 1}" for g in range(c)})
    truth = SyntheticTruth(factors, true_b, cfg.noise_std, cfg.decoder_kind, a,
                           states[:, k:] if cfg.n_observable else None)
    return panel, truth


def quarter_labels(start: str, count: int) -> list[str]:
    year, q = int(start[:4]), int(start[-1])
    out = []
    for _ in range(count):
        out.append(f"{year}Q{q}")
        q += 1
        if q == 5:
            year, q = year + 1, 1
    return out


def quarter_label(date: str) -> str:
    """Map an ISO date (or an existing ``YYYYQn`` label) to ``YYYYQn``."""
    if "Q" in date:
        return date
    parts = date.replace("/", "-").split("-")
    year, month = int(parts[0]), int(parts[1])
    return f"{year}Q{(month - 1) // 3 + 1}"


def write_panel_files(panel: Panel, csv_path, manifest_path) -> None:
    """Write ``panel`` as a raw CSV plus YAML manifest that ``load_panel`` reads back.

    Values are written in transformed units, so every variable gets code 1.
    """
    raw = panel.transformed()
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.names])
        for d, row in zip(panel.dates, raw):
            w.writerow([d, *(repr(float(v)) for v in row)])
    doc = {
        "group_names": {int(k): str(v) for k, v in sorted(panel.group_names.items())},
        "variables": [{"name": s.name, "group": s.group, "tcode": 1, "speed": s.speed, "role": s.role}
                      for s in panel.specs],
    }
    with open(manifest_path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
