from __future__ import annotations

import struct

import numpy as np
import pytest

from gsfavar import serialize as ser
from gsfavar.artifacts import (
    MAGIC,
    canonical_json,
    check_upstream,
    config_hash,
    file_digest,
    read_artifact,
    update_manifest,
    write_artifact,
)
from gsfavar.data import SyntheticConfig, generate_synthetic
from gsfavar.errors import CorruptArtifact, StaleArtifact
from gsfavar.numeric import RngStream
from gsfavar.var_tiv import TivDraws
from gsfavar.var_tvp import TvpPrior, tvp_mcmc
from oracles import random_gs_ae, simulate_tvp


def test_roundtrip_and_layout(tmp_path):
    arrays = {"x": np.arange(6.0).reshape(2, 3), "i": np.array([3, -1], dtype=np.int32), "b": np.array([True])}
    path = write_artifact(tmp_path / "a.gsf", "demo", arrays, {"z": 1, "a": [1, 2]})
    blob = path.read_bytes()
    assert blob[:4] == MAGIC
    version, hlen = struct.unpack("<HI", blob[4:10])
    assert version == 1
    assert blob[10:10 + hlen].decode() == canonical_json(
        {"kind": "demo", "meta": {"z": 1, "a": [1, 2]},
         "arrays": [{"name": "x", "dtype": "<f8", "shape": [2, 3]}, {"name": "i", "dtype": "<i8", "shape": [2]},
                    {"name": "b", "dtype": "<i8", "shape": [1]}]})
    assert blob[10 + hlen:10 + hlen + 48] == np.arange(6.0).astype("<f8").tobytes()
    back, header = read_artifact(path, "demo")
    np.testing.assert_array_equal(back["x"], arrays["x"])
    np.testing.assert_array_equal(back["i"], [3, -1])
    assert header["meta"] == {"a": [1, 2], "z": 1}


def test_writes_are_byte_identical(tmp_path):
    arrays = {"x": np.random.default_rng(0).standard_normal((4, 4))}
    write_artifact(tmp_path / "1.gsf", "k", arrays, {"b": 2, "a": 1})
    write_artifact(tmp_path / "2.gsf", "k", arrays, {"a": 1, "b": 2})
    assert (tmp_path / "1.gsf").read_bytes() == (tmp_path / "2.gsf").read_bytes()
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_read_errors(tmp_path):
    with pytest.raises(StaleArtifact):
        read_artifact(tmp_path / "missing.gsf")
    path = write_artifact(tmp_path / "a.gsf", "demo", {"x": np.zeros(3)})
    with pytest.raises(StaleArtifact):
        read_artifact(path, "other")
    blob = path.read_bytes()
    (tmp_path / "t.gsf").write_bytes(blob[:-8])
    with pytest.raises(CorruptArtifact):
        read_artifact(tmp_path / "t.gsf")
    (tmp_path / "j.gsf").write_bytes(b"junkjunkjunk")
    with pytest.raises(CorruptArtifact):
        read_artifact(tmp_path / "j.gsf")
    (tmp_path / "v.gsf").write_bytes(blob[:4] + struct.pack("<H", 9) + blob[6:])
    with pytest.raises(StaleArtifact):
        read_artifact(tmp_path / "v.gsf")


def test_upstream_digests(tmp_path):
    up = tmp_path / "up.bin"
    up.write_bytes(b"one")
    header = {"meta": {"upstream": {"up.bin": file_digest(up)}}}
    check_upstream(header, tmp_path)
    up.write_bytes(b"two")
    with pytest.raises(StaleArtifact):
        check_upstream(header, tmp_path)
    up.unlink()
    with pytest.raises(StaleArtifact):
        check_upstream(header, tmp_path)


def test_manifest_sorted_merge(tmp_path):
    update_manifest(tmp_path, "zeta", {"b": 1})
    update_manifest(tmp_path, "alpha", {"a": 2})
    text = (tmp_path / "manifest.json").read_text()
    assert text.index('"alpha"') < text.index('"zeta"')


def test_domain_roundtrips(tmp_path):
    panel, _ = generate_synthetic(SyntheticConfig(n_obs=50, n_vars=8, n_groups=4, n_factors=2, n_observable=1),
                                  RngStream(0))
    ser.save_panel(tmp_path / "p.gsf", panel, {"seed": 1})
    back, _ = ser.load_panel(tmp_path / "p.gsf")
    np.testing.assert_array_equal(back.values, panel.values)
    assert back.specs == panel.specs and back.dates == panel.dates and back.group_names == panel.group_names

    params, _, x = random_gs_ae("leaky_relu(0.01)")
    ser.save_params(tmp_path / "m.gsf", params, {})
    loaded, _ = ser.load_params(tmp_path / "m.gsf")
    assert loaded.arch == params.arch
    for a, b in zip(loaded.trainable(), params.trainable()):
        np.testing.assert_array_equal(a, b)

    draws = TivDraws(np.ones((2, 4)), np.tile(np.eye(2), (2, 1, 1)), np.zeros((2, 2)), 2, 1, np.zeros((5, 2)))
    ser.save_var(tmp_path / "v.gsf", draws, {})
    v, _ = ser.load_var(tmp_path / "v.gsf")
    np.testing.assert_array_equal(v.a, draws.a)

    y, _, _ = simulate_tvp(0, t_len=40)
    chain = tvp_mcmc(y, TvpPrior(lags=1), 2, 3, 1, RngStream(0))
    ser.save_var(tmp_path / "c.gsf", chain, {})
    c, _ = ser.load_var(tmp_path / "c.gsf")
    np.testing.assert_array_equal(c.log_s, chain.log_s)
    for q1, q2 in zip(c.q_h, chain.q_h):
        np.testing.assert_array_equal(q1, q2)
    with pytest.raises(StaleArtifact):
        ser.load_var(tmp_path / "p.gsf")
