"""Versioned binary artifacts and run manifests.

Layout of a ``.gsf`` file::

    b"GSFV"                      magic
    uint16 little-endian         format version
    uint32 little-endian         header length in bytes
    header                       UTF-8 JSON, sorted keys
    array payloads               row-major little-endian, in header order

The header holds ``kind``, free-form ``meta`` and, per array, its name, dtype
(``<f8`` or ``<i8``) and shape. Nothing time-dependent is written, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptArtifact, StaleArtifact

MAGIC = b"GSFV"
FORMAT_VERSION = 1
_DTYPES = {"f": "<f8", "i": "<i8", "u": "<i8", "b": "<i8"}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(obj) -> str:
    """Short stable digest of a JSON-serialisable configuration."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_artifact(path, kind: str, arrays: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    entries, payload = [], []
    for name in arrays:
        a = np.asarray(arrays[name])
        if a.dtype.kind not in _DTYPES:
            raise CorruptArtifact(f"array {name!r} has unsupported dtype {a.dtype}")
        dtype = _DTYPES[a.dtype.kind]
        a = np.ascontiguousarray(a, dtype=dtype)
        entries.append({"name": name, "dtype": dtype, "shape": list(a.shape)})
        payload.append(a.tobytes(order="C"))
    header = canonical_json({"kind": kind, "meta": meta or {}, "arrays": entries}).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(header)))
        fh.write(header)
        for chunk in payload:
            fh.write(chunk)
    return path


def read_artifact(path, kind: str | None = None) -> tuple[dict, dict]:
    """Return ``(arrays, header)``; ``header`` carries ``kind`` and ``meta``."""
    path = Path(path)
    if not path.exists():
        raise StaleArtifact(f"{path} does not exist; run the upstream command first")
    blob = path.read_bytes()
    if blob[:4] != MAGIC or len(blob) < 10:
        raise CorruptArtifact(f"{path} is not a gsfavar artifact")
    version, hlen = struct.unpack("<HI", blob[4:10])
    if version != FORMAT_VERSION:
        raise StaleArtifact(f"{path} has format version {version}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(blob[10:10 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptArtifact(f"{path}: unreadable header") from None
    if kind is not None and header.get("kind") != kind:
        raise StaleArtifact(f"{path} holds {header.get('kind')!r}, expected {kind!r}")
    arrays, offset = {}, 10 + hlen
    for e in header["arrays"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise CorruptArtifact(f"{path}: truncated payload for {e['name']!r}")
        arrays[e["name"]] = np.frombuffer(blob, dtype=e["dtype"], count=count, offset=offset).reshape(e["shape"]).copy()
        offset += nbytes
    if offset != len(blob):
        raise CorruptArtifact(f"{path}: {len(blob) - offset} trailing bytes")
    return arrays, header


def check_upstream(header: dict, root) -> None:
    """Every upstream file recorded in ``meta.upstream`` must still have the recorded digest."""
    for name, digest in (header.get("meta", {}).get("upstream") or {}).items():
        p = Path(root) / name
        if not p.exists():
            raise StaleArtifact(f"upstream artifact {name} is missing")
        if file_digest(p) != digest:
            raise StaleArtifact(f"upstream artifact {name} changed since this artifact was built; rerun the stage")


def update_manifest(root, entry: str, record: dict) -> Path:
    """Merge ``record`` for ``entry`` into ``root/manifest.json`` (sorted, no timestamps)."""
    path = Path(root) / "manifest.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data[entry] = record
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
