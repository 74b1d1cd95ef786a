"""Serialization: matrix text files, JSON documents and trajectory CSVs."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .collection import SpectralCollection, collection_from_matrices
from .errors import ConfigError, InvalidMatrix

SCHEMA_VERSION = 1
FLOAT_FMT = "{:.12g}"


# ---------------------------------------------------------------- matrix text


def format_matrices(mats) -> str:
    """Blocks of ``dim N`` followed by N whitespace-separated rows."""
    out = []
    for m in mats:
        m = np.asarray(m, dtype=float)
        out.append(f"dim {m.shape[0]}")
        out.extend(" ".join(repr(float(v)) for v in row) for row in m)
    return "\n".join(out) + "\n"


def parse_matrices(text: str) -> list:
    """Inverse of :func:`format_matrices`; blank lines and ``#`` comments are ignored."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    mats, pos = [], 0
    while pos < len(lines):
        head = lines[pos].split()
        if len(head) != 2 or head[0] != "dim":
            raise InvalidMatrix(f"expected 'dim N' header, got {lines[pos]!r}")
        try:
            N = int(head[1])
        except ValueError as exc:
            raise InvalidMatrix(f"bad dimension in {lines[pos]!r}") from exc
        if N < 1:
            raise InvalidMatrix(f"dimension must be positive, got {N}")
        if pos + 1 + N > len(lines):
            raise InvalidMatrix(f"matrix of dimension {N} is truncated")
        rows = []
        for ln in lines[pos + 1 : pos + 1 + N]:
            try:
                row = [float(v) for v in ln.split()]
            except ValueError as exc:
                raise InvalidMatrix(f"non-numeric entry in row {ln!r}") from exc
            if len(row) != N:
                raise InvalidMatrix(f"row has {len(row)} entries, expected {N}")
            rows.append(row)
        mats.append(np.array(rows))
        pos += 1 + N
    if not mats:
        raise InvalidMatrix("no matrices found")
    return mats


# ---------------------------------------------------------------- JSON


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, doc: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def collection_to_dict(c: SpectralCollection) -> dict:
    return {
        "type": "collection",
        "kind": c.kind,
        "N": c.N,
        "n": c.n,
        "margin": c.margin,
        "matrices": [m.tolist() for m in c.L],
        "eigenvalues": c.lam[1 : c.n + 1].tolist(),
        "basis": c.U.tolist(),
    }


def collection_from_dict(doc: dict) -> SpectralCollection:
    """Rebuild from the stored matrices; the eigenbasis is recomputed, not trusted."""
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    if doc.get("type") != "collection" or "matrices" not in doc:
        raise ConfigError("document is not a serialized collection")
    mats = [np.asarray(m, dtype=float) for m in doc["matrices"]]
    margin = doc.get("margin")
    if isinstance(margin, list):
        margin = tuple(margin)
    return collection_from_matrices(mats, margin=margin, kind=doc.get("kind", "external"))


def load_collection(path) -> SpectralCollection:
    """Accept either a JSON collection document or a matrix text file."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return collection_from_dict(read_json(path))
    return collection_from_matrices(parse_matrices(text))


def controller_to_dict(spec) -> dict:
    doc = {
        "type": "controller",
        "kind": spec.kind,
        "n": spec.n,
        "h": spec.h,
        "l": spec.l,
        "bound": spec.bound,
        "w": spec.w,
        "L_PD": [m.tolist() for m in spec.L_PD],
        "L_I": [m.tolist() for m in spec.L_I],
    }
    if spec.transform is not None and spec.transform.matrix is not None:
        doc["transform"] = spec.transform.matrix.tolist()
    return doc


# ---------------------------------------------------------------- CSV


def _f(v) -> str:
    return FLOAT_FMT.format(float(v))


def write_trajectory_csv(path, rec) -> None:
    """Long format ``t,agent,order,value`` on plant coordinates; orders are 1-based."""
    T, N, n = rec.states.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", "order", "value"])
        for ti in range(T):
            t = _f(rec.times[ti])
            for a in range(N):
                for k in range(n):
                    w.writerow([t, a, k + 1, _f(rec.states[ti, a, k])])


def write_summary_csv(path, rec) -> None:
    V = rec.lyapunov
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "error_norm", "V"])
        for ti in range(len(rec.times)):
            w.writerow([_f(rec.times[ti]), _f(rec.error_norm[ti]), "" if V is None else _f(V[ti])])
