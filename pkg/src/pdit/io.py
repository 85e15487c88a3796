"""JSON formats for matrices, block families and state metadata.

Matrix document::

    {"dims": [d0, d1, ...], "data": [[re, im], ...]}   # row-major, (prod dims)^2 entries

Block-family document::

    {"d_k": 2, "d_s": 2,
     "A00": [[ref, ref], [ref, ref]],
     "pairs": {"0,1": [[ref, ref], [ref, ref]]}}

where each ``ref`` is an inline matrix document or the name of a shield
constant (see ``SHIELD_CONSTANTS``).
"""

from __future__ import annotations

import json
from math import prod
from pathlib import Path

import numpy as np

from .catalog import antisym_projector, appendix_xy, maximally_correlated, sym_projector
from .linalg import Operator, ShapeError, swap_operator
from .model import BlockFamily, SystemShape

SHIELD_CONSTANTS = (
    "zero",
    "I_over_ds2",
    "V_over_ds2",
    "sigma",
    "P_sym",
    "P_as",
    "X",
    "X_dag",
    "Y",
    "Y_dag",
    "sqrtXX",
    "sqrtYY",
)


class FormatError(ValueError):
    """A JSON document does not follow the expected schema."""


def matrix_to_dict(op: Operator) -> dict:
    flat = op.data.reshape(-1)
    return {"dims": list(op.dims), "data": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_dict(doc: dict) -> Operator:
    try:
        dims = [int(d) for d in doc["dims"]]
        raw = np.asarray(doc["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed matrix document: {exc}") from exc
    n = prod(dims)
    if raw.shape != (n * n, 2):
        raise FormatError(f"expected {n * n} [re, im] pairs for dims {dims}, got array of shape {raw.shape}")
    data = (raw[:, 0] + 1j * raw[:, 1]).reshape(n, n)
    try:
        return Operator(data, dims)
    except ShapeError as exc:
        raise FormatError(str(exc)) from exc


def dumps(doc) -> str:
    # repr-based float output is the shortest round-trip form (<= 17 digits)
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


def write_matrix(path, op: Operator) -> None:
    Path(path).write_text(dumps(matrix_to_dict(op)), encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def read_matrix(path) -> Operator:
    return matrix_from_dict(read_json(path))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_metadata(path, meta: dict) -> None:
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")


def read_metadata(path) -> dict | None:
    side = sidecar_path(path)
    if not side.exists():
        return None
    return read_json(side)


def shield_constant(name: str, d_s: int, unitary=None) -> np.ndarray:
    n = d_s * d_s
    if name == "zero":
        return np.zeros((n, n), dtype=complex)
    if name == "I_over_ds2":
        return np.eye(n, dtype=complex) / n
    if name == "V_over_ds2":
        return swap_operator(d_s).data / n
    if name == "sigma":
        return maximally_correlated(d_s).data
    if name == "P_sym":
        return sym_projector(d_s).data
    if name == "P_as":
        return antisym_projector(d_s).data
    if name in ("X", "X_dag", "Y", "Y_dag", "sqrtXX", "sqrtYY"):
        ops = appendix_xy(d_s, unitary)
        table = {
            "X": ops.X.data,
            "X_dag": ops.X.data.conj().T,
            "Y": ops.Y.data,
            "Y_dag": ops.Y.data.conj().T,
            "sqrtXX": ops.sqrtXX.data,
            "sqrtYY": ops.sqrtYY.data,
        }
        return np.array(table[name])
    raise FormatError(f"unknown shield constant {name!r}; known: {', '.join(SHIELD_CONSTANTS)}")


def _resolve(ref, d_s: int, unitary) -> np.ndarray:
    if isinstance(ref, str):
        return shield_constant(ref, d_s, unitary)
    if isinstance(ref, dict):
        return matrix_from_dict(ref).data
    raise FormatError(f"matrix reference must be a name or a matrix document, got {type(ref).__name__}")


def _grid(rows, n: int, d_s: int, unitary, where: str) -> list:
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise FormatError(f"{where} must be a {n}x{n} grid of matrix references")
    return [[_resolve(ref, d_s, unitary) for ref in row] for row in rows]


def block_family_from_dict(doc: dict, unitary=None) -> BlockFamily:
    try:
        shape = SystemShape(int(doc["d_k"]), int(doc["d_s"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"block family needs integer d_k and d_s: {exc}") from exc
    d_s = shape.d_s
    A00 = _grid(doc.get("A00"), shape.d_k, d_s, unitary, "A00")
    pairs = {}
    for key, rows in (doc.get("pairs") or {}).items():
        try:
            i, j = (int(x) for x in key.split(","))
        except ValueError as exc:
            raise FormatError(f"pair key {key!r} must look like 'i,j'") from exc
        pairs[(i, j)] = _grid(rows, 2, d_s, unitary, f"pairs[{key}]")
    try:
        return BlockFamily.from_grids(shape, A00, pairs)
    except ShapeError as exc:
        raise FormatError(str(exc)) from exc


def block_family_to_dict(family: BlockFamily) -> dict:
    d_s = family.shape.d_s

    def ref(m):
        return matrix_to_dict(Operator(m, (d_s, d_s)))

    return {
        "d_k": family.shape.d_k,
        "d_s": d_s,
        "A00": [[ref(a) for a in row] for row in family.A00],
        "pairs": {f"{i},{j}": [[ref(a) for a in row] for row in b] for (i, j), b in family.pairs.items()},
    }


def read_block_family(path, unitary=None) -> BlockFamily:
    return block_family_from_dict(read_json(path), unitary)
