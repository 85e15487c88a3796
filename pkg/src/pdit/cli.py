"""Command-line front end: ``pdit build | check | scan | spectra``.

Exit codes: 0 success, 1 a structural check failed (check) or a scan row
exceeded its cap (scan), 2 invalid flags or input.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from fractions import Fraction

import numpy as np

from . import analysis, catalog, io
from .linalg import (
    DEFAULT_TOL,
    ShapeError,
    ValidationError,
    eigvals_hermitian,
    fourier_matrix,
    group_eigenvalues,
    hermiticity_defect,
)
from .model import NormalizationError, PatternError, SystemShape, assemble_state, state_from_operator


class UsageError(Exception):
    pass


def default_tol() -> float:
    raw = os.environ.get("PDIT_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError as exc:
        raise UsageError(f"PDIT_TOL={raw!r} is not a number") from exc


def _unitary(spec: str | None, n: int) -> np.ndarray:
    if spec in (None, "fourier"):
        return fourier_matrix(n)
    if spec == "identity":
        return np.eye(n)
    return io.read_matrix(spec).data


def _require(value, flag: str, family: str):
    if value is None:
        raise UsageError(f"family {family} requires {flag}")
    return value


def build_state(args, tol: float):
    if args.blocks:
        if args.p is None:
            raise UsageError("--blocks requires --p")
        doc = io.read_json(args.blocks)
        u = _unitary(args.unitary, int(doc.get("d_s", 1))) if args.unitary else None
        family = io.block_family_from_dict(doc, u)
        return assemble_state(args.p, family, label="blocks", tol=tol)

    name = args.family
    if name == "swap_pbit":
        return catalog.swap_pbit(_require(args.ds, "--ds", name))
    if name == "flower":
        d_s = _require(args.ds, "--ds", name)
        return catalog.flower_state(d_s, _unitary(args.unitary, d_s), tol)
    if name == "bek":
        d_s = _require(args.ds, "--ds", name)
        return catalog.bound_entangled_key_state(d_s, args.l or 1, 0.25 if args.p is None else args.p)
    if name == "x_form":
        d_s = _require(args.ds, "--ds", name)
        return catalog.x_form_pbit(catalog.appendix_xy(d_s, _unitary(args.unitary, d_s), tol).X, tol)
    if name == "xy_form_d3":
        d_s = _require(args.ds, "--ds", name)
        y = catalog.appendix_xy(d_s, None, tol).Y
        w = _unitary(args.unitary, d_s * d_s) if args.unitary else None
        return catalog.xy_form_pdit3(y, w, tol)
    if name == "lemma2":
        d_k = _require(args.dk, "--dk", name)
        d_s = _require(args.ds, "--ds", name)
        return catalog.lemma2_family(d_k, d_s, args.variant, _unitary(args.unitary, d_s), tol)
    raise UsageError(f"unknown family {name!r}")


def cmd_build(args, tol: float) -> int:
    state = build_state(args, tol)
    io.write_matrix(args.out, state.rho)
    meta = {"family": state.label, "d_k": state.shape.d_k, "d_s": state.shape.d_s, "p": state.p}
    if state.params:
        meta["params"] = state.params
    io.write_metadata(args.out, meta)
    return 0


def cmd_check(args, tol: float) -> int:
    op = io.read_matrix(args.input)
    meta = io.read_metadata(args.input) or {}
    label = meta.get("family", "custom")
    if hermiticity_defect(op) > tol:
        shape = SystemShape.from_dims(op.dims)
        key = analysis.key_correlation_report(op)
        report = analysis.CheckReport(
            label=label,
            d_k=shape.d_k,
            d_s=shape.d_s,
            p=float(np.trace(key)),
            trace=float(np.real(np.trace(op.data))),
            hermitian=False,
            tolerance=tol,
        )
    else:
        state = state_from_operator(op, label, tol)
        report = analysis.ppt_spectral_report(state, tol)
    print(io.dumps(report.to_dict()))
    return 0 if report.structurally_valid else 1


def _parse_eps_list(raw: str) -> list[float]:
    try:
        values = [float(Fraction(tok.strip())) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"--eps-list must be comma-separated numbers: {exc}") from exc
    if not values:
        raise UsageError("--eps-list is empty")
    for v in values:
        if not 0 < v <= 2:
            raise UsageError(f"epsilon {v} outside (0, 2]")
    return values


def write_scan_csv(rows, stream) -> None:
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(analysis.SCAN_COLUMNS)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) for v in row.as_csv_row()])


def cmd_scan(args, tol: float) -> int:
    rows = analysis.epsilon_scan(_parse_eps_list(args.eps_list))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_scan_csv(rows, fh)
    else:
        write_scan_csv(rows, sys.stdout)
    return 0 if all(r.within_cap for r in rows) else 1


def _multiset(values, tol: float) -> list[dict]:
    return [{"value": v, "multiplicity": m} for v, m in group_eigenvalues(values, tol)]


def spectra_report(d_s: int, unitary=None, tol: float = DEFAULT_TOL, group_tol: float = 1e-10) -> dict:
    ops = catalog.appendix_xy(d_s, unitary, tol)

    def snap(v):
        return np.where(np.abs(v) < group_tol, 0.0, v)

    return {
        "d_s": d_s,
        "X_moduli": _multiset(snap(np.abs(np.linalg.eigvals(ops.X.data))), group_tol),
        "Y_moduli": _multiset(snap(np.abs(np.linalg.eigvals(ops.Y.data))), group_tol),
        "sqrtXX": _multiset(snap(eigvals_hermitian(ops.sqrtXX, tol)), group_tol),
        "sqrtYY": _multiset(snap(eigvals_hermitian(ops.sqrtYY, tol)), group_tol),
        "pt_residual": catalog.pt_residual(ops),
    }


def cmd_spectra(args, tol: float) -> int:
    d_s = args.ds
    if d_s < 2:
        raise UsageError("--ds must be >= 2")
    print(io.dumps(spectra_report(d_s, _unitary(args.unitary, d_s), tol)))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdit", description="Build and verify private dit states.")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a catalog or file-defined state")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", choices=catalog.FAMILIES)
    src.add_argument("--blocks", metavar="FILE")
    b.add_argument("--dk", type=int)
    b.add_argument("--ds", type=int)
    b.add_argument("--p", type=float)
    b.add_argument("--l", type=int)
    b.add_argument("--unitary", default=None, help="fourier (default), identity, or a matrix JSON file")
    b.add_argument("--variant", default="sqrt", choices=["sqrt", "x_offdiag"], help="lemma2 block choice")
    b.add_argument("--out", required=True)
    b.add_argument("--tol", type=float)

    c = sub.add_parser("check", help="print a CheckReport for a state file")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--tol", type=float)

    s = sub.add_parser("scan", help="epsilon scan of the separability bound")
    s.add_argument("--eps-list", required=True)
    s.add_argument("--out")
    s.add_argument("--tol", type=float)

    sp = sub.add_parser("spectra", help="spectra of the appendix X, Y operators")
    sp.add_argument("--ds", type=int, required=True)
    sp.add_argument("--unitary", default=None)
    sp.add_argument("--tol", type=float)
    return parser


COMMANDS = {"build": cmd_build, "check": cmd_check, "scan": cmd_scan, "spectra": cmd_spectra}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        tol = args.tol if args.tol is not None else default_tol()
        return COMMANDS[args.command](args, tol)
    except (
        UsageError,
        io.FormatError,
        PatternError,
        NormalizationError,
        ValidationError,
        ShapeError,
        IndexError,
        ValueError,
    ) as exc:
        print(f"pdit {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
