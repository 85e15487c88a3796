"""Named members of the class and the shield operators used to build them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    Operator,
    ValidationError,
    fourier_matrix,
    is_unitary,
    kron,
    partial_transpose,
    permute_subsystems,
    psd_sqrt,
    swap_operator,
    trace_norm,
)
from .model import BlockFamily, PditState, SystemShape, assemble_state

FAMILIES = ("swap_pbit", "flower", "bek", "x_form", "xy_form_d3", "lemma2")


@dataclass(frozen=True)
class AppendixOperators:
    X: Operator
    Y: Operator
    sqrtXX: Operator
    sqrtYY: Operator


def _check_unitary(w, tol: float) -> np.ndarray:
    w = np.asarray(w.data if isinstance(w, Operator) else w, dtype=complex)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError(f"unitary must be square, got shape {w.shape}")
    if not is_unitary(w, tol):
        raise ValidationError("matrix is not unitary (||W^dag W - I|| exceeds tolerance)")
    return w


def _shield_op(x, tol: float) -> Operator:
    if isinstance(x, Operator) and len(x.dims) == 2 and x.dims[0] == x.dims[1]:
        return x
    data = x.data if isinstance(x, Operator) else np.asarray(x, dtype=complex)
    n = data.shape[0]
    d_s = int(round(np.sqrt(n)))
    if d_s * d_s != n:
        raise ValidationError(f"shield operator side {n} is not a perfect square")
    return Operator(data, (d_s, d_s))


def _check_trace_norm(x: Operator, name: str, tol: float) -> None:
    norm = trace_norm(x)
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"||{name}||_1 must be 1, got {norm:.12g}")


def sym_projector(d: int) -> Operator:
    v = swap_operator(d)
    return Operator((np.eye(d * d) + v.data) / 2, (d, d))


def antisym_projector(d: int) -> Operator:
    v = swap_operator(d)
    return Operator((np.eye(d * d) - v.data) / 2, (d, d))


def maximally_correlated(d_s: int) -> Operator:
    """sigma = (1/d_s) sum_i |ii><ii|."""
    m = np.zeros((d_s * d_s, d_s * d_s), dtype=complex)
    for i in range(d_s):
        m[i * d_s + i, i * d_s + i] = 1.0 / d_s
    return Operator(m, (d_s, d_s))


def embed_unitary(w) -> Operator:
    """U = sum_ij w_ij |ii><jj|."""
    w = np.asarray(w, dtype=complex)
    d = w.shape[0]
    m = np.zeros((d * d, d * d), dtype=complex)
    diag = np.arange(d) * (d + 1)
    m[np.ix_(diag, diag)] = w
    return Operator(m, (d, d))


def swap_pbit(d_s: int) -> PditState:
    if d_s < 2:
        raise ValueError(f"swap pbit needs d_s >= 2, got {d_s}")
    shape = SystemShape(2, d_s)
    eye = np.eye(d_s * d_s) / d_s**2
    v = swap_operator(d_s).data / d_s**2
    family = BlockFamily.from_grids(shape, [[eye, v], [v, eye]])
    return assemble_state(1, family, label="swap_pbit", params={"d_s": d_s})


def flower_state(d_s: int, w=None, tol: float = DEFAULT_TOL) -> PditState:
    """Flower pbit built from a d_s x d_s unitary ``w`` (Fourier by default)."""
    w = _check_unitary(fourier_matrix(d_s) if w is None else w, tol)
    if w.shape[0] != d_s:
        raise ValidationError(f"unitary must be {d_s}x{d_s}, got {w.shape}")
    shape = SystemShape(2, d_s)
    sigma = maximally_correlated(d_s).data
    u = embed_unitary(w).data
    family = BlockFamily.from_grids(shape, [[sigma, u.T / d_s], [u.conj() / d_s, sigma]])
    return assemble_state(1, family, label="flower", params={"d_s": d_s})


def _tensor_power_shield(op: Operator, l: int) -> Operator:
    # op acts on (A'_1, B'_1); regroup l copies into (A'_1..A'_l, B'_1..B'_l)
    out = op
    for _ in range(l - 1):
        out = kron(out, op)
    perm = [2 * r for r in range(l)] + [2 * r + 1 for r in range(l)]
    out = permute_subsystems(out, perm)
    d = op.dims[0] ** l
    return Operator(out.data, (d, d))


def bound_entangled_key_state(d_s: int, l: int = 1, p: float = 0.25) -> PditState:
    """Two-key-bit state mixing tensor powers of the (anti)symmetric Werner states.

    Each shield side has dimension ``d_s**l``. The state's weight on its
    maximally-entangled-form piece is ``2 p``.
    """
    if d_s < 2:
        raise ValueError(f"need d_s >= 2, got {d_s}")
    if l < 1:
        raise ValueError(f"need l >= 1, got {l}")
    if not 0 <= p <= 0.5:
        raise ValueError(f"need 0 <= p <= 1/2, got {p}")
    rho_s = sym_projector(d_s) * (2 / (d_s**2 + d_s))
    rho_a = antisym_projector(d_s) * (2 / (d_s**2 - d_s))
    tau0 = _tensor_power_shield(rho_s, l).data
    tau1 = _tensor_power_shield((rho_a + rho_s) / 2, l).data
    shape = SystemShape(2, d_s**l)
    zero = np.zeros_like(tau0)
    diag = p * (tau0 + tau1) / 2
    off = p * (tau1 - tau0) / 2
    mid = (1 - 2 * p) * tau0 / 2
    family = BlockFamily.from_grids(shape, [[diag, off], [off, diag]], {(0, 1): [[mid, zero], [zero, mid]]})
    return assemble_state(2 * p, family, label="bek", params={"d_s": d_s, "l": l, "p": p})


def x_form_pbit(x, tol: float = DEFAULT_TOL) -> PditState:
    """pbit with blocks sqrt(XX^dag), X, X^dag, sqrt(X^dag X); requires ||X||_1 = 1."""
    x = _shield_op(x, tol)
    _check_trace_norm(x, "X", tol)
    shape = SystemShape(2, x.dims[0])
    top = psd_sqrt(x @ x.H, tol).data
    bottom = psd_sqrt(x.H @ x, tol).data
    family = BlockFamily.from_grids(shape, [[top, x.data], [x.data.conj().T, bottom]])
    return assemble_state(1, family, label="x_form", params={"d_s": x.dims[0]})


def xy_form_pdit3(y, w=None, tol: float = DEFAULT_TOL) -> PditState:
    """d_k = 3 pdit from Y and a unitary W, with X = W Y^dag.

    All nine blocks lie on span{|ii>}; the corner block is the product XY.
    """
    y = _shield_op(y, tol)
    _check_trace_norm(y, "Y", tol)
    n = y.dim
    w = _check_unitary(np.eye(n) if w is None else w, tol)
    if w.shape[0] != n:
        raise ValidationError(f"unitary must be {n}x{n}, got {w.shape}")
    x = Operator(w @ y.data.conj().T, y.dims)
    _check_trace_norm(x, "X", tol)
    xy = x @ y
    sxx = psd_sqrt(x @ x.H, tol).data
    sxtx = psd_sqrt(x.H @ x, tol).data
    syty = psd_sqrt(y.H @ y, tol).data
    X, Y, XY = x.data, y.data, xy.data
    grid = [
        [sxx, X, XY],
        [X.conj().T, sxtx, Y],
        [XY.conj().T, Y.conj().T, syty],
    ]
    family = BlockFamily.from_grids(SystemShape(3, y.dims[0]), grid)
    return assemble_state(1, family, label="xy_form_d3", params={"d_s": y.dims[0]})


def appendix_xy(d_s: int, u=None, tol: float = DEFAULT_TOL) -> AppendixOperators:
    """X = d_s^{-3/2} sum u_ij |ij><ji| and Y = (1/d_s) sum u_ij |ii><jj|.

    ``u`` must be unitary with every entry of modulus 1/sqrt(d_s); the
    Fourier matrix is used by default.
    """
    if d_s < 1:
        raise ValueError(f"need d_s >= 1, got {d_s}")
    u = _check_unitary(fourier_matrix(d_s) if u is None else u, tol)
    if u.shape[0] != d_s:
        raise ValidationError(f"unitary must be {d_s}x{d_s}, got {u.shape}")
    if np.max(np.abs(np.abs(u) - 1 / np.sqrt(d_s))) > tol:
        raise ValidationError("every entry of the unitary must have modulus 1/sqrt(d_s)")
    n = d_s * d_s
    x = np.zeros((n, n), dtype=complex)
    for i in range(d_s):
        for j in range(d_s):
            x[i * d_s + j, j * d_s + i] = u[i, j] / (d_s * np.sqrt(d_s))
    X = Operator(x, (d_s, d_s))
    Y = embed_unitary(u) / d_s
    return AppendixOperators(X, Y, psd_sqrt(X @ X.H, tol), psd_sqrt(Y @ Y.H, tol))


def pt_residual(ops: AppendixOperators) -> float:
    """max |Y - sqrt(d_s) X^{T_B'}| entrywise."""
    d_s = ops.X.dims[0]
    diff = ops.Y.data - np.sqrt(d_s) * partial_transpose(ops.X, [1]).data
    return float(np.max(np.abs(diff)))


def lemma2_weight(d_k: int, d_s: int) -> Fraction:
    """Weight p making the non-trivial PT constraints tight: d_s / (d_s + d_k - 1)."""
    from .analysis import solve_equality_weight

    return solve_equality_weight(d_k, Fraction(1, d_s * d_s), Fraction(1, d_s))


def lemma2_family(d_k: int, d_s: int, variant: str = "sqrt", u=None, tol: float = DEFAULT_TOL) -> PditState:
    """Equal-block subclass with the weight solved from the PT equality.

    ``variant="sqrt"`` fills every maximally-entangled-form block with
    sqrt(XX^dag) and every pair block with sqrt(YY^dag). ``variant="x_offdiag"``
    keeps those on the diagonals but uses X (resp. Y) above and X^dag
    (resp. Y^dag) below the diagonal.
    """
    shape = SystemShape(d_k, d_s)
    ops = appendix_xy(d_s, u, tol)
    a, b = ops.sqrtXX.data, ops.sqrtYY.data
    if variant == "sqrt":
        grid = [[a] * d_k for _ in range(d_k)]
        pair = [[b, b], [b, b]]
    elif variant == "x_offdiag":
        X, Y = ops.X.data, ops.Y.data
        grid = [[a if r == c else (X if r < c else X.conj().T) for c in range(d_k)] for r in range(d_k)]
        pair = [[b, Y], [Y.conj().T, b]]
    else:
        raise ValueError(f"unknown variant {variant!r}; use 'sqrt' or 'x_offdiag'")
    family = BlockFamily.from_grids(shape, grid, {ij: pair for ij in shape.pairs()})
    p = lemma2_weight(d_k, d_s)
    return assemble_state(
        float(p), family, label="lemma2", params={"d_k": d_k, "d_s": d_s, "variant": variant, "p_exact": str(p)}
    )
