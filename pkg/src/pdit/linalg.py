"""Dense complex linear algebra on tensor-product spaces.

Every operator carries the list of subsystem dimensions it acts on, so that
partial transposes and partial traces can be taken by factor index.
Subsystem order for the four-partite states is always (A, B, A', B').
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class ShapeError(ValueError):
    """Operator dimensions are inconsistent with the requested operation."""


class ValidationError(ValueError):
    """An input fails a numerical precondition (Hermiticity, unitarity, norm)."""


@dataclass(frozen=True, eq=False)
class Operator:
    """Immutable square matrix tagged with its subsystem dimensions."""

    data: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, data, dims: Sequence[int] | None = None):
        arr = np.array(data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeError(f"operator must be a square matrix, got shape {arr.shape}")
        if dims is None:
            dims = (arr.shape[0],)
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims) or prod(dims) != arr.shape[0]:
            raise ShapeError(f"dims {dims} do not multiply to side length {arr.shape[0]}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def H(self) -> Operator:
        return Operator(self.data.conj().T, self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def __add__(self, other: Operator) -> Operator:
        _check_same_dims(self, other)
        return Operator(self.data + other.data, self.dims)

    def __sub__(self, other: Operator) -> Operator:
        _check_same_dims(self, other)
        return Operator(self.data - other.data, self.dims)

    def __mul__(self, scalar) -> Operator:
        return Operator(self.data * scalar, self.dims)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> Operator:
        return Operator(self.data / scalar, self.dims)

    def __matmul__(self, other: Operator) -> Operator:
        _check_same_dims(self, other)
        return Operator(self.data @ other.data, self.dims)

    def __repr__(self) -> str:
        return f"Operator(dims={self.dims})"


def _check_same_dims(a: Operator, b: Operator) -> None:
    if a.dims != b.dims:
        raise ShapeError(f"dimension mismatch: {a.dims} vs {b.dims}")


def as_operator(m, dims: Sequence[int] | None = None) -> Operator:
    if isinstance(m, Operator):
        if dims is not None and tuple(dims) != m.dims:
            return Operator(m.data, dims)
        return m
    return Operator(m, dims)


def identity(*dims: int) -> Operator:
    return Operator(np.eye(prod(dims)), dims)


def ket_bra(i: int, j: int, d: int) -> Operator:
    """The matrix unit |i><j| on C^d."""
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return Operator(m, (d,))


def swap_operator(d: int) -> Operator:
    """V = sum_ij |ij><ji| on C^d (x) C^d."""
    m = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            m[i * d + j, j * d + i] = 1.0
    return Operator(m, (d, d))


def kron(a: Operator, b: Operator, *rest: Operator) -> Operator:
    ops = [as_operator(a), as_operator(b), *(as_operator(r) for r in rest)]
    data = ops[0].data
    dims = ops[0].dims
    for op in ops[1:]:
        data = np.kron(data, op.data)
        dims = dims + op.dims
    return Operator(data, dims)


def _as_tensor(m: Operator) -> np.ndarray:
    return m.data.reshape(m.dims + m.dims)


def _check_factors(m: Operator, which: Iterable[int]) -> tuple[int, ...]:
    which = tuple(sorted(set(int(k) for k in which)))
    n = len(m.dims)
    for k in which:
        if not 0 <= k < n:
            raise ShapeError(f"subsystem index {k} out of range for dims {m.dims}")
    return which


def partial_transpose(m: Operator, which: Iterable[int]) -> Operator:
    """Transpose the tensor factors listed in ``which``, leaving the others alone."""
    m = as_operator(m)
    which = _check_factors(m, which)
    n = len(m.dims)
    axes = list(range(2 * n))
    for k in which:
        axes[k], axes[n + k] = axes[n + k], axes[k]
    data = _as_tensor(m).transpose(axes).reshape(m.dim, m.dim)
    return Operator(data, m.dims)


def partial_trace(m: Operator, keep: Iterable[int]) -> Operator:
    """Trace out every factor not listed in ``keep``."""
    m = as_operator(m)
    keep = _check_factors(m, keep)
    n = len(m.dims)
    traced = [k for k in range(n) if k not in keep]
    t = _as_tensor(m)
    # trace from the highest index down so remaining axis numbers stay valid
    for k in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=cur + k)
    kept_dims = tuple(m.dims[k] for k in keep)
    side = prod(kept_dims) if kept_dims else 1
    return Operator(t.reshape(side, side), kept_dims or (1,))


def permute_subsystems(m: Operator, perm: Sequence[int]) -> Operator:
    """Reorder tensor factors: factor ``perm[k]`` of the input becomes factor ``k``."""
    m = as_operator(m)
    n = len(m.dims)
    if sorted(perm) != list(range(n)):
        raise ShapeError(f"{perm} is not a permutation of {n} subsystems")
    axes = list(perm) + [n + p for p in perm]
    dims = tuple(m.dims[p] for p in perm)
    return Operator(_as_tensor(m).transpose(axes).reshape(m.dim, m.dim), dims)


def hermiticity_defect(m: Operator) -> float:
    data = as_operator(m).data
    if data.size == 0:
        return 0.0
    return float(np.max(np.abs(data - data.conj().T)))


def is_hermitian(m: Operator, tol: float = DEFAULT_TOL) -> bool:
    return hermiticity_defect(m) <= tol


def eigvals_hermitian(m: Operator, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Ascending real spectrum of a Hermitian operator.

    Raises:
        ValidationError: if ``m`` deviates from Hermitian by more than ``tol``.
    """
    m = as_operator(m)
    defect = hermiticity_defect(m)
    if defect > tol:
        raise ValidationError(f"operator is not Hermitian (max |M - M^dag| = {defect:.3e})")
    data = (m.data + m.data.conj().T) / 2
    return np.linalg.eigvalsh(data)


def singular_values(m: Operator) -> np.ndarray:
    return np.linalg.svd(as_operator(m).data, compute_uv=False)


def trace_norm(m: Operator) -> float:
    """Sum of singular values. Valid for non-Hermitian input."""
    return float(np.sum(singular_values(m)))


def trace_distance(rho: Operator, sigma: Operator) -> float:
    """Unhalved trace distance ||rho - sigma||_1."""
    rho, sigma = as_operator(rho), as_operator(sigma)
    if rho.dim != sigma.dim:
        raise ShapeError(f"dimension mismatch: {rho.dims} vs {sigma.dims}")
    return trace_norm(Operator(rho.data - sigma.data, rho.dims))


def min_eigenvalue_pt(rho: Operator, which: Iterable[int], tol: float = DEFAULT_TOL) -> float:
    return float(eigvals_hermitian(partial_transpose(rho, which), tol)[0])


def psd_sqrt(m: Operator, tol: float = DEFAULT_TOL) -> Operator:
    """Principal square root of a positive semidefinite operator.

    Eigenvalues at rounding level are set to zero before the root is taken,
    since sqrt would lift 1e-17 noise to 1e-9 entries. Negative eigenvalues
    below ``-tol`` are an error.
    """
    m = as_operator(m)
    data = (m.data + m.data.conj().T) / 2
    w, v = np.linalg.eigh(data)
    if w.size and w[0] < -tol:
        raise ValidationError(f"operator is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    cutoff = max(w.size, 16) * np.finfo(float).eps * (np.max(np.abs(w)) if w.size else 0.0)
    w = np.where(w <= cutoff, 0.0, w)
    w = np.sqrt(w)
    return Operator((v * w) @ v.conj().T, m.dims)


def is_unitary(u, tol: float = DEFAULT_TOL) -> bool:
    u = np.asarray(as_operator(u).data)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def group_eigenvalues(values, tol: float = DEFAULT_TOL) -> list[tuple[float, int]]:
    """Cluster sorted real values into (representative, multiplicity) pairs.

    A new cluster starts whenever a value exceeds the current cluster's first
    member by more than ``tol``.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    groups: list[list[float]] = []
    for v in vals:
        if groups and v - groups[-1][0] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


def fourier_matrix(d: int) -> np.ndarray:
    """Unitary DFT matrix, u_jk = exp(2 pi i jk/d)/sqrt(d)."""
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return np.exp(2j * np.pi * j * k / d) / np.sqrt(d)
