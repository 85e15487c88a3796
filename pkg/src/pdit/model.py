"""Block-structured private states on (key A, key B, shield A', shield B').

A state of the class is a sum of orthogonally supported pieces:

* the maximally-entangled-form piece, living on span{|ii>} of the key and
  described by a d_k x d_k grid of shield operators ``a_ij``;
* one piece per key pair i < j, living on span{|ij>, |ji>} and described by
  a 2 x 2 grid of shield operators.

Because the pieces never overlap, positivity (and positivity after the
partial transpose on B B') can be decided one block matrix at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterator, Mapping

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    Operator,
    ShapeError,
    ValidationError,
    eigvals_hermitian,
    hermiticity_defect,
    partial_transpose,
)

KEY_FACTORS_PT = (1, 3)


class PatternError(ValueError):
    """Operator has weight outside the class's sparsity pattern."""

    def __init__(self, message: str, entries: list[dict] | None = None):
        super().__init__(message)
        self.entries = entries or []


class NormalizationError(ValueError):
    """A component that carries weight has zero or negative trace."""


@dataclass(frozen=True)
class SystemShape:
    d_k: int
    d_s: int

    def __post_init__(self):
        if self.d_k < 2:
            raise ShapeError(f"key dimension must be >= 2, got {self.d_k}")
        if self.d_s < 1:
            raise ShapeError(f"shield dimension must be >= 1, got {self.d_s}")

    @property
    def d(self) -> int:
        """Number of key pairs i < j."""
        return self.d_k * (self.d_k - 1) // 2

    @property
    def shield_dim(self) -> int:
        return self.d_s * self.d_s

    @property
    def total_dim(self) -> int:
        return self.d_k * self.d_k * self.d_s * self.d_s

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.d_k, self.d_k, self.d_s, self.d_s)

    def pairs(self) -> list[tuple[int, int]]:
        return list(combinations(range(self.d_k), 2))

    @classmethod
    def from_dims(cls, dims) -> SystemShape:
        dims = tuple(dims)
        if len(dims) != 4 or dims[0] != dims[1] or dims[2] != dims[3]:
            raise ShapeError(f"expected dims (d_k, d_k, d_s, d_s), got {dims}")
        return cls(dims[0], dims[2])


def pair_to_index(i: int, j: int, d_k: int) -> int:
    """Lexicographic label l in [1, d] of the key pair (i, j), i < j."""
    if not 0 <= i < j < d_k:
        raise IndexError(f"need 0 <= i < j < {d_k}, got ({i}, {j})")
    return sum(d_k - 1 - r for r in range(i)) + (j - i)


def index_to_pair(l: int, d_k: int) -> tuple[int, int]:
    d = d_k * (d_k - 1) // 2
    if not 1 <= l <= d:
        raise IndexError(f"pair label must be in [1, {d}], got {l}")
    return list(combinations(range(d_k), 2))[l - 1]


@dataclass
class BlockFamily:
    """Shield-operator blocks defining every piece of a class state.

    ``A00`` has shape (d_k, d_k, S, S) and ``pairs[(i, j)]`` has shape
    (2, 2, S, S), with S = d_s**2. Missing pairs are zero blocks.
    """

    shape: SystemShape
    A00: np.ndarray
    pairs: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        s = self.shape.shield_dim
        k = self.shape.d_k
        self.A00 = np.asarray(self.A00, dtype=complex)
        if self.A00.shape != (k, k, s, s):
            raise ShapeError(f"A00 must have shape {(k, k, s, s)}, got {self.A00.shape}")
        full = {}
        for ij in self.shape.pairs():
            block = self.pairs.get(ij)
            block = np.zeros((2, 2, s, s), dtype=complex) if block is None else np.asarray(block, dtype=complex)
            if block.shape != (2, 2, s, s):
                raise ShapeError(f"pair block {ij} must have shape {(2, 2, s, s)}, got {block.shape}")
            full[ij] = block
        extra = set(self.pairs) - set(full)
        if extra:
            raise ShapeError(f"pair keys {sorted(extra)} are not valid i < j pairs for d_k={k}")
        self.pairs = full

    @classmethod
    def from_grids(cls, shape: SystemShape, A00, pairs: Mapping | None = None) -> BlockFamily:
        """Build from nested lists of shield matrices (Operators or arrays)."""
        s = shape.shield_dim
        grid = np.stack([np.stack([_shield(a, s) for a in row]) for row in A00])
        blocks = {}
        for ij, blk in (pairs or {}).items():
            blocks[tuple(ij)] = np.stack([np.stack([_shield(a, s) for a in row]) for row in blk])
        return cls(shape, grid, blocks)

    @classmethod
    def zeros(cls, shape: SystemShape) -> BlockFamily:
        s = shape.shield_dim
        return cls(shape, np.zeros((shape.d_k, shape.d_k, s, s), dtype=complex))

    def block_matrix(self, key) -> np.ndarray:
        """Dense block matrix: ``"00"`` for A^(0,0), or a pair (i, j) for A^(i,j)."""
        grid = self.A00 if key == "00" else self.pairs[tuple(key)]
        n, _, s, _ = grid.shape
        return grid.transpose(0, 2, 1, 3).reshape(n * s, n * s)

    def iter_blocks(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "A(0,0)", self.block_matrix("00")
        for ij in self.shape.pairs():
            yield f"A{ij[0], ij[1]}".replace(" ", ""), self.block_matrix(ij)

    def omega_traces(self) -> tuple[complex, dict[tuple[int, int], complex]]:
        tr0 = complex(np.einsum("iiss->", self.A00))
        trs = {ij: complex(np.einsum("mmss->", b)) for ij, b in self.pairs.items()}
        return tr0, trs

    def hermiticity_defect(self) -> float:
        return max(hermiticity_defect(Operator(m)) for _, m in self.iter_blocks())

    def scaled(self, w0, wpairs: Mapping[tuple[int, int], complex]) -> BlockFamily:
        return BlockFamily(self.shape, self.A00 * w0, {ij: b * wpairs[ij] for ij, b in self.pairs.items()})


def _shield(a, s: int) -> np.ndarray:
    if isinstance(a, Operator):
        a = a.data
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0 and a == 0:
        return np.zeros((s, s), dtype=complex)
    if a.shape != (s, s):
        raise ShapeError(f"shield operator must be {s}x{s}, got {a.shape}")
    return a


def _key_tensor(shape: SystemShape) -> np.ndarray:
    k, s = shape.d_k, shape.shield_dim
    return np.zeros((k, k, s, k, k, s), dtype=complex)


def _from_key_tensor(t: np.ndarray, shape: SystemShape) -> Operator:
    return Operator(t.reshape(shape.total_dim, shape.total_dim), shape.dims)


def assemble_omega0(A00, shape: SystemShape) -> Operator:
    """sum_ij |i><j| (x) |i><j| (x) a_ij on the full four-partite space."""
    A00 = np.asarray(A00, dtype=complex)
    k, s = shape.d_k, shape.shield_dim
    if A00.shape != (k, k, s, s):
        raise ShapeError(f"A00 must have shape {(k, k, s, s)}, got {A00.shape}")
    t = _key_tensor(shape)
    idx = np.arange(k)
    t[idx[:, None], idx[:, None], :, idx[None, :], idx[None, :], :] = A00
    return _from_key_tensor(t, shape)


def assemble_omega_pair(i: int, j: int, block, shape: SystemShape) -> Operator:
    """Piece on span{|ij>, |ji>} built from a 2 x 2 grid of shield operators."""
    if not 0 <= i < j < shape.d_k:
        raise IndexError(f"need 0 <= i < j < {shape.d_k}, got ({i}, {j})")
    block = np.asarray(block, dtype=complex)
    s = shape.shield_dim
    if block.shape != (2, 2, s, s):
        raise ShapeError(f"pair block must have shape {(2, 2, s, s)}, got {block.shape}")
    t = _key_tensor(shape)
    t[i, j, :, i, j, :] = block[0, 0]
    t[i, j, :, j, i, :] = block[0, 1]
    t[j, i, :, i, j, :] = block[1, 0]
    t[j, i, :, j, i, :] = block[1, 1]
    return _from_key_tensor(t, shape)


def assemble_operator(family: BlockFamily) -> Operator:
    """Sum of all pieces, with the blocks used as given (no normalization)."""
    shape = family.shape
    k = shape.d_k
    t = _key_tensor(shape)
    idx = np.arange(k)
    t[idx[:, None], idx[:, None], :, idx[None, :], idx[None, :], :] = family.A00
    for (i, j), b in family.pairs.items():
        t[i, j, :, i, j, :] = b[0, 0]
        t[i, j, :, j, i, :] = b[0, 1]
        t[j, i, :, i, j, :] = b[1, 0]
        t[j, i, :, j, i, :] = b[1, 1]
    return _from_key_tensor(t, shape)


@dataclass(eq=False)
class PditState:
    """Normalized class member p*gamma_0 + (q/d) * sum_l gamma_l.

    ``family`` holds the raw (unnormalized) blocks; ``blocks`` holds the
    blocks of ``rho`` itself.
    """

    rho: Operator
    p: float
    family: BlockFamily
    label: str = "custom"
    params: dict = field(default_factory=dict)
    lost_mass: float = 0.0

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def shape(self) -> SystemShape:
        return self.family.shape

    @cached_property
    def blocks(self) -> BlockFamily:
        return extract_blocks(self.rho, tol=np.inf)

    @cached_property
    def gamma0(self) -> Operator:
        tr0, _ = self.family.omega_traces()
        if abs(tr0) == 0:
            raise NormalizationError("the maximally-entangled-form piece has zero trace")
        return assemble_omega0(self.family.A00 / tr0.real, self.shape)

    def gamma(self, i: int, j: int) -> Operator:
        _, trs = self.family.omega_traces()
        tr = trs[(i, j)].real
        if tr <= 0:
            raise NormalizationError(f"pair piece {(i, j)} has non-positive trace")
        return assemble_omega_pair(i, j, self.family.pairs[(i, j)] / tr, self.shape)


def assemble_state(
    p,
    family: BlockFamily,
    *,
    label: str = "custom",
    params: dict | None = None,
    renormalize: bool = False,
    tol: float = DEFAULT_TOL,
) -> PditState:
    """Normalize every piece by its own trace and mix with weights p and q/d.

    A pair piece with zero trace cannot be normalized; its share q/d is lost.
    That is an error unless ``renormalize`` is set, in which case the whole
    state is rescaled to unit trace. The pair count d is never changed.
    """
    p_val = float(p)
    if not 0.0 <= p_val <= 1.0:
        raise ValueError(f"weight p must lie in [0, 1], got {p}")
    q_val = 1.0 - p_val
    shape = family.shape
    d = Fraction(shape.d)
    tr0, trs = family.omega_traces()
    for name, tr in [("omega_0", tr0), *((f"omega{ij}", t) for ij, t in trs.items())]:
        if abs(tr.imag) > tol:
            raise NormalizationError(f"{name} has complex trace {tr}")

    w0 = 0.0
    if p_val > 0:
        if tr0.real <= tol:
            raise NormalizationError(f"omega_0 has non-positive trace {tr0.real:.3e} but weight p={p_val}")
        w0 = p_val / tr0.real
    wpairs = {}
    lost = 0.0
    for ij, tr in trs.items():
        share = q_val / float(d)
        if share == 0:
            wpairs[ij] = 0.0
        elif tr.real > tol:
            wpairs[ij] = share / tr.real
        elif tr.real < -tol:
            raise NormalizationError(f"pair piece {ij} has negative trace {tr.real:.3e}")
        else:
            wpairs[ij] = 0.0
            lost += share
    if lost > 0 and not renormalize:
        raise NormalizationError(
            f"pair pieces with zero trace drop probability mass {lost:.6g}; pass renormalize=True to rescale"
        )
    scale = 1.0 / (1.0 - lost) if lost > 0 else 1.0
    rho = assemble_operator(family.scaled(w0 * scale, {ij: w * scale for ij, w in wpairs.items()}))
    defect = hermiticity_defect(rho)
    if defect > tol:
        raise ValidationError(f"assembled state is not Hermitian (defect {defect:.3e})")
    return PditState(rho, p_val, family, label, dict(params or {}), lost)


def _as_matrix(state) -> tuple[Operator, SystemShape]:
    if isinstance(state, PditState):
        return state.rho, state.shape
    op = state if isinstance(state, Operator) else Operator(state)
    return op, SystemShape.from_dims(op.dims)


def pattern_mask(shape: SystemShape) -> np.ndarray:
    """Boolean (k, k, k, k) mask over key positions (a, b, a', b') the class may occupy."""
    k = shape.d_k
    a, b, a2, b2 = np.meshgrid(*(np.arange(k),) * 4, indexing="ij")
    diag = (a == b) & (a2 == b2)
    pair = (a != b) & (((a2 == a) & (b2 == b)) | ((a2 == b) & (b2 == a)))
    return diag | pair


def check_pattern(state, tol: float = DEFAULT_TOL, max_report: int = 10) -> None:
    """Raise PatternError listing the entries outside the class's support."""
    op, shape = _as_matrix(state)
    k, s = shape.d_k, shape.shield_dim
    t = op.data.reshape(k, k, s, k, k, s)
    outside = ~pattern_mask(shape)[:, :, None, :, :, None]
    bad = np.argwhere(outside & (np.abs(t) > tol))
    if bad.size == 0:
        return
    entries = []
    for a, b, sr, a2, b2, sc in bad[:max_report]:
        row = (a * k + b) * s + sr
        col = (a2 * k + b2) * s + sc
        entries.append(
            {
                "row": int(row),
                "col": int(col),
                "flat": int(row * op.dim + col),
                "key_bra": (int(a), int(b)),
                "key_ket": (int(a2), int(b2)),
                "shield": (int(sr), int(sc)),
                "value": complex(t[a, b, sr, a2, b2, sc]),
            }
        )
    first = entries[0]
    raise PatternError(
        f"{len(bad)} entries outside the class pattern, first at row {first['row']}, col {first['col']} "
        f"(key |{first['key_bra'][0]}{first['key_bra'][1]}><{first['key_ket'][0]}{first['key_ket'][1]}|, "
        f"shield {first['shield']})",
        entries,
    )


def extract_blocks(state, tol: float = DEFAULT_TOL) -> BlockFamily:
    """Read the blocks A^(0,0) and A^(i,j) back out of a class operator.

    Pass ``tol=np.inf`` to skip the pattern check.
    """
    op, shape = _as_matrix(state)
    if np.isfinite(tol):
        check_pattern(op, tol)
    k, s = shape.d_k, shape.shield_dim
    t = op.data.reshape(k, k, s, k, k, s)
    idx = np.arange(k)
    A00 = t[idx[:, None], idx[:, None], :, idx[None, :], idx[None, :], :]
    pairs = {}
    for i, j in shape.pairs():
        pairs[(i, j)] = np.array(
            [
                [t[i, j, :, i, j, :], t[i, j, :, j, i, :]],
                [t[j, i, :, i, j, :], t[j, i, :, j, i, :]],
            ]
        )
    return BlockFamily(shape, A00, pairs)


def _pt_shield(a: np.ndarray, d_s: int) -> np.ndarray:
    # T on the second shield factor of every operator in a stacked grid
    lead = a.shape[:-2]
    t = a.reshape(*lead, d_s, d_s, d_s, d_s)
    n = len(lead)
    axes = list(range(n)) + [n, n + 3, n + 2, n + 1]
    return t.transpose(axes).reshape(a.shape)


def extract_pt_blocks(state, tol: float = DEFAULT_TOL) -> BlockFamily:
    """Blocks of (1 (x) T_B (x) 1 (x) T_B') rho, computed from the untransposed blocks.

    The result is returned as a BlockFamily whose ``A00`` is the transposed
    grid on span{|ii>} (diagonal a~_ii^(0,0), off-diagonal a~_01^(i,j) above
    and a~_10^(i,j) below) and whose pair (i, j) entry is
    ((a~_00^(i,j), a~_ij^(0,0)), (a~_ji^(0,0), a~_11^(i,j))).
    """
    blocks = extract_blocks(state, tol)
    shape = blocks.shape
    d_s = shape.d_s
    A00 = _pt_shield(blocks.A00, d_s)
    pairs = {ij: _pt_shield(b, d_s) for ij, b in blocks.pairs.items()}
    grid = np.array(A00)
    for (i, j), b in pairs.items():
        grid[i, j] = b[0, 1]
        grid[j, i] = b[1, 0]
    pt_pairs = {}
    for (i, j), b in pairs.items():
        pt_pairs[(i, j)] = np.array([[b[0, 0], A00[i, j]], [A00[j, i], b[1, 1]]])
    return BlockFamily(shape, grid, pt_pairs)


@dataclass
class BlockwiseCheck:
    passed: bool
    minima: dict[str, float]
    tolerance: float

    @property
    def min_eig(self) -> float:
        return min(self.minima.values())


def _blockwise(blocks: BlockFamily, tol: float, prefix: str) -> BlockwiseCheck:
    minima = {}
    for name, m in blocks.iter_blocks():
        minima[prefix + name[1:]] = float(eigvals_hermitian(Operator(m), tol)[0])
    return BlockwiseCheck(all(v >= -tol for v in minima.values()), minima, tol)


def is_positive_blockwise(state, tol: float = DEFAULT_TOL) -> BlockwiseCheck:
    return _blockwise(extract_blocks(state, tol), tol, "A")


def is_ppt_blockwise(state, tol: float = DEFAULT_TOL) -> BlockwiseCheck:
    return _blockwise(extract_pt_blocks(state, tol), tol, "PT")


def blockwise_spectrum(blocks: BlockFamily, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Sorted union of the spectra of every block matrix in ``blocks``."""
    vals = [eigvals_hermitian(Operator(m), tol) for _, m in blocks.iter_blocks()]
    return np.sort(np.concatenate(vals))


def full_pt(state) -> Operator:
    op, _ = _as_matrix(state)
    return partial_transpose(op, KEY_FACTORS_PT)


def state_from_operator(op: Operator, label: str = "custom", tol: float = DEFAULT_TOL) -> PditState:
    """Wrap a class-pattern density matrix as a PditState.

    The weight p is the trace of the maximally-entangled-form piece.
    """
    blocks = extract_blocks(op, tol)
    tr0, _ = blocks.omega_traces()
    p = min(max(tr0.real, 0.0), 1.0)
    return PditState(op, p, blocks, label)


def random_family(shape: SystemShape, rng: np.random.Generator, kind: str = "psd") -> BlockFamily:
    """Random Hermitian blocks for testing.

    ``kind`` is ``"psd"`` (Wishart blocks), ``"indefinite"`` (one block gets a
    negative eigenvalue), or ``"mixed"`` (Wishart blocks plus a large identity
    share, which usually survives the partial transpose).
    """
    s = shape.shield_dim
    k = shape.d_k

    def wishart(n):
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        m = g @ g.conj().T
        return m / np.trace(m).real

    def to_grid(m, n):
        return m.reshape(n, s, n, s).transpose(0, 2, 1, 3)

    mats = {"00": wishart(k * s)}
    for ij in shape.pairs():
        mats[ij] = wishart(2 * s)
    if kind == "mixed":
        for key, m in mats.items():
            n = m.shape[0]
            mats[key] = 0.15 * m + 0.85 * np.eye(n) / n
    elif kind == "indefinite":
        keys = list(mats)
        key = keys[rng.integers(len(keys))]
        n = mats[key].shape[0]
        w = rng.uniform(0.1, 1.0, size=n)
        w[0] = -rng.uniform(0.05, 0.5)
        q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        m = (q * w) @ q.conj().T
        mats[key] = m / np.trace(m).real
    elif kind != "psd":
        raise ValueError(f"unknown kind {kind!r}")
    A00 = to_grid(mats.pop("00"), k)
    pairs = {ij: to_grid(m, 2) for ij, m in mats.items()}
    return BlockFamily(shape, A00, pairs)
