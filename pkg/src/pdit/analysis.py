"""Distances, PT constraint systems, separability bounds and the epsilon scan."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    Operator,
    eigvals_hermitian,
    hermiticity_defect,
    partial_transpose,
    trace_distance,
)
from .model import (
    KEY_FACTORS_PT,
    PditState,
    blockwise_spectrum,
    extract_blocks,
    extract_pt_blocks,
    is_positive_blockwise,
    is_ppt_blockwise,
)


def distance_to_me_form(state: PditState) -> float:
    """||rho - gamma_0||_1, the distance to the maximally-entangled-form piece."""
    return trace_distance(state.rho, state.gamma0)


def lemma2_q(d_k: int, d_s: int) -> Fraction:
    """Exact q = (d_k - 1) / (d_k - 1 + d_s) for the equal-block subclass."""
    if d_k < 2:
        raise ValueError(f"need d_k >= 2, got {d_k}")
    if d_s < 1:
        raise ValueError(f"need d_s >= 1, got {d_s}")
    return Fraction(d_k - 1, d_k - 1 + d_s)


@dataclass(frozen=True)
class ConstraintSet:
    """The four scalar PT conditions for one joint eigenvalue pair (lambda_a, lambda_b).

    ``values`` are, in order: p*la + q*lb, p*la - q'*lb, q'*lb + p*la and
    q'*lb - p*la, with q' = q / (d_k - 1).
    """

    p: float
    d_k: int
    lambda_a: float
    lambda_b: float
    values: tuple
    tolerance: float = DEFAULT_TOL

    @property
    def violated(self) -> tuple[bool, ...]:
        return tuple(v < -self.tolerance for v in self.values)

    @property
    def satisfied(self) -> bool:
        return not any(self.violated)

    @property
    def equality_residual(self):
        """q'*lb - p*la; zero exactly when constraints 2 and 4 are both tight."""
        return self.values[3]


def appendix_a_conditions(p, d_k: int, lambda_a, lambda_b, tol: float = DEFAULT_TOL) -> ConstraintSet:
    if not 0 <= p <= 1:
        raise ValueError(f"need 0 <= p <= 1, got {p}")
    q = 1 - p
    qq = q / (d_k - 1)
    values = (
        p * lambda_a + q * lambda_b,
        p * lambda_a - qq * lambda_b,
        qq * lambda_b + p * lambda_a,
        qq * lambda_b - p * lambda_a,
    )
    return ConstraintSet(p, d_k, lambda_a, lambda_b, values, tol)


def solve_equality_weight(d_k: int, lambda_a, lambda_b):
    """p with q/(d_k - 1) * lambda_b = p * lambda_a, i.e. lambda_b / (lambda_b + (d_k - 1) lambda_a).

    Exact when the eigenvalues are given as Fractions or integers.
    """
    if d_k < 2:
        raise ValueError(f"need d_k >= 2, got {d_k}")
    if lambda_a < 0 or lambda_b < 0:
        raise ValueError("eigenvalues must be nonnegative")
    denom = lambda_b + (d_k - 1) * lambda_a
    if denom == 0:
        raise ZeroDivisionError("lambda_a = lambda_b = 0 leaves the weight undetermined")
    if isinstance(lambda_a, Rational) and isinstance(lambda_b, Rational):
        return Fraction(lambda_b) / Fraction(denom)
    return lambda_b / denom


def joint_eigenpairs(a: Operator, b: Operator, tol: float = DEFAULT_TOL) -> list[tuple[float, float]]:
    """Simultaneous eigenvalue pairs of two commuting Hermitian operators.

    Diagonalizes ``a``, then ``b`` restricted to each eigenspace of ``a``.
    """
    a_data, b_data = np.asarray(a.data), np.asarray(b.data)
    comm = np.max(np.abs(a_data @ b_data - b_data @ a_data))
    if comm > tol:
        raise ValueError(f"operators do not commute (max |[a, b]| = {comm:.3e})")
    wa, va = np.linalg.eigh((a_data + a_data.conj().T) / 2)
    pairs = []
    start = 0
    while start < len(wa):
        stop = start + 1
        while stop < len(wa) and wa[stop] - wa[start] <= tol:
            stop += 1
        basis = va[:, start:stop]
        sub = basis.conj().T @ b_data @ basis
        wb = np.linalg.eigvalsh((sub + sub.conj().T) / 2)
        lam_a = float(np.mean(wa[start:stop]))
        pairs.extend((lam_a, float(x)) for x in wb)
        start = stop
    return pairs


def constraint_report(p, d_k: int, a: Operator, b: Operator, tol: float = DEFAULT_TOL) -> list[ConstraintSet]:
    """Evaluate the four PT conditions on every joint eigenpair of (a~, b~), including zero eigenvalues."""
    a_t = partial_transpose(a, [1])
    b_t = partial_transpose(b, [1])
    return [appendix_a_conditions(p, d_k, la, lb, tol) for la, lb in joint_eigenpairs(a_t, b_t, tol)]


def sep_lower_bound(d_k: int, d_s: int) -> Fraction:
    """Lower bound 2 - 2/d_k - 2/(1 + d_s/(d_k - 1)) on the distance to separable states.

    Returned exactly; the value is negative (vacuous) for small d_s.
    """
    if d_k < 2:
        raise ValueError(f"need d_k >= 2, got {d_k}")
    if d_s < 1:
        raise ValueError(f"need d_s >= 1, got {d_s}")
    return 2 - Fraction(2, d_k) - 2 * lemma2_q(d_k, d_s)


def badziag_dimension(eps: float) -> float:
    """Comparison dimension 2^{(log2(4/eps))^2}."""
    return 2.0 ** (math.log2(4.0 / eps) ** 2)


@dataclass(frozen=True)
class ScanRow:
    epsilon: float
    d_k: int | None
    d_s: int | None
    d_total: int | None
    bound: float | None
    cap: float
    badziag_dim: float

    @property
    def within_cap(self) -> bool:
        return self.d_total is not None and self.d_total <= self.cap

    def as_csv_row(self) -> list:
        return [self.epsilon, self.d_k, self.d_s, self.d_total, self.bound, self.cap, self.badziag_dim]


SCAN_COLUMNS = ["epsilon", "d_k", "d_s", "d_total", "bound", "cap_64_over_eps3", "badziag_dim"]


def _as_fraction(eps) -> Fraction:
    # decimal literal semantics: 0.1 means 1/10, not the nearest double
    return eps if isinstance(eps, Fraction) else Fraction(repr(float(eps)))


def min_shield_for(d_k: int, eps: Fraction) -> int | None:
    """Smallest d_s >= 1 with sep_lower_bound(d_k, d_s) >= 2 - eps, or None.

    The bound condition 2/d_k + 2m/(m + d_s) <= eps (m = d_k - 1) is linear
    in d_s once cleared of denominators, so the threshold is exact.
    """
    m = d_k - 1
    slack = eps - Fraction(2, d_k)
    if slack <= 0:
        return None
    # 2m/(m + s) <= slack  <=>  s >= 2m/slack - m
    need = Fraction(2 * m) / slack - m
    return max(1, math.ceil(need))


def epsilon_scan(eps_list) -> list[ScanRow]:
    """For each eps, the (d_k, d_s) minimizing d_k*d_s subject to the separability bound >= 2 - eps.

    d_k ranges over [2, ceil(4/eps) + 2] and d_s over [1, ceil(64/eps^3)].
    Ties in d_total go to the smaller d_k. Rows are sorted by eps.
    """
    rows = []
    for eps in eps_list:
        e = _as_fraction(eps)
        if not 0 < e <= 2:
            raise ValueError(f"epsilon must lie in (0, 2], got {eps}")
        cap = Fraction(64) / e**3
        ds_max = math.ceil(cap)
        best = None
        for d_k in range(2, math.ceil(4 / e) + 3):
            d_s = min_shield_for(d_k, e)
            if d_s is None or d_s > ds_max:
                continue
            cand = (d_k * d_s, d_k, d_s)
            if best is None or cand < best:
                best = cand
        eps_f = float(eps)
        cap_f = 64.0 / eps_f**3
        if best is None:
            rows.append(ScanRow(eps_f, None, None, None, None, cap_f, badziag_dimension(eps_f)))
        else:
            total, d_k, d_s = best
            rows.append(ScanRow(eps_f, d_k, d_s, total, float(sep_lower_bound(d_k, d_s)), cap_f, badziag_dimension(eps_f)))
    rows.sort(key=lambda r: (r.epsilon, r.d_total if r.d_total is not None else math.inf))
    return rows


@dataclass
class CheckReport:
    label: str
    d_k: int
    d_s: int
    p: float
    trace: float
    hermitian: bool
    min_eig: float | None = None
    min_eig_pt: float | None = None
    blockwise_min_eigs: dict = field(default_factory=dict)
    positive: bool | None = None
    ppt: bool | None = None
    blockwise_agrees: bool | None = None
    distance_to_me_form: float | None = None
    expected_2q: float | None = None
    tolerance: float = DEFAULT_TOL

    @property
    def trace_ok(self) -> bool:
        return abs(self.trace - 1.0) <= self.tolerance

    @property
    def structurally_valid(self) -> bool:
        return self.hermitian and self.trace_ok and bool(self.positive)

    def to_dict(self) -> dict:
        return asdict(self)


def ppt_spectral_report(state: PditState, tol: float = DEFAULT_TOL) -> CheckReport:
    """Full-matrix and blockwise spectra before and after the B B' partial transpose.

    The PPT verdict is a finding, recorded whatever its sign.
    """
    rho = state.rho
    shape = state.shape
    herm = hermiticity_defect(rho) <= tol
    report = CheckReport(
        label=state.label,
        d_k=shape.d_k,
        d_s=shape.d_s,
        p=float(state.p),
        trace=float(rho.trace().real),
        hermitian=herm,
        tolerance=tol,
    )
    if not herm:
        return report
    full = eigvals_hermitian(rho, tol)
    full_pt = eigvals_hermitian(partial_transpose(rho, KEY_FACTORS_PT), tol)
    pos = is_positive_blockwise(rho, tol)
    ppt = is_ppt_blockwise(rho, tol)
    report.min_eig = float(full[0])
    report.min_eig_pt = float(full_pt[0])
    report.blockwise_min_eigs = {**pos.minima, **ppt.minima}
    report.positive = bool(full[0] >= -tol)
    report.ppt = bool(full_pt[0] >= -tol)
    report.blockwise_agrees = bool(
        pos.passed == report.positive
        and ppt.passed == report.ppt
        and abs(pos.min_eig - report.min_eig) <= tol
        and abs(ppt.min_eig - report.min_eig_pt) <= tol
    )
    try:
        report.distance_to_me_form = distance_to_me_form(state)
        report.expected_2q = 2.0 * state.q
    except (ValueError, ZeroDivisionError):
        pass
    return report


def spectrum_agreement(state, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Max elementwise gap between sorted full and blockwise spectra, before and after PT."""
    rho = state.rho if isinstance(state, PditState) else state
    full = eigvals_hermitian(rho, tol)
    full_pt = eigvals_hermitian(partial_transpose(rho, KEY_FACTORS_PT), tol)
    blocks = blockwise_spectrum(extract_blocks(rho, tol), tol)
    pt_blocks = blockwise_spectrum(extract_pt_blocks(rho, tol), tol)
    return float(np.max(np.abs(full - blocks))), float(np.max(np.abs(full_pt - pt_blocks)))


def key_correlation_report(state) -> np.ndarray:
    """Joint distribution P(i, j) of computational-basis outcomes on the key."""
    rho = state.rho if isinstance(state, PditState) else state
    d_k = rho.dims[0]
    s = rho.dim // (d_k * d_k)
    t = rho.data.reshape(d_k, d_k, s, d_k, d_k, s)
    probs = np.einsum("abxabx->ab", t).real
    return probs
