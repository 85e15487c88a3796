import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pdit.analysis import distance_to_me_form, spectrum_agreement
from pdit.catalog import appendix_xy, lemma2_family, swap_pbit
from pdit.linalg import (
    Operator,
    ShapeError,
    eigvals_hermitian,
    min_eigenvalue_pt,
    partial_transpose,
    swap_operator,
    trace_distance,
)
from pdit.model import (
    BlockFamily,
    NormalizationError,
    PatternError,
    SystemShape,
    assemble_omega0,
    assemble_omega_pair,
    assemble_operator,
    assemble_state,
    extract_blocks,
    extract_pt_blocks,
    index_to_pair,
    is_positive_blockwise,
    is_ppt_blockwise,
    pair_to_index,
    random_family,
)

import oracles

SHAPES = [SystemShape(k, s) for k in (2, 3, 4) for s in (2, 3)]


def key_block(op, shape, bra, ket):
    k, s = shape.d_k, shape.shield_dim
    t = op.data.reshape(k, k, s, k, k, s)
    return t[bra[0], bra[1], :, ket[0], ket[1], :]


class TestSystemShape:
    def test_derived(self):
        shape = SystemShape(4, 3)
        assert shape.d == 6
        assert shape.total_dim == 16 * 9
        assert shape.dims == (4, 4, 3, 3)

    def test_invalid(self):
        with pytest.raises(ShapeError):
            SystemShape(1, 2)
        with pytest.raises(ShapeError):
            SystemShape(2, 0)


@pytest.mark.parametrize("d_k", [2, 3, 4, 5])
def test_pair_index_bijection(d_k):
    d = d_k * (d_k - 1) // 2
    labels = [pair_to_index(i, j, d_k) for i, j in itertools.combinations(range(d_k), 2)]
    assert labels == list(range(1, d + 1))
    assert [index_to_pair(l, d_k) for l in labels] == list(itertools.combinations(range(d_k), 2))


def test_pair_index_examples():
    assert pair_to_index(0, 1, 4) == 1
    assert pair_to_index(0, 2, 4) == 2
    assert pair_to_index(2, 3, 4) == 6
    with pytest.raises(IndexError):
        pair_to_index(1, 1, 3)


class TestAssembleOmega0:
    def test_identity_skeleton(self):
        shape = SystemShape(2, 2)
        a = np.eye(4) / 4
        A00 = np.array([[a, a], [a, a]])
        op = assemble_omega0(A00, shape)
        for bra, ket in itertools.product([(0, 0), (1, 1)], repeat=2):
            assert_allclose(key_block(op, shape, bra, ket), a)
        for bra, ket in itertools.product(itertools.product(range(2), repeat=2), repeat=2):
            if bra[0] != bra[1] or ket[0] != ket[1]:
                assert not key_block(op, shape, bra, ket).any()

    def test_flower_blocks_are_twice_the_state(self):
        from pdit.catalog import embed_unitary, flower_state, maximally_correlated
        from pdit.linalg import fourier_matrix

        d_s = 2
        w = fourier_matrix(d_s)
        sigma = maximally_correlated(d_s).data
        u = embed_unitary(w).data
        A00 = np.array([[sigma, u.T / d_s], [u.conj() / d_s, sigma]])
        op = assemble_omega0(A00, SystemShape(2, d_s))
        assert_allclose(op.data, 2 * flower_state(d_s, w).rho.data, atol=1e-15)

    def test_zero(self):
        op = assemble_omega0(np.zeros((3, 3, 4, 4)), SystemShape(3, 2))
        assert not op.data.any()

    def test_matches_loop_oracle(self, rng):
        shape = SystemShape(3, 2)
        A00 = rng.normal(size=(3, 3, 4, 4)) + 1j * rng.normal(size=(3, 3, 4, 4))
        expected = oracles.pdit_matrix_by_loops(3, 2, A00, {})
        assert_allclose(assemble_omega0(A00, shape).data, expected, atol=0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            assemble_omega0(np.zeros((2, 2, 9, 9)), SystemShape(2, 2))


class TestAssembleOmegaPair:
    def test_dk2_positions(self):
        shape = SystemShape(2, 2)
        block = np.arange(1, 5).reshape(2, 2, 1, 1) * np.ones((1, 1, 4, 4))
        op = assemble_omega_pair(0, 1, block, shape)
        nonzero = set()
        for bra, ket in itertools.product(itertools.product(range(2), repeat=2), repeat=2):
            if key_block(op, shape, bra, ket).any():
                nonzero.add((bra, ket))
        assert nonzero == {((0, 1), (0, 1)), ((0, 1), (1, 0)), ((1, 0), (0, 1)), ((1, 0), (1, 0))}
        assert_allclose(key_block(op, shape, (0, 1), (1, 0)), block[0, 1])
        assert_allclose(key_block(op, shape, (1, 0), (0, 1)), block[1, 0])

    def test_dk3_pair_12_layout(self):
        # key rows |12> = 5 and |21> = 7 in the 9 x 9 grid of shield blocks
        shape = SystemShape(3, 1)
        block = np.array([[1, 2], [3, 4]], dtype=float).reshape(2, 2, 1, 1)
        op = assemble_omega_pair(1, 2, block, shape)
        expected = np.zeros((9, 9))
        expected[5, 5], expected[5, 7], expected[7, 5], expected[7, 7] = 1, 2, 3, 4
        assert_allclose(op.data, expected)

    def test_zero(self):
        assert not assemble_omega_pair(0, 2, np.zeros((2, 2, 4, 4)), SystemShape(3, 2)).data.any()

    def test_bad_order(self):
        with pytest.raises(IndexError):
            assemble_omega_pair(1, 0, np.zeros((2, 2, 4, 4)), SystemShape(2, 2))

    def test_matches_loop_oracle(self, rng):
        shape = SystemShape(3, 2)
        fam = random_family(shape, rng)
        expected = oracles.pdit_matrix_by_loops(3, 2, fam.A00, fam.pairs)
        assert_allclose(assemble_operator(fam).data, expected, atol=0)


class TestAssembleState:
    def test_p_one_is_gamma0(self, rng):
        state = assemble_state(1, random_family(SystemShape(3, 2), rng))
        assert trace_distance(state.rho, state.gamma0) < 1e-15

    def test_lemma2_weight(self):
        state = lemma2_family(2, 2)
        assert state.p == pytest.approx(2 / 3, abs=1e-15)
        assert distance_to_me_form(state) == pytest.approx(2 / 3, abs=1e-9)

    @pytest.mark.parametrize("shape", SHAPES, ids=str)
    def test_random_psd_invariants(self, rng, shape):
        state = assemble_state(0.4, random_family(shape, rng))
        rho = state.rho
        assert rho.trace().real == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(rho.data - rho.data.conj().T)) < 1e-12
        comps = [0.4 * state.gamma0.data] + [0.6 / shape.d * state.gamma(i, j).data for i, j in shape.pairs()]
        assert_allclose(sum(comps), rho.data, atol=1e-14)
        for a, b in itertools.combinations(comps, 2):
            assert np.max(np.abs(a @ b)) < 1e-12

    def test_negative_p(self, rng):
        with pytest.raises(ValueError):
            assemble_state(-0.1, random_family(SystemShape(2, 2), rng))

    def test_zero_pair_drops_mass(self, rng):
        fam = random_family(SystemShape(3, 2), rng)
        fam.pairs[(0, 2)][:] = 0
        with pytest.raises(NormalizationError, match="mass"):
            assemble_state(0.4, fam)
        state = assemble_state(0.4, fam, renormalize=True)
        assert state.lost_mass == pytest.approx(0.6 / 3)
        assert state.rho.trace().real == pytest.approx(1.0)

    def test_zero_pair_fine_when_q_is_zero(self):
        state = swap_pbit(2)
        assert state.lost_mass == 0

    def test_zero_omega0_with_weight(self, rng):
        fam = random_family(SystemShape(2, 2), rng)
        fam.A00[:] = 0
        with pytest.raises(NormalizationError):
            assemble_state(0.5, fam)

    def test_equal_block_traces(self):
        # all maximally-entangled-form entries share ||a||_1 = 1, all pair entries ||b||_1 = 1
        for d_k, d_s in [(2, 2), (3, 2), (4, 3)]:
            fam = lemma2_family(d_k, d_s).family
            tr0, trs = fam.omega_traces()
            assert tr0.real == pytest.approx(d_k)
            assert all(t.real == pytest.approx(2) for t in trs.values())


class TestExtractBlocks:
    @pytest.mark.parametrize("shape", SHAPES, ids=str)
    def test_round_trip(self, rng, shape):
        fam = random_family(shape, rng, "indefinite")
        op = assemble_operator(fam)
        back = extract_blocks(op)
        assert np.array_equal(back.A00, fam.A00)
        for ij in shape.pairs():
            assert np.array_equal(back.pairs[ij], fam.pairs[ij])
        assert np.array_equal(assemble_operator(back).data, op.data)

    def test_swap_pbit_blocks(self):
        d_s = 2
        blocks = extract_blocks(swap_pbit(d_s))
        eye = np.eye(4) / (2 * d_s**2)
        v = swap_operator(d_s).data / (2 * d_s**2)
        assert_allclose(blocks.A00[0, 0], eye)
        assert_allclose(blocks.A00[1, 1], eye)
        assert_allclose(blocks.A00[0, 1], v)
        assert_allclose(blocks.A00[1, 0], v)
        assert not blocks.pairs[(0, 1)].any()

    def test_zero_state(self):
        blocks = extract_blocks(Operator(np.zeros((16, 16)), (2, 2, 2, 2)))
        assert not blocks.A00.any()
        assert not blocks.pairs[(0, 1)].any()

    def test_pattern_violation_reports_coordinates(self):
        m = np.zeros((16, 16))
        # key |00><01|, shield (1, 2): row (0*2+0)*4+1 = 1, col (0*2+1)*4+2 = 6
        m[1, 6] = 0.5
        with pytest.raises(PatternError) as info:
            extract_blocks(Operator(m, (2, 2, 2, 2)))
        entry = info.value.entries[0]
        assert (entry["row"], entry["col"]) == (1, 6)
        assert entry["flat"] == 1 * 16 + 6
        assert entry["key_bra"] == (0, 0) and entry["key_ket"] == (0, 1)
        assert entry["shield"] == (1, 2)
        assert "row 1, col 6" in str(info.value)

    def test_needs_four_factor_dims(self):
        with pytest.raises(ShapeError):
            extract_blocks(Operator(np.eye(16), (4, 4)))


class TestExtractPTBlocks:
    def test_diagonal_blocks_swap_positions(self, rng):
        shape = SystemShape(3, 2)
        s = shape.shield_dim
        A00 = np.zeros((3, 3, s, s), dtype=complex)
        pairs = {}
        for i in range(3):
            for j in range(3):
                A00[i, j] = np.diag(rng.uniform(0.1, 1, size=s))
        for ij in shape.pairs():
            pairs[ij] = np.array([[np.diag(rng.uniform(0.1, 1, size=s)) for _ in range(2)] for _ in range(2)])
        fam = BlockFamily(shape, A00, pairs)
        pt = extract_pt_blocks(assemble_operator(fam))
        for (i, j), b in pairs.items():
            assert np.array_equal(pt.pairs[(i, j)][0, 0], b[0, 0])
            assert np.array_equal(pt.pairs[(i, j)][0, 1], A00[i, j])
            assert np.array_equal(pt.pairs[(i, j)][1, 0], A00[j, i])
            assert np.array_equal(pt.pairs[(i, j)][1, 1], b[1, 1])
            assert np.array_equal(pt.A00[i, j], b[0, 1])
            assert np.array_equal(pt.A00[j, i], b[1, 0])
        for i in range(3):
            assert np.array_equal(pt.A00[i, i], A00[i, i])

    @pytest.mark.parametrize("d_k,d_s", [(2, 2), (3, 2), (3, 3)])
    def test_lemma2_cross_pattern(self, d_k, d_s):
        # scaled by d_k: pair block ((q' b~, p a~), (p a~, q' b~)), diagonal grid p a~ on, q' b~ off
        state = lemma2_family(d_k, d_s)
        p, q = state.p, state.q
        qq = q / (d_k - 1)
        ops = appendix_xy(d_s)
        a_t = partial_transpose(ops.sqrtXX, [1]).data
        b_t = partial_transpose(ops.sqrtYY, [1]).data
        pt = extract_pt_blocks(state)
        for ij in state.shape.pairs():
            expected = np.array([[qq * b_t, p * a_t], [p * a_t, qq * b_t]]) / d_k
            assert_allclose(pt.pairs[ij], expected, atol=1e-15)
        for r in range(d_k):
            for c in range(d_k):
                expected = (p * a_t if r == c else qq * b_t) / d_k
                assert_allclose(pt.A00[r, c], expected, atol=1e-15)

    @pytest.mark.parametrize("shape", SHAPES, ids=str)
    def test_spectrum_union(self, rng, shape):
        state = assemble_state(0.3, random_family(shape, rng, "mixed"))
        gap, gap_pt = spectrum_agreement(state)
        assert gap < 1e-9 and gap_pt < 1e-9


def _verdicts(state, tol=1e-9):
    full_min = oracles.min_eig(state.rho.data)
    pt_min = oracles.min_eig(oracles.pt_by_loops(state.rho.data, state.rho.dims, [1, 3]))
    return full_min >= -tol, pt_min >= -tol


class TestBlockwiseChecks:
    def test_psd_family(self, rng):
        state = assemble_state(0.5, random_family(SystemShape(3, 2), rng))
        check = is_positive_blockwise(state)
        assert check.passed
        assert oracles.min_eig(state.rho.data) >= -1e-9

    def test_negative_block(self, rng):
        state = assemble_state(0.5, random_family(SystemShape(3, 2), rng, "indefinite"))
        assert not is_positive_blockwise(state).passed
        assert oracles.min_eig(state.rho.data) < -1e-9

    def test_zero_state(self):
        zero = Operator(np.zeros((16, 16)), (2, 2, 2, 2))
        assert is_positive_blockwise(zero).passed
        assert is_ppt_blockwise(zero).passed

    def test_observation1_equivalence(self, rng):
        outcomes = set()
        for n in range(54):
            shape = SHAPES[n % len(SHAPES)]
            kind = ("psd", "indefinite", "mixed")[n % 3]
            state = assemble_state(rng.uniform(0.05, 0.95), random_family(shape, rng, kind))
            pos, ppt = _verdicts(state)
            assert is_positive_blockwise(state).passed == pos
            assert is_ppt_blockwise(state).passed == ppt
            assert is_ppt_blockwise(state).min_eig == pytest.approx(min_eigenvalue_pt(state.rho, [1, 3]), abs=1e-9)
            outcomes.add((pos, ppt))
        # the sample must exercise both verdicts of each test
        assert {o[0] for o in outcomes} == {True, False}
        assert {o[1] for o in outcomes} == {True, False}

    def test_support_orthogonality(self, rng):
        for shape in SHAPES:
            fam = random_family(shape, rng)
            omegas = [assemble_omega0(fam.A00, shape)] + [assemble_omega_pair(i, j, fam.pairs[(i, j)], shape) for i, j in shape.pairs()]
            for a, b in itertools.combinations(omegas, 2):
                assert np.linalg.norm((a @ b).data, 2) <= 1e-9

    def test_report_lists_every_block(self):
        check = is_ppt_blockwise(lemma2_family(3, 2))
        assert set(check.minima) == {"PT(0,0)", "PT(0,1)", "PT(0,2)", "PT(1,2)"}


@pytest.mark.parametrize("shape", SHAPES, ids=str)
def test_lemma1_identity(rng, shape):
    for _ in range(3):
        p = rng.uniform(0, 1)
        state = assemble_state(p, random_family(shape, rng))
        assert distance_to_me_form(state) == pytest.approx(2 * (1 - p), abs=1e-9)
        # independent check through the eigenvalues of the (Hermitian) difference
        diff = state.rho.data - state.gamma0.data
        assert oracles.trace_norm_hermitian(diff) == pytest.approx(2 * (1 - p), abs=1e-9)


def test_full_pt_min_matches_blockwise_for_lemma2():
    state = lemma2_family(2, 2)
    expected = oracles.min_eig(oracles.pt_by_loops(state.rho.data, (2, 2, 2, 2), [1, 3]))
    assert is_ppt_blockwise(state).min_eig == pytest.approx(expected, abs=1e-9)
    assert min_eigenvalue_pt(state.rho, [1, 3]) == pytest.approx(expected, abs=1e-9)
    assert eigvals_hermitian(state.rho)[0] >= -1e-9
