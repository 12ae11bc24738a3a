import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import direct_rhs, random_hermitian, random_state
from qdcavity.core import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    SpaceMismatchError,
    annihilation,
    basis_projector,
    embed,
    liouvillian,
    ptrace_emitter,
    trace_functional,
    unvec,
    vacuum_state,
    vec,
)


class TestHilbertSpace:
    def test_dimension_is_product(self):
        assert HilbertSpace((4, 3, 2)).dim == 24
        assert HilbertSpace((4,)).n_cavities == 0

    @pytest.mark.parametrize("factors", [(3,), (4, 2, 2, 2), (4, 1), ()])
    def test_invalid_layouts(self, factors):
        with pytest.raises(ValueError):
            HilbertSpace(factors)


class TestOperator:
    def test_shape_mismatch(self):
        with pytest.raises(SpaceMismatchError):
            Operator(HilbertSpace((4,)), np.eye(8))

    def test_hermitian_flag_verified(self):
        m = np.zeros((4, 4))
        m[0, 1] = 1.0
        with pytest.raises(ValueError):
            Operator(HilbertSpace((4,)), m, hermitian=True)

    def test_algebra_across_spaces_rejected(self):
        a = Operator(HilbertSpace((4, 2)), np.eye(8))
        b = Operator(HilbertSpace((4, 2)), np.eye(8))
        c = Operator(HilbertSpace((4,)), np.eye(4))
        assert np.allclose((a @ b).matrix, np.eye(8))
        with pytest.raises(SpaceMismatchError):
            a + c


class TestDensityMatrix:
    space = HilbertSpace((4,))

    def test_valid(self, rng):
        DensityMatrix(self.space, random_state(rng, 4))

    def test_trace_checked(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(self.space, 0.5 * np.eye(4))

    def test_positivity_checked(self):
        with pytest.raises(ValueError, match="negative"):
            DensityMatrix(self.space, np.diag([1.5, -0.5, 0, 0]))

    def test_hermiticity_checked(self):
        m = np.diag([1.0, 0, 0, 0]).astype(complex)
        m[0, 1] = 1e-3
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(self.space, m)

    def test_vec_roundtrip_column_major(self, rng):
        rho = random_state(rng, 4)
        v = vec(rho)
        assert v[1] == rho[1, 0]
        assert np.array_equal(unvec(v, 4), rho)


class TestEmbed:
    def test_identity(self):
        s = HilbertSpace((4,))
        assert np.array_equal(embed(np.eye(4), 0, s).matrix, np.eye(4))

    def test_emitter_projector(self):
        s = HilbertSpace((4, 3))
        m = embed(basis_projector(2, 2), 0, s).matrix
        expected = np.zeros((12, 12))
        for n in range(3):
            expected[3 + n, 3 + n] = 1.0
        assert np.array_equal(m, expected)

    def test_ladder_commutator(self):
        s = HilbertSpace((4, 3))
        a = embed(annihilation(2), 1, s).matrix
        comm = a @ a.conj().T - a.conj().T @ a
        expected = np.kron(np.eye(4), np.diag([1.0, 1.0, -2.0]))
        assert np.allclose(comm, expected, atol=1e-14)

    def test_second_mode_ordering(self):
        s = HilbertSpace((4, 2, 3))
        a = embed(annihilation(2), 2, s).matrix
        assert np.allclose(a, np.kron(np.eye(8), annihilation(2)))

    def test_wrong_factor(self):
        s = HilbertSpace((4, 3))
        with pytest.raises(SpaceMismatchError):
            embed(np.eye(2), 1, s)
        with pytest.raises(IndexError):
            embed(np.eye(3), 2, s)


class TestAnnihilation:
    def test_two_level(self):
        assert np.array_equal(annihilation(1), np.array([[0, 1], [0, 0]]))

    def test_superdiagonal(self):
        a = annihilation(2)
        assert np.allclose(np.diag(a, 1), [1, np.sqrt(2)])

    def test_number_eigenvalue(self):
        a = annihilation(2)
        n = a.conj().T @ a
        assert np.allclose(n @ np.array([0, 0, 1]), [0, 0, 2])

    @pytest.mark.parametrize("bad", [0, -1, 1.5])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            annihilation(bad)


class TestLiouvillian:
    def test_zero_generator(self):
        s = HilbertSpace((4,))
        lsup = liouvillian(Operator(s, np.zeros((4, 4)), hermitian=True))
        assert lsup.matrix.nnz == 0

    def test_direct_assembly(self, rng):
        s = HilbertSpace((4,))
        h = random_hermitian(rng, 4)
        chans = [(0.3, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))),
                 (2.1, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))]
        lsup = liouvillian(Operator(s, h, hermitian=True), [(r, Operator(s, o)) for r, o in chans])
        rho = random_state(rng, 4)
        want = direct_rhs(h, chans, rho)
        got = lsup.apply(rho)
        assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-10

    def test_trace_preserving(self, rng):
        s = HilbertSpace((4, 2))
        a = embed(annihilation(1), 1, s)
        lsup = liouvillian(Operator(s, random_hermitian(rng, 8), hermitian=True), [(3.0, a)])
        assert np.max(np.abs(trace_functional(8) @ lsup.matrix)) < 1e-10

    def test_two_level_damping(self):
        from scipy.linalg import expm

        s = HilbertSpace((4,))
        gamma, t = 0.7, 1.3
        lsup = liouvillian(Operator(s, np.zeros((4, 4)), hermitian=True),
                           [(gamma, Operator(s, basis_projector(1, 4)))])
        rho0 = np.zeros((4, 4), dtype=complex)
        rho0[0, 0] = rho0[3, 3] = rho0[0, 3] = rho0[3, 0] = 0.5
        rho = unvec(expm(lsup.dense() * t) @ vec(rho0), 4)
        assert rho[3, 3].real == pytest.approx(0.5 * np.exp(-gamma * t), abs=1e-12)
        assert abs(rho[0, 3]) == pytest.approx(0.5 * np.exp(-gamma * t / 2), abs=1e-12)

    def test_rejects_negative_rate_and_foreign_space(self):
        s = HilbertSpace((4,))
        h = Operator(s, np.zeros((4, 4)), hermitian=True)
        with pytest.raises(ValueError):
            liouvillian(h, [(-1.0, Operator(s, np.eye(4)))])
        with pytest.raises(SpaceMismatchError):
            liouvillian(h, [(1.0, Operator(HilbertSpace((4, 2)), np.eye(8)))])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_liouvillian_output_is_hermitian_and_traceless(seed, n_max):
    rng = np.random.default_rng(seed)
    s = HilbertSpace((4, n_max + 1))
    d = s.dim
    a = embed(annihilation(n_max), 1, s)
    chans = [(float(rng.uniform(0, 5)), a),
             (float(rng.uniform(0, 5)), embed(basis_projector(1, 3), 0, s))]
    lsup = liouvillian(Operator(s, random_hermitian(rng, d), hermitian=True), chans)
    drho = lsup.apply(random_state(rng, d))
    assert np.max(np.abs(drho - drho.conj().T)) < 1e-10
    assert abs(np.trace(drho)) < 1e-10


def test_partial_trace_and_vacuum(rng):
    s = HilbertSpace((4, 2, 3))
    r4 = random_state(rng, 4)
    rho = vacuum_state(r4, s)
    assert np.allclose(ptrace_emitter(rho.matrix, s), r4)
    other = random_state(rng, 6)
    assert np.allclose(ptrace_emitter(np.kron(r4, other), s), r4)
