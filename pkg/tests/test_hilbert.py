"""Truncated-Fock-space primitives: operators, states, tensor algebra, truncation."""

import numpy as np
import pytest

from svlaser.errors import (
    InvalidSpaceError,
    NumericDomainError,
    ShapeMismatchError,
    StateValidationError,
    TruncationWarning,
)
from svlaser.hilbert import (
    DensityMatrix,
    FockSpace,
    Operator,
    StateVector,
    annihilation,
    commutator,
    creation,
    displacement,
    evolve_step,
    fock_state,
    identity,
    matrix_exponential,
    number,
    parity,
    partial_trace,
    squeeze,
    tail_population,
    tensor,
    tensor_state,
    vacuum_state,
)

RNG = np.random.default_rng(1234)


def random_density_matrix(dim, rank=None, rng=RNG):
    rank = rank or dim
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


class TestOperatorsAndSpaces:
    def test_annihilation_entries_dim3(self):
        a = annihilation(FockSpace(3)).matrix
        expected = np.zeros((3, 3))
        expected[0, 1] = 1.0
        expected[1, 2] = np.sqrt(2.0)
        assert np.allclose(a, expected)

    def test_creation_is_conjugate_transpose(self):
        sp = FockSpace(7)
        assert np.array_equal(creation(sp).matrix, annihilation(sp).matrix.conj().T)

    def test_commutator_is_identity_off_the_truncation_edge(self):
        for dim in (2, 3, 10, 41):
            sp = FockSpace(dim)
            c = commutator(annihilation(sp), creation(sp)).matrix
            assert np.allclose(c[: dim - 1, : dim - 1], np.eye(dim - 1), atol=1e-13)
            # the last diagonal entry carries the truncation defect -(dim-1)
            assert c[dim - 1, dim - 1] == pytest.approx(-(dim - 1))

    def test_number_operator_is_a_dag_a(self):
        sp = FockSpace(9)
        n = creation(sp) @ annihilation(sp)
        assert np.allclose(n.matrix, number(sp).matrix)
        assert np.allclose(np.diag(number(sp).matrix), np.arange(9))

    def test_small_space_rejected(self):
        with pytest.raises(InvalidSpaceError):
            FockSpace(1)
        with pytest.raises(InvalidSpaceError):
            annihilation(FockSpace(1))

    def test_hermitian_flag_enforced(self):
        with pytest.raises(StateValidationError):
            Operator(annihilation(FockSpace(4)).matrix, hermitian=True)

    def test_nonfinite_rejected(self):
        m = np.eye(3, dtype=complex)
        m[0, 0] = np.nan
        with pytest.raises(NumericDomainError):
            Operator(m)


class TestTensorAndPartialTrace:
    def test_tensor_of_identities(self):
        t = tensor(identity(2), identity(3))
        assert np.allclose(t.matrix, np.eye(6))

    def test_jaynes_cummings_exchange(self):
        # atom-major: sigma_minus ⊗ a_dag maps |e>|0> to |g>|1>
        sp = FockSpace(4)
        sig_m = Operator(np.array([[0, 1], [0, 0]], dtype=complex))  # |g><e|
        op = tensor(sig_m, creation(sp))
        e0 = tensor_state(StateVector([0, 1]), vacuum_state(sp))
        g1 = tensor_state(StateVector([1, 0]), fock_state(sp, 1))
        assert np.allclose(op @ e0.amplitudes, g1.amplitudes)

    def test_product_state_factor_recovery(self):
        rho_a = random_density_matrix(2)
        rho_f = random_density_matrix(5)
        joint = DensityMatrix(np.kron(rho_a, rho_f))
        back_f = partial_trace(joint, (2, 5), over="atom")
        back_a = partial_trace(joint, (2, 5), over="field")
        assert np.max(np.abs(back_f.matrix - rho_f)) < 1e-12
        assert np.max(np.abs(back_a.matrix - rho_a)) < 1e-12

    def test_maximally_entangled_reduces_to_identity(self):
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        rho = DensityMatrix(np.outer(bell, bell.conj()))
        for over in ("atom", "field"):
            red = partial_trace(rho, (2, 2), over=over)
            assert np.allclose(red.matrix, np.eye(2) / 2, atol=1e-14)

    def test_trace_preserved_and_positive_on_random_states(self):
        for _ in range(5):
            rho = DensityMatrix(random_density_matrix(12))
            red = partial_trace(rho, (3, 4), over="atom")
            assert np.trace(red.matrix) == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(red.matrix)[0] > -1e-8

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            partial_trace(DensityMatrix(random_density_matrix(10)), (3, 4), "atom")


class TestDisplacementAndSqueeze:
    def test_zero_arguments_give_identity(self):
        sp = FockSpace(25)
        assert np.allclose(displacement(sp, 0.0).matrix, np.eye(25))
        assert np.allclose(squeeze(sp, 0.0).matrix, np.eye(25))

    def test_coherent_amplitude(self):
        sp = FockSpace(40)
        d = displacement(sp, 0.5)
        psi = d.matrix[:, 0]
        a = annihilation(sp).matrix
        assert abs(psi.conj() @ (a @ psi) - 0.5) < 1e-6

    def test_displacement_unitary(self):
        sp = FockSpace(40)
        prod = displacement(sp, 0.7) @ displacement(sp, -0.7)
        assert np.max(np.abs(prod.matrix - np.eye(40))) < 1e-8

    def test_squeezed_vacuum_occupation(self):
        # <a^dag a> on S(r)|0> equals sinh^2 r; at r = atanh(0.6) that is 0.5625
        sp = FockSpace(60)
        for r in (0.69, np.arctanh(0.6)):
            psi = squeeze(sp, r).matrix[:, 0]
            n = psi.conj() @ (number(sp).matrix @ psi)
            assert abs(n.real - np.sinh(r) ** 2) < 1e-3
        psi = squeeze(sp, np.arctanh(0.6)).matrix[:, 0]
        n = (psi.conj() @ (number(sp).matrix @ psi)).real
        assert n == pytest.approx(0.5625, abs=1e-3)

    def test_squeezed_vacuum_quadrature_variances(self):
        # (e^{-2r}/4, e^{+2r}/4) = (0.0625, 1.0) at r = atanh(0.6) = ln 2
        sp = FockSpace(60)
        r = np.arctanh(0.6)
        psi = squeeze(sp, r).matrix[:, 0]
        a = annihilation(sp).matrix
        x1 = (a + a.conj().T) / 2
        x2 = (a - a.conj().T) / 2j

        def var(x):
            m = (psi.conj() @ x @ psi).real
            return (psi.conj() @ x @ x @ psi).real - m * m

        assert var(x1) == pytest.approx(np.exp(-2 * r) / 4, abs=5e-2)
        assert var(x2) == pytest.approx(np.exp(+2 * r) / 4, abs=5e-2)
        assert var(x1) == pytest.approx(0.0625, abs=1e-6)
        assert var(x2) == pytest.approx(1.0, abs=1e-6)

    def test_truncation_warning_on_oversized_displacement(self):
        with pytest.warns(TruncationWarning):
            displacement(FockSpace(8), 2.5)
        # odd top level would hide the (even-parity) squeezed leakage
        with pytest.warns(TruncationWarning):
            squeeze(FockSpace(9), 1.5)


class TestMatrixExponential:
    def test_exp_zero(self):
        assert np.allclose(matrix_exponential(np.zeros((5, 5))).matrix, np.eye(5))

    def test_exp_i_pi_number_is_parity(self):
        sp = FockSpace(9)
        u = matrix_exponential(Operator(1j * np.pi * number(sp).matrix))
        assert np.max(np.abs(u.matrix - parity(sp).matrix)) < 1e-12

    def test_exp_x_exp_minus_x(self):
        m = RNG.normal(size=(12, 12)) + 1j * RNG.normal(size=(12, 12))
        x = m - m.conj().T  # anti-Hermitian
        prod = matrix_exponential(x) @ matrix_exponential(-x)
        assert np.max(np.abs(prod.matrix - np.eye(12))) < 1e-9

    def test_nonfinite_input_rejected(self):
        m = np.zeros((3, 3))
        m[1, 2] = np.inf
        with pytest.raises(NumericDomainError):
            matrix_exponential(m)

    def test_evolve_step_preserves_norm_and_trace(self):
        sp = FockSpace(16)
        h = number(sp)
        psi = evolve_step(h, displacement(sp, 0.4).matrix[:, 0], dt=0.3)
        assert abs(np.linalg.norm(psi) - 1) < 1e-10
        rho = DensityMatrix(random_density_matrix(16))
        rho2 = evolve_step(h, rho, dt=0.3)
        assert np.trace(rho2.matrix) == pytest.approx(1.0, abs=1e-10)


class TestStateValidation:
    def test_state_norm_enforced(self):
        with pytest.raises(StateValidationError):
            StateVector([1.0, 1.0])
        StateVector([1.0, 1.0], normalize=True)

    def test_density_matrix_invariants(self):
        with pytest.raises(StateValidationError):
            DensityMatrix(np.eye(3))  # trace 3
        m = np.diag([0.6, 0.4]).astype(complex)
        m[0, 1] = 0.1  # not Hermitian
        with pytest.raises(StateValidationError):
            DensityMatrix(m)
        neg = np.diag([1.1, -0.1]).astype(complex)
        with pytest.raises(StateValidationError):
            DensityMatrix(neg)

    def test_tail_population(self):
        sp = FockSpace(10)
        assert tail_population(vacuum_state(sp)) == 0.0
        assert tail_population(fock_state(sp, 9)) == 1.0
