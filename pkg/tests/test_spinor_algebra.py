import numpy as np
import pytest

from src.spectral.spinor_algebra import (
    ALPHA, BETA, GAMMA5, I4, UnitVector3, alpha_dot, as_unit_normals, p_tau, p_tau_inverse, r_tau,
    robin_transmission_matrix, shell_matrix_B, symmetry_operators, theta0, transmission_residual,
)
from src.utils.errors import DecoupledShell, InvalidParameter


def _dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


class TestCliffordRelations:
    """Anticommutation relations of the Dirac matrices."""

    def test_alpha_beta_anticommute(self):
        for j in range(3):
            assert np.allclose(ALPHA[j] @ BETA + BETA @ ALPHA[j], 0)
            for k in range(3):
                expected = 2 * I4 if j == k else 0
                assert np.allclose(ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j], expected)
        assert np.allclose(BETA @ BETA, I4)

    def test_gamma5_commutes_with_alpha(self):
        for j in range(3):
            assert np.allclose(GAMMA5 @ ALPHA[j], ALPHA[j] @ GAMMA5)
        assert np.allclose(GAMMA5 @ BETA, -BETA @ GAMMA5)

    def test_alpha_dot_squares_to_norm(self):
        x = np.array([0.3, -1.2, 0.5])
        assert np.allclose(alpha_dot(x) @ alpha_dot(x), np.dot(x, x) * I4)


class TestShellMatrix:
    """B(ν) and the transmission matrices built from it."""

    def test_b_is_hermitian_unitary(self, random_normals):
        B = shell_matrix_B(random_normals)
        assert np.allclose(B, _dagger(B))
        assert np.allclose(B @ B, I4)

    def test_b_anticommutes_with_alpha_normal(self, random_normals):
        B = shell_matrix_B(random_normals)
        A = alpha_dot(random_normals)
        assert np.allclose(B @ A + A @ B, 0)

    def test_rejects_non_unit_normal(self):
        with pytest.raises(InvalidParameter, match="unit length"):
            shell_matrix_B([1.0, 1.0, 0.0])

    def test_unit_vector_renormalizes(self):
        v = UnitVector3(3.0, 0.0, 4.0)
        assert np.allclose(v.as_array(), [0.6, 0.0, 0.8])
        assert np.allclose(as_unit_normals(-v), [-0.6, 0.0, -0.8])
        with pytest.raises(InvalidParameter):
            UnitVector3(0.0, 0.0, 0.0)

    @pytest.mark.parametrize("tau", [-3.0, -1.0, -0.25, 0.5, 1.5])
    def test_r_tau_relation(self, tau, random_normals):
        P_plus = p_tau(+1, tau, random_normals)
        P_minus_inv = p_tau_inverse(-1, tau, random_normals)
        assert np.allclose(r_tau(+1, tau, random_normals), -P_minus_inv @ P_plus)
        assert np.allclose(r_tau(+1, tau, random_normals) @ r_tau(-1, tau, random_normals), I4)

    def test_inverse(self, random_normals):
        for sign in (+1, -1):
            assert np.allclose(p_tau(sign, -1.0, random_normals) @ p_tau_inverse(sign, -1.0, random_normals), I4)

    @pytest.mark.parametrize("tau", [2.0, -2.0])
    def test_decoupled_coupling(self, tau):
        with pytest.raises(DecoupledShell):
            r_tau(+1, tau, [0.0, 0.0, 1.0])

    def test_bad_sign(self):
        with pytest.raises(InvalidParameter, match="sign"):
            p_tau(0, 1.0, [0.0, 0.0, 1.0])


class TestFlatReduction:
    """Θ₀ rotates β into B(ν)."""

    def test_theta0_unitary_and_conjugates_beta(self, random_normals):
        U = theta0(random_normals)
        assert np.allclose(U @ _dagger(U), I4)
        assert np.allclose(U @ BETA @ _dagger(U), shell_matrix_B(random_normals))

    def test_rotated_flat_matrix_is_r_tau(self, random_normals):
        assert np.allclose(robin_transmission_matrix(-1.0, random_normals), r_tau(+1, -1.0, random_normals))

    def test_flat_matrix_eigenvalues(self):
        tau = -0.5
        flat = robin_transmission_matrix(tau)
        assert np.allclose(flat, np.diag(np.diag(flat)))
        expected = [(2 + tau) / (2 - tau)] * 2 + [(2 - tau) / (2 + tau)] * 2
        assert np.allclose(np.real(np.diag(flat)), expected)


class TestTransmissionResidual:

    def test_traces_related_by_r_tau_satisfy_condition(self):
        nu = [0.0, 0.6, 0.8]
        u_minus = np.array([1.0, 0.5j, -0.3, 0.2])
        u_plus = r_tau(+1, -1.0, nu) @ u_minus
        assert transmission_residual(-1.0, nu, u_plus, u_minus) < 1e-12

    def test_unrelated_traces_fail(self):
        nu = [0.0, 0.0, 1.0]
        u = np.array([1.0, 0.0, 0.0, 0.0])
        assert transmission_residual(-1.0, nu, u, u) > 0.1


class TestSymmetries:
    """Charge conjugation and time reversal on 4-spinors."""

    def test_charge_conjugation_reverses_mass_term(self):
        charge, _ = symmetry_operators()
        M = charge.matrix
        assert np.allclose(M @ np.conj(BETA), -BETA @ M)
        for j in range(3):
            assert np.allclose(M @ np.conj(ALPHA[j]), ALPHA[j] @ M)

    def test_both_commute_with_shell_matrix(self, random_normals):
        for op in symmetry_operators():
            B = shell_matrix_B(random_normals)
            assert np.allclose(op.matrix @ np.conj(B), B @ op.matrix)

    def test_time_reversal_is_kramers(self):
        _, reversal = symmetry_operators()
        u = np.array([0.3, 1.0j, -0.5, 0.25 + 0.1j])
        assert np.allclose(reversal(reversal(u)), -u)
        assert abs(np.vdot(u, reversal(u))) < 1e-12
