import numpy as np
import pytest

from src.spectral.oned_models import (
    OneDProblem, fiber_transmission_defect, ground_state_spinors, mu_of_tau, robin_f,
    robin_positive_spectrum_gap, scaled_ground_residual, solve_dirichlet_ground, solve_robin_ground,
    zero_mode_coefficient,
)
from src.utils.errors import DecoupledShell, InvalidParameter, NoBoundState


class TestMuOfTau:

    def test_values(self):
        assert mu_of_tau(-2.0) == pytest.approx(1.0)
        assert mu_of_tau(-1.0) == pytest.approx(0.8)
        assert mu_of_tau(1.0) == mu_of_tau(-1.0)
        assert mu_of_tau(-4.0) == pytest.approx(0.8)

    def test_free_case_rejected(self):
        with pytest.raises(InvalidParameter, match="free case"):
            mu_of_tau(0.0)


class TestProblemValidation:

    def test_positive_tau_rejected(self):
        with pytest.raises(InvalidParameter, match="negative"):
            OneDProblem(m=10, tau=1.0, delta=1.0)

    def test_decoupled(self):
        with pytest.raises(DecoupledShell):
            OneDProblem(m=10, tau=-2.0, delta=1.0)

    def test_robin_constant_bound(self):
        with pytest.raises(InvalidParameter, match="c\\*delta < 1"):
            OneDProblem(m=10, tau=-1.0, delta=1.0, c=1.0)

    @pytest.mark.parametrize("field,value", [("m", 0.0), ("delta", -1.0)])
    def test_nonpositive_inputs(self, field, value):
        params = {"m": 10.0, "tau": -1.0, "delta": 1.0, field: value}
        with pytest.raises(InvalidParameter):
            OneDProblem(**params)


class TestDirichletGround:
    """x coth x = μmδ."""

    def test_root_solves_equation(self):
        p = OneDProblem(m=10, tau=-1.0, delta=1.0)
        mode = solve_dirichlet_ground(p)
        x = mode.k * p.delta
        assert x / np.tanh(x) == pytest.approx(p.mu_m_delta, rel=1e-13)
        assert mode.k < p.mu * p.m
        assert mode.energy == pytest.approx(-mode.k ** 2)
        assert mode.multiplicity == 4
        assert mode.kind == "dirichlet"

    def test_small_coupling_strength(self):
        x = 1.5
        p = OneDProblem(m=x / (0.8 * 0.5), tau=-1.0, delta=0.5)
        mode = solve_dirichlet_ground(p)
        assert (mode.k * p.delta) / np.tanh(mode.k * p.delta) == pytest.approx(p.mu_m_delta, rel=1e-12)

    def test_no_bound_state(self):
        with pytest.raises(NoBoundState):
            solve_dirichlet_ground(OneDProblem(m=1.0, tau=-1.0, delta=1.0))

    @pytest.mark.parametrize("m", [5.0, 10.0, 20.0, 40.0])
    def test_scaled_residual_bounded(self, m):
        mode = solve_dirichlet_ground(OneDProblem(m=m, tau=-1.0, delta=1.0))
        residual = scaled_ground_residual(mode)
        assert 0.0 < residual <= 4.5

    def test_profile_satisfies_ode_and_wall(self):
        mode = solve_dirichlet_ground(OneDProblem(m=10, tau=-1.0, delta=1.0))
        t = np.linspace(0.0, 1.0, 41)
        assert np.max(mode.ode_residual(t)) < 1e-10
        assert mode.boundary_residual() < 1e-10


class TestRobinGround:
    """x(x tanh x − ε)/(x − ε tanh x) = μmδ."""

    def test_zero_robin_constant(self):
        p = OneDProblem(m=10, tau=-1.0, delta=1.0, c=0.0)
        mode = solve_robin_ground(p)
        x = mode.k * p.delta
        assert x * np.tanh(x) == pytest.approx(p.mu_m_delta, rel=1e-13)
        assert mode.k > p.mu * p.m

    @pytest.mark.parametrize("c", [-2.0, 0.5, 0.9])
    def test_root_solves_equation(self, c):
        p = OneDProblem(m=10, tau=-0.5, delta=1.0, c=c)
        mode = solve_robin_ground(p)
        assert float(robin_f(mode.k * p.delta, p.epsilon)) == pytest.approx(p.mu_m_delta, rel=1e-12)
        assert mode.boundary_residual() < 1e-9

    @pytest.mark.parametrize("m", [5.0, 10.0, 20.0, 40.0])
    def test_scaled_residual_bounded(self, m):
        mode = solve_robin_ground(OneDProblem(m=m, tau=-1.0, delta=1.0, c=0.0))
        assert 0.0 < scaled_ground_residual(mode) <= 5.0

    def test_negative_epsilon_threshold(self):
        p = OneDProblem(m=0.1, tau=-1.0, delta=1.0, c=-3.0)
        with pytest.raises(NoBoundState):
            solve_robin_ground(p)

    def test_positive_spectrum_gap_certified(self):
        p = OneDProblem(m=10, tau=-1.0, delta=1.0, c=0.5)
        certificate = robin_positive_spectrum_gap(p)
        assert certificate.verified
        assert certificate.bound == pytest.approx(np.pi ** 2 / 16)

    def test_zero_mode_coefficient(self):
        p = OneDProblem(m=10, tau=-1.0, delta=1.0, c=0.5)
        assert zero_mode_coefficient(p) == pytest.approx(1.0 + 8.0)


class TestFiberEigenfunction:
    """Spinor eigenfunctions across the shell."""

    @pytest.mark.parametrize("nu", [None, [0.0, 0.6, 0.8]])
    def test_transmission_condition(self, nu):
        mode = solve_dirichlet_ground(OneDProblem(m=6, tau=-1.0, delta=1.0))
        b = np.array([1.0, 0.2j, -0.4, 0.7])
        assert fiber_transmission_defect(mode, b, nu) < 1e-10

    def test_robin_transmission_condition(self):
        mode = solve_robin_ground(OneDProblem(m=6, tau=-0.7, delta=1.0, c=0.3))
        assert fiber_transmission_defect(mode, [0.0, 1.0, 1.0j, 0.0]) < 1e-10

    def test_spinor_shape_and_jump(self):
        mode = solve_dirichlet_ground(OneDProblem(m=6, tau=-1.0, delta=1.0))
        t = np.array([-0.5, -1e-12, 1e-12, 0.5])
        v = ground_state_spinors(mode, t, [1.0, 0.0, 0.0, 0.0])
        assert v.shape == (4, 4)
        ratio = (2 - 1.0) / (2 + 1.0)
        assert v[2, 0] / v[1, 0] == pytest.approx(ratio, rel=1e-9)
