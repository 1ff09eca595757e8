import numpy as np
import pytest

from src.spectral.asymptotics import (
    AsymptoticReport, align_with_effective, build_report, curvature_defect_sup, default_delta,
    envelope_check, leading_slope, positive_eigenvalues, residual_order_fit, squared_prediction,
    two_term_prediction, weyl_prediction, weyl_table,
)
from src.spectral.effective_operator import sphere_upsilon_levels
from src.spectral.sphere_modes import ModeResult, ShellConfig, count_with_multiplicity, full_spectrum
from src.spectral.surface_geometry import build_grid
from src.utils.errors import AlignmentError, DecoupledShell, InvalidParameter

TAU = -1.0
SWEEP = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0]
EFFECTIVE = [(1.0, 2), (3.0, 4), (5.0, 6)]


def _mode(lam: float, multiplicity: int = 2, kappa: int = -1) -> ModeResult:
    return ModeResult(lam=lam, kappa=kappa, multiplicity=multiplicity, residual=0.0)


def _synthetic_spectrum(m: float) -> list[ModeResult]:
    """Shell levels that follow the two-term expansion up to log m/m²."""
    modes = []
    for energy, mult in EFFECTIVE:
        lam = two_term_prediction(m, TAU, energy) + np.log(m) / m ** 2
        modes += [_mode(-lam, mult, kappa=mult // 2), _mode(lam, mult, kappa=-(mult // 2))]
    return sorted(modes, key=lambda mode: mode.lam)


class TestPredictions:

    def test_leading_slope(self):
        assert leading_slope(-1.0) == pytest.approx(0.6)
        assert leading_slope(1.0) == pytest.approx(0.6)
        assert leading_slope(-4.0) == pytest.approx(0.6)

    def test_leading_slope_rejects_decoupled(self):
        with pytest.raises(DecoupledShell):
            leading_slope(2.0)
        with pytest.raises(InvalidParameter):
            leading_slope(0.0)

    def test_two_term(self):
        assert two_term_prediction(10.0, TAU, 2.0) == pytest.approx(6.0 + 1.0 / 6.0)

    def test_squared(self):
        assert squared_prediction(10.0, TAU, 3.0) == pytest.approx(39.0)

    def test_weyl(self):
        area = 4 * np.pi
        assert weyl_prediction(10.0, TAU, area) == pytest.approx(16.0 / np.pi / 25.0 * area * 100.0)
        with pytest.raises(InvalidParameter, match="area"):
            weyl_prediction(10.0, TAU, 0.0)

    def test_default_delta(self):
        delta = default_delta(10.0, TAU)
        assert delta == pytest.approx(4 * np.log(10.0) / 8.0)
        assert 100.0 * np.exp(-2 * 0.8 * 10.0 * delta) == pytest.approx(10.0 ** -6)
        with pytest.raises(InvalidParameter):
            default_delta(1.0, TAU)

    def test_sphere_curvature_defect_vanishes(self, unit_sphere):
        assert curvature_defect_sup(build_grid(unit_sphere, 4)) < 1e-12


class TestAlignment:
    """Pairing of positive shell eigenvalues with effective levels."""

    def test_positive_eigenvalues_repeat_multiplicity(self):
        values = positive_eigenvalues([_mode(-2.0), _mode(3.0, 4), _mode(1.0)])
        assert list(values) == [1.0, 1.0, 3.0, 3.0, 3.0, 3.0]

    def test_pairs_blocks(self):
        pairs = align_with_effective([_mode(-5.0), _mode(5.0), _mode(6.0, 4)], EFFECTIVE)
        assert [p.j for p in pairs] == [1, 2, 3, 4, 5, 6]
        assert [p.effective for p in pairs] == [1.0, 1.0, 3.0, 3.0, 3.0, 3.0]
        assert [p.mu for p in pairs] == [5.0, 5.0, 6.0, 6.0, 6.0, 6.0]

    def test_merges_degenerate_channels(self):
        pairs = align_with_effective([_mode(5.0, 2, -1), _mode(5.0, 4, 2)], [(1.0, 6)])
        assert len(pairs) == 6

    def test_straddling_level(self):
        with pytest.raises(AlignmentError, match="straddles"):
            align_with_effective([_mode(5.0, 4)], EFFECTIVE)

    def test_stops_when_effective_levels_run_out(self):
        pairs = align_with_effective([_mode(5.0), _mode(6.0, 4)], [(1.0, 2)])
        assert len(pairs) == 2


class TestEnvelope:

    def test_exact_predictions_fit_with_zero_constants(self):
        m = 20.0
        doubled = [1.0, 1.0, 2.0, 2.0]
        squared = [squared_prediction(m, TAU, e) for e in doubled]
        fit = envelope_check(squared, doubled, m, TAU)
        assert fit.b == pytest.approx(0.0, abs=1e-12)
        assert fit.c == pytest.approx(0.0, abs=1e-12)
        assert fit.violations == 0
        assert fit.count == 4

    def test_fitted_bracket_has_no_violations(self):
        m = 20.0
        doubled = np.array([1.0, 1.0, 2.0, 2.0, 4.0, 4.0])
        squared = np.array([squared_prediction(m, TAU, e) for e in doubled]) + np.linspace(0.1, 0.6, 6)
        fit = envelope_check(squared, doubled, m, TAU, c0=1.0)
        assert fit.b + fit.c > 0
        assert fit.violations == 0
        assert fit.epsilon > fit.delta

    def test_fixed_constants_count_violations(self):
        m = 20.0
        doubled = [1.0, 1.0]
        squared = [squared_prediction(m, TAU, e) + 1.0 for e in doubled]
        fit = envelope_check(squared, doubled, m, TAU, fixed=(0.0, 0.0))
        assert fit.violations == 2

    def test_empty_input(self):
        with pytest.raises(InvalidParameter, match="at least one"):
            envelope_check([], [], 10.0, TAU)


class TestResidualOrder:

    def test_second_order_accepted(self):
        ms = np.array(SWEEP)
        fit = residual_order_fit(ms, np.log(ms) / ms ** 2)
        assert fit.slope == pytest.approx(-2.0, abs=1e-9)
        assert fit.accepted
        assert fit.used == len(SWEEP) and fit.excluded == 0

    def test_first_order_rejected(self):
        ms = np.array(SWEEP)
        fit = residual_order_fit(ms, 1.0 / ms)
        assert fit.slope > -1.7
        assert not fit.accepted

    def test_floor_excluded(self):
        ms = np.array(SWEEP)
        residuals = np.log(ms) / ms ** 2
        residuals[-1] = 0.0
        fit = residual_order_fit(ms, residuals)
        assert fit.excluded == 1

    @pytest.mark.parametrize("ms,residuals,message", [
        ([10.0, 20.0], [0.1], "differ"),
        ([1.0, 10.0, 20.0, 40.0], [0.1, 0.1, 0.1, 0.1], "m > 1"),
        ([10.0, 20.0, 40.0], [0.1, 0.1, 0.1], "at least"),
    ])
    def test_invalid_sweeps(self, ms, residuals, message):
        with pytest.raises(InvalidParameter, match=message):
            residual_order_fit(ms, residuals)

    def test_narrow_sweep_still_fits(self):
        ms = np.array([10.0, 12.0, 14.0, 16.0])
        assert residual_order_fit(ms, np.log(ms) / ms ** 2).span_decades < 1.0


def test_weyl_table():
    rows = weyl_table({20.0: 30, 10.0: 5}, TAU, 4 * np.pi)
    assert [row.m for row in rows] == [10.0, 20.0]
    assert rows[0].ratio == pytest.approx(5 / weyl_prediction(10.0, TAU, 4 * np.pi))


class TestReport:
    """Full m-sweep report on synthetic spectra."""

    @pytest.fixture
    def report(self):
        spectra = {m: _synthetic_spectrum(m) for m in SWEEP[:4]}
        return build_report(TAU, 1.0, spectra, EFFECTIVE, levels=2, area=4 * np.pi)

    def test_residuals(self, report):
        assert isinstance(report, AsymptoticReport)
        assert report.ms == SWEEP[:4]
        for m, row in zip(report.ms, report.residuals):
            assert np.allclose(row, np.log(m) / m ** 2, rtol=1e-6)
        assert np.allclose(report.scaled_residuals, 1.0, rtol=1e-6)

    def test_order_fit_and_weyl(self, report):
        assert report.order_fit is not None
        assert report.order_fit.accepted
        assert [row.count for row in report.weyl] == [24] * 4

    def test_envelope_rows(self, report):
        assert len(report.envelope) == 4
        assert all(fit.count == 10 and fit.violations == 0 for fit in report.envelope)
        assert report.effective[:3] == [1.0, 1.0, 3.0]

    def test_too_few_levels(self):
        spectra = {10.0: [_mode(6.0)]}
        with pytest.raises(AlignmentError, match="aligned"):
            build_report(TAU, 1.0, spectra, EFFECTIVE, levels=3)

    def test_report_serializes(self, report):
        dumped = report.model_dump()
        assert dumped["tau"] == TAU
        assert len(dumped["mu"]) == 4


@pytest.mark.slow
class TestSphereSweep:
    """Large-mass expansion against exact sphere spectra for τ = −1, R = 1."""

    MASSES = [10.0, 20.0, 40.0, 80.0]

    @pytest.fixture(scope="class")
    def spectra(self):
        return {m: full_spectrum(ShellConfig(m=m, tau=TAU)) for m in self.MASSES}

    @pytest.fixture(scope="class")
    def report(self, spectra):
        return build_report(TAU, 1.0, spectra, sphere_upsilon_levels(TAU, lmax=12), levels=1,
                            area=4 * np.pi)

    def test_residual_order(self, report):
        assert report.order_fit is not None
        assert report.order_fit.accepted
        assert report.order_fit.slope <= -1.7

    def test_residuals_shrink(self, report):
        first = np.abs([row[0] for row in report.residuals])
        assert np.all(np.diff(first) < 0)

    def test_envelope_constants_carry_to_larger_masses(self, report):
        assert len(report.envelope_carried) == len(self.MASSES)
        assert all(fit.violations == 0 for fit in report.envelope_carried)
        first, last = report.envelope[0], report.envelope[-1]
        assert last.b + last.c <= first.b + first.c

    def test_weyl_at_m_60(self):
        count = count_with_multiplicity(full_spectrum(ShellConfig(m=60.0, tau=TAU)))
        assert 0.9 <= count / weyl_prediction(60.0, TAU, 4 * np.pi) <= 1.1
