import numpy as np
import pytest

from src.spectral.surface_geometry import (
    build_grid, build_surface, grid_resolution, principal_curvatures, quadrature, sample,
    surface_area, tubular_jacobian, yang_mills_form,
)
from src.utils.errors import GeometryError, InvalidParameter


def _spheroid_area(a: float, c: float) -> float:
    """Oblate spheroid (a = b > c) surface area."""
    e = np.sqrt(1.0 - c * c / (a * a))
    return 2.0 * np.pi * a * a * (1.0 + (1.0 - e * e) / e * np.arctanh(e))


class TestSurfaceConstruction:

    def test_unknown_surface(self):
        with pytest.raises(InvalidParameter, match="unknown surface"):
            build_surface("cube", R=1.0)

    def test_bad_parameters(self):
        with pytest.raises(InvalidParameter):
            build_surface("torus", R_major=1.0, r_minor=2.0)
        with pytest.raises(InvalidParameter):
            build_surface("sphere", radius=1.0)
        with pytest.raises(InvalidParameter):
            build_surface("ellipsoid", a=1.0, b=-1.0, c=1.0)

    def test_descriptor(self, ellipsoid):
        assert ellipsoid.descriptor() == {"name": "ellipsoid", "a": 1.2, "b": 1.0, "c": 0.8}
        assert ellipsoid.euler_characteristic == 2

    def test_out_of_range_parameters(self, unit_sphere):
        with pytest.raises(GeometryError, match="outside chart"):
            sample(unit_sphere, None, np.array([4.0]), np.array([0.0]))

    def test_unknown_chart(self, torus):
        with pytest.raises(GeometryError, match="no chart"):
            torus.chart("polar-z")


class TestPointwiseGeometry:
    """Normals, curvatures and the charts' inverse maps."""

    def test_sphere_curvatures(self):
        s = build_surface("sphere", R=2.0).sample(None, np.array([0.4, 1.3]), np.array([0.2, 5.0]))
        assert np.allclose(s.M, 0.5)
        assert np.allclose(s.K, 0.25)
        assert np.allclose(s.normal, s.point / 2.0)

    def test_torus_outer_equator(self, torus):
        s = torus.sample(None, np.array([0.3]), np.array([0.0]))
        assert s.K[0] == pytest.approx(1.0 / 3.0)
        assert s.M[0] == pytest.approx((2.0 + 2.0) / (2.0 * 3.0))
        k1, k2 = principal_curvatures(s)
        assert k1[0] == pytest.approx(1.0 / 3.0)
        assert k2[0] == pytest.approx(1.0)

    def test_torus_inner_equator_is_hyperbolic(self, torus):
        s = torus.sample(None, np.array([0.3]), np.array([np.pi]))
        assert s.K[0] == pytest.approx(-1.0)

    def test_ellipsoid_normals_outward(self, ellipsoid):
        grid = build_grid(ellipsoid, 6)
        s = grid.samples
        assert np.allclose(np.linalg.norm(s.normal, axis=-1), 1.0)
        assert np.all(np.einsum("ni,ni->n", s.normal, s.point) > 0)

    @pytest.mark.parametrize("name", ["polar-z", "polar-x"])
    def test_locate_inverts_position(self, ellipsoid, name):
        chart = ellipsoid.chart(name)
        th = np.array([0.5, 1.2, 2.0])
        ph = np.array([0.1, 3.0, 6.0])
        points = chart.position(th, ph)
        t2, p2 = chart.locate(points)
        assert np.allclose(chart.position(t2, p2), points)

    def test_tubular_jacobian_on_sphere(self, unit_sphere):
        s = unit_sphere.sample(None, np.array([1.0]), np.array([2.0]))
        t = 0.3
        assert tubular_jacobian(s, t)[0] == pytest.approx((1.0 - t) ** 2)

    def test_yang_mills_form_hermitian_traceless(self, ellipsoid):
        s = build_grid(ellipsoid, 4).samples
        for omega in yang_mills_form(s):
            assert np.allclose(omega, np.conj(np.swapaxes(omega, -1, -2)))
            assert np.allclose(np.trace(omega, axis1=-2, axis2=-1), 0)


class TestQuadrature:
    """Areas and curvature integrals from the tensor rules."""

    def test_sphere_area(self):
        grid = build_grid(build_surface("sphere", R=1.5), 8)
        assert surface_area(grid) == pytest.approx(4 * np.pi * 1.5 ** 2, rel=1e-12)

    def test_spheroid_area(self):
        grid = build_grid(build_surface("ellipsoid", a=2.0, b=2.0, c=1.0), 24)
        assert surface_area(grid) == pytest.approx(_spheroid_area(2.0, 1.0), rel=1e-8)

    def test_torus_area(self, torus):
        grid = build_grid(torus, 8)
        assert surface_area(grid) == pytest.approx(4 * np.pi ** 2 * 2.0, rel=1e-12)

    @pytest.mark.parametrize("fixture,chi", [("unit_sphere", 2), ("ellipsoid", 2), ("torus", 0)])
    def test_gauss_bonnet(self, request, fixture, chi):
        surface = request.getfixturevalue(fixture)
        grid = build_grid(surface, 24)
        total = quadrature(grid, lambda s: s.K)
        assert total.real == pytest.approx(2 * np.pi * chi, abs=1e-8)

    def test_mean_curvature_integral(self, unit_sphere):
        grid = build_grid(unit_sphere, 8)
        assert quadrature(grid, grid.samples.M).real == pytest.approx(4 * np.pi, rel=1e-12)

    def test_resolution_and_mesh(self, unit_sphere, torus):
        assert grid_resolution(unit_sphere, 10) == (14, 26)
        assert grid_resolution(torus, 10) == (48, 48)
        grid = build_grid(unit_sphere, 10)
        assert grid.size == 14 * 26
        assert grid.mesh_size == pytest.approx(np.sqrt(4 * np.pi / grid.size))

    def test_invalid_order(self, unit_sphere):
        with pytest.raises(InvalidParameter):
            build_grid(unit_sphere, 0)
