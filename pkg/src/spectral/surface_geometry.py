"""
Parametrized closed surfaces, their differential geometry and quadrature.

A surface is a set of charts. Each chart maps a parameter rectangle into R³
with analytic first and second derivatives, carries a quadrature weight (the
charts' weights form a partition of unity; auxiliary charts have weight 0)
and knows how to invert itself. Normals point out of the enclosed domain and
the Weingarten map is S = dν, so the unit sphere has M = K = 1.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Optional, Union

import numpy as np

from src.spectral.spinor_algebra import sigma_dot
from src.utils.errors import GeometryError, InvalidParameter
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

TWO_PI = 2.0 * np.pi
RANGE_SLACK = 1e-12

Vec = np.ndarray
Derivs = tuple[Vec, Vec]
SecondDerivs = tuple[Vec, Vec, Vec]


@dataclass(frozen=True)
class Chart:
    name: str
    bounds: tuple[tuple[float, float], tuple[float, float]]
    periodic: tuple[bool, bool]
    rules: tuple[Literal["gauss-cos", "trapezoid"], Literal["gauss-cos", "trapezoid"]]
    position: Callable[[Vec, Vec], Vec]
    first: Callable[[Vec, Vec], Derivs]
    second: Callable[[Vec, Vec], SecondDerivs]
    locate: Callable[[Vec], tuple[Vec, Vec]]
    weight: float = 1.0

    def check_range(self, s1, s2) -> None:
        for axis, s in enumerate((s1, s2)):
            if self.periodic[axis]:
                continue
            lo, hi = self.bounds[axis]
            s = np.asarray(s, dtype=float)
            if s.size and (np.min(s) < lo - RANGE_SLACK or np.max(s) > hi + RANGE_SLACK):
                raise GeometryError(f"parameter {axis + 1} outside chart '{self.name}' range [{lo}, {hi}]",
                                    details={"chart": self.name, "axis": axis + 1})


@dataclass(frozen=True)
class GeomSample:
    """Pointwise surface data, batched over the leading dimensions."""

    chart: str
    s1: Vec
    s2: Vec
    point: Vec
    normal: Vec
    t1: Vec
    t2: Vec
    g: Vec
    g_inv: Vec
    sqrt_det_g: Vec
    dnu: Vec  # (..., 2, 3): ∂₁ν, ∂₂ν
    S: Vec
    M: Vec
    K: Vec

    def __len__(self) -> int:
        return int(np.asarray(self.M).size)

    def take(self, index) -> "GeomSample":
        fields_ = {name: getattr(self, name)[index] for name in _ARRAY_FIELDS}
        return GeomSample(chart=self.chart, **fields_)


_ARRAY_FIELDS = ("s1", "s2", "point", "normal", "t1", "t2", "g", "g_inv",
                 "sqrt_det_g", "dnu", "S", "M", "K")


@dataclass(frozen=True)
class ParamSurface:
    name: str
    charts: tuple[Chart, ...]
    params: dict[str, float]
    euler_characteristic: int
    family: Literal["polar", "toroidal"]

    def chart(self, name: Optional[str] = None) -> Chart:
        if name is None:
            return self.charts[0]
        for chart in self.charts:
            if chart.name == name:
                return chart
        raise GeometryError(f"surface '{self.name}' has no chart '{name}'")

    @property
    def quadrature_charts(self) -> tuple[Chart, ...]:
        return tuple(c for c in self.charts if c.weight > 0)

    def sample(self, chart: Optional[str], s1, s2) -> GeomSample:
        return sample(self, chart, s1, s2)

    def descriptor(self) -> dict[str, Any]:
        return {"name": self.name, **self.params}


def _geometry(chart: Chart, s1, s2) -> GeomSample:
    s1, s2 = np.broadcast_arrays(np.asarray(s1, dtype=float), np.asarray(s2, dtype=float))
    r = chart.position(s1, s2)
    r1, r2 = chart.first(s1, s2)
    r11, r12, r22 = chart.second(s1, s2)

    n = np.cross(r1, r2)
    area_element = np.linalg.norm(n, axis=-1)
    scale = np.linalg.norm(r1, axis=-1) * np.linalg.norm(r2, axis=-1)
    if np.any(area_element <= 1e-13 * np.maximum(scale, 1e-300)):
        raise GeometryError(f"degenerate parametrization on chart '{chart.name}'",
                            details={"chart": chart.name})
    nu = n / area_element[..., None]

    g11 = np.einsum("...i,...i->...", r1, r1)
    g12 = np.einsum("...i,...i->...", r1, r2)
    g22 = np.einsum("...i,...i->...", r2, r2)
    g = np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)
    det = g11 * g22 - g12 * g12
    g_inv = np.stack([np.stack([g22, -g12], -1), np.stack([-g12, g11], -1)], -2) / det[..., None, None]

    h11 = -np.einsum("...i,...i->...", nu, r11)
    h12 = -np.einsum("...i,...i->...", nu, r12)
    h22 = -np.einsum("...i,...i->...", nu, r22)
    h = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
    S = g_inv @ h

    tangents = np.stack([r1, r2], axis=-2)
    dnu = np.einsum("...lj,...li->...ji", S, tangents)
    M = 0.5 * (S[..., 0, 0] + S[..., 1, 1])
    K = S[..., 0, 0] * S[..., 1, 1] - S[..., 0, 1] * S[..., 1, 0]

    return GeomSample(chart=chart.name, s1=s1, s2=s2, point=r, normal=nu, t1=r1, t2=r2,
                      g=g, g_inv=g_inv, sqrt_det_g=area_element, dnu=dnu, S=S, M=M, K=K)


def sample(surface: ParamSurface, chart: Optional[str], s1, s2) -> GeomSample:
    """Evaluate all pointwise geometry on `chart` at parameters (s1, s2).

    Raises:
        GeometryError: for parameters outside a non-periodic chart range or a
            degenerate parametrization.
    """
    c = surface.chart(chart)
    c.check_range(s1, s2)
    return _geometry(c, s1, s2)


def principal_curvatures(sample_: GeomSample) -> tuple[Vec, Vec]:
    """κ₁ ≤ κ₂, the eigenvalues of S."""
    disc = np.sqrt(np.maximum(sample_.M ** 2 - sample_.K, 0.0))
    return sample_.M - disc, sample_.M + disc


def tubular_jacobian(sample_: GeomSample, t) -> Vec:
    """det(I − tS) = 1 − 2tM + t²K."""
    t = np.asarray(t, dtype=float)
    return 1.0 - 2.0 * t * sample_.M + t * t * sample_.K


def yang_mills_form(sample_: GeomSample) -> tuple[Vec, Vec]:
    """ω_j = σ·(ν × ∂_jν) as 2×2 Hermitian traceless matrices."""
    nu = sample_.normal
    return (sigma_dot(np.cross(nu, sample_.dnu[..., 0, :])),
            sigma_dot(np.cross(nu, sample_.dnu[..., 1, :])))


# Polar charts (sphere, ellipsoid)


def _polar_chart(name: str, matrix: np.ndarray, weight: float) -> Chart:
    """Chart r(θ, φ) = A·(sinθ cosφ, sinθ sinφ, cosθ) for a linear map A with det A > 0."""
    A = np.asarray(matrix, dtype=float)
    A_inv = np.linalg.inv(A)

    def _apply(v):
        return np.einsum("ij,...j->...i", A, v)

    def position(th, ph):
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        return _apply(np.stack([st * cp, st * sp, ct], -1))

    def first(th, ph):
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        d_th = np.stack([ct * cp, ct * sp, -st], -1)
        d_ph = np.stack([-st * sp, st * cp, np.zeros_like(st)], -1)
        return _apply(d_th), _apply(d_ph)

    def second(th, ph):
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        zero = np.zeros_like(st)
        d_thth = np.stack([-st * cp, -st * sp, -ct], -1)
        d_thph = np.stack([-ct * sp, ct * cp, zero], -1)
        d_phph = np.stack([-st * cp, -st * sp, zero], -1)
        return _apply(d_thth), _apply(d_thph), _apply(d_phph)

    def locate(points):
        f = np.einsum("ij,...j->...i", A_inv, np.asarray(points, dtype=float))
        f = f / np.linalg.norm(f, axis=-1, keepdims=True)
        theta = np.arccos(np.clip(f[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(f[..., 1], f[..., 0]), TWO_PI)
        return theta, phi

    return Chart(name=name, bounds=((0.0, np.pi), (0.0, TWO_PI)), periodic=(False, True),
                 rules=("gauss-cos", "trapezoid"), position=position, first=first,
                 second=second, locate=locate, weight=weight)


_CYCLIC = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def build_ellipsoid(a: float, b: float, c: float) -> ParamSurface:
    """Ellipsoid x²/a² + y²/b² + z²/c² = 1 with a z-polar chart and an auxiliary x-polar chart."""
    for label, value in (("a", a), ("b", b), ("c", c)):
        if not np.isfinite(value) or value <= 0:
            raise InvalidParameter(f"ellipsoid semi-axis {label} must be positive, got {value}")
    D = np.diag([a, b, c])
    charts = (_polar_chart("polar-z", D, 1.0), _polar_chart("polar-x", D @ _CYCLIC, 0.0))
    return ParamSurface(name="ellipsoid", charts=charts, params={"a": float(a), "b": float(b), "c": float(c)},
                        euler_characteristic=2, family="polar")


def build_sphere(R: float) -> ParamSurface:
    if not np.isfinite(R) or R <= 0:
        raise InvalidParameter(f"sphere radius must be positive, got {R}")
    D = R * np.eye(3)
    charts = (_polar_chart("polar-z", D, 1.0), _polar_chart("polar-x", D @ _CYCLIC, 0.0))
    return ParamSurface(name="sphere", charts=charts, params={"R": float(R)},
                        euler_characteristic=2, family="polar")


def build_torus(R_major: float, r_minor: float) -> ParamSurface:
    """Torus ((R + r cos v) cos u, (R + r cos v) sin u, r sin v)."""
    if not (np.isfinite(R_major) and np.isfinite(r_minor)) or r_minor <= 0 or R_major <= r_minor:
        raise InvalidParameter(f"torus requires 0 < r_minor < R_major, got R={R_major}, r={r_minor}")
    R, r = float(R_major), float(r_minor)

    def position(u, v):
        rho = R + r * np.cos(v)
        return np.stack([rho * np.cos(u), rho * np.sin(u), r * np.sin(v)], -1)

    def first(u, v):
        rho = R + r * np.cos(v)
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        d_u = np.stack([-rho * su, rho * cu, np.zeros_like(u)], -1)
        d_v = np.stack([-r * sv * cu, -r * sv * su, r * cv], -1)
        return d_u, d_v

    def second(u, v):
        rho = R + r * np.cos(v)
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        zero = np.zeros_like(u)
        d_uu = np.stack([-rho * cu, -rho * su, zero], -1)
        d_uv = np.stack([r * sv * su, -r * sv * cu, zero], -1)
        d_vv = np.stack([-r * cv * cu, -r * cv * su, -r * sv], -1)
        return d_uu, d_uv, d_vv

    def locate(points):
        p = np.asarray(points, dtype=float)
        u = np.mod(np.arctan2(p[..., 1], p[..., 0]), TWO_PI)
        v = np.mod(np.arctan2(p[..., 2], np.hypot(p[..., 0], p[..., 1]) - R), TWO_PI)
        return u, v

    chart = Chart(name="uv", bounds=((0.0, TWO_PI), (0.0, TWO_PI)), periodic=(True, True),
                  rules=("trapezoid", "trapezoid"), position=position, first=first,
                  second=second, locate=locate)
    return ParamSurface(name="torus", charts=(chart,), params={"R_major": R, "r_minor": r},
                        euler_characteristic=0, family="toroidal")


SURFACE_BUILDERS: dict[str, Callable[..., ParamSurface]] = {
    "sphere": build_sphere,
    "ellipsoid": build_ellipsoid,
    "torus": build_torus,
}


def build_surface(name: str, **params: float) -> ParamSurface:
    """Build a surface from a descriptor name and its numeric parameters."""
    builder = SURFACE_BUILDERS.get(name)
    if builder is None:
        raise InvalidParameter(f"unknown surface '{name}'; expected one of {sorted(SURFACE_BUILDERS)}",
                               details={"surface": name})
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for surface '{name}': {exc}",
                               details={"surface": name, "params": params})


# Quadrature


@dataclass(frozen=True)
class SurfaceGrid:
    """Quadrature nodes on a surface with area weights, concatenated over charts."""

    surface: ParamSurface
    order: int
    samples: GeomSample
    weights: Vec
    shape: tuple[int, int]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def mesh_size(self) -> float:
        return float(np.sqrt(np.sum(self.weights) / self.size))


def _rule(kind: str, n: int, bounds: tuple[float, float]) -> tuple[Vec, Vec]:
    if kind == "trapezoid":
        lo, hi = bounds
        step = (hi - lo) / n
        return lo + step * np.arange(n), np.full(n, step)
    x, w = np.polynomial.legendre.leggauss(n)
    theta = np.arccos(x)[::-1]
    return theta, (w / np.sqrt(1.0 - x * x))[::-1]


def grid_resolution(surface: ParamSurface, order: int) -> tuple[int, int]:
    """Node counts per direction that integrate degree-`order` Galerkin products."""
    if surface.family == "polar":
        return order + 4, 2 * order + 6
    return 4 * order + 8, 4 * order + 8


def build_grid(surface: ParamSurface, order: int, resolution: Optional[tuple[int, int]] = None) -> SurfaceGrid:
    """Tensor quadrature on every chart with positive weight.

    Polar directions use Gauss–Legendre in cos θ, periodic directions the
    trapezoid rule.
    """
    if order < 1:
        raise InvalidParameter(f"grid order must be positive, got {order}")
    n1, n2 = resolution or grid_resolution(surface, order)
    parts, weights = [], []
    for chart in surface.quadrature_charts:
        x1, w1 = _rule(chart.rules[0], n1, chart.bounds[0])
        x2, w2 = _rule(chart.rules[1], n2, chart.bounds[1])
        S1, S2 = np.meshgrid(x1, x2, indexing="ij")
        geo = _geometry(chart, S1.ravel(), S2.ravel())
        parts.append(geo)
        weights.append(chart.weight * np.outer(w1, w2).ravel() * geo.sqrt_det_g)

    merged = parts[0] if len(parts) == 1 else GeomSample(
        chart=parts[0].chart,
        **{name: np.concatenate([getattr(p, name) for p in parts]) for name in _ARRAY_FIELDS})
    w = np.concatenate(weights)
    logger.debug(f"Built {surface.name} grid: order={order}, nodes={w.size} ({n1}x{n2})")
    return SurfaceGrid(surface=surface, order=order, samples=merged, weights=w, shape=(n1, n2))


def quadrature(grid: SurfaceGrid, f: Union[Vec, Callable[[GeomSample], Vec]]) -> Union[complex, Vec]:
    """∫_Σ f dΣ for nodal values (N, ...) or a callable evaluated on the grid samples."""
    values = f(grid.samples) if callable(f) else np.asarray(f)
    total = np.tensordot(grid.weights, values, axes=(0, 0))
    return complex(total) if np.ndim(total) == 0 else total


def surface_area(grid: SurfaceGrid) -> float:
    return float(np.sum(grid.weights))
