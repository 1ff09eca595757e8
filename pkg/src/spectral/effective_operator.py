"""
Galerkin discretization of the effective surface operators.

Three quadratic forms are assembled on a spectral basis over a surface grid:

* the Bochner Laplacian Λ(θ) = (d + iθω)*(d + iθω) on C²-valued fields,
* Υ_τ = Λ(4/(τ²+4)) − ((τ²−4)/(τ²+4))²M² + ((τ⁴+16)/(τ²+4)²)K,
* the intermediate form L^τ on C⁴ fields v₊ with v₋ = R_τ^− v₊ and
  potential K − M² on both components.

Every form is written as ∫ g^{jk}⟨D_jU, D_kU⟩ + ⟨VU, U⟩ dΣ with U = Xu and
D_jU = X∂_ju + Y_ju, which a single assembler turns into a Hermitian pencil.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import scipy.linalg
from scipy.special import eval_jacobi

from src.spectral.spinor_algebra import (
    BETA, GAMMA5, I2, I4, alpha_dot, p_tau, r_tau, sigma_dot,
)
from src.spectral.surface_geometry import GeomSample, ParamSurface, SurfaceGrid, yang_mills_form
from src.utils.errors import ConvergenceError, DecoupledShell, IllConditionedSystem, InvalidParameter
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

HERMITIAN_RTOL = 1e-12
MASS_CONDITION_LIMIT = 1e12
MULTIPLICITY_RTOL = 1e-7
MIN_ORDER = 4

GaugeFn = Callable[[GeomSample], tuple[np.ndarray, np.ndarray]]


def bochner_theta(tau: float) -> float:
    return 4.0 / (tau * tau + 4.0)


def upsilon_potential_coefficients(tau: float) -> tuple[float, float]:
    """Coefficients (a, b) of the Υ_τ potential aM² + bK."""
    t2 = tau * tau
    return -((t2 - 4.0) / (t2 + 4.0)) ** 2, (t2 * t2 + 16.0) / (t2 + 4.0) ** 2


@dataclass(frozen=True)
class ScalarBasis:
    family: str
    order: int
    labels: list[tuple[int, int]]
    values: np.ndarray  # (Nb, Nn)
    d1: np.ndarray
    d2: np.ndarray

    @property
    def size(self) -> int:
        return len(self.labels)

    def stacked(self) -> np.ndarray:
        return np.stack([self.values, self.d1, self.d2])


def _polar_basis(theta: np.ndarray, phi: np.ndarray, order: int):
    x, st = np.cos(theta), np.sin(theta)
    labels, vals, d_theta, d_phi = [], [], [], []
    for m in range(-order, order + 1):
        a = abs(m)
        wave = np.exp(1j * m * phi)
        for k in range(order - a + 1):
            p = eval_jacobi(k, a, a, x)
            dp = 0.5 * (k + 2 * a + 1) * eval_jacobi(k - 1, a + 1, a + 1, x) if k > 0 else np.zeros_like(x)
            radial = st ** a * p
            d_radial = -st ** (a + 1) * dp
            if a > 0:
                d_radial = d_radial + a * st ** (a - 1) * x * p
            labels.append((m, k))
            vals.append(wave * radial)
            d_theta.append(wave * d_radial)
            d_phi.append(1j * m * wave * radial)
    return labels, np.array(vals), np.array(d_theta), np.array(d_phi)


def _toroidal_basis(u: np.ndarray, v: np.ndarray, order: int):
    labels, vals, du, dv = [], [], [], []
    for j in range(-order, order + 1):
        for k in range(-order, order + 1):
            wave = np.exp(1j * (j * u + k * v))
            labels.append((j, k))
            vals.append(wave)
            du.append(1j * j * wave)
            dv.append(1j * k * wave)
    return labels, np.array(vals), np.array(du), np.array(dv)


def scalar_basis(grid: SurfaceGrid, order: int) -> ScalarBasis:
    """Spectral scalar basis on the grid nodes, normalized in L²(Σ).

    Polar surfaces use e^{imφ} sin^{|m|}θ P_k^{(|m|,|m|)}(cos θ), |m| + k ≤ order,
    which spans the spherical harmonics up to degree `order`; tori use
    e^{i(ju+kv)} with |j|, |k| ≤ order.
    """
    s = grid.samples
    if grid.surface.family == "polar":
        labels, f, f1, f2 = _polar_basis(s.s1, s.s2, order)
    else:
        labels, f, f1, f2 = _toroidal_basis(s.s1, s.s2, order)
    norms = np.sqrt(np.einsum("n,pn->p", grid.weights, np.abs(f) ** 2))
    scale = 1.0 / norms[:, None]
    return ScalarBasis(family=grid.surface.family, order=order, labels=labels,
                       values=f * scale, d1=f1 * scale, d2=f2 * scale)


@dataclass(frozen=True)
class GalerkinSystem:
    stiffness: np.ndarray
    mass: np.ndarray
    components: int
    order: int
    basis_size: int
    label: str
    params: dict[str, Any] = field(default_factory=dict)

    def form_value(self, coefficients) -> float:
        """λ(u, u) for the field with the given coefficient vector."""
        c = np.asarray(coefficients, dtype=complex)
        return float(np.real(np.conj(c) @ self.stiffness @ c))


@dataclass(frozen=True)
class HermitianSpectrum:
    """Lowest eigenvalues of a pencil with their level multiplicities.

    `levels` are grouped on a slightly longer list than `values`, so the
    multiplicity of the last requested level is complete unless
    `last_level_partial` is set.
    """

    values: np.ndarray
    levels: list[tuple[float, int]]
    tolerance: float
    order: int
    basis_size: int
    label: str = ""
    last_level_partial: bool = False

    @property
    def multiplicities(self) -> list[int]:
        return [m for _, m in self.levels]

    def value_multiplicities(self) -> list[int]:
        """Level multiplicity attached to each entry of `values`."""
        out: list[int] = []
        for _, mult in self.levels:
            out.extend([mult] * mult)
        return out[: len(self.values)]


def group_levels(values, rtol: float = MULTIPLICITY_RTOL) -> list[tuple[float, int]]:
    """Group sorted eigenvalues whose relative spread is below rtol (absolute below 1)."""
    levels: list[tuple[float, int]] = []
    start = 0
    values = np.asarray(values, dtype=float)
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[start]) > rtol * max(1.0, abs(values[start])):
            levels.append((float(np.mean(values[start:i])), i - start))
            start = i
    return levels


def _assemble(grid: SurfaceGrid, basis: ScalarBasis, X: np.ndarray, Y: np.ndarray,
              V: Optional[np.ndarray], label: str, params: dict[str, Any]) -> GalerkinSystem:
    """Assemble stiffness and mass for U = Xu, D_jU = X∂_ju + Y_ju.

    X has shape (N, D, d), Y (N, 2, D, d), V (N, D, D). Unknowns are laid out
    as index p·d + a for scalar basis p and spinor component a.
    """
    w = grid.weights
    g_inv = grid.samples.g_inv
    d = X.shape[-1]
    nb = basis.size
    A = basis.stacked()

    Xc, Yc = np.conj(X), np.conj(Y)
    XX = np.einsum("nDa,nDb->nab", Xc, X)
    coeff = np.zeros((w.size, 3, 3, d, d), dtype=complex)
    coeff[:, 0, 0] = np.einsum("njk,njDa,nkDb->nab", g_inv, Yc, Y)
    if V is not None:
        coeff[:, 0, 0] += np.einsum("nDa,nDE,nEb->nab", Xc, V, X)
    coeff[:, 0, 1:] = np.einsum("njk,njDa,nDb->nkab", g_inv, Yc, X)
    coeff[:, 1:, 0] = np.einsum("njk,nDa,nkDb->njab", g_inv, Xc, Y)
    coeff[:, 1:, 1:] = g_inv[:, :, :, None, None] * XX[:, None, None]
    coeff *= w[:, None, None, None, None]

    stiffness = np.zeros((nb * d, nb * d), dtype=complex)
    Ac = np.conj(A)
    for x in range(3):
        for y in range(3):
            for a in range(d):
                for b in range(d):
                    c = coeff[:, x, y, a, b]
                    if not np.any(c):
                        continue
                    stiffness[a::d, b::d] += (Ac[x] * c) @ A[y].T

    mass = np.zeros_like(stiffness)
    for a in range(d):
        for b in range(d):
            c = w * XX[:, a, b]
            if np.any(c):
                mass[a::d, b::d] = (Ac[0] * c) @ A[0].T

    stiffness = _hermitian(stiffness, f"{label} stiffness")
    mass = _hermitian(mass, f"{label} mass")
    _check_mass(mass, label)
    logger.debug(f"Assembled {label}: basis={nb}x{d}, nodes={w.size}")
    return GalerkinSystem(stiffness=stiffness, mass=mass, components=d, order=basis.order,
                          basis_size=nb * d, label=label, params=params)


def _hermitian(matrix: np.ndarray, what: str) -> np.ndarray:
    scale = max(float(np.linalg.norm(matrix)), 1e-300)
    defect = float(np.linalg.norm(matrix - matrix.conj().T)) / scale
    if defect > HERMITIAN_RTOL:
        raise ConvergenceError(f"{what} is not Hermitian (relative defect {defect:.3e})",
                               details={"defect": defect})
    return 0.5 * (matrix + matrix.conj().T)


def _check_mass(mass: np.ndarray, label: str) -> None:
    eig = np.linalg.eigvalsh(mass)
    lo, hi = float(eig[0]), float(eig[-1])
    condition = np.inf if lo <= 0 else hi / lo
    if condition > MASS_CONDITION_LIMIT:
        raise IllConditionedSystem(f"{label} mass matrix is ill-conditioned (condition {condition:.3e})",
                                   details={"condition": condition})


def _check_inputs(surface: ParamSurface, grid: SurfaceGrid, order: int) -> None:
    if order < MIN_ORDER:
        raise InvalidParameter(f"Galerkin order must be at least {MIN_ORDER}, got {order}")
    if grid.surface.name != surface.name or grid.surface.params != surface.params:
        raise InvalidParameter("grid was built for a different surface")
    if grid.shape[1] < 2 * order:
        raise InvalidParameter(f"grid resolution {grid.shape} is too coarse for order {order}")


def _connection_terms(grid: SurfaceGrid, theta: float) -> np.ndarray:
    omega1, omega2 = yang_mills_form(grid.samples)
    return 1j * theta * np.stack([omega1, omega2], axis=1)


def _apply_gauge(grid: SurfaceGrid, basis: ScalarBasis, Y: np.ndarray, X: np.ndarray,
                 gauge: GaugeFn) -> tuple[ScalarBasis, np.ndarray]:
    chi, dchi = gauge(grid.samples)
    phase = np.exp(1j * np.asarray(chi))[None, :]
    f = basis.values * phase
    gauged = ScalarBasis(family=basis.family, order=basis.order, labels=basis.labels, values=f,
                         d1=basis.d1 * phase + 1j * dchi[None, :, 0] * f,
                         d2=basis.d2 * phase + 1j * dchi[None, :, 1] * f)
    shifted = Y - 1j * dchi[:, :, None, None] * X[:, None]
    return gauged, shifted


def assemble_bochner(surface: ParamSurface, grid: SurfaceGrid, theta: float, order: int,
                     gauge: Optional[GaugeFn] = None) -> GalerkinSystem:
    """Pencil of the Bochner Laplacian Λ(θ) on C²-valued fields.

    With `gauge` = χ the basis is multiplied by e^{iχ} and the connection is
    shifted by −dχ/θ; the spectrum is unchanged.
    """
    _check_inputs(surface, grid, order)
    basis = scalar_basis(grid, order)
    n = grid.size
    X = np.broadcast_to(I2, (n, 2, 2)).copy()
    Y = _connection_terms(grid, theta)
    if gauge is not None:
        if theta == 0:
            raise InvalidParameter("a gauge shift needs a nonzero connection strength theta")
        basis, Y = _apply_gauge(grid, basis, Y, X, gauge)
    return _assemble(grid, basis, X, Y, None, "bochner", {"theta": theta})


def assemble_upsilon(surface: ParamSurface, grid: SurfaceGrid, tau: float, order: int) -> GalerkinSystem:
    """Pencil of Υ_τ: Λ(4/(τ²+4)) plus the curvature potential."""
    if tau == -2.0:
        raise DecoupledShell(tau)
    if not tau < 0:
        raise InvalidParameter(f"Upsilon requires tau < 0, got {tau}")
    _check_inputs(surface, grid, order)
    basis = scalar_basis(grid, order)
    n = grid.size
    X = np.broadcast_to(I2, (n, 2, 2)).copy()
    Y = _connection_terms(grid, bochner_theta(tau))
    a, b = upsilon_potential_coefficients(tau)
    s = grid.samples
    V = (a * s.M ** 2 + b * s.K)[:, None, None] * I2
    return _assemble(grid, basis, X, Y, V, "upsilon", {"tau": tau, "theta": bochner_theta(tau)})


def shell_matrix_derivatives(sample_: GeomSample) -> np.ndarray:
    """∂_jB = −iβ α·∂_jν, shape (..., 2, 4, 4)."""
    return -1j * (BETA @ alpha_dot(sample_.dnu))


def assemble_intermediate(surface: ParamSurface, grid: SurfaceGrid, tau: float, order: int) -> GalerkinSystem:
    """Pencil of L^τ on the constrained space v₋ = R_τ^− v₊ with free C⁴ field v₊."""
    if tau == 0.0:
        raise InvalidParameter("tau=0 is the free case")
    s = grid.samples
    r_minus = r_tau(-1, tau, s.normal)
    _check_inputs(surface, grid, order)
    basis = scalar_basis(grid, order)
    n = grid.size

    X = np.concatenate([np.broadcast_to(I4, (n, 4, 4)), r_minus], axis=1)
    b = 4.0 * tau / (4.0 - tau * tau)
    Y = np.zeros((n, 2, 8, 4), dtype=complex)
    Y[:, :, 4:, :] = -b * shell_matrix_derivatives(s)
    V = (s.K - s.M ** 2)[:, None, None] * np.eye(8)
    return _assemble(grid, basis, X, Y, V, "intermediate", {"tau": tau})


def w_potential(sample_: GeomSample) -> np.ndarray:
    """Σ g^{jk}A_jA_k with A_j = γ₅ α·(ν × ∂_jν); equals (4M² − 2K)I₄."""
    a = np.cross(sample_.normal[..., None, :], sample_.dnu)
    A = GAMMA5 @ alpha_dot(a)
    return np.einsum("...jk,...jab,...kbc->...ac", sample_.g_inv, A, A)


def prop45_map(tau: float, nu) -> tuple[np.ndarray, np.ndarray]:
    """Components (V₊, V₋) = (−P_τ^+, P_τ^−) of the map into the constrained space.

    Vf satisfies the transmission condition and ‖Vf‖² = ((τ²+4)/2)‖f‖².
    """
    return -p_tau(+1, tau, nu), p_tau(-1, tau, nu)


def connection_curvature_check(surface: ParamSurface, grid: SurfaceGrid, theta: float,
                               step: float = 1e-5) -> float:
    """Max over the grid of ‖F₁₂ − 2θ(1−θ)K σ·(t₁×t₂)‖ / |t₁×t₂|.

    F₁₂ = θ(∂₁ω₂ − ∂₂ω₁) + iθ²[ω₁, ω₂], with parameter derivatives of ω taken
    by central differences.
    """
    s = grid.samples
    chart = s.chart

    def omega_at(d1: float, d2: float):
        return yang_mills_form(surface.sample(chart, s.s1 + d1, s.s2 + d2))

    w1, w2 = yang_mills_form(s)
    d1_w2 = (omega_at(step, 0.0)[1] - omega_at(-step, 0.0)[1]) / (2.0 * step)
    d2_w1 = (omega_at(0.0, step)[0] - omega_at(0.0, -step)[0]) / (2.0 * step)
    field_strength = theta * (d1_w2 - d2_w1) + 1j * theta ** 2 * (w1 @ w2 - w2 @ w1)

    area_vector = np.cross(s.t1, s.t2)
    expected = 2.0 * theta * (1.0 - theta) * s.K[:, None, None] * sigma_dot(area_vector)
    deviation = np.linalg.norm(field_strength - expected, axis=(-2, -1)) / np.linalg.norm(area_vector, axis=-1)
    return float(np.max(deviation))


def solve_pencil(system: GalerkinSystem, count: int, rtol: float = MULTIPLICITY_RTOL) -> HermitianSpectrum:
    """Lowest `count` generalized eigenvalues of (stiffness, mass), grouped into levels."""
    size = system.basis_size
    if count < 1 or count > size:
        raise InvalidParameter(f"count must be in [1, {size}], got {count}")
    extended = min(size, count + 8)
    try:
        values = scipy.linalg.eigh(system.stiffness, system.mass, eigvals_only=True,
                                   subset_by_index=[0, extended - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"generalized eigensolver failed for {system.label}: {exc}")

    all_levels = group_levels(values, rtol)
    levels, used = [], 0
    for value, mult in all_levels:
        if used >= count:
            break
        levels.append((value, mult))
        used += mult
    partial = used == extended and extended < size
    logger.debug(f"Solved {system.label} pencil: size={size}, count={count}, levels={len(levels)}")
    return HermitianSpectrum(values=np.asarray(values[:count]), levels=levels, tolerance=rtol,
                             order=system.order, basis_size=size, label=system.label,
                             last_level_partial=partial)


def sphere_bochner_levels(theta: float, R: float = 1.0, lmax: int = 10) -> list[tuple[float, int]]:
    """Exact levels of Λ(θ) on a round sphere of radius R, merged and sorted."""
    raw: list[tuple[float, int]] = []
    for l in range(lmax + 1):
        raw.append(((l * (l + 1) + 2 * theta * l + 2 * theta ** 2) / R ** 2, 2 * l + 2))
        if l >= 1:
            raw.append(((l * (l + 1) - 2 * theta * (l + 1) + 2 * theta ** 2) / R ** 2, 2 * l))
    return _merge_levels(raw)


def sphere_upsilon_levels(tau: float, R: float = 1.0, lmax: int = 10) -> list[tuple[float, int]]:
    """Exact levels of Υ_τ on a round sphere (M = 1/R, K = 1/R²)."""
    a, b = upsilon_potential_coefficients(tau)
    shift = (a + b) / R ** 2
    return [(value + shift, mult) for value, mult in sphere_bochner_levels(bochner_theta(tau), R, lmax)]


def _merge_levels(raw: list[tuple[float, int]]) -> list[tuple[float, int]]:
    merged: list[tuple[float, int]] = []
    for value, mult in sorted(raw):
        if merged and abs(merged[-1][0] - value) <= 1e-12 * max(1.0, abs(value)):
            merged[-1] = (merged[-1][0], merged[-1][1] + mult)
        else:
            merged.append((value, mult))
    return merged


def expand_levels(levels: list[tuple[float, int]]) -> np.ndarray:
    return np.concatenate([np.full(mult, value) for value, mult in levels]) if levels else np.zeros(0)


def doubled_spectrum(values) -> np.ndarray:
    """Sorted spectrum of the direct sum of two copies."""
    return np.sort(np.repeat(np.asarray(values, dtype=float), 2))


def effective_weyl_count(energy: float, area: float) -> float:
    """Weyl law for Υ_τ on C² fields: N(E) ≈ 2|Σ|E/(4π)."""
    return area * max(energy, 0.0) / (2.0 * np.pi)
