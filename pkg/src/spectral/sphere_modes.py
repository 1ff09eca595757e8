"""
Exact gap eigenvalues of the Dirac shell operator on a sphere of radius R.

Spinors are reduced per angular channel κ as u = (g(r)Ω_κ, i f(r)Ω_{−κ}),
which turns the Dirac equation at energy λ into

    g' = −(κ+1)/r g + (λ+m) f,      f' = (κ−1)/r f − (λ−m) g.

With q = √(m²−λ²) the regular inner pair is ((λ+m) i_{l_G}(qr), q i_{l_F}(qr))
and the decaying outer pair ((λ+m) k_{l_G}(qr), −q k_{l_F}(qr)), where i_l, k_l
are modified spherical Bessel functions. B(ν) acts on (g, f) as
b = [[0, −1], [−1, 0]], so λ is an eigenvalue in channel κ exactly when
det[P⁻ w_in(R) | P⁺ w_out(R)] = 0 with P^± = τ/2 ± b.
"""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import optimize
from scipy.integrate import solve_ivp
from scipy.special import gammaln, ive, kve, logsumexp, roots_laguerre

from src.spectral.oned_models import mu_of_tau
from src.spectral.spinor_algebra import shell_matrix_B
from src.utils.errors import ConvergenceError, DecoupledShell, InvalidParameter
from src.utils.logging import run_context, setup_logger
from src.utils.workers import parallel_map

logger = setup_logger(__name__)

EDGE_MARGIN = 1e-9
ROOT_XTOL = 1e-11
ROOT_RTOL = 1e-6
UNDERFLOW_FLOOR = 1e-280

Branch = Literal["inner", "outer"]

RADIAL_B = np.array([[0.0, -1.0], [-1.0, 0.0]])


class ShellConfig(BaseModel):
    """Spherical shell problem: mass m, coupling τ, radius R and scan resolution."""

    model_config = ConfigDict(frozen=True)

    m: float
    tau: float
    R: float = 1.0
    kappa_max: Optional[int] = None
    lambda_grid: Optional[int] = None

    @model_validator(mode="after")
    def _check(self) -> "ShellConfig":
        if not np.isfinite(self.m) or self.m == 0:
            raise InvalidParameter(f"m must be finite and nonzero, got {self.m}")
        if abs(self.tau) == 2.0:
            raise DecoupledShell(self.tau)
        if self.tau == 0 or not np.isfinite(self.tau):
            raise InvalidParameter(f"tau must be finite and nonzero, got {self.tau}")
        if not np.isfinite(self.R) or self.R <= 0:
            raise InvalidParameter(f"R must be positive, got {self.R}")
        if self.kappa_max is not None and self.kappa_max < 1:
            raise InvalidParameter(f"kappa_max must be at least 1, got {self.kappa_max}")
        if self.lambda_grid is not None and self.lambda_grid < 8:
            raise InvalidParameter(f"lambda_grid must be at least 8, got {self.lambda_grid}")
        return self

    @property
    def scan_points(self) -> int:
        return self.lambda_grid or 4 * int(np.ceil(abs(self.m) * self.R)) + 64

    @property
    def kappa_bound(self) -> int:
        return self.kappa_max or int(np.ceil(2.0 * mu_of_tau(self.tau) * abs(self.m) * self.R)) + 8


class ModeResult(BaseModel):
    lam: float
    kappa: int
    multiplicity: int
    residual: float
    solver: Literal["shooting", "birman-schwinger"] = "shooting"


@dataclass(frozen=True)
class RadialChannel:
    kappa: int

    def __post_init__(self):
        if self.kappa == 0:
            raise InvalidParameter("kappa must be a nonzero integer")

    @property
    def degeneracy(self) -> int:
        return 2 * abs(self.kappa)

    @property
    def upper_order(self) -> int:
        return -self.kappa - 1 if self.kappa < 0 else self.kappa

    @property
    def lower_order(self) -> int:
        return -self.kappa if self.kappa < 0 else self.kappa - 1


# Modified spherical Bessel functions


def _check_bessel_args(l: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if l < 0 or int(l) != l:
        raise InvalidParameter(f"Bessel order must be a nonnegative integer, got {l}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InvalidParameter("Bessel argument must be finite and positive")
    return x


def _log_double_factorial(l: int) -> float:
    """log (2l+1)!!"""
    return float(gammaln(2 * l + 2) - l * np.log(2.0) - gammaln(l + 1))


def _i_series(l: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power series i_l(x) = x^l/(2l+1)!! Σ_k (x²/2)^k / (k! (2l+3)…(2l+2k+1))."""
    y = 0.5 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 400):
        term = term * y / (k * (2 * l + 2 * k + 1))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total, l * np.log(x) - _log_double_factorial(l)


def _patch(value: np.ndarray, log_scale: np.ndarray, bad: np.ndarray, x: np.ndarray, fallback):
    shape = x.shape
    value = np.atleast_1d(value).astype(float)
    log_scale = np.atleast_1d(log_scale).astype(float)
    mask = np.atleast_1d(bad)
    if np.any(mask):
        v, s = fallback(np.atleast_1d(x)[mask])
        value[mask] = v
        log_scale[mask] = s
    return value.reshape(shape), log_scale.reshape(shape)


def bessel_i_scaled(l: int, x) -> tuple[np.ndarray, np.ndarray]:
    """i_l(x) as (value, log_scale) with i_l(x) = value·e^{log_scale}.

    The scale is e^{x} from the exponentially scaled cylinder function; where
    that underflows (x ≪ l) a log-domain power series is used instead.
    """
    x = _check_bessel_args(l, x)
    value = np.sqrt(0.5 * np.pi / x) * ive(l + 0.5, x)
    bad = ~np.isfinite(value) | (np.abs(value) < UNDERFLOW_FLOOR)
    return _patch(value, x, bad, x, lambda xs: _i_series(l, xs))


def _k_finite_sum(l: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """k_l(x) = (π/2)e^{−x}/x Σ_{j≤l} (l+j)!/(j!(l−j)!) (2x)^{−j}, in the log domain."""
    j = np.arange(l + 1)
    coeff = gammaln(l + j + 1) - gammaln(j + 1) - gammaln(l - j + 1)
    lse = logsumexp(coeff[None, :] - j[None, :] * np.log(2.0 * x)[:, None], axis=-1)
    shift = np.maximum(lse, 0.0)
    return 0.5 * np.pi / x * np.exp(lse - shift), -x + shift


def bessel_k_scaled(l: int, x) -> tuple[np.ndarray, np.ndarray]:
    """k_l(x) = (π/2x)^{1/2} K_{l+1/2}(x) as (value, log_scale), scale e^{−x} by default."""
    x = _check_bessel_args(l, x)
    value = np.sqrt(0.5 * np.pi / x) * kve(l + 0.5, x)
    bad = ~np.isfinite(value) | (np.abs(value) > 1.0 / UNDERFLOW_FLOOR)
    return _patch(value, -x, bad, x, lambda xs: _k_finite_sum(l, xs))


def _log_bessel(kind: Branch, l: int, x: np.ndarray) -> np.ndarray:
    fn = bessel_i_scaled if kind == "inner" else bessel_k_scaled
    value, log_scale = fn(l, x)
    if not np.all(np.isfinite(value)) or np.any(value <= 0):
        raise ConvergenceError(f"modified spherical Bessel value out of range for l={l}",
                               details={"order": l, "branch": kind})
    return log_scale + np.log(value)


def _bessel_with_derivative(kind: Branch, l: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(value, derivative, log_scale) of i_l (inner) or k_l (outer) at a common scale.

    The whole magnitude is carried by log_scale, so value is 1.
    i_l' = i_{l+1} + (l/x) i_l and k_l' = −k_{l+1} + (l/x) k_l.
    """
    x = np.asarray(x, dtype=float)
    log0 = _log_bessel(kind, l, x)
    ratio = np.exp(_log_bessel(kind, l + 1, x) - log0)
    sign = 1.0 if kind == "inner" else -1.0
    return np.ones_like(log0), sign * ratio + l / x, log0


def _radial_jet(kappa: int, lam: float, m: float, r, branch: Branch):
    """Closed-form (g, f, g', f') at radii r with a common scale e^{log_scale}."""
    channel = RadialChannel(kappa)
    q = np.sqrt(m * m - lam * lam)
    x = q * np.asarray(r, dtype=float)
    vg, dg, sg = _bessel_with_derivative(branch, channel.upper_order, x)
    vf, df, sf = _bessel_with_derivative(branch, channel.lower_order, x)
    ref = np.maximum(sg, sf)
    a, b = np.exp(sg - ref), np.exp(sf - ref)
    f_sign = 1.0 if branch == "inner" else -1.0
    g = (lam + m) * vg * a
    f = f_sign * q * vf * b
    g_prime = (lam + m) * q * dg * a
    f_prime = f_sign * q * q * df * b
    return g, f, g_prime, f_prime, ref


def radial_residual(kappa: int, lam: float, m: float, r, branch: Branch) -> float:
    """Max relative residual of the radial Dirac system for the closed-form pair."""
    r = np.asarray(r, dtype=float)
    g, f, dg, df, _ = _radial_jet(kappa, lam, m, r, branch)
    res_g = dg - (-(kappa + 1) / r * g + (lam + m) * f)
    res_f = df - ((kappa - 1) / r * f - (lam - m) * g)
    scale = np.abs(dg) + np.abs(df) + abs(m) * (np.abs(g) + np.abs(f)) + (np.abs(g) + np.abs(f)) / r
    return float(np.max((np.abs(res_g) + np.abs(res_f)) / scale))


def radial_jump_matrices(tau: float) -> tuple[np.ndarray, np.ndarray]:
    """(P⁻_rad, P⁺_rad) = (τ/2 − b, τ/2 + b) for the radial form b of B(ν)."""
    if abs(tau) == 2.0:
        raise DecoupledShell(tau)
    half = 0.5 * tau * np.eye(2)
    return half - RADIAL_B, half + RADIAL_B


# Spinor harmonics with m_j = 1/2 for the lowest channels


def spinor_harmonic(kappa: int, points) -> np.ndarray:
    """Ω_κ at unit vectors `points` for κ = ±1, shape (..., 2)."""
    p = np.asarray(points, dtype=float)
    p = p / np.linalg.norm(p, axis=-1, keepdims=True)
    norm = 1.0 / np.sqrt(4.0 * np.pi)
    if kappa == -1:
        return np.broadcast_to(np.array([1.0, 0.0], dtype=complex) * norm, p.shape[:-1] + (2,)).copy()
    if kappa == 1:
        return -norm * np.stack([p[..., 2] + 0j, p[..., 0] + 1j * p[..., 1]], axis=-1)
    raise InvalidParameter(f"spinor harmonics are provided for kappa = +-1 only, got {kappa}")


def verify_radial_shell_matrix(points) -> float:
    """Max deviation between B(ν) reduced on (gΩ_κ, i fΩ_{−κ}) sections and b, κ = ±1."""
    p = np.asarray(points, dtype=float)
    nu = p / np.linalg.norm(p, axis=-1, keepdims=True)
    B = shell_matrix_B(nu)
    worst = 0.0
    for kappa in (-1, 1):
        upper, lower = spinor_harmonic(kappa, nu), spinor_harmonic(-kappa, nu)
        reduced = np.zeros(nu.shape[:-1] + (2, 2))
        for col, (cg, cf) in enumerate(((1.0, 0.0), (0.0, 1.0))):
            u = np.concatenate([cg * upper, 1j * cf * lower], axis=-1)
            v = np.einsum("...ab,...b->...a", B, u)
            g = np.einsum("...a,...a->...", np.conj(upper), v[..., :2]) / np.einsum("...a,...a->...", np.conj(upper), upper)
            f = np.einsum("...a,...a->...", np.conj(1j * lower), v[..., 2:]) / np.einsum("...a,...a->...", np.conj(lower), lower)
            reduced[..., 0, col] = np.real(g)
            reduced[..., 1, col] = np.real(f)
        worst = max(worst, float(np.max(np.abs(reduced - RADIAL_B))))
    return worst


# Matching determinant and spectrum


def _unit_column(kappa: int, lam: float, m: float, R: float, branch: Branch) -> np.ndarray:
    g, f, _, _, _ = _radial_jet(kappa, lam, m, np.array([R]), branch)
    col = np.array([g[0], f[0]])
    scale = float(np.max(np.abs(col)))
    if not np.isfinite(scale) or scale == 0.0:
        raise ConvergenceError(f"degenerate {branch} radial pair in channel {kappa} at lambda={lam}",
                               details={"kappa": kappa, "lambda": lam, "branch": branch})
    col = col / scale
    return col / np.linalg.norm(col)


def _matching_matrix(cfg: ShellConfig, kappa: int, lam: float) -> np.ndarray:
    p_minus, p_plus = radial_jump_matrices(cfg.tau)
    w_in = _unit_column(kappa, lam, cfg.m, cfg.R, "inner")
    w_out = _unit_column(kappa, lam, cfg.m, cfg.R, "outer")
    return np.column_stack([p_minus @ w_in, p_plus @ w_out])


def channel_determinant(cfg: ShellConfig, kappa: int, lam: float) -> float:
    """det[P⁻ ŵ_in(R) | P⁺ ŵ_out(R)] with unit-normalized radial pairs; zero iff λ is an eigenvalue."""
    if not abs(lam) < abs(cfg.m):
        raise InvalidParameter(f"lambda must lie in the gap (-|m|, |m|), got {lam}")
    return float(np.linalg.det(_matching_matrix(cfg, kappa, lam)))


def _scan_grid(cfg: ShellConfig) -> np.ndarray:
    edge = abs(cfg.m) * (1.0 - EDGE_MARGIN)
    return np.linspace(-edge, edge, cfg.scan_points)


def scan_channel(cfg: ShellConfig, kappa: int, grid: Optional[np.ndarray] = None) -> list[ModeResult]:
    """Sign-change scan of the channel determinant followed by Brent refinement."""
    lams = _scan_grid(cfg) if grid is None else grid
    dets = np.array([channel_determinant(cfg, kappa, lam) for lam in lams])
    if not np.all(np.isfinite(dets)):
        raise ConvergenceError(f"non-finite matching determinant in channel {kappa}",
                               details={"kappa": kappa, "m": cfg.m, "tau": cfg.tau})
    modes: list[ModeResult] = []
    for i in range(dets.size - 1):
        lo, hi = lams[i], lams[i + 1]
        if dets[i] == 0.0:
            # exact zeros count only as a genuine crossing between nonzero neighbours
            if i == 0 or dets[i - 1] * dets[i + 1] >= 0:
                continue
            root = float(lo)
        elif dets[i] * dets[i + 1] < 0:
            root = optimize.brentq(lambda lam: channel_determinant(cfg, kappa, lam), lo, hi,
                                   xtol=ROOT_XTOL * abs(cfg.m), rtol=4 * np.finfo(float).eps)
        else:
            continue
        residual = abs(channel_determinant(cfg, kappa, root))
        if residual > ROOT_RTOL * max(abs(dets[i]), abs(dets[i + 1])):
            logger.warning(f"Rejected sign change in channel {kappa} near lambda={root}: residual {residual:.3e}",
                           extra=run_context(m=cfg.m, tau=cfg.tau, kappa=kappa, lam=root))
            continue
        modes.append(ModeResult(lam=float(root), kappa=kappa, multiplicity=2 * abs(kappa),
                                residual=residual, solver="shooting"))
    return modes


def full_spectrum(cfg: ShellConfig) -> list[ModeResult]:
    """All gap eigenvalues, channel by channel, sorted by λ.

    Channels |κ| ≤ kappa_bound are scanned in parallel; without an explicit
    kappa_max the scan continues until two consecutive |κ| levels are empty.
    """
    if cfg.m * cfg.tau > 0:
        logger.debug(f"m*tau > 0: no gap eigenvalues for m={cfg.m}, tau={cfg.tau}")
        return []
    grid = _scan_grid(cfg)
    bound = cfg.kappa_bound
    kappas = [sign * n for n in range(1, bound + 1) for sign in (-1, 1)]
    logger.debug(f"Scanning {len(kappas)} channels with {grid.size} lambda points each")
    per_channel = parallel_map(lambda k: scan_channel(cfg, k, grid), kappas)
    modes = [mode for found in per_channel for mode in found]

    last_nonempty = bool(per_channel[-1] or per_channel[-2])
    if cfg.kappa_max is None:
        n, empty_run = bound, 0 if last_nonempty else 1
        while empty_run < 2:
            n += 1
            found = scan_channel(cfg, -n, grid) + scan_channel(cfg, n, grid)
            modes.extend(found)
            empty_run = 0 if found else empty_run + 1
        last_nonempty = False
    if last_nonempty:
        logger.warning(f"Channel truncation at |kappa|={bound} may be incomplete: last channel has eigenvalues",
                       extra=run_context(m=cfg.m, tau=cfg.tau, kappa=bound))

    modes.sort(key=lambda mode: (mode.lam, mode.kappa))
    logger.info(f"Found {len(modes)} eigenvalue levels, {sum(m.multiplicity for m in modes)} with multiplicity")
    return modes


def count_with_multiplicity(modes: list[ModeResult]) -> int:
    return sum(mode.multiplicity for mode in modes)


def critical_coupling(m: float, R: float = 1.0, tol: float = 1e-6) -> float:
    """Smallest |τ| on (0, 2) for which A_{m,τ} (τ < 0) has a gap eigenvalue; returns τ."""

    def nonempty(tau: float) -> bool:
        return bool(full_spectrum(ShellConfig(m=abs(m), tau=tau, R=R)))

    lo, hi = -1e-6, -2.0 + 1e-6
    if nonempty(lo):
        return lo
    if not nonempty(hi):
        raise ConvergenceError(f"no gap eigenvalue for any tau in (-2, 0) at m={m}, R={R}")
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if nonempty(mid):
            hi = mid
        else:
            lo = mid
    return hi


# Independent ODE integration


@dataclass(frozen=True)
class RadialPair:
    branch: Branch
    r: np.ndarray
    g: np.ndarray
    f: np.ndarray

    def direction_at(self, radius: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.r - radius)))
        v = np.array([self.g[i], self.f[i]])
        return v / np.linalg.norm(v)


def _radial_matrix(kappa: int, lam: float, m: float, r: float) -> np.ndarray:
    return np.array([[-(kappa + 1) / r, lam + m], [-(lam - m), (kappa - 1) / r]])


def integrate_radial_ode(cfg: ShellConfig, kappa: int, lam: float, direction: Branch,
                         samples: int = 64) -> RadialPair:
    """Integrate the radial system with DOP853 on exponentially scaled variables.

    The inner branch starts near the origin from the regular power series and
    runs out to R; the outer branch starts at R + 40/q from the decaying
    solution and runs in to R.
    """
    channel = RadialChannel(kappa)
    m = cfg.m
    q = np.sqrt(m * m - lam * lam)
    if direction == "inner":
        r0 = min(1e-3 * cfg.R, 1e-2 / q)
        x0 = np.array([q * r0])
        vg, sg = _i_series(channel.upper_order, x0)
        vf, sf = _i_series(channel.lower_order, x0)
        ref = max(sg[0], sf[0])
        y0 = np.array([(lam + m) * vg[0] * np.exp(sg[0] - ref), q * vf[0] * np.exp(sf[0] - ref)])
        span, shift = (r0, cfg.R), -q
    else:
        r_far = cfg.R + 40.0 / q
        g, f, _, _, _ = _radial_jet(kappa, lam, m, np.array([r_far]), "outer")
        y0 = np.array([g[0], f[0]])
        span, shift = (r_far, cfg.R), q
    y0 = y0 / np.linalg.norm(y0)

    def rhs(r, y):
        return (_radial_matrix(kappa, lam, m, r) + shift * np.eye(2)) @ y

    t_eval = np.linspace(span[0], span[1], samples)
    sol = solve_ivp(rhs, span, y0, method="DOP853", rtol=1e-12, atol=1e-300, t_eval=t_eval)
    if not sol.success:
        raise ConvergenceError(f"radial ODE integration failed: {sol.message}",
                               details={"kappa": kappa, "lambda": lam, "branch": direction})
    return RadialPair(branch=direction, r=sol.t, g=sol.y[0], f=sol.y[1])


def closed_form_direction(cfg: ShellConfig, kappa: int, lam: float, branch: Branch) -> np.ndarray:
    return _unit_column(kappa, lam, cfg.m, cfg.R, branch)


# Quadratic form identity


@dataclass(frozen=True)
class QuadraticFormCheck:
    lhs: float
    rhs: float
    deviation: float
    refinement_gap: float


def _eigen_coefficients(cfg: ShellConfig, mode: ModeResult) -> tuple[float, float]:
    _, _, vh = np.linalg.svd(_matching_matrix(cfg, mode.kappa, mode.lam))
    a, c = vh[-1]
    return float(np.real(a)), float(np.real(c))


def _form_sides(cfg: ShellConfig, mode: ModeResult, nodes: int) -> tuple[float, float]:
    kappa, lam, m, R, tau = mode.kappa, mode.lam, cfg.m, cfg.R, cfg.tau
    channel = RadialChannel(kappa)
    lg, lf = channel.upper_order, channel.lower_order
    q = np.sqrt(m * m - lam * lam)
    a, c = _eigen_coefficients(cfg, mode)

    def pieces(branch: Branch, coefficient: float, r: np.ndarray, extra_log: np.ndarray):
        g0, f0, _, _, s0 = _radial_jet(kappa, lam, m, np.array([R]), branch)
        norm = np.hypot(g0[0], f0[0])
        g, f, _, _, s = _radial_jet(kappa, lam, m, r, branch)
        factor = coefficient * np.exp(s - s0[0] + 0.5 * extra_log) / norm
        g, f = g * factor, f * factor
        dg = -(kappa + 1) / r * g + (lam + m) * f
        df = (kappa - 1) / r * f - (lam - m) * g
        norm2 = (g * g + f * f) * r * r
        grad2 = (dg * dg + lg * (lg + 1) * g * g / (r * r) + df * df + lf * (lf + 1) * f * f / (r * r)) * r * r
        trace = coefficient * np.array([g0[0], f0[0]]) / norm
        return norm2, grad2, trace

    x, w = np.polynomial.legendre.leggauss(nodes)
    r_in = 0.5 * R * (x + 1.0)
    n_in, d_in, u_plus = pieces("inner", a, r_in, np.zeros_like(r_in))
    w_in = 0.5 * R * w

    s, ws = roots_laguerre(nodes)
    r_out = R + s / (2.0 * q)
    n_out, d_out, u_minus = pieces("outer", c, r_out, s)
    w_out = ws / (2.0 * q)

    norm2 = float(w_in @ n_in + w_out @ n_out)
    grad2 = float(w_in @ d_in + w_out @ d_out)
    jump = float(np.sum((u_plus - u_minus) ** 2))
    curvature = float(np.sum(u_plus ** 2) - np.sum(u_minus ** 2))
    lhs = lam * lam * norm2
    rhs = grad2 + m * m * norm2 + (2.0 * m / tau) * R * R * jump + R * curvature
    return lhs, rhs


def quadratic_form_check(cfg: ShellConfig, mode: ModeResult, nodes: int = 64) -> QuadraticFormCheck:
    """Both sides of ‖Au‖² = ∫|∇u|² + m²‖u‖² + (2m/τ)∫_Σ|u₊−u₋|² + ∫_Σ M(|u₊|²−|u₋|²)."""
    lhs, rhs = _form_sides(cfg, mode, nodes)
    lhs2, rhs2 = _form_sides(cfg, mode, 2 * nodes)
    deviation = abs(lhs2 - rhs2) / abs(lhs2)
    gap = abs((lhs - rhs) / lhs - (lhs2 - rhs2) / lhs2)
    if gap > 1e-8:
        logger.warning(f"Quadratic form quadrature under-resolved: refinement changes deviation by {gap:.3e}")
    return QuadraticFormCheck(lhs=lhs2, rhs=rhs2, deviation=deviation, refinement_gap=gap)
