"""
One-dimensional transmission eigenvalue problems across a flat shell.

The fiber operator −d²/dt² on (−δ, δ) with the shell transmission condition at
t = 0 has a fourfold ground state whose decay rate k solves a scalar
transcendental equation:

* Dirichlet walls at ±δ:  x coth x = μmδ,
* Robin walls v'(±δ) = ±c v(±δ):  x(x tanh x − ε)/(x − ε tanh x) = μmδ, ε = cδ,

with x = kδ. Both are solved by bracketed bisection followed by Newton polish.
The gap μm − k is evaluated in closed form from the root so that exponentially
small deviations survive for μmδ in the hundreds.
"""

from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import optimize

from src.spectral.spinor_algebra import I4, r_tau, robin_transmission_matrix
from src.utils.errors import DecoupledShell, InvalidParameter, NoBoundState, RootBracketError
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

BISECT_RTOL = 1e-13
NEWTON_STEPS = 2
GROUND_MULTIPLICITY = 4


def mu_of_tau(tau: float) -> float:
    """μ(τ) = 4|τ|/(τ²+4), in (0, 1] with the maximum at |τ| = 2."""
    tau = float(tau)
    if tau == 0.0:
        raise InvalidParameter("tau=0 is the free case; mu is undefined")
    return 4.0 * abs(tau) / (tau * tau + 4.0)


class OneDProblem(BaseModel):
    """Fiber problem data: mass m, coupling τ, half-width δ and optional Robin constant c."""

    model_config = ConfigDict(frozen=True)

    m: float
    tau: float
    delta: float
    c: Optional[float] = None

    @model_validator(mode="after")
    def _check_regime(self) -> "OneDProblem":
        if not np.isfinite(self.m) or self.m <= 0:
            raise InvalidParameter(f"m must be positive, got {self.m}")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InvalidParameter(f"delta must be positive, got {self.delta}")
        if self.tau == -2.0:
            raise DecoupledShell(self.tau)
        if not self.tau < 0:
            raise InvalidParameter(f"tau must be negative, got {self.tau}")
        if self.c is not None and self.c * self.delta >= 1.0:
            raise InvalidParameter(f"Robin constant requires c*delta < 1, got {self.c * self.delta}")
        return self

    @property
    def mu(self) -> float:
        return mu_of_tau(self.tau)

    @property
    def mu_m_delta(self) -> float:
        return self.mu * self.m * self.delta

    @property
    def epsilon(self) -> float:
        return 0.0 if self.c is None else float(self.c) * self.delta


def _exp_parts(x):
    """e^{−2x} and 1 − e^{−2x}, both accurate for small and large x."""
    e = np.exp(-2.0 * x)
    return e, -np.expm1(-2.0 * x)


def dirichlet_f(x):
    """x coth x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        e, one_minus = _exp_parts(x)
        return x * (1.0 + e) / one_minus


def dirichlet_f_prime(x):
    """coth x − x csch² x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        e, one_minus = _exp_parts(x)
        return (1.0 + e) / one_minus - x * 4.0 * e / one_minus ** 2


def robin_f(x, eps: float):
    """F_ε(x) = x(x tanh x − ε)/(x − ε tanh x)."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-2.0 * x)
    t = (1.0 - e) / (1.0 + e)
    return x * (x * t - eps) / (x - eps * t)


def robin_f_prime(x, eps: float):
    x = np.asarray(x, dtype=float)
    e = np.exp(-2.0 * x)
    t = (1.0 - e) / (1.0 + e)
    sech2 = 4.0 * e / (1.0 + e) ** 2
    den = x - eps * t
    return (x * t - eps) / den + x * sech2 * (eps + x * x - eps * eps) / den ** 2


def robin_g(x, eps: float):
    """G_ε(x) = −x(x tan x + ε)/(x − ε tan x), the positive-energy counterpart of F_ε."""
    x = np.asarray(x, dtype=float)
    t = np.tan(x)
    return -x * (x * t + eps) / (x - eps * t)


def _bracketed_root(f: Callable, fprime: Callable, lo: float, hi: float, label: str) -> float:
    """Bisection on a monotone bracket followed by Newton polish kept inside it."""
    f_lo, f_hi = float(f(lo)), float(f(hi))
    if not (f_lo < 0.0 < f_hi):
        raise RootBracketError(f"{label}: no sign change on [{lo}, {hi}]",
                               details={"f_lo": f_lo, "f_hi": f_hi})
    sampled = f(np.linspace(lo, hi, 33))
    if np.any(np.diff(sampled) < -1e-12 * (1.0 + np.abs(sampled[1:]))):
        raise RootBracketError(f"{label}: function is not monotone on [{lo}, {hi}]")

    logger.debug(f"{label}: bisecting on [{lo:.6g}, {hi:.6g}]")
    x = optimize.bisect(f, lo, hi, xtol=1e-300, rtol=BISECT_RTOL, maxiter=400)
    for _ in range(NEWTON_STEPS):
        slope = float(fprime(x))
        if not np.isfinite(slope) or slope <= 0.0:
            break
        candidate = x - float(f(x)) / slope
        if lo <= candidate <= hi:
            x = candidate
    return float(x)


def _upper_bracket(g: Callable, start: float, label: str) -> float:
    hi = start
    for _ in range(60):
        if float(g(hi)) > 0.0:
            return hi
        hi *= 2.0
    raise RootBracketError(f"{label}: could not find an upper bracket")


@dataclass(frozen=True)
class GroundMode:
    """Ground state of a fiber problem.

    The profile ψ(t) = θe^{−kt} + e^{kt} is stored through log|θ| and sign(θ);
    `profile` returns ψ/|θ| (or ψ when |θ| < 1) so large kδ never overflows.
    """

    problem: OneDProblem
    kind: Literal["dirichlet", "robin"]
    k: float
    deficit: float
    log_abs_theta: float
    theta_sign: float
    multiplicity: int = GROUND_MULTIPLICITY

    @property
    def energy(self) -> float:
        return -self.k * self.k

    @property
    def theta(self) -> float:
        with np.errstate(over="ignore"):
            return float(self.theta_sign * np.exp(self.log_abs_theta))

    def profile(self, t, derivative: int = 0) -> np.ndarray:
        """Scaled profile (or its first/second derivative) at distances t ∈ [0, δ]."""
        t = np.asarray(t, dtype=float)
        k, L, s = self.k, self.log_abs_theta, self.theta_sign
        if L >= 0.0:
            decaying, growing = s * np.exp(-k * t), np.exp(k * t - L)
        else:
            decaying, growing = s * np.exp(L - k * t), np.exp(k * t)
        return (-k) ** derivative * decaying + k ** derivative * growing

    def ode_residual(self, t) -> np.ndarray:
        """|−ψ'' − Eψ| relative to max|ψ| on the sample points."""
        psi = self.profile(t)
        scale = max(float(np.max(np.abs(psi))) * self.k ** 2, 1e-300)
        return np.abs(-self.profile(t, 2) - self.energy * psi) / scale

    def boundary_residual(self) -> float:
        """Defect of the wall condition at t = δ, relative to the profile scale there."""
        delta = self.problem.delta
        value = float(self.profile(delta))
        slope = float(self.profile(delta, 1))
        scale = max(abs(float(self.profile(0.0))), abs(slope) / self.k, 1e-300)
        if self.kind == "dirichlet":
            return abs(value) / scale
        c = float(self.problem.c or 0.0)
        return abs(slope - c * value) / (self.k * scale)


def _theta_from_ratio(k: float, delta: float, ratio: float) -> tuple[float, float]:
    if ratio == 0.0:
        return -np.inf, 1.0
    return float(np.log(abs(ratio)) + 2.0 * k * delta), float(np.sign(ratio))


def solve_dirichlet_ground(p: OneDProblem) -> GroundMode:
    """Ground state with Dirichlet walls: kδ solves x coth x = μmδ.

    Raises:
        NoBoundState: when μmδ ≤ 1.
        RootBracketError: when the monotone bracket cannot be established.
    """
    a = p.mu_m_delta
    if a <= 1.0:
        raise NoBoundState(f"Dirichlet fiber has no bound state for mu*m*delta={a:.6g} <= 1",
                           details={"mu_m_delta": a})

    lo = max(a - 1.0, 1e-300)
    x = _bracketed_root(lambda y: dirichlet_f(y) - a, dirichlet_f_prime, lo, a, "dirichlet")
    e, one_minus = _exp_parts(x)
    gap = 2.0 * x * e / one_minus
    k = x / p.delta
    log_theta, sign = _theta_from_ratio(k, p.delta, -1.0)
    logger.debug(f"Dirichlet ground state: k*delta={x:.17g}, mu*m*delta={a:.6g}")
    return GroundMode(problem=p, kind="dirichlet", k=k, deficit=gap / p.delta,
                      log_abs_theta=log_theta, theta_sign=sign)


def solve_robin_ground(p: OneDProblem) -> GroundMode:
    """Ground state with Robin walls: kδ solves F_ε(x) = μmδ with ε = cδ < 1.

    Raises:
        NoBoundState: when μmδ does not exceed F_ε(0⁺).
        RootBracketError: when the monotone bracket cannot be established.
    """
    a = p.mu_m_delta
    eps = p.epsilon
    c = 0.0 if p.c is None else float(p.c)

    if eps > 0.0:
        lo = optimize.brentq(lambda y: y * np.tanh(y) - eps, 0.0, eps + 1.0, xtol=1e-15)
    else:
        f0 = -eps / (1.0 - eps)
        if a <= f0:
            raise NoBoundState(f"Robin fiber has no bound state for mu*m*delta={a:.6g}",
                               details={"mu_m_delta": a, "f_at_zero": f0})
        lo = 1e-12 * max(a, 1.0)

    g = lambda y: robin_f(y, eps) - a  # noqa: E731
    hi = _upper_bracket(g, max(a, 1.0) + 1.0 + abs(eps), "robin")
    x = _bracketed_root(g, lambda y: robin_f_prime(y, eps), lo, hi, "robin")

    e = np.exp(-2.0 * x)
    t = (1.0 - e) / (1.0 + e)
    gap = -x * (2.0 * e / (1.0 + e)) * (x + eps) / (x - eps * t)
    k = x / p.delta
    log_theta, sign = _theta_from_ratio(k, p.delta, (k - c) / (k + c))
    logger.debug(f"Robin ground state: k*delta={x:.17g}, eps={eps:.6g}, mu*m*delta={a:.6g}")
    return GroundMode(problem=p, kind="robin", k=k, deficit=gap / p.delta,
                      log_abs_theta=log_theta, theta_sign=sign)


def zero_mode_coefficient(p: OneDProblem) -> float:
    """c/(1−cδ) + 4m|τ|/(τ²+4); zero is not a Robin eigenvalue when this is nonzero."""
    c = 0.0 if p.c is None else float(p.c)
    return c / (1.0 - c * p.delta) + 4.0 * p.m * abs(p.tau) / (p.tau ** 2 + 4.0)


@dataclass(frozen=True)
class GapCertificate:
    bound: float
    offending_root: Optional[float]
    zero_excluded: bool
    zero_coefficient: float

    @property
    def verified(self) -> bool:
        return self.offending_root is None and self.zero_excluded


def robin_positive_spectrum_gap(p: OneDProblem, samples: int = 4096) -> GapCertificate:
    """Certify that the Robin fiber has no eigenvalue in [0, π²/(16δ²)).

    A positive eigenvalue k² would need G_ε(kδ) = μmδ with kδ ∈ (0, π/4); the
    scan looks for sign changes away from the poles of G_ε.
    """
    eps = p.epsilon
    if eps >= 4.0 / np.pi:
        raise InvalidParameter(f"spectral gap certificate requires c*delta < 4/pi, got {eps}")
    a = p.mu_m_delta
    x = np.linspace(0.0, np.pi / 4.0, samples + 1)[1:-1]
    den = x - eps * np.tan(x)
    h = robin_g(x, eps) - a

    root = None
    for i in np.nonzero(np.sign(h[:-1]) != np.sign(h[1:]))[0]:
        if np.sign(den[i]) != np.sign(den[i + 1]):
            continue
        root = float(optimize.brentq(lambda y: float(robin_g(y, eps)) - a, x[i], x[i + 1]))
        logger.warning(f"Robin fiber has a positive eigenvalue candidate at k*delta={root:.6g}")
        break

    coefficient = zero_mode_coefficient(p)
    return GapCertificate(bound=np.pi ** 2 / (16.0 * p.delta ** 2), offending_root=root,
                          zero_excluded=coefficient != 0.0, zero_coefficient=coefficient)


def scaled_ground_residual(mode: GroundMode) -> float:
    """|E1 + μ²m²| / (μ²m² e^{−2μmδ}), evaluated in the log domain."""
    p = mode.problem
    target = p.mu * p.m
    deviation = abs(mode.deficit) * (target + mode.k)
    if deviation == 0.0:
        return 0.0
    return float(np.exp(np.log(deviation) - 2.0 * np.log(target) + 2.0 * p.mu_m_delta))


def _fiber_matrix(mode: GroundMode, nu) -> np.ndarray:
    if nu is None:
        return robin_transmission_matrix(mode.problem.tau)
    return r_tau(+1, mode.problem.tau, nu)


def ground_state_spinors(mode: GroundMode, t, b_minus, nu=None) -> np.ndarray:
    """Eigenfunction v(t) = ψ(|t|)·(R⁺b₋ for t > 0, b₋ for t < 0) on t ∈ [−δ, δ].

    Without ν the flat matrix with β in place of B(ν) is used.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b = np.asarray(b_minus, dtype=complex).reshape(4)
    r = _fiber_matrix(mode, nu)
    psi = mode.profile(np.abs(t))
    inner = np.where((t > 0)[:, None], (r @ b)[None, :], b[None, :])
    return psi[:, None] * inner


def fiber_transmission_defect(mode: GroundMode, b_minus, nu=None) -> float:
    """Relative defect of R⁺v'(0⁺) − v'(0⁻) = (2m/τ)(R⁺ − I)(v(0⁺) − v(0⁻))."""
    p = mode.problem
    b = np.asarray(b_minus, dtype=complex).reshape(4)
    r = _fiber_matrix(mode, nu)
    psi0 = float(mode.profile(0.0))
    dpsi0 = float(mode.profile(0.0, 1))

    v_plus, v_minus = psi0 * (r @ b), psi0 * b
    dv_plus, dv_minus = dpsi0 * (r @ b), -dpsi0 * b
    lhs = r @ dv_plus - dv_minus
    rhs = (2.0 * p.m / p.tau) * ((r - I4) @ (v_plus - v_minus))
    scale = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)), 1e-300)
    return float(np.linalg.norm(lhs - rhs)) / scale
