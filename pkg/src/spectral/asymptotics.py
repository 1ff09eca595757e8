"""
Large-mass asymptotics harness: two-term eigenvalue expansion, Weyl counting
and the two-sided envelope for squared eigenvalues.

Positive shell eigenvalues μ_j(m), listed with multiplicity, pair with the
eigenvalues E_j of the effective operator Υ_τ; squared eigenvalues of the
shell operator pair with the doubled list E_j(Υ_τ ⊕ Υ_τ).
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import linprog

from src.spectral.oned_models import mu_of_tau
from src.spectral.sphere_modes import ModeResult
from src.spectral.surface_geometry import SurfaceGrid
from src.utils.errors import AlignmentError, ConvergenceError, DecoupledShell, InvalidParameter
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

ORDER_ACCEPT_SLOPE = -1.7
MIN_SWEEP_POINTS = 4
RESIDUAL_FLOOR = 1e-10
ALIGNMENT_RTOL = 1e-6
ENVELOPE_LEVELS = 10


def _check_tau(tau: float) -> float:
    if abs(tau) == 2.0:
        raise DecoupledShell(tau)
    if tau == 0 or not np.isfinite(tau):
        raise InvalidParameter(f"tau must be finite and nonzero, got {tau}")
    return float(tau)


def leading_slope(tau: float) -> float:
    """|τ²−4|/(τ²+4)"""
    tau = _check_tau(tau)
    return abs(tau * tau - 4.0) / (tau * tau + 4.0)


def two_term_prediction(m: float, tau: float, effective_energy: float) -> float:
    """μ(m) ≈ |τ²−4|/(τ²+4)·m + (τ²+4)/|τ²−4|·E/(2m)."""
    slope = leading_slope(tau)
    return slope * m + effective_energy / (2.0 * slope * m)


def squared_prediction(m: float, tau: float, doubled_energy: float) -> float:
    """((τ²−4)/(τ²+4))² m² + Ẽ for an entry Ẽ of E(Υ_τ ⊕ Υ_τ)."""
    return (leading_slope(tau) * m) ** 2 + doubled_energy


def weyl_prediction(m: float, tau: float, area: float) -> float:
    """(16/π) τ²/(τ²+4)² |Σ| m²."""
    tau = _check_tau(tau)
    if area <= 0:
        raise InvalidParameter(f"surface area must be positive, got {area}")
    return 16.0 / np.pi * tau * tau / (tau * tau + 4.0) ** 2 * area * m * m


def default_delta(m: float, tau: float) -> float:
    """δ(m) = 4 log m/(μm), so that m²e^{−2μmδ} = m⁻⁶."""
    if m <= 1:
        raise InvalidParameter(f"default delta needs m > 1, got {m}")
    return 4.0 * np.log(m) / (mu_of_tau(tau) * m)


def curvature_defect_sup(grid: SurfaceGrid) -> float:
    """‖K − M²‖_∞ over the grid nodes."""
    s = grid.samples
    return float(np.max(np.abs(s.K - s.M ** 2)))


# Alignment


@dataclass(frozen=True)
class AlignedPair:
    j: int
    mu: float
    effective: float


def positive_eigenvalues(modes: Sequence[ModeResult]) -> np.ndarray:
    """Sorted positive eigenvalues repeated by multiplicity."""
    values = [mode.lam for mode in modes for _ in range(mode.multiplicity) if mode.lam > 0]
    return np.sort(np.asarray(values, dtype=float))


def align_with_effective(modes: Sequence[ModeResult], effective_levels: list[tuple[float, int]],
                         rtol: float = ALIGNMENT_RTOL) -> list[AlignedPair]:
    """Pair positive μ_j with E_j(Υ_τ) block by block.

    Each positive shell level occupies a contiguous index block; the effective
    values on that block must belong to a single effective level.

    Raises:
        AlignmentError: a shell level straddles two effective levels.
    """
    positive = sorted((mode for mode in modes if mode.lam > 0), key=lambda mode: mode.lam)
    blocks: list[tuple[float, int]] = []
    for mode in positive:
        if blocks and abs(blocks[-1][0] - mode.lam) <= rtol * max(1.0, abs(mode.lam)):
            blocks[-1] = (blocks[-1][0], blocks[-1][1] + mode.multiplicity)
        else:
            blocks.append((mode.lam, mode.multiplicity))

    owner = np.concatenate([np.full(mult, k) for k, (_, mult) in enumerate(effective_levels)]) \
        if effective_levels else np.zeros(0, dtype=int)
    energies = np.concatenate([np.full(mult, value) for value, mult in effective_levels]) \
        if effective_levels else np.zeros(0)

    pairs: list[AlignedPair] = []
    start = 0
    for value, mult in blocks:
        stop = start + mult
        if stop > energies.size:
            break
        if np.unique(owner[start:stop]).size != 1:
            raise AlignmentError(
                f"shell level {value:.12g} (multiplicity {mult}) straddles effective levels",
                details={"start_index": start + 1, "multiplicity": mult})
        pairs.extend(AlignedPair(j=start + k + 1, mu=value, effective=float(energies[start + k]))
                     for k in range(mult))
        start = stop
    return pairs


# Envelope


class EnvelopeFit(BaseModel):
    m: float
    delta: float
    epsilon: float
    b: float
    c: float
    c0: float
    violations: int
    count: int


def envelope_check(squared: Sequence[float], doubled_effective: Sequence[float], m: float, tau: float,
                   delta: Optional[float] = None, c0: float = 0.0,
                   fixed: Optional[tuple[float, float]] = None) -> EnvelopeFit:
    """Smallest (b, c) ≥ 0 with |E_j(A²) − pred_j| ≤ bδ(|Ẽ_j| + c₀) + cε for all j.

    With `fixed` the constants are not fitted; violations of the bracket are
    counted instead. A nonzero violation count is a finding, not an error.
    """
    squared = np.asarray(squared, dtype=float)
    doubled = np.asarray(doubled_effective, dtype=float)
    n = min(squared.size, doubled.size)
    if n == 0:
        raise InvalidParameter("envelope check needs at least one eigenvalue")
    squared, doubled = squared[:n], doubled[:n]
    delta = default_delta(m, tau) if delta is None else float(delta)
    epsilon = delta + m * m * np.exp(-2.0 * mu_of_tau(tau) * m * delta)
    deviation = np.abs(squared - np.array([squared_prediction(m, tau, e) for e in doubled]))
    coeff_b = delta * (np.abs(doubled) + c0)

    if fixed is not None:
        b, c = fixed
    else:
        A_ub = -np.column_stack([coeff_b, np.full(n, epsilon)])
        res = linprog(c=[1.0, 1.0], A_ub=A_ub, b_ub=-deviation, bounds=[(0, None), (0, None)],
                      method="highs")
        if res.status != 0:
            raise ConvergenceError(f"envelope fit failed: {res.message}", details={"m": m})
        b, c = (float(v) for v in res.x)
    bound = b * coeff_b + c * epsilon
    violations = int(np.sum(deviation > bound * (1.0 + 1e-9) + 1e-12 * m * m))
    logger.debug(f"Envelope at m={m}: b={b:.4g}, c={c:.4g}, violations={violations}")
    return EnvelopeFit(m=m, delta=delta, epsilon=epsilon, b=b, c=c, c0=c0,
                       violations=violations, count=n)


# Residual order


class OrderFit(BaseModel):
    slope: float
    intercept: float
    used: int
    excluded: int
    accepted: bool
    span_decades: float


def residual_order_fit(ms: Sequence[float], residuals: Sequence[float],
                       floor: float = RESIDUAL_FLOOR) -> OrderFit:
    """Least-squares slope of log(|r|/log m) against log m.

    Residuals below `floor`·m are at the numerical floor and are excluded. The
    remainder is of order log m/m² when the slope is at most −1.7.
    """
    ms = np.asarray(ms, dtype=float)
    r = np.abs(np.asarray(residuals, dtype=float))
    if ms.shape != r.shape:
        raise InvalidParameter("sweep and residual arrays differ in length")
    if np.any(ms <= 1):
        raise InvalidParameter("residual order fit needs m > 1")
    keep = r > floor * ms
    if keep.sum() < MIN_SWEEP_POINTS:
        raise InvalidParameter(f"residual order fit needs at least {MIN_SWEEP_POINTS} usable points, "
                               f"got {int(keep.sum())}")
    x = np.log(ms[keep])
    y = np.log(r[keep] / np.log(ms[keep]))
    slope, intercept = np.polyfit(x, y, 1)
    span = float(np.log10(ms[keep].max() / ms[keep].min()))
    if span < 1.0:
        logger.warning(f"Residual sweep spans {span:.2f} decades; the fitted order is indicative only")
    return OrderFit(slope=float(slope), intercept=float(intercept), used=int(keep.sum()),
                    excluded=int((~keep).sum()), accepted=bool(slope <= ORDER_ACCEPT_SLOPE),
                    span_decades=span)


# Weyl law


class WeylRow(BaseModel):
    m: float
    count: int
    predicted: float
    ratio: float


def weyl_table(counts: dict[float, int], tau: float, area: float) -> list[WeylRow]:
    rows = []
    for m in sorted(counts):
        predicted = weyl_prediction(m, tau, area)
        rows.append(WeylRow(m=m, count=counts[m], predicted=predicted, ratio=counts[m] / predicted))
    return rows


# Report


class AsymptoticReport(BaseModel):
    tau: float
    R: float
    ms: list[float]
    levels: int
    mu: list[list[float]] = Field(default_factory=list)
    predicted: list[list[float]] = Field(default_factory=list)
    residuals: list[list[float]] = Field(default_factory=list)
    scaled_residuals: list[list[float]] = Field(default_factory=list)
    effective: list[float] = Field(default_factory=list)
    order_fit: Optional[OrderFit] = None
    weyl: list[WeylRow] = Field(default_factory=list)
    envelope: list[EnvelopeFit] = Field(default_factory=list)
    envelope_carried: list[EnvelopeFit] = Field(default_factory=list)


def build_report(tau: float, R: float, spectra: dict[float, list[ModeResult]],
                 effective_levels: list[tuple[float, int]], levels: int = 1,
                 c0: float = 0.0, envelope_count: int = ENVELOPE_LEVELS, area: Optional[float] = None,
                 rtol: float = ALIGNMENT_RTOL) -> AsymptoticReport:
    """Assemble the residual table, order fit, envelope fits and Weyl rows for an m-sweep.

    The envelope constants fitted at the smallest m are carried to every
    larger m with `fixed`; `envelope_carried` records the resulting
    violation counts.
    """
    if levels < 1:
        raise InvalidParameter(f"levels must be positive, got {levels}")
    ms = sorted(spectra)
    report = AsymptoticReport(tau=tau, R=R, ms=ms, levels=levels)
    effective = np.concatenate([np.full(mult, value) for value, mult in effective_levels])
    report.effective = [float(v) for v in effective[:max(levels, envelope_count)]]
    doubled = np.sort(np.repeat(effective, 2))

    for m in ms:
        pairs = align_with_effective(spectra[m], effective_levels, rtol)
        if len(pairs) < levels:
            raise AlignmentError(f"only {len(pairs)} aligned eigenvalues at m={m}, need {levels}")
        mu = [p.mu for p in pairs[:levels]]
        pred = [two_term_prediction(m, tau, p.effective) for p in pairs[:levels]]
        res = [a - b for a, b in zip(mu, pred)]
        report.mu.append(mu)
        report.predicted.append(pred)
        report.residuals.append(res)
        report.scaled_residuals.append([r * m * m / np.log(m) for r in res])

        squared = np.sort(np.repeat(positive_eigenvalues(spectra[m]) ** 2, 2))[:envelope_count]
        if squared.size:
            report.envelope.append(envelope_check(squared, doubled[:envelope_count], m, tau, c0=c0))
            first = report.envelope[0]
            report.envelope_carried.append(envelope_check(squared, doubled[:envelope_count], m, tau, c0=c0,
                                                          fixed=(first.b, first.c)))

    if len(ms) >= MIN_SWEEP_POINTS:
        report.order_fit = residual_order_fit(ms, [row[0] for row in report.residuals])
    if area is not None:
        counts = {m: sum(mode.multiplicity for mode in spectra[m]) for m in ms}
        report.weyl = weyl_table(counts, tau, area)
    carried = sum(fit.violations for fit in report.envelope_carried)
    if carried:
        logger.warning(f"Envelope constants from m={ms[0]} are violated {carried} times at larger m")
    logger.info(f"Asymptotic report for tau={tau}: {len(ms)} masses, {levels} levels")
    return report
