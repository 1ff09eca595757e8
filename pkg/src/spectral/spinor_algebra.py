"""
Dirac and Pauli matrix algebra for the shell interaction.

All functions accept either a single 3-vector or a stacked array of shape
(..., 3) and return matrices of shape (..., 4, 4) (or (..., 2, 2) for Pauli
objects), so quadrature code can evaluate them on whole grids at once.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from src.utils.errors import DecoupledShell, InvalidParameter

UNIT_TOLERANCE = 1e-12

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
ZERO2 = np.zeros((2, 2), dtype=complex)

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

ALPHA = np.array([np.block([[ZERO2, s], [s, ZERO2]]) for s in SIGMA])
BETA = np.block([[I2, ZERO2], [ZERO2, -I2]])
GAMMA5 = np.block([[ZERO2, I2], [I2, ZERO2]])

Sign = Union[int, str]


@dataclass(frozen=True)
class UnitVector3:
    """A unit 3-vector; any nonzero input is renormalized on construction."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = float(np.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2))
        if not np.isfinite(norm) or norm == 0.0:
            raise InvalidParameter("UnitVector3 requires a finite nonzero vector",
                                   details={"vector": [self.x, self.y, self.z]})
        object.__setattr__(self, "x", float(self.x) / norm)
        object.__setattr__(self, "y", float(self.y) / norm)
        object.__setattr__(self, "z", float(self.z) / norm)

    @classmethod
    def from_array(cls, v) -> "UnitVector3":
        v = np.asarray(v, dtype=float).reshape(3)
        return cls(v[0], v[1], v[2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __neg__(self) -> "UnitVector3":
        return UnitVector3(-self.x, -self.y, -self.z)


def _sign(sign: Sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise InvalidParameter(f"sign must be +1 or -1, got {sign!r}")


def as_unit_normals(nu) -> np.ndarray:
    """Return normals as a float array of shape (..., 3), checking unit length."""
    if isinstance(nu, UnitVector3):
        return nu.as_array()
    arr = np.asarray(nu, dtype=float)
    if arr.shape[-1] != 3:
        raise InvalidParameter(f"normal must have a trailing dimension of 3, got shape {arr.shape}")
    norms = np.linalg.norm(arr, axis=-1)
    deviation = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if deviation > UNIT_TOLERANCE:
        raise InvalidParameter("normal vector is not of unit length",
                               details={"max_deviation": deviation})
    return arr


def _check_coupling(tau: float) -> float:
    tau = float(tau)
    if abs(tau) == 2.0:
        raise DecoupledShell(tau)
    return tau


def alpha_dot(x) -> np.ndarray:
    """α·x for real (or complex) vectors x of shape (..., 3)."""
    x = np.asarray(x)
    return np.einsum("...j,jab->...ab", x, ALPHA)


def sigma_dot(x) -> np.ndarray:
    """σ·x for vectors x of shape (..., 3)."""
    x = np.asarray(x)
    return np.einsum("...j,jab->...ab", x, SIGMA)


def shell_matrix_B(nu) -> np.ndarray:
    """B(ν) = −iβ α·ν; Hermitian and unitary for unit ν."""
    n = as_unit_normals(nu)
    return -1j * (BETA @ alpha_dot(n))


def p_tau(sign: Sign, tau: float, nu) -> np.ndarray:
    """P_τ^± = τ/2 ± B(ν)."""
    s = _sign(sign)
    return 0.5 * float(tau) * I4 + s * shell_matrix_B(nu)


def p_tau_inverse(sign: Sign, tau: float, nu) -> np.ndarray:
    """Explicit inverse (τ/2 ∓ B)/(τ²/4 − 1) of P_τ^±.

    B has eigenvalues ±1, so both P_τ^+ and P_τ^- are singular at |τ| = 2.
    """
    tau = _check_coupling(tau)
    s = _sign(sign)
    return (0.5 * tau * I4 - s * shell_matrix_B(nu)) / (0.25 * tau * tau - 1.0)


def r_tau(sign: Sign, tau: float, nu) -> np.ndarray:
    """R_τ^± = ((4+τ²)I ± 4τB)/(4−τ²) = −(P_τ^∓)⁻¹P_τ^±.

    Raises:
        DecoupledShell: for τ = ±2.
    """
    tau = _check_coupling(tau)
    s = _sign(sign)
    return ((4.0 + tau * tau) * I4 + s * 4.0 * tau * shell_matrix_B(nu)) / (4.0 - tau * tau)


def theta0(nu) -> np.ndarray:
    """Θ₀(ν) = (I + iα·ν)/√2, the unitary with Θ₀βΘ₀* = B(ν)."""
    n = as_unit_normals(nu)
    return (I4 + 1j * alpha_dot(n)) / np.sqrt(2.0)


def robin_transmission_matrix(tau: float, nu=None) -> np.ndarray:
    """Transmission matrix of the flat fiber problem, with β in place of B(ν).

    Without ν this is −(τ/2 − β)⁻¹(τ/2 + β). With ν it is conjugated by Θ₀(ν),
    which yields R_τ^+(ν).
    """
    tau = _check_coupling(tau)
    r_flat = ((4.0 + tau * tau) * I4 + 4.0 * tau * BETA) / (4.0 - tau * tau)
    if nu is None:
        return r_flat
    u = theta0(nu)
    return u @ r_flat @ np.conj(np.swapaxes(u, -1, -2))


def transmission_residual(tau: float, nu, u_plus, u_minus) -> float:
    """‖P_τ^− u₊ + P_τ^+ u₋‖ for a single pair of traces."""
    u_plus = np.asarray(u_plus, dtype=complex)
    u_minus = np.asarray(u_minus, dtype=complex)
    lhs = p_tau(-1, tau, nu) @ u_plus + p_tau(+1, tau, nu) @ u_minus
    return float(np.linalg.norm(lhs))


@dataclass(frozen=True)
class AntilinearMap:
    """u ↦ matrix · conj(u) acting on 4-spinors."""

    name: str
    matrix: np.ndarray

    def __call__(self, u) -> np.ndarray:
        return self.matrix @ np.conj(np.asarray(u, dtype=complex))


def symmetry_operators() -> tuple[AntilinearMap, AntilinearMap]:
    """Charge conjugation C u = iβα₂ū and time reversal T u = −iγ₅α₂ū."""
    charge = AntilinearMap("charge_conjugation", 1j * BETA @ ALPHA[1])
    reversal = AntilinearMap("time_reversal", -1j * GAMMA5 @ ALPHA[1])
    return charge, reversal

