"""
Free Dirac Green's kernel, boundary layer potentials and a Birman–Schwinger
eigenvalue search on parametrized surfaces.

For λ in the gap the kernel splits as G_λ(x) = (λ + mβ) S(x) + iα·x D(x) with

    S(x) = e^{−q|x|} / (4π|x|),    D(x) = (1 + q|x|) e^{−q|x|} / (4π|x|³),

q = √(m² − λ²). C_λ is discretized by a Nyström rule with singularity
subtraction: off-diagonal entries are plain quadrature, and each row carries
φ(x_i) times the full row integral minus its own off-diagonal sum. The row
integrals are analytic on a sphere and otherwise come from a local polar
patch plus a smoothly cut-off far field on an upsampled grid. A local
gradient correction on the same patch lifts the scheme to second order in
the mesh size.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.linalg import svdvals
from scipy.spatial import cKDTree

from src.spectral.spinor_algebra import ALPHA, BETA, I4, alpha_dot
from src.spectral.surface_geometry import SurfaceGrid, _geometry, build_grid
from src.utils.errors import DecoupledShell, GeometryError, InvalidParameter, NearSurfaceError
from src.utils.logging import setup_logger
from src.utils.workers import parallel_map

logger = setup_logger(__name__)

PATCH_RADIAL_NODES = 24
PATCH_ANGULAR_NODES = 32
CUTOFF_SCALE = 2.0
CUTOFF_SUPPORT = 2.6
FAR_UPSAMPLE = 3
COINCIDENCE_RTOL = 1e-10
GRADIENT_NEIGHBOURS = 10
DEFAULT_THRESHOLD = 0.1
MEMORY_BUDGET = 4e9


@dataclass(frozen=True)
class KernelParams:
    """Spectral parameter λ (complex allowed) and mass m; k = √(λ²−m²) with Im k ≥ 0."""

    lam: complex
    m: float

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "m", float(self.m))
        if not (np.isfinite(self.lam.real) and np.isfinite(self.lam.imag) and np.isfinite(self.m)):
            raise InvalidParameter("kernel parameters must be finite")

    @property
    def k(self) -> complex:
        root = np.sqrt(complex(self.lam * self.lam - self.m * self.m))
        return -root if root.imag < 0 else root

    @property
    def in_gap(self) -> bool:
        return self.lam.imag == 0 and abs(self.lam.real) < abs(self.m)

    @property
    def q(self) -> float:
        """Decay rate √(m²−λ²) for real λ in the gap."""
        if not self.in_gap:
            raise InvalidParameter(f"lambda={self.lam} is not a real point of the gap (-|m|, |m|)")
        return float(np.sqrt(self.m * self.m - self.lam.real ** 2))


def green_kernel(p: KernelParams, x) -> np.ndarray:
    """G_λ(x) = (λ + mβ + (1 − ik|x|) iα·x/|x|²) e^{ik|x|}/(4π|x|), batched over (..., 3)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise InvalidParameter("green_kernel is singular at x = 0")
    k = p.k
    phase = np.exp(1j * k * r) / (4.0 * np.pi * r)
    scalar = (p.lam * I4 + p.m * BETA)
    vector = ((1.0 - 1j * k * r) / (r * r))[..., None, None] * (1j * alpha_dot(x))
    return phase[..., None, None] * (scalar + vector)


def _kernel_parts(q: float, d: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    decay = np.exp(-q * r) / (4.0 * np.pi * r)
    return decay, (decay * (1.0 + q * r) / (r * r))[..., None] * d


def _cutoff(r: np.ndarray, scale: float) -> np.ndarray:
    return np.exp(-((r / scale) ** 4))


# Row integrals ∫_Σ S(x_i − y) dΣ(y) and p.v. ∫_Σ D(x_i − y)(x_i − y) dΣ(y)


def sphere_row_integrals(R: float, q: float, normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = (1.0 - np.exp(-2.0 * q * R)) / (2.0 * q) if q > 0 else R
    if q > 0:
        v = (2.0 - (2.0 + 2.0 * q * R) * np.exp(-2.0 * q * R)) / (4.0 * R * q)
    else:
        v = 0.5
    normals = np.asarray(normals, dtype=float)
    return np.full(normals.shape[0], s), v * normals


@dataclass(frozen=True)
class PatchRule:
    """Precomputed local polar patches and far-field grid for numeric row integrals."""

    scale: float
    offsets: np.ndarray  # (N, P, 3): x_i − y on the patch
    weights: np.ndarray  # (N, P): area weight times cutoff
    far_points: np.ndarray
    far_weights: np.ndarray


def _patch_reach(grid: SurfaceGrid) -> float:
    params = grid.surface.params
    if grid.surface.family == "polar":
        return 0.7 * min(params.values())
    return 0.5 * params["r_minor"]


def _node_charts(grid: SurfaceGrid) -> list[tuple[str, np.ndarray, np.ndarray, np.ndarray]]:
    """Split nodes between the main chart and, near the poles, the auxiliary chart."""
    samples = grid.samples
    index = np.arange(grid.size)
    if grid.surface.family != "polar":
        return [(samples.chart, index, samples.s1, samples.s2)]
    near_pole = np.abs(np.sin(samples.s1)) < np.sqrt(0.5)
    main = grid.surface.chart("polar-z")
    aux = grid.surface.chart("polar-x")
    s1_aux, s2_aux = aux.locate(samples.point[near_pole])
    return [(main.name, index[~near_pole], samples.s1[~near_pole], samples.s2[~near_pole]),
            (aux.name, index[near_pole], s1_aux, s2_aux)]


def build_patch_rule(grid: SurfaceGrid, upsample: int = FAR_UPSAMPLE) -> PatchRule:
    """Local polar patches in metric-whitened chart coordinates around every node.

    The offset δs = ρ L^{−T}(cos ψ, sin ψ) with g = L Lᵀ has |dr| ≈ ρ, so the
    1/ρ singularities meet a Gauss rule in ρ and an even trapezoid rule in ψ,
    where the odd principal-value part cancels between ψ and ψ + π.
    """
    scale = min(CUTOFF_SCALE * grid.mesh_size, _patch_reach(grid) / CUTOFF_SUPPORT)
    rho_max = CUTOFF_SUPPORT * scale
    x, w = np.polynomial.legendre.leggauss(PATCH_RADIAL_NODES)
    rho = 0.5 * rho_max * (x + 1.0)
    w_rho = 0.5 * rho_max * w
    psi = 2.0 * np.pi * np.arange(PATCH_ANGULAR_NODES) / PATCH_ANGULAR_NODES
    w_psi = 2.0 * np.pi / PATCH_ANGULAR_NODES
    unit = np.stack([np.cos(psi), np.sin(psi)], -1)
    local = (rho[:, None, None] * unit[None, :, :]).reshape(-1, 2)
    base_w = (w_rho[:, None] * rho[:, None] * w_psi * np.ones(PATCH_ANGULAR_NODES)[None, :]).ravel()

    n, npatch = grid.size, local.shape[0]
    offsets = np.zeros((n, npatch, 3))
    weights = np.zeros((n, npatch))
    for chart_name, idx, s1, s2 in _node_charts(grid):
        if idx.size == 0:
            continue
        chart = grid.surface.chart(chart_name)
        centre = _geometry(chart, s1, s2)
        L = np.linalg.cholesky(centre.g)
        L_inv_T = np.swapaxes(np.linalg.inv(L), -1, -2)
        delta = np.einsum("nab,pb->npa", L_inv_T, local)
        geo = _geometry(chart, s1[:, None] + delta[..., 0], s2[:, None] + delta[..., 1])
        jac = geo.sqrt_det_g / centre.sqrt_det_g[:, None]
        d = centre.point[:, None, :] - geo.point
        offsets[idx] = d
        weights[idx] = base_w[None, :] * jac * _cutoff(np.linalg.norm(d, axis=-1), scale)

    n1, n2 = grid.shape
    fine = build_grid(grid.surface, grid.order, resolution=(upsample * n1, upsample * n2))
    logger.debug(f"Patch rule: scale={scale:.4g}, {npatch} patch nodes, {fine.size} far-field nodes")
    return PatchRule(scale=scale, offsets=offsets, weights=weights,
                     far_points=fine.samples.point, far_weights=fine.weights)


def numeric_row_integrals(grid: SurfaceGrid, q: float, rule: Optional[PatchRule] = None,
                          chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    rule = rule or build_patch_rule(grid)
    r_patch = np.linalg.norm(rule.offsets, axis=-1)
    S_p, D_p = _kernel_parts(q, rule.offsets, r_patch)
    s = np.einsum("np,np->n", rule.weights, S_p)
    v = np.einsum("np,npc->nc", rule.weights, D_p)

    points = grid.samples.point
    for start in range(0, grid.size, chunk):
        d = points[start:start + chunk, None, :] - rule.far_points[None, :, :]
        r = np.linalg.norm(d, axis=-1)
        keep = 1.0 - _cutoff(r, rule.scale)
        safe = np.where(r > 0, r, 1.0)
        S_f, D_f = _kernel_parts(q, d, safe)
        w = np.where(r > 0, keep, 0.0) * rule.far_weights[None, :]
        s[start:start + chunk] += np.einsum("np,np->n", w, S_f)
        v[start:start + chunk] += np.einsum("np,npc->nc", w, D_f)
    return s, v


# Local gradient correction
#
# With singularity subtraction the off-diagonal sum sees φ_j − φ_i, whose
# linear part (y − x_i)·∇φ turns the odd kernel into a 1/r integrand that
# plain quadrature misses at first order. The correction integrates that
# linear part on the polar patch, removes its node-sum counterpart and feeds
# it a least-squares tangential gradient of the density.


def _tangent_frames(normals: np.ndarray) -> np.ndarray:
    """Orthonormal tangent pairs (n, 2, 3) built from the normals alone."""
    axis = np.eye(3)[np.argmin(np.abs(normals), axis=-1)]
    u1 = axis - np.sum(axis * normals, axis=-1, keepdims=True) * normals
    u1 /= np.linalg.norm(u1, axis=-1, keepdims=True)
    return np.stack([u1, np.cross(normals, u1)], axis=1)


def _gradient_stencils(grid: SurfaceGrid) -> tuple[np.ndarray, np.ndarray]:
    """Neighbour indices (n, k) and weights (n, 3, k) with ∇φ(x_i) ≈ Σ_k G_ik (φ_k − φ_i)."""
    points = grid.samples.point
    _, neighbours = cKDTree(points).query(points, k=GRADIENT_NEIGHBOURS + 1)
    neighbours = neighbours[:, 1:]
    frames = _tangent_frames(grid.samples.normal)
    local = np.einsum("nkc,nbc->nkb", points[neighbours] - points[:, None, :], frames)
    return neighbours, np.einsum("nbc,nbk->nck", frames, np.linalg.pinv(local))


def _scatter_stencil(coeff: np.ndarray, neighbours: np.ndarray) -> np.ndarray:
    """Dense rows from stencil coefficients (n, ..., k); diagonals take minus the row sum."""
    n = neighbours.shape[0]
    moved = np.moveaxis(coeff, -1, 1)  # (n, k, ...)
    out = np.zeros((n, n) + moved.shape[2:])
    rows = np.repeat(np.arange(n), neighbours.shape[1])
    np.add.at(out, (rows, neighbours.ravel()), moved.reshape((-1,) + moved.shape[2:]))
    idx = np.arange(n)
    out[idx, idx] -= moved.sum(axis=1)
    return out


def local_correction(grid: SurfaceGrid, q: float, rule: PatchRule, d: np.ndarray,
                     r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Correction matrices (n, n) for the S block and (n, n, 3) for the α·(x−y) block."""
    S_p, V_p = _kernel_parts(q, rule.offsets, np.linalg.norm(rule.offsets, axis=-1))
    s_moment = -np.einsum("np,np,npb->nb", rule.weights, S_p, rule.offsets)
    v_moment = -np.einsum("np,npc,npb->ncb", rule.weights, V_p, rule.offsets)

    S, V = _kernel_parts(q, d, r)
    local = _cutoff(r, rule.scale) * grid.weights[None, :]
    np.fill_diagonal(local, 0.0)
    s_moment += np.einsum("ij,ij,ijb->ib", local, S, d)
    v_moment += np.einsum("ij,ijc,ijb->icb", local, V, d)

    neighbours, stencil = _gradient_stencils(grid)
    single = _scatter_stencil(np.einsum("nb,nbk->nk", s_moment, stencil), neighbours)
    vector = _scatter_stencil(np.einsum("ncb,nbk->nck", v_moment, stencil), neighbours)
    return single, vector


# Nyström matrices


def _check_nodes(grid: SurfaceGrid) -> None:
    points = grid.samples.point
    extent = float(np.max(np.ptp(points, axis=0)))
    pairs = cKDTree(points).query_pairs(r=COINCIDENCE_RTOL * max(extent, 1e-300))
    if pairs:
        i, j = next(iter(pairs))
        raise GeometryError(f"coincident quadrature nodes {i} and {j}",
                            details={"pairs": len(pairs)})


def _pair_data(grid: SurfaceGrid) -> tuple[np.ndarray, np.ndarray]:
    points = grid.samples.point
    d = points[:, None, :] - points[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    np.fill_diagonal(r, 1.0)
    return d, r


def _corrected(off: np.ndarray, rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Off-diagonal quadrature w_j K_ij with diagonal row_i − Σ_{j≠i} w_j K_ij."""
    if off.ndim == 2:
        mat = off * weights[None, :]
        np.fill_diagonal(mat, 0.0)
        mat[np.diag_indices_from(mat)] = rows - mat.sum(axis=1)
        return mat
    mat = off * weights[None, :, None]
    idx = np.arange(mat.shape[0])
    mat[idx, idx, :] = 0.0
    mat[idx, idx, :] = rows - mat.sum(axis=1)
    return mat


@dataclass
class BSMatrix:
    """Dense 4N×4N Nyström matrix of C_λ; spinor component a of node i sits at row 4i + a."""

    matrix: np.ndarray
    single_layer: np.ndarray
    params: KernelParams
    grid: SurfaceGrid
    row_rule: str
    diagonal: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, density) -> np.ndarray:
        phi = np.asarray(density, dtype=complex).reshape(self.grid.size * 4)
        return (self.matrix @ phi).reshape(self.grid.size, 4)


def _resolve_row_rule(grid: SurfaceGrid, row_rule: str) -> str:
    if row_rule == "auto":
        return "analytic-sphere" if grid.surface.name == "sphere" else "polar-patch"
    if row_rule == "analytic-sphere" and grid.surface.name != "sphere":
        raise InvalidParameter("analytic row integrals are only available on a sphere")
    if row_rule not in ("analytic-sphere", "polar-patch"):
        raise InvalidParameter(f"unknown row rule '{row_rule}'")
    return row_rule


def _row_integrals(grid: SurfaceGrid, q: float, rule: PatchRule, row_rule: str) -> tuple[np.ndarray, np.ndarray]:
    if row_rule == "analytic-sphere":
        return sphere_row_integrals(grid.surface.params["R"], q, grid.samples.normal)
    return numeric_row_integrals(grid, q, rule)


def assemble_single_layer(grid: SurfaceGrid, q: float, rule: Optional[PatchRule] = None,
                          row_rule: str = "auto", corrected: bool = True) -> np.ndarray:
    """Scalar single layer of −Δ + q² with the same singularity subtraction and correction."""
    row_rule = _resolve_row_rule(grid, row_rule)
    _check_nodes(grid)
    rule = rule or build_patch_rule(grid)
    d, r = _pair_data(grid)
    S, _ = _kernel_parts(q, d, r)
    s, _ = _row_integrals(grid, q, rule, row_rule)
    single = _corrected(S, s, grid.weights)
    if corrected:
        single = single + local_correction(grid, q, rule, d, r)[0]
    return single


def assemble_c_lambda(grid: SurfaceGrid, p: KernelParams, rule: Optional[PatchRule] = None,
                      row_rule: str = "auto", corrected: bool = True) -> BSMatrix:
    """Nyström matrix of C_λ for real λ in the gap.

    `corrected=False` drops the local gradient correction and leaves a
    first-order scheme; the default is second order in the mesh size.

    Raises:
        InvalidParameter: λ outside the real gap or an unknown row rule.
        GeometryError: coincident quadrature nodes.
    """
    q = p.q
    used = _resolve_row_rule(grid, row_rule)
    _check_nodes(grid)
    rule = rule or build_patch_rule(grid)
    d, r = _pair_data(grid)
    S, D = _kernel_parts(q, d, r)
    s, v = _row_integrals(grid, q, rule, used)
    single = _corrected(S, s, grid.weights)
    vector = _corrected(D, v, grid.weights)
    if corrected:
        single_fix, vector_fix = local_correction(grid, q, rule, d, r)
        single, vector = single + single_fix, vector + vector_fix

    lam = p.lam.real
    n = grid.size
    matrix = np.einsum("ij,ab->iajb", single, lam * I4 + p.m * BETA)
    matrix += np.einsum("ijc,cab->iajb", vector, 1j * ALPHA)
    matrix = matrix.reshape(4 * n, 4 * n)
    logger.debug(f"Assembled C_lambda: lambda={lam:.6g}, N={grid.size}, rows={used}, corrected={corrected}")
    return BSMatrix(matrix=matrix, single_layer=single, params=p, grid=grid, row_rule=used,
                    diagonal={"s": s, "v": v})


def _beta_signs(n: int) -> np.ndarray:
    return np.tile(np.real(np.diag(BETA)), n)


def anticommutator_defect(bs: BSMatrix) -> float:
    """max |βC + Cβ − 2 (λβ + m) ⊗ SL| over entries."""
    signs = _beta_signs(bs.grid.size)
    lhs = signs[:, None] * bs.matrix + bs.matrix * signs[None, :]
    rhs = 2.0 * np.kron(bs.single_layer, bs.params.lam.real * BETA + bs.params.m * I4)
    return float(np.max(np.abs(lhs - rhs)))


# Off-surface potential


def _surface_distance(grid: SurfaceGrid, x: np.ndarray) -> np.ndarray:
    tree = cKDTree(grid.samples.point)
    dist, _ = tree.query(x)
    return np.asarray(dist)


def phi_lambda_apply(grid: SurfaceGrid, p: KernelParams, density, x, allow_near: bool = False) -> np.ndarray:
    """Φ_λφ(x) = Σ_j w_j G_λ(x − y_j) φ_j at points x of shape (..., 3).

    Raises:
        NearSurfaceError: a point lies within two mesh sizes of the nodes.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 3)
    phi = np.asarray(density, dtype=complex).reshape(grid.size, 4)
    dist = _surface_distance(grid, flat)
    limit = 2.0 * grid.mesh_size
    if not allow_near and np.any(dist < limit):
        raise NearSurfaceError(f"evaluation point within {limit:.3g} of the surface",
                               details={"min_distance": float(np.min(dist))})
    out = np.zeros((flat.shape[0], 4), dtype=complex)
    weighted = phi * grid.weights[:, None]
    for i, point in enumerate(flat):
        G = green_kernel(p, point[None, :] - grid.samples.point)
        out[i] = np.einsum("jab,jb->a", G, weighted)
    return out.reshape(x.shape[:-1] + (4,))


def dirac_residual(grid: SurfaceGrid, p: KernelParams, density, x, step: float = 1e-4) -> np.ndarray:
    """(−iα·∇ + mβ − λ)Φ_λφ at x by central differences, relative to |Φ_λφ(x)|."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    value = phi_lambda_apply(grid, p, density, x)
    out = (p.m * value @ BETA.T) - p.lam * value
    for c in range(3):
        e = np.zeros(3)
        e[c] = step
        fwd = phi_lambda_apply(grid, p, density, x + e)
        bwd = phi_lambda_apply(grid, p, density, x - e)
        out = out - 1j * ((fwd - bwd) / (2.0 * step)) @ ALPHA[c].T
    return np.linalg.norm(out, axis=-1) / np.maximum(np.linalg.norm(value, axis=-1), 1e-300)


def sphere_constant_density_potential(R: float, p: KernelParams, phi0, x) -> np.ndarray:
    """Exact Φ_λφ₀ for a constant density φ₀ on the sphere |y| = R.

    With u(r) = (R/(qr)) sinh(q r_<) e^{−q r_>}, Φ_λφ₀ = [(λ + mβ)u − iα·∇u]φ₀.
    """
    q = p.q
    x = np.asarray(x, dtype=float)
    phi0 = np.asarray(phi0, dtype=complex)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0) or np.any(r == R):
        raise InvalidParameter("sphere potential is evaluated off the origin and off the surface")
    inside = r < R
    u = np.where(inside, R * np.sinh(q * r) * np.exp(-q * R) / (q * r),
                 R * np.sinh(q * R) * np.exp(-q * r) / (q * r))
    du = np.where(inside,
                  R * np.exp(-q * R) * (q * r * np.cosh(q * r) - np.sinh(q * r)) / (q * r * r),
                  -R * np.sinh(q * R) * (1.0 + q * r) * np.exp(-q * r) / (q * r * r))
    grad = (du / r)[..., None] * x
    op = u[..., None, None] * (p.lam.real * I4 + p.m * BETA) - 1j * alpha_dot(grad)
    return np.einsum("...ab,b->...a", op, phi0)


def jump_traces(bs: BSMatrix, density) -> tuple[np.ndarray, np.ndarray]:
    """Inner and outer boundary values Cφ ∓ (i/2)(α·ν)φ at the nodes."""
    phi = np.asarray(density, dtype=complex).reshape(bs.grid.size, 4)
    c_phi = bs.apply(phi)
    normal_term = 0.5j * np.einsum("nab,nb->na", alpha_dot(bs.grid.samples.normal), phi)
    return c_phi - normal_term, c_phi + normal_term


# Birman–Schwinger search


@dataclass(frozen=True)
class BSCandidate:
    lam: float
    sigma_min: float


@dataclass
class BSScan:
    lams: np.ndarray
    sigmas: np.ndarray
    candidates: list[BSCandidate]
    threshold: float


def sigma_min(grid: SurfaceGrid, m: float, tau: float, lam: float, rule: Optional[PatchRule] = None,
              row_rule: str = "auto") -> float:
    """Smallest singular value of I + τβC_λ."""
    bs = assemble_c_lambda(grid, KernelParams(lam=lam, m=m), rule=rule, row_rule=row_rule)
    values = svdvals(np.eye(bs.size) + tau * _beta_signs(grid.size)[:, None] * bs.matrix, check_finite=False)
    return float(values[-1])


def bs_search(grid: SurfaceGrid, m: float, tau: float, interval: Optional[tuple[float, float]] = None,
              steps: int = 64, threshold: float = DEFAULT_THRESHOLD, row_rule: str = "auto") -> BSScan:
    """Scan σ_min(I + τβC_λ) over λ and refine local minima below `threshold`.

    An empty candidate list is a valid outcome.
    """
    if abs(tau) == 2.0:
        raise DecoupledShell(tau)
    if tau == 0 or not np.isfinite(tau):
        raise InvalidParameter(f"tau must be finite and nonzero, got {tau}")
    edge = abs(m) * (1.0 - 1e-3)
    lo, hi = interval or (-edge, edge)
    if not (-abs(m) < lo < hi < abs(m)):
        raise InvalidParameter(f"interval must lie inside (-|m|, |m|), got ({lo}, {hi})")
    if steps < 3:
        raise InvalidParameter(f"steps must be at least 3, got {steps}")

    _check_nodes(grid)
    row_rule = _resolve_row_rule(grid, row_rule)
    rule = build_patch_rule(grid)
    lams = np.linspace(lo, hi, steps)
    matrix_bytes = 16.0 * (4 * grid.size) ** 2
    workers = max(1, int(MEMORY_BUDGET // (6 * matrix_bytes)))
    sigmas = np.array(parallel_map(lambda lam: sigma_min(grid, m, tau, lam, rule, row_rule), lams,
                                   max_workers=workers))

    candidates: list[BSCandidate] = []
    for i in range(steps):
        left, right = max(i - 1, 0), min(i + 1, steps - 1)
        if not (sigmas[i] <= sigmas[left] and sigmas[i] <= sigmas[right] and sigmas[i] < threshold):
            continue
        res = optimize.minimize_scalar(lambda lam: sigma_min(grid, m, tau, lam, rule, row_rule),
                                       bounds=(lams[left], lams[right]), method="bounded",
                                       options={"xatol": 1e-6 * abs(m)})
        best = (float(res.x), float(res.fun)) if res.fun <= sigmas[i] else (float(lams[i]), float(sigmas[i]))
        candidates.append(BSCandidate(lam=best[0], sigma_min=best[1]))
    logger.info(f"Birman-Schwinger scan: {len(candidates)} candidates over {steps} lambda points")
    return BSScan(lams=lams, sigmas=sigmas, candidates=candidates, threshold=threshold)
