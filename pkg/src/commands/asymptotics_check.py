import numpy as np

from src.commands.sphere_spectrum import single_value
from src.commands.utils.error_handler import EXIT_OK, handle_error
from src.commands.utils.run_config import RunConfig
from src.commands.utils.storage import get_output_dir, write_csv, write_json
from src.commands.utils.validators import ValidationError, validate_coupling, validate_mass_list
from src.spectral.asymptotics import ENVELOPE_LEVELS, build_report, curvature_defect_sup
from src.spectral.effective_operator import (
    HermitianSpectrum, assemble_upsilon, expand_levels, solve_pencil, sphere_upsilon_levels,
)
from src.spectral.sphere_modes import ShellConfig, full_spectrum
from src.spectral.surface_geometry import build_grid, build_surface
from src.utils.logging import run_context, setup_logger
from src.utils.workers import parallel_map

logger = setup_logger(__name__)

COMMAND = "asymptotics-check"
HEADER = ("m", "j", "mu", "predicted", "residual", "scaled_residual")
CROSS_CHECK_RTOL = 1e-6


def effective_cross_check(spectrum: HermitianSpectrum, tau: float, R: float) -> dict:
    """Compare Galerkin values of Υ_τ with the closed-form sphere levels."""
    exact = expand_levels(sphere_upsilon_levels(tau, R, lmax=int(np.sqrt(spectrum.values.size)) + 4))
    n = spectrum.values.size
    deviation = np.abs(spectrum.values - exact[:n]) / np.maximum(1.0, np.abs(exact[:n]))
    worst = float(np.max(deviation)) if n else 0.0
    if worst > CROSS_CHECK_RTOL:
        logger.warning(f"Galerkin Upsilon values deviate from the closed form by {worst:.3e}")
    return {"source": "galerkin", "order": spectrum.order, "basis_size": spectrum.basis_size,
            "compared": n, "max_relative_deviation": worst}


def asymptotics_check(cfg: RunConfig) -> int:
    """Handle the asymptotics-check command: sphere spectra against the large-mass expansion."""
    logger.info(f"Received {COMMAND} command: tau={cfg.tau}, m={cfg.m}, R={cfg.R}, levels={cfg.levels}",
                extra=run_context(command=COMMAND, surface="sphere", m=cfg.m, tau=cfg.tau, order=cfg.order))
    out_dir = get_output_dir(cfg.output_dir)
    echo = cfg.echo()
    try:
        if cfg.surface.name != "sphere":
            raise ValidationError(f"{COMMAND} runs on a sphere only, got surface '{cfg.surface.name}'")
        tau = validate_coupling(single_value(cfg.tau, "tau"))
        if tau > 0:
            raise ValidationError(f"{COMMAND} needs tau < 0; for tau > 0 the gap spectrum is empty")
        masses = validate_mass_list(cfg.m)
        if min(masses) <= 1:
            raise ValidationError("the large-mass sweep needs every m > 1")

        surface = build_surface("sphere", R=cfg.R)
        grid = build_grid(surface, cfg.order)
        system = assemble_upsilon(surface, grid, tau, cfg.order)
        wanted = 2 * max(cfg.levels, ENVELOPE_LEVELS) + 8
        effective = solve_pencil(system, min(wanted, system.basis_size))
        levels = effective.levels[:-1] if effective.last_level_partial else effective.levels
        cross_check = effective_cross_check(effective, tau, cfg.R)

        def spectrum(m: float):
            return full_spectrum(ShellConfig(m=m, tau=tau, R=cfg.R, kappa_max=cfg.kappa_max,
                                             lambda_grid=cfg.lambda_grid))

        spectra = dict(zip(masses, parallel_map(spectrum, masses)))
        c0 = curvature_defect_sup(grid)
        report = build_report(tau, cfg.R, spectra, levels, levels=cfg.levels, c0=c0,
                              area=4.0 * np.pi * cfg.R ** 2, rtol=cfg.tolerances.alignment_rtol)

        rows = []
        for i, m in enumerate(report.ms):
            for j in range(report.levels):
                rows.append((m, j + 1, report.mu[i][j], report.predicted[i][j],
                             report.residuals[i][j], report.scaled_residuals[i][j]))
        if report.order_fit is not None:
            logger.info(f"Residual order slope {report.order_fit.slope:.3f} "
                        f"({'accepted' if report.order_fit.accepted else 'rejected'})")
        write_csv(out_dir / f"{COMMAND}.csv", HEADER, rows, echo)
        write_json(out_dir / f"{COMMAND}.json",
                   {"report": report.model_dump(), "effective_cross_check": cross_check}, echo)
    except Exception as e:
        return handle_error(COMMAND, e, out_dir, echo)
    return EXIT_OK
