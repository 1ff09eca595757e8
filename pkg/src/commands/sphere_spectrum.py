import numpy as np

from src.commands.utils.error_handler import EXIT_OK, handle_error
from src.commands.utils.run_config import RunConfig
from src.commands.utils.storage import get_output_dir, write_csv, write_json
from src.commands.utils.validators import ValidationError, validate_coupling, validate_numeric_parameter
from src.spectral.sphere_modes import ModeResult, ShellConfig, count_with_multiplicity, full_spectrum
from src.utils.logging import run_context, setup_logger

logger = setup_logger(__name__)

COMMAND = "sphere-spectrum"
HEADER = ("lambda", "kappa", "multiplicity", "residual", "solver")


def single_value(values: list[float], field_name: str) -> float:
    if len(values) != 1:
        raise ValidationError(f"{field_name} takes exactly one value here, got {len(values)}")
    return values[0]


def spectrum_summary(modes: list[ModeResult], cfg: ShellConfig) -> dict:
    lams = np.array([mode.lam for mode in modes])
    mults = [mode.multiplicity for mode in modes]
    asymmetry = float(np.max(np.abs(np.sort(lams) + np.sort(lams)[::-1]))) if modes else 0.0
    return {
        "levels": len(modes),
        "eigenvalues_with_multiplicity": count_with_multiplicity(modes),
        "kappa_bound": cfg.kappa_bound,
        "scan_points": cfg.scan_points,
        "max_residual": max((mode.residual for mode in modes), default=0.0),
        "symmetry_defect": asymmetry,
        "all_multiplicities_even": all(m % 2 == 0 for m in mults),
    }


def sphere_spectrum(cfg: RunConfig) -> int:
    """Handle the sphere-spectrum command: exact gap eigenvalues of a spherical shell."""
    logger.info(f"Received {COMMAND} command: m={cfg.m}, tau={cfg.tau}, R={cfg.R}",
                extra=run_context(command=COMMAND, surface="sphere", m=cfg.m, tau=cfg.tau))
    out_dir = get_output_dir(cfg.output_dir)
    echo = cfg.echo()
    try:
        m = validate_numeric_parameter(single_value(cfg.m, "m"), field_name="m")
        tau = validate_coupling(single_value(cfg.tau, "tau"))
        shell = ShellConfig(m=m, tau=tau, R=cfg.R, kappa_max=cfg.kappa_max, lambda_grid=cfg.lambda_grid)

        modes = full_spectrum(shell)
        rows = [(mode.lam, mode.kappa, mode.multiplicity, mode.residual, mode.solver) for mode in modes]
        write_csv(out_dir / f"{COMMAND}.csv", HEADER, rows, echo)
        write_json(out_dir / f"{COMMAND}.json", {"summary": spectrum_summary(modes, shell)}, echo)
    except Exception as e:
        return handle_error(COMMAND, e, out_dir, echo)
    return EXIT_OK
