from src.commands.utils.error_handler import EXIT_OK, handle_error
from src.commands.utils.run_config import RunConfig
from src.commands.utils.storage import get_output_dir, write_csv, write_json
from src.commands.utils.validators import ValidationError, validate_coupling, validate_surface_name
from src.spectral.effective_operator import HermitianSpectrum, assemble_upsilon, solve_pencil
from src.spectral.surface_geometry import build_grid, build_surface, surface_area
from src.utils.logging import run_context, setup_logger
from src.utils.workers import parallel_map

logger = setup_logger(__name__)

COMMAND = "effective-spectrum"
HEADER = ("tau", "index", "value", "level_multiplicity")


def upsilon_spectrum(cfg: RunConfig, tau: float) -> HermitianSpectrum:
    """Lowest `cfg.count` eigenvalues of Υ_τ on the configured surface."""
    surface = build_surface(cfg.surface.name, **cfg.surface_params())
    grid = build_grid(surface, cfg.order)
    system = assemble_upsilon(surface, grid, tau, cfg.order)
    return solve_pencil(system, cfg.count, cfg.tolerances.multiplicity_rtol)


def effective_spectrum(cfg: RunConfig) -> int:
    """Handle the effective-spectrum command for one or more couplings."""
    logger.info(f"Received {COMMAND} command: surface={cfg.surface.name}, tau={cfg.tau}, "
                f"order={cfg.order}, count={cfg.count}",
                extra=run_context(command=COMMAND, surface=cfg.surface.name, tau=cfg.tau, order=cfg.order))
    out_dir = get_output_dir(cfg.output_dir)
    echo = cfg.echo()
    try:
        validate_surface_name(cfg.surface.name)
        if not cfg.tau:
            raise ValidationError("tau is required")
        taus = [validate_coupling(t) for t in cfg.tau]

        spectra = parallel_map(lambda t: upsilon_spectrum(cfg, t), taus)
        rows = []
        summary = []
        for tau, spectrum in zip(taus, spectra):
            mults = spectrum.value_multiplicities()
            rows.extend((tau, j + 1, value, mults[j]) for j, value in enumerate(spectrum.values))
            summary.append({"tau": tau, "levels": spectrum.levels, "basis_size": spectrum.basis_size,
                            "last_level_partial": spectrum.last_level_partial})
            if spectrum.last_level_partial:
                logger.warning(f"Last level at tau={tau} may be incomplete; raise --count or --order")

        surface = build_surface(cfg.surface.name, **cfg.surface_params())
        area = surface_area(build_grid(surface, cfg.order))
        write_csv(out_dir / f"{COMMAND}.csv", HEADER, rows, echo)
        write_json(out_dir / f"{COMMAND}.json", {"area": area, "spectra": summary}, echo)
    except Exception as e:
        return handle_error(COMMAND, e, out_dir, echo)
    return EXIT_OK
