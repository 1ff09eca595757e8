from src.commands.utils.error_handler import EXIT_OK, handle_error
from src.commands.utils.run_config import RunConfig
from src.commands.utils.storage import get_output_dir, write_csv
from src.commands.utils.validators import ValidationError, validate_coupling, validate_mass_list, \
    validate_numeric_parameter
from src.spectral.oned_models import OneDProblem, scaled_ground_residual, solve_dirichlet_ground, \
    solve_robin_ground
from src.utils.errors import NoBoundState
from src.utils.logging import run_context, setup_logger

logger = setup_logger(__name__)

COMMAND = "modes-1d"
HEADER = ("m", "tau", "delta", "kind", "k", "k_delta", "E1", "scaled_residual", "multiplicity")


def modes_1d(cfg: RunConfig) -> int:
    """Handle the modes-1d command: ground states of the Dirichlet or Robin fiber model."""
    logger.info(f"Received {COMMAND} command: m={cfg.m}, tau={cfg.tau}, delta={cfg.delta}, "
                f"c={cfg.c}, dirichlet={cfg.dirichlet}",
                extra=run_context(command=COMMAND, m=cfg.m, tau=cfg.tau))
    out_dir = get_output_dir(cfg.output_dir)
    echo = cfg.echo()
    try:
        masses = validate_mass_list(cfg.m)
        if not cfg.tau:
            raise ValidationError("tau is required")
        taus = [validate_coupling(t) for t in cfg.tau]
        delta = validate_numeric_parameter(cfg.delta, 0.0, None, "delta", exclusive=True)
        if cfg.dirichlet and cfg.c is not None:
            raise ValidationError("--c applies to the Robin model and cannot be combined with --dirichlet")

        rows, missing = [], []
        for m in masses:
            for tau in taus:
                problem = OneDProblem(m=m, tau=tau, delta=delta, c=cfg.c)
                try:
                    mode = solve_dirichlet_ground(problem) if cfg.dirichlet else solve_robin_ground(problem)
                except NoBoundState as exc:
                    logger.warning(f"No ground state at m={m}, tau={tau}: {exc.message}")
                    missing.append(exc)
                    continue
                rows.append((m, tau, delta, mode.kind, mode.k, mode.k * delta, mode.energy,
                             scaled_ground_residual(mode), mode.multiplicity))

        write_csv(out_dir / f"{COMMAND}.csv", HEADER, rows, echo)
        if missing and cfg.strict:
            return handle_error(COMMAND, missing[0], out_dir, echo)
    except Exception as e:
        return handle_error(COMMAND, e, out_dir, echo)
    return EXIT_OK
