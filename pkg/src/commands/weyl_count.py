import numpy as np

from src.commands.sphere_spectrum import single_value
from src.commands.utils.error_handler import EXIT_OK, handle_error
from src.commands.utils.run_config import RunConfig
from src.commands.utils.storage import get_output_dir, write_csv, write_json
from src.commands.utils.validators import validate_coupling, validate_mass_list
from src.spectral.asymptotics import weyl_table
from src.spectral.sphere_modes import ShellConfig, count_with_multiplicity, full_spectrum
from src.utils.logging import run_context, setup_logger
from src.utils.workers import parallel_map

logger = setup_logger(__name__)

COMMAND = "weyl-count"
HEADER = ("m", "count", "predicted", "ratio")


def weyl_count(cfg: RunConfig) -> int:
    """Handle the weyl-count command: gap eigenvalue counts on a sphere against the Weyl law."""
    logger.info(f"Received {COMMAND} command: tau={cfg.tau}, R={cfg.R}, m={cfg.m}",
                extra=run_context(command=COMMAND, surface="sphere", m=cfg.m, tau=cfg.tau))
    out_dir = get_output_dir(cfg.output_dir)
    echo = cfg.echo()
    try:
        tau = validate_coupling(single_value(cfg.tau, "tau"))
        masses = validate_mass_list(cfg.m)

        def count(m: float) -> int:
            shell = ShellConfig(m=m, tau=tau, R=cfg.R, kappa_max=cfg.kappa_max, lambda_grid=cfg.lambda_grid)
            return count_with_multiplicity(full_spectrum(shell))

        counts = dict(zip(masses, parallel_map(count, masses)))
        table = weyl_table(counts, tau, 4.0 * np.pi * cfg.R ** 2)
        for row in table:
            logger.info(f"m={row.m}: count={row.count}, predicted={row.predicted:.6g}, ratio={row.ratio:.4f}")

        rows = [(row.m, row.count, row.predicted, row.ratio) for row in table]
        write_csv(out_dir / f"{COMMAND}.csv", HEADER, rows, echo)
        write_json(out_dir / f"{COMMAND}.json", {"rows": [row.model_dump() for row in table]}, echo)
    except Exception as e:
        return handle_error(COMMAND, e, out_dir, echo)
    return EXIT_OK
