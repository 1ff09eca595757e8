from typing import Optional

from src.commands.sphere_spectrum import single_value
from src.commands.utils.error_handler import EXIT_OK, handle_error
from src.commands.utils.run_config import RunConfig
from src.commands.utils.storage import get_output_dir, write_csv, write_json
from src.commands.utils.validators import validate_coupling, validate_interval, validate_numeric_parameter, \
    validate_surface_name
from src.spectral.layer_potentials import bs_search
from src.spectral.surface_geometry import ParamSurface, build_grid, build_surface, grid_resolution
from src.utils.logging import run_context, setup_logger

logger = setup_logger(__name__)

COMMAND = "bs-scan"
HEADER = ("lambda", "sigma_min")
MAX_GRID_ORDER = 64


def order_for_nodes(surface: ParamSurface, nodes: Optional[int], fallback: int) -> int:
    """Smallest grid order whose node count reaches `nodes`."""
    if nodes is None:
        return fallback
    for order in range(1, MAX_GRID_ORDER + 1):
        n1, n2 = grid_resolution(surface, order)
        if n1 * n2 >= nodes:
            return order
    return MAX_GRID_ORDER


def bs_scan(cfg: RunConfig) -> int:
    """Handle the bs-scan command: σ_min(I + τβC_λ) over a λ grid with refined candidates."""
    logger.info(f"Received {COMMAND} command: surface={cfg.surface.name}, m={cfg.m}, tau={cfg.tau}, "
                f"nodes={cfg.nodes}, steps={cfg.steps}",
                extra=run_context(command=COMMAND, surface=cfg.surface.name, m=cfg.m, tau=cfg.tau, nodes=cfg.nodes))
    out_dir = get_output_dir(cfg.output_dir)
    echo = cfg.echo()
    try:
        validate_surface_name(cfg.surface.name)
        m = validate_numeric_parameter(single_value(cfg.m, "m"), field_name="m")
        tau = validate_coupling(single_value(cfg.tau, "tau"))
        interval = validate_interval(cfg.interval, m)

        surface = build_surface(cfg.surface.name, **cfg.surface_params())
        grid = build_grid(surface, order_for_nodes(surface, cfg.nodes, cfg.order))
        logger.info(f"Nystrom grid has {grid.size} nodes (mesh size {grid.mesh_size:.4g})")
        scan = bs_search(grid, m, tau, interval=interval, steps=cfg.steps,
                         threshold=cfg.tolerances.bs_threshold)

        write_csv(out_dir / f"{COMMAND}.csv", HEADER, zip(scan.lams, scan.sigmas), echo)
        payload = {
            "nodes": grid.size,
            "mesh_size": grid.mesh_size,
            "threshold": scan.threshold,
            "candidates": [{"lambda": c.lam, "sigma_min": c.sigma_min} for c in scan.candidates],
        }
        write_json(out_dir / f"{COMMAND}.json", payload, echo)
    except Exception as e:
        return handle_error(COMMAND, e, out_dir, echo)
    return EXIT_OK
