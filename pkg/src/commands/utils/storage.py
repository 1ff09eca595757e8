"""
Output writers for shellspectra.

Every file embeds the format version and the resolved run configuration. Floats
are written with 17 significant digits and no timestamps are recorded, so
rerunning a command with the same configuration reproduces its files byte for
byte.
"""
import json
import math
from pathlib import Path
from threading import RLock
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from src.utils.config import config
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

# Global lock for thread safety during file writes
write_lock = RLock()


def ensure_dir(path: Union[Path, str]) -> Path:
    """Ensure the directory exists, creating it if necessary."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def get_output_dir(override: Optional[Union[Path, str]] = None) -> Path:
    """Output directory from the flag or SHELLSPECTRA_OUTPUT_DIR, created on demand."""
    return ensure_dir(override if override is not None else config.output_dir)


def format_float(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return x if math.isfinite(x) else str(x)
    if isinstance(value, Path):
        return str(value)
    return value


def config_line(echo: dict[str, Any]) -> str:
    return json.dumps(_jsonable(echo), sort_keys=True, separators=(",", ":"))


def write_csv(path: Union[Path, str], header: Sequence[str], rows: Iterable[Sequence[Any]],
              echo: dict[str, Any]) -> Path:
    """Write a comma-separated table with the version and config comment lines."""
    path = Path(path)
    lines = [f"# format_version={config.format_version}", f"# config={config_line(echo)}", ",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(format_float(v) for v in row))

    with write_lock:
        ensure_dir(path.parent)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    logger.info(f"Wrote {len(lines) - 3} rows to {path}")
    return path


def write_json(path: Union[Path, str], payload: dict[str, Any], echo: dict[str, Any]) -> Path:
    path = Path(path)
    document = {"format_version": config.format_version, "config": echo, **payload}
    text = json.dumps(_jsonable(document), sort_keys=True, indent=2)

    with write_lock:
        ensure_dir(path.parent)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text + "\n")
    logger.info(f"Wrote {path}")
    return path
