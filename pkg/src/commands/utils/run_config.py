"""
Run configuration for shellspectra commands.

A config file is flat `key = value` text grouped by `[run]`, `[surface]` and
`[tolerances]` headers; keys before the first header belong to `[run]`.
Command-line flags override file values. The resolved RunConfig, minus the
output directory, is echoed into every output file.
"""
import configparser
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.commands.utils.validators import ValidationError
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

COMMANDS = ("modes-1d", "sphere-spectrum", "effective-spectrum", "bs-scan",
            "asymptotics-check", "weyl-count")

_LIST_KEYS = {"m", "tau", "interval"}
_INT_KEYS = {"order", "count", "nodes", "kappa_max", "lambda_grid", "steps", "levels"}
_FLOAT_KEYS = {"R", "delta", "c"}
_BOOL_KEYS = {"dirichlet", "strict"}
_SECTIONS = ("run", "surface", "tolerances")


class SurfaceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "sphere"
    params: dict[str, float] = Field(default_factory=dict)


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    multiplicity_rtol: float = Field(default=1e-7, gt=0)
    bs_threshold: float = Field(default=0.1, gt=0)
    alignment_rtol: float = Field(default=1e-6, gt=0)


class RunConfig(BaseModel):
    """Fully resolved parameters of one command invocation."""

    model_config = ConfigDict(extra="forbid")

    command: str
    surface: SurfaceSpec = Field(default_factory=SurfaceSpec)
    m: list[float] = Field(default_factory=list)
    tau: list[float] = Field(default_factory=list)
    R: float = Field(default=1.0, gt=0)
    delta: Optional[float] = None
    c: Optional[float] = None
    dirichlet: bool = False
    order: int = Field(default=16, ge=4)
    count: int = Field(default=20, ge=1)
    nodes: Optional[int] = Field(default=None, ge=16)
    kappa_max: Optional[int] = Field(default=None, ge=1)
    lambda_grid: Optional[int] = Field(default=None, ge=8)
    interval: Optional[tuple[float, float]] = None
    steps: int = Field(default=64, ge=3)
    levels: int = Field(default=1, ge=1)
    strict: bool = False
    output_dir: Optional[Path] = None
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @field_validator("command")
    @classmethod
    def _known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}'")
        return value

    def surface_params(self) -> dict[str, float]:
        """Surface parameters, with the run radius standing in for a sphere's R."""
        params = dict(self.surface.params)
        if self.surface.name == "sphere":
            params.setdefault("R", self.R)
        return params

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude={"output_dir"})


def parse_list(raw: Union[str, list, tuple, float, int], field_name: str) -> list[float]:
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    if isinstance(raw, (int, float)):
        return [float(raw)]
    try:
        return [float(part) for part in str(raw).split(",") if part.strip()]
    except ValueError:
        raise ValidationError(f"{field_name} must be a comma-separated list of numbers, got {raw!r}")


def _convert(key: str, raw: str) -> Any:
    try:
        if key in _LIST_KEYS:
            return parse_list(raw, key)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            lowered = raw.strip().lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
    except ValueError:
        raise ValidationError(f"config key '{key}' has an invalid value {raw!r}")
    raise ValidationError(f"unknown config key '{key}' in [run]")


def load_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Read a sectioned key=value file into RunConfig keyword arguments.

    Raises:
        ValidationError: unreadable file, unknown section or key, bad value.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}")

    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), strict=False)
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ValidationError(f"malformed config file {path}: {exc}")

    unknown = [s for s in parser.sections() if s not in _SECTIONS]
    if unknown:
        raise ValidationError(f"unknown config section(s) {unknown}; expected {list(_SECTIONS)}")

    values: dict[str, Any] = {}
    for key, raw in parser.items("run"):
        values[key] = _convert(key, raw)
    if parser.has_section("surface"):
        surface: dict[str, Any] = {"params": {}}
        for key, raw in parser.items("surface"):
            if key == "name":
                surface["name"] = raw.strip()
                continue
            try:
                surface["params"][key] = float(raw)
            except ValueError:
                raise ValidationError(f"surface parameter '{key}' must be numeric, got {raw!r}")
        values["surface"] = surface
    if parser.has_section("tolerances"):
        try:
            values["tolerances"] = {key: float(raw) for key, raw in parser.items("tolerances")}
        except ValueError as exc:
            raise ValidationError(f"tolerance values must be numeric: {exc}")
    logger.debug(f"Loaded config file {path}: keys={sorted(values)}")
    return values


def resolve_run_config(command: str, config_path: Optional[Union[str, Path]] = None,
                       overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Merge file values with flag overrides (None means not given) and validate."""
    values = load_config_file(config_path) if config_path else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "surface_name":
            values.setdefault("surface", {}).update({"name": value})
        elif key == "surface_params":
            surface = values.setdefault("surface", {})
            surface["params"] = {**surface.get("params", {}), **value}
        elif key in ("m", "tau", "interval"):
            values[key] = parse_list(value, key)
        else:
            values[key] = value
    values["command"] = command
    return RunConfig(**values)
