import sys
from pathlib import Path
from typing import Optional

import pydantic

from src.commands.utils.storage import write_json
from src.utils.errors import ErrorCategory, SpectralError
from src.utils.logging import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_EXIT_CODES = {
    ErrorCategory.VALIDATION: EXIT_VALIDATION,
    ErrorCategory.NUMERICAL: EXIT_NUMERICAL,
    ErrorCategory.GEOMETRY: EXIT_NUMERICAL,
}


def categorize(error: BaseException) -> str:
    if isinstance(error, SpectralError):
        return error.category
    if isinstance(error, pydantic.ValidationError):
        return ErrorCategory.VALIDATION
    return ErrorCategory.INTERNAL


def exit_code_for(category: str) -> int:
    return _EXIT_CODES.get(category, EXIT_INTERNAL)


def handle_error(
    command: str,
    error: BaseException,
    output_dir: Optional[Path] = None,
    echo: Optional[dict] = None,
) -> int:
    """
    Standardized error handler for command failures.

    Args:
        command: The subcommand name
        error: The exception raised while running it
        output_dir: Directory for the diagnostic file; numerical failures only
        echo: Resolved run configuration, if it was built

    Returns:
        The process exit code for the error category
    """
    category = categorize(error)
    code = exit_code_for(category)
    message = getattr(error, "message", None) or str(error)

    if category == ErrorCategory.INTERNAL:
        logger.error(f"Unexpected error in {command} command: {message}", exc_info=error)
    else:
        logger.error(f"Error in {command} command: {message} (category: {category})")
    print(f"error: {message}", file=sys.stderr)

    if code == EXIT_NUMERICAL and output_dir is not None:
        details = getattr(error, "details", {}) or {}
        payload = {"command": command, "category": category, "message": message,
                   "error": type(error).__name__, "details": details}
        try:
            write_json(Path(output_dir) / "diagnostic.json", payload, echo or {})
        except OSError as exc:
            logger.warning(f"Could not write diagnostic file: {exc}")
    return code
