"""
Centralized configuration management for shellspectra.

This module loads environment variables into a structured configuration object.
Run-level settings (surface, mass, coupling, resolutions) live in
src.commands.utils.run_config; only process-wide settings are defined here.
"""

import os
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

# Load environment variables from .env file if present
load_dotenv()

FORMAT_VERSION = "shellspectra/1"


class Config:
    # Logging
    log_level: str

    # Parallelism
    threads: int

    # Output
    output_dir: Path
    format_version: str

    def __init__(self):
        self.log_level = os.getenv('LOG_LEVEL', 'INFO').upper()
        self.threads = self._get_int_env('SHELLSPECTRA_THREADS', os.cpu_count() or 1, minimum=1)
        self.output_dir = Path(os.getenv('SHELLSPECTRA_OUTPUT_DIR', 'results'))
        self.format_version = FORMAT_VERSION

    @staticmethod
    def _get_int_env(key: str, default: int, minimum: Optional[int] = None) -> int:
        raw = os.getenv(key)
        if raw is None or not raw.strip():
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"Environment variable {key} must be an integer, got {raw!r}.")
        if minimum is not None and value < minimum:
            raise ValueError(f"Environment variable {key} must be at least {minimum}, got {value}.")
        return value


# Global config instance
config = Config()
