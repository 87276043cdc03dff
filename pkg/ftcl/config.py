"""Configuration management for ftcl."""

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from os import getenv
from pathlib import Path
from typing import Any

DEFAULT_CURVE_TABLE = Path(__file__).parent / "data" / "curves.txt"

# (env var, TOML key, parser, default)
_SETTINGS: tuple[tuple[str, str, type, Any], ...] = (
    ("FTCL_DIGITS", "digits", int, 40),
    ("FTCL_PRECISION", "precision", int, 20),
    ("FTCL_GUARD_DIGITS", "guard_digits", int, 10),
    ("FTCL_NMAX_SAFETY", "nmax_safety", float, 1.3),
    ("FTCL_POINT_COUNT_BOUND", "point_count_bound", int, 1_000_000),
    ("FTCL_PRECISION_CAP", "precision_cap", int, 80),
    ("FTCL_CACHE", "cache_dir", str, "~/.cache/ftcl"),
    ("FTCL_CURVES", "curve_table", str, str(DEFAULT_CURVE_TABLE)),
    ("FTCL_WORKERS", "workers", int, 4),
    ("FTCL_LOG_LEVEL", "log_level", str, "WARNING"),
)


def check_truthy(value: Any, message: str) -> Any:
    """Check if the value is truthy."""
    if not value:
        raise ValueError(message)
    return value


def check_positive(value: int | float, message: str) -> int | float:
    """Check that a numeric setting is strictly positive."""
    if value <= 0:
        raise ValueError(message)
    return value


def parse_int_list(text: str) -> list[int]:
    """Parse a comma or space separated list of integers."""
    items = text.replace(",", " ").split()
    try:
        return [int(item) for item in items]
    except ValueError:
        raise ValueError(f"Expected a list of integers, got: {text!r}")


def load_toml(path: str | None) -> dict[str, Any]:
    """Load the optional TOML config file; a missing path yields no settings."""
    if not path:
        return {}
    file = Path(path).expanduser()
    if not file.is_file():
        raise ValueError(f"FTCL_CONFIG points to a missing file: {file}")
    with file.open("rb") as handle:
        data = tomllib.load(handle)
    # Accept either a flat file or a [ftcl] table.
    return data.get("ftcl", data)


class FtclConfig:
    """Configuration for ftcl computations.

    Values come from environment variables first, then the TOML file named by
    ``FTCL_CONFIG``, then built-in defaults.
    """

    def __init__(self, **overrides: Any):
        file_settings = load_toml(getenv("FTCL_CONFIG"))
        values: dict[str, Any] = {}
        for env_name, key, parser, default in _SETTINGS:
            if key in overrides and overrides[key] is not None:
                raw = overrides[key]
            elif getenv(env_name) is not None:
                raw = getenv(env_name)
            else:
                raw = file_settings.get(key, default)
            try:
                values[key] = parser(raw)
            except (TypeError, ValueError):
                raise ValueError(f"{env_name} must be of type {parser.__name__}, got {raw!r}")

        self._digits = check_positive(values["digits"], "FTCL_DIGITS must be positive")
        self._precision = check_positive(values["precision"], "FTCL_PRECISION must be positive")
        self._guard_digits = check_positive(values["guard_digits"], "FTCL_GUARD_DIGITS must be positive")
        self._nmax_safety = check_positive(values["nmax_safety"], "FTCL_NMAX_SAFETY must be positive")
        self._point_count_bound = check_positive(
            values["point_count_bound"], "FTCL_POINT_COUNT_BOUND must be positive")
        self._precision_cap = values["precision_cap"]
        self._cache_dir = Path(check_truthy(values["cache_dir"], "FTCL_CACHE must not be empty")).expanduser()
        self._curve_table = Path(check_truthy(values["curve_table"], "FTCL_CURVES must not be empty")).expanduser()
        self._workers = check_positive(values["workers"], "FTCL_WORKERS must be positive")
        self._log_level = values["log_level"].upper()

        if self._precision_cap < self._precision:
            raise ValueError(
                f"FTCL_PRECISION_CAP ({self._precision_cap}) must be at least "
                f"FTCL_PRECISION ({self._precision}). Raise the cap or lower the precision."
            )
        self._overrides = {k: v for k, v in overrides.items() if v is not None}

    @property
    def digits(self) -> int:
        """Complex working precision in decimal digits."""
        return self._digits

    @property
    def precision(self) -> int:
        """3-adic precision M (number of base-3 digits)."""
        return self._precision

    @property
    def guard_digits(self) -> int:
        return self._guard_digits

    @property
    def nmax_safety(self) -> float:
        return self._nmax_safety

    @property
    def point_count_bound(self) -> int:
        return self._point_count_bound

    @property
    def precision_cap(self) -> int:
        return self._precision_cap

    @property
    def cache_dir(self) -> Path:
        return self._cache_dir

    @property
    def curve_table(self) -> Path:
        return self._curve_table

    @property
    def workers(self) -> int:
        return self._workers

    @property
    def log_level(self) -> str:
        return self._log_level

    def with_overrides(self, **overrides: Any) -> "FtclConfig":
        """Return a new configuration with selected settings replaced."""
        merged = self._overrides.copy()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return FtclConfig(**merged)

    def as_dict(self) -> dict[str, Any]:
        """Effective settings as plain JSON-compatible values."""
        return {
            "digits": self._digits,
            "precision": self._precision,
            "guard_digits": self._guard_digits,
            "nmax_safety": self._nmax_safety,
            "point_count_bound": self._point_count_bound,
            "precision_cap": self._precision_cap,
            "workers": self._workers,
        }

    def fingerprint(self) -> str:
        """Stable hash of the settings that influence computed values."""
        payload = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


config = FtclConfig()
