"""On-disk cache for expensive exact data (a_n lists, modular symbol matrices)."""

import logging
import threading
from pathlib import Path
from typing import Callable, TypeVar

from .config import config

logger = logging.getLogger(__name__)

T = TypeVar("T")

_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(key: str) -> threading.Lock:
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


class Cache:
    """Named text entries under the configured cache directory.

    Entries are validated on read: a parser that raises ``ValueError`` marks
    the entry corrupt, the file is removed and the read reports a miss.
    """

    def __init__(self, directory: Path | None = None):
        self.directory = Path(directory) if directory is not None else config.cache_dir

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        pass

    def path(self, name: str) -> Path:
        if "/" in name or name.startswith("."):
            raise ValueError(f"Invalid cache entry name: {name!r}")
        return self.directory / name

    def lock(self, name: str) -> threading.Lock:
        """Lock serialising access to one entry across threads."""
        return _lock_for(str(self.path(name)))

    def read(self, name: str, parse: Callable[[str], T]) -> T | None:
        """Parsed entry, or None on a miss or a corrupt entry."""
        file = self.path(name)
        if not file.is_file():
            return None
        try:
            return parse(file.read_text())
        except (ValueError, IndexError, ZeroDivisionError) as exc:
            logger.warning("cache entry %s is corrupt (%s); regenerating", file, exc)
            file.unlink(missing_ok=True)
            return None

    def write(self, name: str, text: str) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        file = self.path(name)
        tmp = file.with_suffix(file.suffix + ".tmp")
        tmp.write_text(text)
        tmp.replace(file)
        logger.debug("cached %s (%d bytes)", file, len(text))

    def get_or_create(self, name: str, parse: Callable[[str], T], create: Callable[[], T],
                      dump: Callable[[T], str]) -> T:
        """Read an entry, generating and storing it on a miss."""
        with self.lock(name):
            value = self.read(name, parse)
            if value is not None:
                return value
            value = create()
            try:
                self.write(name, dump(value))
            except OSError as exc:
                logger.warning("could not write cache entry %s: %s", name, exc)
            return value


def parse_int_lines(text: str) -> list[int]:
    """One integer per line; raises ValueError on anything else."""
    lines = text.split()
    if not lines:
        raise ValueError("empty entry")
    return [int(line) for line in lines]


def dump_int_lines(values: list[int]) -> str:
    return "\n".join(str(v) for v in values) + "\n"
