import contextlib
import logging
import os
import tempfile
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler

from .constants import DEFAULT_LOG_LEVEL, LOG_LEVEL_ENV_VAR, PROG_NAME


@contextlib.contextmanager
def cd_to_directory(path: Path):
    """Changes working directory and returns to previous on exit."""
    prev_cwd = Path.cwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(prev_cwd)


def log_level_from_env() -> str:
    return os.environ.get(LOG_LEVEL_ENV_VAR, DEFAULT_LOG_LEVEL).upper()


def configure_logging(level: str | int | None = None) -> logging.Logger:
    """Install a single RichHandler on the package logger.

    The level defaults to the SPECFORGE_LOG environment variable. Repeated
    calls replace the handler instead of stacking them.
    """
    level = level if level is not None else log_level_from_env()
    if isinstance(level, str) and not isinstance(logging.getLevelName(level), int):
        level = DEFAULT_LOG_LEVEL
    logger = logging.getLogger(PROG_NAME)
    for handler in [h for h in logger.handlers if isinstance(h, RichHandler)]:
        logger.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    return logger


def atomic_write_text(path: Path, text: str, encoding: str = "utf-8") -> Path:
    """Write `text` to a sibling temporary file and rename it over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding=encoding, newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
    return path
