"""Logging-Konfiguration: farbige Konsole und rotierende Logdateien."""

from __future__ import annotations

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from colorama import Fore, Style, just_fix_windows_console

_LEVEL_COLORS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}

_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"


class ColorFormatter(logging.Formatter):
    """Faerbt nur den Level-Namen ein."""

    def format(self, record: logging.LogRecord) -> str:
        original = record.levelname
        color = _LEVEL_COLORS.get(record.levelno, "")
        record.levelname = f"{color}{original:<8}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = original


def configure_logging(level: str | int = "INFO", log_dir: str | Path | None = "logs") -> logging.Logger:
    """Richtet den Root-Logger ein; mehrfacher Aufruf ersetzt die eigenen Handler."""
    just_fix_windows_console()
    root = logging.getLogger()
    root.setLevel(level if isinstance(level, int) else level.upper())
    for handler in list(root.handlers):
        if getattr(handler, "_strichartz_lab", False):
            root.removeHandler(handler)
            handler.close()

    console = logging.StreamHandler()
    console.setFormatter(ColorFormatter(_FORMAT))
    console._strichartz_lab = True  # type: ignore[attr-defined]
    root.addHandler(console)

    if log_dir is not None:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            directory / "strichartz_lab.log", maxBytes=2 * 1024 * 1024, backupCount=5, encoding="utf-8"
        )
        file_handler.setFormatter(logging.Formatter(_FORMAT))
        file_handler._strichartz_lab = True  # type: ignore[attr-defined]
        root.addHandler(file_handler)
    return root
