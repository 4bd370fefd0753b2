"""Atomare Persistenz von CSV-Reports und JSON-Metadaten."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from src import __version__
from src.core.errors import InvalidParameterError
from src.utils.rng import ALGORITHM_ID

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Stabile Textdarstellung: Floats mit 17 signifikanten Stellen, '.' als Dezimalpunkt."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return format_value(value.item())
    return str(value)


def atomic_write_text(path: Path, text: str) -> Path:
    """Schreibt ueber eine Temporaerdatei im Zielordner und benennt danach um."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", newline="", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False
    )
    try:
        with handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(handle.name, path)
    except BaseException:
        # Keine halbfertigen Dateien liegen lassen.
        Path(handle.name).unlink(missing_ok=True)
        raise
    logger.debug("Datei atomar geschrieben: %s", path)
    return path


def calculate_sha256(file_path: Path) -> str:
    """Berechnet den SHA256-Hash fuer eine Datei."""
    sha256 = hashlib.sha256()
    with Path(file_path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(8192), b""):
            sha256.update(chunk)
    return sha256.hexdigest()


@dataclass
class Report:
    """Tabellarischer Report mit Kopfzeile und Metadaten fuer die JSON-Begleitdatei."""

    name: str
    columns: Sequence[str]
    rows: list[Sequence[Any]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise InvalidParameterError(
                f"Report {self.name}: {len(values)} Werte fuer {len(self.columns)} Spalten."
            )
        self.rows.append(values)

    def extend(self, rows: Iterable[Sequence[Any]]) -> None:
        for row in rows:
            self.add_row(*row)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\r\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(value) for value in row])
        return buffer.getvalue()

    def to_records(self) -> list[dict[str, str]]:
        return [dict(zip(self.columns, (format_value(value) for value in row))) for row in self.rows]


@dataclass(frozen=True)
class ReportPaths:
    data: Path
    sidecar: Path
    sha256: str


def run_metadata(config_mapping: dict[str, Any], seed: int, **extra: Any) -> dict[str, Any]:
    """Metadaten ohne Zeitstempel, damit gleiche Laeufe byte-gleiche Dateien liefern."""
    return {
        "package_version": __version__,
        "rng_algorithm": ALGORITHM_ID,
        "seed": seed,
        "config": config_mapping,
        **extra,
    }


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, float):
        return value if math.isfinite(value) else format_value(value)
    if hasattr(value, "item"):
        return _jsonable(value.item())
    if isinstance(value, Path):
        return str(value)
    return value


def write_report(report: Report, out_dir: Path, report_format: str = "csv") -> ReportPaths:
    """Schreibt Datendatei und JSON-Begleitdatei (mit SHA256 der Datendatei)."""
    out_dir = Path(out_dir)
    if report_format == "csv":
        data_path = atomic_write_text(out_dir / f"{report.name}.csv", report.to_csv())
    elif report_format == "json":
        payload = json.dumps({"columns": list(report.columns), "rows": report.to_records()}, indent=2, sort_keys=True)
        data_path = atomic_write_text(out_dir / f"{report.name}.json", payload + "\n")
    else:
        raise InvalidParameterError(f"Unbekanntes Reportformat: {report_format}")
    digest = calculate_sha256(data_path)
    sidecar = {
        "report": report.name,
        "data_file": data_path.name,
        "columns": list(report.columns),
        "row_count": len(report.rows),
        "sha256": digest,
        "metadata": _jsonable(report.metadata),
    }
    sidecar_path = atomic_write_text(
        out_dir / f"{report.name}.meta.json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
    logger.info("Report geschrieben: %s (%d Zeilen).", data_path, len(report.rows))
    return ReportPaths(data_path, sidecar_path, digest)
