"""Konfigurationslogik fuer das Strichartz-Labor."""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from src.core.errors import InvalidParameterError

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "STRICHARTZ_LAB_OUT"
ENV_THREADS = "STRICHARTZ_LAB_THREADS"

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "settings.yaml"


@dataclass
class LatticeSettings:
    """Gitterparameter: Umfang lambda, Boxlaenge L, Cutoff-Liste und Geometrie."""

    lam: float = 1.0
    box_length: float = 8.0
    n_list: list[int] = field(default_factory=lambda: [8, 16, 32, 64])
    geometry: str = "RT"


@dataclass
class WindowSettings:
    t0: float = 0.0
    t1: float = 1.0
    # Untergrenze fuer Zeitstuetzstellen; die Abtastregel kann mehr verlangen.
    min_samples: int = 16
    bump: str = "sharp"
    smooth_tail: float = 200.0


@dataclass
class FunctionalSettings:
    c_a: float = 100.0
    theta: float = 1.0
    theta2: float = 2.0
    bound_constant: float = 1.0
    quad_budget: float = 2.0e7
    c_a_sweep: list[float] = field(default_factory=lambda: [10.0, 100.0, 1000.0])


@dataclass
class MeasureSettings:
    complexity_budget: int = 64
    max_degree: int = 4
    root_tol: float = 1e-12
    quad_rel: float = 1e-6
    quad_abs: float = 1e-9
    similar: float = 3.0
    much_greater: float = 100.0
    panels: int = 8
    corpus_size: int = 50
    corpus_lambdas: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0])


@dataclass
class BilinearSettings:
    n1_list: list[int] = field(default_factory=lambda: [16, 32, 64, 128, 256])
    n2_list: list[int] = field(default_factory=lambda: [1, 2, 4, 8])
    lambda_list: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0])
    theta_res: float = 1.0
    comparability: float = 2.0


@dataclass
class ExtremizerSettings:
    max_iter: int = 200
    tol: float = 1e-4
    stall_window: int = 5
    max_halvings: int = 6


@dataclass
class NlsSettings:
    sign: str = "defocusing"
    dt_factor: float = 8.0
    smallness: float = 0.1
    diagnostic_stride: int = 8
    checkpoint_stride: int = 0
    picard_max_iter: int = 12
    contraction_factor: float = 0.5
    intervals: int = 1


@dataclass
class HarnessSettings:
    scenario: str = "rt-hyperbolic"
    ensemble_size: int = 64
    seed: int = 7
    threads: int = 1
    out_dir: str = "./output"
    report_format: str = "csv"
    gate_tolerance: float = 0.05
    memory_budget_mb: float = 512.0
    acceptance: list[str] = field(default_factory=list)


_SECTIONS: dict[str, type] = {
    "lattice": LatticeSettings,
    "window": WindowSettings,
    "functional": FunctionalSettings,
    "measure": MeasureSettings,
    "bilinear": BilinearSettings,
    "extremizer": ExtremizerSettings,
    "nls": NlsSettings,
    "harness": HarnessSettings,
}


@dataclass
class RunConfig:
    """Vollstaendig serialisierbare Laufkonfiguration; Config + Seed reichen zur Reproduktion."""

    lattice: LatticeSettings = field(default_factory=LatticeSettings)
    window: WindowSettings = field(default_factory=WindowSettings)
    functional: FunctionalSettings = field(default_factory=FunctionalSettings)
    measure: MeasureSettings = field(default_factory=MeasureSettings)
    bilinear: BilinearSettings = field(default_factory=BilinearSettings)
    extremizer: ExtremizerSettings = field(default_factory=ExtremizerSettings)
    nls: NlsSettings = field(default_factory=NlsSettings)
    harness: HarnessSettings = field(default_factory=HarnessSettings)

    @classmethod
    def from_mapping(cls, mapping: dict[str, Any] | None) -> "RunConfig":
        """Baut eine RunConfig aus einem (YAML-)Dictionary; unbekannte Schluessel sind Fehler."""
        mapping = mapping or {}
        sections: dict[str, Any] = {}
        for name, section_type in _SECTIONS.items():
            raw = mapping.get(name) or {}
            if not isinstance(raw, dict):
                raise InvalidParameterError(f"Abschnitt '{name}' muss eine Zuordnung sein.")
            known = {item.name: item for item in dataclasses.fields(section_type)}
            unknown = sorted(set(raw) - set(known))
            if unknown:
                raise InvalidParameterError(
                    f"Unbekannte Schluessel in '{name}': {', '.join(unknown)}"
                )
            values = {key: _coerce(known[key], value) for key, value in raw.items()}
            sections[name] = section_type(**values)
        config = cls(**sections)
        config.validate()
        return config

    def to_mapping(self) -> dict[str, Any]:
        """Liefert die Konfiguration als reines Dictionary."""
        return {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}

    def dump_yaml(self) -> str:
        return yaml.safe_dump(self.to_mapping(), sort_keys=False, allow_unicode=True)

    @classmethod
    def load_yaml(cls, text: str) -> "RunConfig":
        return cls.from_mapping(yaml.safe_load(text))

    def with_env_overrides(self, environ: dict[str, str] | None = None) -> "RunConfig":
        """Uebernimmt Ausgabeordner und Threadzahl aus der Umgebung (nur diese beiden)."""
        environ = dict(os.environ if environ is None else environ)
        harness = self.harness
        if environ.get(ENV_OUTPUT_DIR):
            harness = dataclasses.replace(harness, out_dir=environ[ENV_OUTPUT_DIR])
        if environ.get(ENV_THREADS):
            try:
                threads = int(environ[ENV_THREADS])
            except ValueError as exc:
                raise InvalidParameterError(
                    f"{ENV_THREADS} ist keine ganze Zahl: {environ[ENV_THREADS]!r}"
                ) from exc
            harness = dataclasses.replace(harness, threads=threads)
        return dataclasses.replace(self, harness=harness)

    def validate(self) -> None:
        """Prueft Wertebereiche, die ueberall gelten muessen."""
        for name in _SECTIONS:
            for key, value in dataclasses.asdict(getattr(self, name)).items():
                values = value if isinstance(value, list) else [value]
                for item in values:
                    if isinstance(item, float) and not math.isfinite(item):
                        raise InvalidParameterError(f"{name}.{key} ist nicht endlich: {item}")
        if self.lattice.geometry not in ("RT", "TT"):
            raise InvalidParameterError(f"Unbekannte Geometrie: {self.lattice.geometry}")
        if self.nls.sign not in ("focusing", "defocusing"):
            raise InvalidParameterError(f"Unbekanntes Vorzeichen: {self.nls.sign}")
        if self.harness.report_format not in ("csv", "json"):
            raise InvalidParameterError(f"Unbekanntes Format: {self.harness.report_format}")
        if self.harness.threads < 1:
            raise InvalidParameterError("harness.threads muss >= 1 sein.")
        if self.window.bump not in ("sharp", "smooth"):
            raise InvalidParameterError(f"Unbekanntes Zeitfenster: {self.window.bump}")
        if not 0.0 < self.nls.contraction_factor < 1.0:
            raise InvalidParameterError(f"nls.contraction_factor muss in (0, 1) liegen, erhielt {self.nls.contraction_factor}.")


def _coerce(declared: dataclasses.Field, value: Any) -> Any:
    """Bringt YAML-Werte auf den deklarierten Typ (int -> float, Tupel -> Liste)."""
    annotation = str(declared.type)
    if value is None:
        return value
    if annotation.startswith("list"):
        items = list(value) if isinstance(value, (list, tuple)) else [value]
        if "float" in annotation:
            return [float(item) for item in items]
        if "int" in annotation:
            return [int(item) for item in items]
        return [str(item) for item in items]
    if annotation == "float":
        return float(value)
    if annotation == "int":
        if isinstance(value, float) and not value.is_integer():
            raise InvalidParameterError(f"{declared.name} erwartet eine ganze Zahl, erhielt {value}.")
        return int(value)
    if annotation == "str":
        return str(value)
    return value


@dataclass
class Config:
    """Kapselt die YAML-Konfiguration und bietet komfortable Helfer."""

    config_path: Path
    data: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # Nach der Initialisierung die Daten aus der Datei laden.
        self.config_path = Path(self.config_path)
        self._runtime_keys: set[str] = {"config_path"}
        self.reload()

    def reload(self) -> None:
        """Laedt die Konfiguration neu aus der YAML-Datei."""
        if self.config_path.exists():
            with self.config_path.open("r", encoding="utf-8") as config_file:
                self.data = yaml.safe_load(config_file) or {}
        else:
            logger.warning("Keine Konfiguration unter %s, nutze Standardwerte.", self.config_path)
            self.data = {}
        self.data["config_path"] = str(self.config_path)

    def save(self, new_data: dict[str, Any]) -> None:
        """Schreibt eine aktualisierte Konfiguration in die YAML-Datei."""
        self.data.update(new_data)
        self._write_to_disk()

    def _write_to_disk(self) -> None:
        """Persistiert die Konfiguration ohne Laufzeitdaten."""
        payload = {
            key: value
            for key, value in self.data.items()
            if key not in self._runtime_keys
        }
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        with self.config_path.open("w", encoding="utf-8") as config_file:
            yaml.safe_dump(payload, config_file, sort_keys=False, allow_unicode=True)

    def run_config(self) -> RunConfig:
        """Typisierte Sicht auf die Datei inklusive Umgebungs-Overrides."""
        payload = {key: value for key, value in self.data.items() if key in _SECTIONS}
        return RunConfig.from_mapping(payload).with_env_overrides()

    def record_value(self, section: str, key: str, value: Any) -> RunConfig:
        """Traegt einen kalibrierten Wert in einen Abschnitt ein und schreibt die Datei.

        Der Wert wird vorher gegen RunConfig geprueft; liefert die neue typisierte Sicht.
        """
        merged = dict(self.data.get(section) or {})
        merged[key] = value
        payload = {name: item for name, item in self.data.items() if name in _SECTIONS}
        payload[section] = merged
        checked = RunConfig.from_mapping(payload)
        self.save({section: merged})
        logger.info("%s.%s = %r in %s gespeichert.", section, key, value, self.config_path)
        return checked
