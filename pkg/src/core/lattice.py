"""Frequenzgitter, Spektralfelder und Frequenzprojektionen."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from src.core.errors import InvalidParameterError, LatticeMismatchError
from src.utils.rng import complex_gaussian

logger = logging.getLogger(__name__)

# Mindestfaktor der Periodisierungsbox gegenueber max(lambda, 1).
BOX_FACTOR = 8.0


class Geometry(str, Enum):
    RT = "RT"
    TT = "TT"


class ProjectionMode(str, Enum):
    LE = "le"
    AT = "at"
    MEAN_ZERO_X2 = "mean_zero_x2"


def _floor_product(a: float, b: float) -> int:
    # Schutz gegen 16.000000000000004 -> 16 statt 15.99.. -> 15.
    return int(math.floor(a * b * (1.0 + 1e-12)))


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise InvalidParameterError(f"{name} muss endlich sein, erhielt {value!r}.")


@dataclass(frozen=True)
class FrequencyLattice:
    """Diskretes Modell von R x Z_{1/lambda}: xi1 in (1/L)Z, xi2 in (1/lambda)Z, beide bis N."""

    lam: float
    box_length: float
    cutoff: float
    geometry: Geometry = Geometry.RT

    def __post_init__(self) -> None:
        _require_finite(lam=self.lam, box_length=self.box_length, cutoff=self.cutoff)
        if self.lam <= 0 or self.box_length <= 0:
            raise InvalidParameterError("lambda und L muessen positiv sein.")
        if self.cutoff < 1:
            raise InvalidParameterError(f"Cutoff N muss >= 1 sein, erhielt {self.cutoff}.")
        object.__setattr__(self, "geometry", Geometry(self.geometry))

    @classmethod
    def torus(cls, lam: float, cutoff: float) -> "FrequencyLattice":
        """Kompaktes Gitter fuer T_lambda x T_lambda; ohne R-Faktor entfaellt das Box-Kriterium."""
        return cls(lam=lam, box_length=lam, cutoff=cutoff, geometry=Geometry.TT)

    @property
    def k1_max(self) -> int:
        return _floor_product(self.cutoff, self.box_length)

    @property
    def k2_max(self) -> int:
        return _floor_product(self.cutoff, self.lam)

    @property
    def shape(self) -> tuple[int, int]:
        """(Anzahl xi2, Anzahl xi1): xi2 ist die langsame Achse."""
        return (2 * self.k2_max + 1, 2 * self.k1_max + 1)

    @property
    def cardinality(self) -> int:
        rows, cols = self.shape
        return rows * cols

    @property
    def point_weight(self) -> float:
        """Gewicht (1/L)(1/lambda) pro Gitterpunkt."""
        return 1.0 / (self.box_length * self.lam)

    @property
    def volume(self) -> float:
        return self.box_length * self.lam

    @cached_property
    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Ganzzahlige Indizes (k1, k2) als Gitter der Form shape."""
        k1 = np.arange(-self.k1_max, self.k1_max + 1)
        k2 = np.arange(-self.k2_max, self.k2_max + 1)
        grid_k1, grid_k2 = np.meshgrid(k1, k2)
        grid_k1.setflags(write=False)
        grid_k2.setflags(write=False)
        return grid_k1, grid_k2

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Physikalische Frequenzen (xi1, xi2) als Gitter der Form shape."""
        grid_k1, grid_k2 = self.indices
        xi1 = grid_k1 / self.box_length
        xi2 = grid_k2 / self.lam
        xi1.setflags(write=False)
        xi2.setflags(write=False)
        return xi1, xi2

    @cached_property
    def max_norm(self) -> np.ndarray:
        xi1, xi2 = self.frequencies
        norm = np.maximum(np.abs(xi1), np.abs(xi2))
        norm.setflags(write=False)
        return norm

    def doubled_box(self) -> "FrequencyLattice":
        """Gleiches Gitter mit verdoppelter x1-Periode (Konvergenztest der Box)."""
        if self.geometry is not Geometry.RT:
            raise InvalidParameterError("Boxverdopplung ist nur fuer RT-Geometrie definiert.")
        return FrequencyLattice(self.lam, 2.0 * self.box_length, self.cutoff, self.geometry)

    def with_box(self, box_length: float) -> "FrequencyLattice":
        return FrequencyLattice(self.lam, box_length, self.cutoff, self.geometry)

    def header(self) -> str:
        return f"lattice {self.lam!r} {self.box_length!r} {self.cutoff!r} {self.geometry.value}"


def build_lattice(lam: float, box_length: float, cutoff: float, geometry: str | Geometry = "RT") -> FrequencyLattice:
    """Baut ein Gitter mit Box-Kriterium L >= 8 max(lambda, 1).

    Fuer TT wird L = lambda erzwungen; das Box-Kriterium verwirft diese Wahl.
    Torusgitter entstehen ueber FrequencyLattice.torus.
    """
    _require_finite(lam=lam, box_length=box_length, cutoff=cutoff)
    geometry = Geometry(geometry)
    if geometry is Geometry.TT:
        logger.debug("TT-Geometrie: setze L = lambda = %s.", lam)
        box_length = lam
    if lam < 1:
        raise InvalidParameterError(f"lambda muss >= 1 sein, erhielt {lam}.")
    if cutoff < 1:
        raise InvalidParameterError(f"N muss >= 1 sein, erhielt {cutoff}.")
    if box_length < BOX_FACTOR * max(lam, 1.0):
        raise InvalidParameterError(
            f"L = {box_length} < {BOX_FACTOR:g} * max(lambda, 1) = {BOX_FACTOR * max(lam, 1.0)}."
        )
    lattice = FrequencyLattice(lam, box_length, cutoff, geometry)
    logger.debug("Gitter gebaut: %s mit %d Punkten.", lattice.header(), lattice.cardinality)
    return lattice


@dataclass(frozen=True)
class SpectralField:
    """Fourierkoeffizienten phi_hat(xi) auf einem FrequencyLattice."""

    lattice: FrequencyLattice
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, copy=True)
        if not np.iscomplexobj(coeffs):
            coeffs = coeffs.astype(np.float64)
        else:
            coeffs = coeffs.astype(np.complex128)
        if coeffs.shape != self.lattice.shape:
            raise LatticeMismatchError(
                f"Koeffizientenform {coeffs.shape} passt nicht zu Gitterform {self.lattice.shape}."
            )
        if not np.all(np.isfinite(coeffs)):
            raise InvalidParameterError("Spektralfeld enthaelt NaN oder Inf.")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, lattice: FrequencyLattice) -> "SpectralField":
        return cls(lattice, np.zeros(lattice.shape, dtype=np.complex128))

    @classmethod
    def single_mode(cls, lattice: FrequencyLattice, k1: int, k2: int, value: complex = 1.0) -> "SpectralField":
        """Feld mit genau einem Koeffizienten am Index (k1, k2)."""
        if abs(k1) > lattice.k1_max or abs(k2) > lattice.k2_max:
            raise InvalidParameterError(f"Modus ({k1}, {k2}) liegt ausserhalb des Gitters.")
        coeffs = np.zeros(lattice.shape, dtype=np.complex128)
        coeffs[k2 + lattice.k2_max, k1 + lattice.k1_max] = value
        return cls(lattice, coeffs)

    @classmethod
    def from_modes(cls, lattice: FrequencyLattice, modes: dict[tuple[int, int], complex]) -> "SpectralField":
        coeffs = np.zeros(lattice.shape, dtype=np.complex128)
        for (k1, k2), value in modes.items():
            if abs(k1) > lattice.k1_max or abs(k2) > lattice.k2_max:
                raise InvalidParameterError(f"Modus ({k1}, {k2}) liegt ausserhalb des Gitters.")
            coeffs[k2 + lattice.k2_max, k1 + lattice.k1_max] = value
        return cls(lattice, coeffs)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.lattice, coeffs)

    def modulus(self) -> "SpectralField":
        """Nichtnegatives Feld f = |phi_hat|."""
        return SpectralField(self.lattice, np.abs(self.coeffs))

    def scaled(self, factor: complex) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * factor)

    def normalized(self) -> "SpectralField":
        norm = l2_norm(self)
        if norm == 0.0:
            raise InvalidParameterError("Nullfeld kann nicht normiert werden.")
        return self.scaled(1.0 / norm)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def support(self) -> np.ndarray:
        """Flache Indizes (xi2-major wie das Gitter) der Nicht-Null-Koeffizienten."""
        return np.flatnonzero(self.coeffs.ravel())


def ensure_same_lattice(field_: SpectralField, lattice: FrequencyLattice) -> None:
    if field_.lattice != lattice:
        raise LatticeMismatchError(
            f"Feld lebt auf {field_.lattice.header()}, erwartet {lattice.header()}."
        )


def project(field_: SpectralField, mode: ProjectionMode | str, n: float | None = None) -> SpectralField:
    """Frequenzprojektion P_{<=N}, P_N (dyadische Schale) oder Mittelwertfreiheit in x2."""
    mode = ProjectionMode(mode)
    lattice = field_.lattice
    if mode is ProjectionMode.MEAN_ZERO_X2:
        mask = lattice.indices[1] != 0
    else:
        if n is None:
            raise InvalidParameterError(f"Projektion {mode.value} braucht ein N.")
        _require_finite(n=n)
        if n > lattice.cutoff:
            raise InvalidParameterError(f"N = {n} liegt ueber dem Gitter-Cutoff {lattice.cutoff}.")
        norm = lattice.max_norm
        if mode is ProjectionMode.LE:
            mask = norm <= n
        elif n <= 1:
            mask = norm <= n
        else:
            mask = (norm > n / 2.0) & (norm <= n)
    return field_.with_coeffs(np.where(mask, field_.coeffs, 0))


def gaussian_field(
    lattice: FrequencyLattice,
    rng: np.random.Generator,
    n: float | None = None,
    mode: ProjectionMode | str = ProjectionMode.LE,
) -> SpectralField:
    """Komplexe Gauss-Koeffizienten, projiziert mit mode auf die Stufe n (Standard: ganzes Gitter)."""
    values = complex_gaussian(rng, lattice.shape)
    field_ = SpectralField(lattice, values)
    return project(field_, mode, lattice.cutoff if n is None else n)


def wave_packet_field(
    lattice: FrequencyLattice,
    rng: np.random.Generator,
    n: float | None = None,
    packets: int = 8,
    spread: float = 2.0,
    mode: ProjectionMode | str = ProjectionMode.LE,
) -> SpectralField:
    """Summe in x1 lokalisierter Wellenpakete um zufaellige Zentren in [-spread, spread].

    Die Koeffizienten sind Abtastwerte einer von L unabhaengigen glatten Funktion von xi1;
    die Ziehung haengt nur von rng, lambda und N ab. Verdoppeln der Box verfeinert also
    nur die Abtastung desselben Profils.
    """
    level = lattice.cutoff if n is None else n
    if packets < 1 or spread < 0 or 2 * spread >= lattice.box_length:
        raise InvalidParameterError(
            f"Wellenpakete brauchen packets >= 1 und 2*spread < L, erhielt {packets}, {spread}."
        )
    centers = rng.uniform(-spread, spread, size=packets)
    amplitudes = complex_gaussian(rng, (packets, lattice.shape[0]))
    xi1, xi2 = lattice.frequencies
    # Am Rand |xi| = N ist die Huelle e^-9, der harte Schnitt bleibt unsichtbar.
    envelope = np.exp(-9.0 * (xi1**2 + xi2**2) / level**2)
    coeffs = np.zeros(lattice.shape, dtype=np.complex128)
    for center, amplitude in zip(centers, amplitudes):
        coeffs += amplitude[:, None] * np.exp(-2j * np.pi * xi1 * center)
    return project(SpectralField(lattice, coeffs * envelope), mode, level)


def dyadic_range(cutoff: float) -> list[int]:
    """Dyadische Stufen 1, 2, 4, ... bis einschliesslich cutoff."""
    levels = [1]
    while levels[-1] * 2 <= cutoff:
        levels.append(levels[-1] * 2)
    return levels


def l2_norm(field_: SpectralField) -> float:
    """Gewichtete l2-Norm mit (1/L)(1/lambda) pro Gitterpunkt."""
    total = np.sum(np.abs(field_.coeffs) ** 2)
    return float(np.sqrt(total * field_.lattice.point_weight))


def format_field(field_: SpectralField) -> str:
    """Textformat: Kopfzeile 'lattice lambda L N geometry', dann 'k1 k2 re im' je Punkt."""
    lattice = field_.lattice
    grid_k1, grid_k2 = lattice.indices
    coeffs = field_.coeffs.astype(np.complex128)
    lines = [lattice.header()]
    for k1, k2, value in zip(grid_k1.ravel(), grid_k2.ravel(), coeffs.ravel()):
        lines.append(f"{int(k1)} {int(k2)} {float(value.real)!r} {float(value.imag)!r}")
    return "\n".join(lines) + "\n"


def parse_field(text: str) -> SpectralField:
    """Liest das Textformat von format_field zurueck."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise InvalidParameterError("Leere Felddatei.")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "lattice":
        raise InvalidParameterError(f"Ungueltige Kopfzeile: {lines[0]!r}")
    lattice = FrequencyLattice(float(header[1]), float(header[2]), float(header[3]), Geometry(header[4]))
    coeffs = np.zeros(lattice.shape, dtype=np.complex128)
    if len(lines) - 1 != lattice.cardinality:
        raise InvalidParameterError(
            f"Felddatei hat {len(lines) - 1} Punkte, erwartet {lattice.cardinality}."
        )
    for line in lines[1:]:
        k1, k2, real, imag = line.split()
        coeffs[int(k2) + lattice.k2_max, int(k1) + lattice.k1_max] = complex(float(real), float(imag))
    return SpectralField(lattice, coeffs)


def write_field(field_: SpectralField, path: str | Path) -> Path:
    """Schreibt ein Feld atomar in das Textformat."""
    from src.core.reports import atomic_write_text

    return atomic_write_text(Path(path), format_field(field_))


def read_field(path: str | Path) -> SpectralField:
    return parse_field(Path(path).read_text(encoding="utf-8"))
