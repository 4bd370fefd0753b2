"""Lineare Fluesse e^{itH(D)} als Spektralmultiplikatoren und ihre Raum-Zeit-Abtastung."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np
import scipy.fft

from src.core.errors import InvalidParameterError, ResourceBudgetError
from src.core.lattice import FrequencyLattice, SpectralField, ensure_same_lattice
from src.core.symbols import DispersionSymbol, TimeWindow, required_samples

logger = logging.getLogger(__name__)

_BYTES_PER_SAMPLE = np.dtype(np.complex128).itemsize
# Zielgroesse eines Zeitblocks beim Streamen ueber das Fenster.
_CHUNK_BYTES = 32 * 1024 * 1024


@dataclass(frozen=True)
class EvolutionPlan:
    """Symbol, Zeitfenster, Gitter und (mindestens zweifach ueberabgetastetes) Ortsgitter."""

    symbol: DispersionSymbol
    window: TimeWindow
    lattice: FrequencyLattice
    grid_shape: tuple[int, int]
    memory_budget_bytes: float = 512 * 1024 * 1024
    workers: int = 1

    def __post_init__(self) -> None:
        rows, cols = self.lattice.shape
        m2, m1 = self.grid_shape
        if m1 < 2 * cols or m2 < 2 * rows:
            raise InvalidParameterError(
                f"Ortsgitter {self.grid_shape} unterschreitet die zweifache Ueberabtastung von {self.lattice.shape}."
            )
        needed = required_samples(self.lattice.cutoff, self.window.span)
        if self.window.samples < needed:
            raise InvalidParameterError(
                f"{self.window.samples} Zeitstuetzstellen < {needed} (8 Punkte pro Periode 1/(2N^2))."
            )

    @classmethod
    def create(
        cls,
        lattice: FrequencyLattice,
        symbol: DispersionSymbol,
        window: TimeWindow | None = None,
        memory_budget_mb: float = 512.0,
        workers: int = 1,
    ) -> "EvolutionPlan":
        """Plan mit schneller FFT-Groesse >= 2 * Frequenzanzahl je Richtung."""
        if window is None:
            window = TimeWindow.for_cutoff(lattice.cutoff)
        rows, cols = lattice.shape
        grid_shape = (scipy.fft.next_fast_len(2 * rows), scipy.fft.next_fast_len(2 * cols))
        return cls(symbol, window, lattice, grid_shape, memory_budget_mb * 1024 * 1024, workers)

    @cached_property
    def phase_rate(self) -> np.ndarray:
        """H(xi) auf dem Gitter; Multiplikator ist e(-t H)."""
        xi1, xi2 = self.lattice.frequencies
        rate = np.asarray(self.symbol.eval(xi1, xi2), dtype=float)
        rate.setflags(write=False)
        return rate

    @cached_property
    def cell_volume(self) -> float:
        m2, m1 = self.grid_shape
        return self.lattice.volume / (m1 * m2)

    @cached_property
    def _wrapped_rows(self) -> np.ndarray:
        return np.mod(self.lattice.indices[1][:, 0], self.grid_shape[0])

    @cached_property
    def _wrapped_cols(self) -> np.ndarray:
        return np.mod(self.lattice.indices[0][0, :], self.grid_shape[1])

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Ortswerte u(x) = w sum_xi c_xi e(x . xi) auf dem Gitter; Stapel ueber fuehrende Achsen."""
        coeffs = np.asarray(coeffs)
        m2, m1 = self.grid_shape
        padded = np.zeros(coeffs.shape[:-2] + (m2, m1), dtype=np.complex128)
        padded[..., self._wrapped_rows[:, None], self._wrapped_cols[None, :]] = coeffs
        values = scipy.fft.ifft2(padded, axes=(-2, -1), workers=self.workers)
        return values * (m1 * m2 * self.lattice.point_weight)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Koeffizienten auf dem Frequenzgitter aus Ortswerten (Umkehrung von synthesize)."""
        m2, m1 = self.grid_shape
        spectrum = scipy.fft.fft2(values, axes=(-2, -1), workers=self.workers)
        picked = spectrum[..., self._wrapped_rows[:, None], self._wrapped_cols[None, :]]
        return picked / (m1 * m2 * self.lattice.point_weight)

    def tensor_bytes(self) -> float:
        m2, m1 = self.grid_shape
        return float(self.window.samples) * m1 * m2 * _BYTES_PER_SAMPLE

    def chunk_size(self) -> int:
        m2, m1 = self.grid_shape
        per_slice = 3 * m1 * m2 * _BYTES_PER_SAMPLE
        return max(1, min(self.window.samples, _CHUNK_BYTES // per_slice))


def evolve(plan: EvolutionPlan, phi: SpectralField, t: float) -> SpectralField:
    """Multipliziert die Koeffizienten mit e(-t H(xi)); unitaer auf den Koeffizienten."""
    ensure_same_lattice(phi, plan.lattice)
    if not np.isfinite(t):
        raise InvalidParameterError(f"Zeit muss endlich sein, erhielt {t}.")
    return phi.with_coeffs(phi.coeffs * np.exp(-2j * np.pi * t * plan.phase_rate))


def evolved_coeffs(plan: EvolutionPlan, coeffs: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Stapel der entwickelten Koeffizienten, Form (len(times), *gitter)."""
    times = np.asarray(times, dtype=float)
    return coeffs[None, :, :] * np.exp(-2j * np.pi * times[:, None, None] * plan.phase_rate[None, :, :])


def iter_space_time(plan: EvolutionPlan, phi: SpectralField) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Liefert Bloecke (Quadraturgewichte, u(t_j, x)) ueber alle Zeitstuetzstellen."""
    ensure_same_lattice(phi, plan.lattice)
    nodes = plan.window.nodes
    weights = plan.window.weights
    step = plan.chunk_size()
    for start in range(0, len(nodes), step):
        stop = min(start + step, len(nodes))
        block = evolved_coeffs(plan, phi.coeffs, nodes[start:stop])
        yield weights[start:stop], plan.synthesize(block)


def sample_space_time(plan: EvolutionPlan, phi: SpectralField) -> np.ndarray:
    """Tensor u(t_j, x) der Form (samples, M2, M1); Budgetverletzung bricht vorab ab."""
    ensure_same_lattice(phi, plan.lattice)
    required = plan.tensor_bytes()
    if required > plan.memory_budget_bytes:
        raise ResourceBudgetError(
            f"Raum-Zeit-Tensor braucht {required / 2**20:.1f} MiB, Budget {plan.memory_budget_bytes / 2**20:.1f} MiB.",
            required,
            plan.memory_budget_bytes,
        )
    logger.debug("Taste %d Zeitschichten auf Gitter %s ab.", plan.window.samples, plan.grid_shape)
    blocks = [values for _, values in iter_space_time(plan, phi)]
    return np.concatenate(blocks, axis=0)
