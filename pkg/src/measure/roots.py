"""Nullstellenisolation auf Schnitten w2 = const und Schnittlaengen."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.optimize import brentq

from src.core.errors import RootIsolationError
from src.measure.semialgebraic import SemiAlgebraicSet

logger = logging.getLogger(__name__)

DEFAULT_ROOT_TOL = 1e-12
DEFAULT_MAX_DEGREE = 4
# Relative Schwelle, unter der fuehrende Koeffizienten als Null gelten.
_COEFF_EPS = 1e-14


def _trim(coeffs: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(coeffs))) if len(coeffs) else 0.0
    if scale == 0.0:
        return np.zeros(0)
    nonzero = np.flatnonzero(np.abs(coeffs) > _COEFF_EPS * scale)
    return coeffs[nonzero[0]:]


def isolate_roots(
    coeffs: np.ndarray,
    lo: float,
    hi: float,
    tol: float = DEFAULT_ROOT_TOL,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> list[float]:
    """Reelle Nullstellen eines univariaten Polynoms in [lo, hi].

    Das Intervall wird an kritischen Punkten und gleichmaessig in 4 * Grad Stuecke
    zerlegt; jedes Stueck mit Vorzeichenwechsel wird mit brentq auf tol verfeinert.
    Beruehrende Doppelnullstellen ohne Vorzeichenwechsel aendern keine Laenge.
    """
    coeffs = _trim(np.asarray(coeffs, dtype=float))
    degree = len(coeffs) - 1
    if degree <= 0:
        return []
    if degree > max_degree:
        raise RootIsolationError(f"Schnittpolynom vom Grad {degree} ueber Grenze {max_degree}.")
    points = set(np.linspace(lo, hi, 4 * degree + 1).tolist())
    if degree > 1:
        for critical in np.roots(np.polyder(coeffs)):
            if abs(critical.imag) <= 1e-9 * max(1.0, abs(critical.real)) and lo < critical.real < hi:
                points.add(float(critical.real))
    grid = sorted(points)
    values = np.polyval(coeffs, grid)
    roots: list[float] = [x for x, value in zip(grid, values) if value == 0.0]
    for a, b, fa, fb in zip(grid, grid[1:], values, values[1:]):
        if fa * fb < 0:
            try:
                roots.append(brentq(lambda x: np.polyval(coeffs, x), a, b, xtol=tol, rtol=4 * np.finfo(float).eps))
            except (ValueError, RuntimeError) as exc:
                raise RootIsolationError(f"Verfeinerung in [{a}, {b}] fehlgeschlagen: {exc}") from exc
    return sorted(set(roots))


def slice_intervals(
    semi_set: SemiAlgebraicSet,
    w2: float,
    tol: float = DEFAULT_ROOT_TOL,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> list[tuple[float, float]]:
    """Zerlegt {w1 : (w1, w2) in E} in disjunkte abgeschlossene Intervalle."""
    box = semi_set.box
    if not (box.y0 <= w2 <= box.y1):
        return []
    breakpoints = {box.x0, box.x1}
    for constraint in semi_set.constraints:
        breakpoints.update(isolate_roots(constraint.slice_coeffs(w2), box.x0, box.x1, tol, max_degree))
    grid = np.array(sorted(breakpoints))
    if len(grid) < 2:
        return []
    mids = (grid[:-1] + grid[1:]) / 2
    inside = semi_set.contains(mids, w2)
    intervals: list[tuple[float, float]] = []
    for a, b, hit in zip(grid[:-1], grid[1:], inside):
        if not hit or b <= a:
            continue
        if intervals and intervals[-1][1] == a:
            intervals[-1] = (intervals[-1][0], float(b))
        else:
            intervals.append((float(a), float(b)))
    return intervals


def slice_length(
    semi_set: SemiAlgebraicSet,
    w2: float,
    tol: float = DEFAULT_ROOT_TOL,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> float:
    """Gesamtlaenge des Schnitts bei w2."""
    return math.fsum(b - a for a, b in slice_intervals(semi_set, w2, tol, max_degree))


def scan_slice_length(semi_set: SemiAlgebraicSet, w2: float, step: float = 1e-6) -> float:
    """Vergleichswert per dichter Abtastung mit Schrittweite step (Mittelpunktregel)."""
    box = semi_set.box
    if not (box.y0 <= w2 <= box.y1):
        return 0.0
    count = max(1, int(math.ceil((box.x1 - box.x0) / step)))
    width = (box.x1 - box.x0) / count
    total = 0
    block = 1 << 20
    for start in range(0, count, block):
        stop = min(start + block, count)
        mids = box.x0 + (np.arange(start, stop) + 0.5) * width
        total += int(np.count_nonzero(semi_set.contains(mids, w2)))
    return total * width


def monotonicity_changes(lengths, rel_tol: float = 1e-9) -> int:
    """Anzahl der Wechsel zwischen Steigen und Fallen einer Folge von Schnittlaengen."""
    lengths = np.asarray(lengths, dtype=float)
    if len(lengths) < 3:
        return 0
    scale = max(float(np.max(np.abs(lengths))), 1.0)
    diffs = np.diff(lengths)
    signs = np.sign(np.where(np.abs(diffs) <= rel_tol * scale, 0.0, diffs))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
