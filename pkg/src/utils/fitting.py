"""Hilfsfunktionen fuer Potenz- und Log-Fits ueber Parameter-Sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from src.core.errors import DegenerateInputError


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    residuals: tuple[float, ...]

    @property
    def max_abs_residual(self) -> float:
        return max((abs(item) for item in self.residuals), default=0.0)


def linear_fit(x, y, min_points: int = 2) -> LinearFit:
    """Kleinste-Quadrate-Gerade y = slope * x + intercept samt Residuen."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInputError("x und y muessen gleich lange Vektoren sein.")
    if len(x) < min_points:
        raise DegenerateInputError(f"Mindestens {min_points} Punkte fuer einen Fit noetig, erhielt {len(x)}.")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("Konstante x-Achse: Steigung nicht bestimmbar.")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInputError("Fit-Daten enthalten NaN oder Inf.")
    result = stats.linregress(x, y)
    residuals = y - (result.slope * x + result.intercept)
    return LinearFit(float(result.slope), float(result.intercept), tuple(float(item) for item in residuals))


def power_law_fit(x, y, min_points: int = 2) -> LinearFit:
    """Steigung von log y gegen log x (Exponent eines Potenzgesetzes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateInputError("Potenzfit braucht positive Werte.")
    return linear_fit(np.log(x), np.log(y), min_points=min_points)


def log_law_fit(x, y, min_points: int = 2) -> tuple[LinearFit, float]:
    """Fit y = c1 log x + c0; liefert zusaetzlich das groesste relative Residuum."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0):
        raise DegenerateInputError("Log-Fit braucht positive x-Werte.")
    fit = linear_fit(np.log(x), y, min_points=min_points)
    relative = np.abs(np.asarray(fit.residuals)) / np.maximum(np.abs(y), np.finfo(float).tiny)
    return fit, float(np.max(relative))
