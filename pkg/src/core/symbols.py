"""Dispersionssymbole H(xi) und Zeitfenster fuer Raum-Zeit-Normen."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.interpolate import BSpline

from src.core.errors import InvalidParameterError


class SymbolKind(str, Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    MIXED = "mixed"


@dataclass(frozen=True)
class DispersionSymbol:
    """Polynomielles Symbol H und zugehoerige Bilinearform H(xi, eta)."""

    kind: SymbolKind = SymbolKind.HYPERBOLIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SymbolKind(self.kind))

    def eval(self, xi1, xi2):
        """H(xi); exakt fuer ganze Zahlen (Python-int) und elementweise fuer Arrays."""
        if self.kind is SymbolKind.ELLIPTIC:
            return xi1 * xi1 + xi2 * xi2
        if self.kind is SymbolKind.HYPERBOLIC:
            return xi1 * xi1 - xi2 * xi2
        return xi1 * xi2

    def eval_bilinear(self, xi1, xi2, eta1, eta2):
        """H(xi, eta) mit H(xi, xi) = H(xi)."""
        if self.kind is SymbolKind.ELLIPTIC:
            return xi1 * eta1 + xi2 * eta2
        if self.kind is SymbolKind.HYPERBOLIC:
            return xi1 * eta1 - xi2 * eta2
        return (xi1 * eta2 + xi2 * eta1) / 2

    def max_abs(self, cutoff: float) -> float:
        """Obere Schranke fuer |H| auf |xi_i| <= cutoff."""
        return (2.0 if self.kind is SymbolKind.ELLIPTIC else 1.0) * cutoff * cutoff


class BumpKind(str, Enum):
    SHARP = "sharp"
    SMOOTH = "smooth"


# Glattes Fenster w(t) = c sinc(b t)^(2k); w_hat ist ein kardinaler B-Spline auf [-k b, k b].
_BUMP_ORDER = 4
_BUMP_WIDTH = 1.0 / 8.0


@dataclass(frozen=True)
class SmoothBump:
    """Nichtnegatives Gewicht mit w >= 1 auf [-2, 2] und w_hat >= 0 mit Traeger in [-1/2, 1/2]."""

    order: int = _BUMP_ORDER
    width: float = _BUMP_WIDTH

    def __post_init__(self) -> None:
        if self.order * self.width > 0.5:
            raise InvalidParameterError("Traeger von w_hat muss in [-1/2, 1/2] liegen.")
        if 2.0 * self.width >= 1.0:
            raise InvalidParameterError("sinc darf auf [-2, 2] keine Nullstelle haben.")

    @cached_property
    def scale(self) -> float:
        # Minimum von sinc(b t)^(2k) auf [-2, 2] liegt bei |t| = 2.
        return 1.0 / float(np.sinc(2.0 * self.width)) ** (2 * self.order)

    @cached_property
    def _spline(self) -> BSpline:
        knots = np.arange(-self.order, self.order + 1, dtype=float)
        return BSpline.basis_element(knots, extrapolate=False)

    def __call__(self, t):
        return self.scale * np.sinc(self.width * np.asarray(t, dtype=float)) ** (2 * self.order)

    def fourier(self, tau):
        """w_hat(tau) = integral w(t) e(-t tau) dt."""
        tau = np.asarray(tau, dtype=float)
        values = np.nan_to_num(self._spline(tau / self.width), nan=0.0)
        return self.scale / self.width * values

    @property
    def support(self) -> float:
        return self.order * self.width


@dataclass(frozen=True)
class TimeWindow:
    """Zeitfenster [t0, t1] mit Stuetzstellenzahl und Fensterart (scharf oder glatt)."""

    t0: float = 0.0
    t1: float = 1.0
    samples: int = 17
    bump_kind: BumpKind = BumpKind.SHARP
    tail: float = 200.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "bump_kind", BumpKind(self.bump_kind))
        for name in ("t0", "t1", "tail"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} muss endlich sein.")
        if self.t1 <= self.t0:
            raise InvalidParameterError(f"Leeres Zeitfenster [{self.t0}, {self.t1}].")
        if self.samples < 2:
            raise InvalidParameterError("Mindestens zwei Zeitstuetzstellen noetig.")

    @classmethod
    def for_cutoff(
        cls,
        cutoff: float,
        t0: float = 0.0,
        t1: float = 1.0,
        bump_kind: BumpKind | str = BumpKind.SHARP,
        min_samples: int = 2,
        tail: float = 200.0,
    ) -> "TimeWindow":
        """Fenster mit mindestens 8 Punkten pro schnellster Periode 1/(2N^2)."""
        bump_kind = BumpKind(bump_kind)
        span = (t1 - t0) if bump_kind is BumpKind.SHARP else 2.0 * tail
        samples = max(min_samples, required_samples(cutoff, span))
        return cls(t0=t0, t1=t1, samples=samples, bump_kind=bump_kind, tail=tail)

    @property
    def span(self) -> float:
        return (self.t1 - self.t0) if self.bump_kind is BumpKind.SHARP else 2.0 * self.tail

    @cached_property
    def bump(self) -> SmoothBump:
        return SmoothBump()

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.bump_kind is BumpKind.SHARP:
            nodes = np.linspace(self.t0, self.t1, self.samples)
        else:
            nodes = np.linspace(-self.tail, self.tail, self.samples)
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezgewichte, beim glatten Fenster mit w(t) multipliziert."""
        nodes = self.nodes
        step = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
        weights = np.full(len(nodes), step)
        weights[0] = weights[-1] = step / 2.0
        if self.bump_kind is BumpKind.SMOOTH:
            weights = weights * self.bump(nodes)
        weights.setflags(write=False)
        return weights

    def kernel(self, omega):
        """Zeitintegral von e(-t omega) gegen das Fenster (scharf: ueber [t0, t1])."""
        omega = np.asarray(omega, dtype=float)
        if self.bump_kind is BumpKind.SMOOTH:
            return self.bump.fourier(omega).astype(np.complex128)
        safe = np.where(omega == 0.0, 1.0, omega)
        ramp = (np.exp(-2j * np.pi * self.t1 * safe) - np.exp(-2j * np.pi * self.t0 * safe)) / (
            -2j * np.pi * safe
        )
        return np.where(omega == 0.0, self.t1 - self.t0, ramp)

    def quadrature_kernel(self, omega):
        """Gewichtete Stuetzstellensumme von e(-t omega); diskretes Gegenstueck zu kernel."""
        omega = np.asarray(omega, dtype=float)
        return np.exp(-2j * np.pi * np.multiply.outer(omega, self.nodes)) @ self.weights


def required_samples(cutoff: float, span: float) -> int:
    """Stuetzstellen: 8 * ceil(2 N^2 * span), plus Endpunkt.

    Die Regel haengt nicht vom Symbol ab: 2 N^2 ist die elliptische Schranke und damit
    max |H| fuer alle drei Symbole (DispersionSymbol.max_abs). Hyperbolische und gemischte
    Plaene sind so doppelt ueberabgetastet, alle Plaene teilen aber dieselben Zeitknoten.
    """
    return 8 * int(math.ceil(2.0 * cutoff * cutoff * span)) + 1
