"""Raum-Zeit-Normen, Strichartz-Quotienten und die Quadrilinearform mit A1/A2-Zerlegung."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.core.errors import ComplexityBudgetError, DegenerateInputError, InvalidParameterError
from src.core.lattice import SpectralField, l2_norm
from src.core.symbols import DispersionSymbol, SmoothBump, SymbolKind
from src.dispersion.propagator import EvolutionPlan, iter_space_time
from src.utils.fitting import linear_fit

logger = logging.getLogger(__name__)

OCTANTS: tuple[tuple[int, int, int], ...] = tuple(itertools.product((-1, 1), repeat=3))


class ConstraintKind(str, Enum):
    INDICATOR = "indicator"
    SMOOTH_BUMP = "smooth_bump"


class Restriction(str, Enum):
    NONE = "none"
    A1 = "a1"
    A2_REFINED = "a2_refined"
    A2_PLAIN = "a2_plain"


@dataclass(frozen=True)
class QuadWeight:
    """Gewicht der Quadrilinearform: Nebenbedingung an H(v) - H(w) und Einschraenkung auf A1/A2."""

    constraint_kind: ConstraintKind = ConstraintKind.INDICATOR
    theta: float = 1.0
    restriction: Restriction = Restriction.NONE
    octant: tuple[int, int, int] | None = None
    c_a: float = 100.0
    theta2: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraint_kind", ConstraintKind(self.constraint_kind))
        object.__setattr__(self, "restriction", Restriction(self.restriction))
        if self.restriction is Restriction.A2_REFINED:
            if self.octant is None or len(self.octant) != 3 or any(item not in (-1, 1) for item in self.octant):
                raise InvalidParameterError("A2refined braucht ein Oktant j aus {-1, 1}^3.")
            object.__setattr__(self, "octant", tuple(int(item) for item in self.octant))
        for name in ("theta", "c_a", "theta2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidParameterError(f"{name} muss positiv und endlich sein, erhielt {value}.")

    @property
    def effective_theta(self) -> float:
        return self.theta2 if self.restriction is Restriction.A2_REFINED else self.theta


def l4_space_time_norm(plan: EvolutionPlan, phi: SpectralField) -> float:
    """Quadratur von (int int |u|^4 dx dt)^(1/4) ueber Fenster x (x1-Box x T_lambda)."""
    total = 0.0
    for weights, values in iter_space_time(plan, phi):
        spatial = np.sum(np.abs(values) ** 4, axis=(-2, -1)) * plan.cell_volume
        total += float(np.dot(weights, spatial))
    return max(total, 0.0) ** 0.25


def strichartz_ratio(plan: EvolutionPlan, phi: SpectralField) -> float:
    """L4-Raum-Zeit-Norm geteilt durch die L2-Norm der Anfangsdaten."""
    norm = l2_norm(phi)
    if norm == 0.0:
        raise DegenerateInputError("Strichartz-Quotient fuer das Nullfeld ist undefiniert.")
    return l4_space_time_norm(plan, phi) / norm


@dataclass(frozen=True)
class _Support:
    """Traeger eines Feldes: ganzzahlige Indizes, physikalische Frequenzen und Werte."""

    k1: np.ndarray
    k2: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    values: np.ndarray


def _support_of(field_: SpectralField) -> _Support:
    flat = field_.support()
    grid_k1, grid_k2 = field_.lattice.indices
    xi1, xi2 = field_.lattice.frequencies
    return _Support(
        grid_k1.ravel()[flat],
        grid_k2.ravel()[flat],
        xi1.ravel()[flat],
        xi2.ravel()[flat],
        field_.coeffs.ravel()[flat],
    )


def _pair_groups(support: _Support):
    """Gruppiert geordnete Paare (i, j) nach der Summe xi_i + xi_j (also nach u)."""
    size = len(support.values)
    first, second = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    first = first.ravel()
    second = second.ravel()
    key1 = support.k1[first] + support.k1[second]
    key2 = support.k2[first] + support.k2[second]
    order = np.lexsort((key1, key2))
    first, second = first[order], second[order]
    key1, key2 = key1[order], key2[order]
    boundaries = np.flatnonzero((np.diff(key1) != 0) | (np.diff(key2) != 0)) + 1
    starts = np.concatenate(([0], boundaries))
    stops = np.concatenate((boundaries, [len(first)]))
    for start, stop in zip(starts, stops):
        yield first[start:stop], second[start:stop]


def _in_octant(symbol: DispersionSymbol, v1, v2, octant: tuple[int, int, int]) -> np.ndarray:
    j1, j2, j3 = octant
    return (j1 * v1 >= 0) & (j2 * v2 >= 0) & (j3 * symbol.eval(v1, v2) >= 0)


def pair_weight(
    weight: QuadWeight,
    symbol: DispersionSymbol,
    v1: np.ndarray,
    v2: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
) -> np.ndarray:
    """Gewicht eines Paares (v, w); 0 ausserhalb der Einschraenkung."""
    h_v = symbol.eval(v1, v2)
    h_w = symbol.eval(w1, w2)
    gap = h_v - h_w
    if weight.constraint_kind is ConstraintKind.INDICATOR:
        factor = (np.abs(gap) <= weight.effective_theta).astype(float)
    else:
        factor = SmoothBump().fourier(gap)
    if weight.restriction is not Restriction.NONE:
        cross = symbol.eval_bilinear(v1, v2, w1, w2)
        small = cross * cross <= weight.c_a * np.abs(h_v * h_w)
        if weight.restriction is Restriction.A1:
            mask = small
        else:
            mask = ~small
            if weight.restriction is Restriction.A2_REFINED:
                mask = mask & _in_octant(symbol, v1, v2, weight.octant) & _in_octant(symbol, w1, w2, weight.octant)
        factor = np.where(mask, factor, 0.0)
    return factor


def _guard_support(size: int, budget: float) -> None:
    if float(size) ** 3 > budget:
        raise ComplexityBudgetError(
            f"Quadrilinearform: (#Traeger)^3 = {size ** 3} ueber Budget {budget:g}.",
            float(size) ** 3,
            budget,
        )


def quad_form(
    f: SpectralField,
    weight: QuadWeight,
    symbol: DispersionSymbol | None = None,
    budget: float = 2.0e7,
) -> float:
    """Exakte Summe ueber Gittertripel (u, v, w) von 1[...] f(u+v) f(u-v) f(u+w) f(u-w).

    Jedes der drei Integrale traegt das Gewicht (1/L)(1/lambda). Die Terme werden
    mit math.fsum korrekt gerundet summiert, die Reihenfolge ist damit belanglos.
    """
    symbol = symbol or DispersionSymbol(SymbolKind.HYPERBOLIC)
    values = np.asarray(f.coeffs)
    if np.iscomplexobj(values) or np.any(values < 0):
        raise InvalidParameterError("quad_form erwartet ein nichtnegatives reelles Feld f = |phi_hat|.")
    support = _support_of(f)
    _guard_support(len(support.values), budget)
    terms: list[float] = []
    for first, second in _pair_groups(support):
        # Alle Kombinationen (xi, gamma) x (eta, h) mit gleicher Summe.
        left, right = np.meshgrid(np.arange(len(first)), np.arange(len(first)), indexing="ij")
        xi, gamma = first[left.ravel()], second[left.ravel()]
        eta, h = first[right.ravel()], second[right.ravel()]
        v1 = (support.xi1[xi] - support.xi1[gamma]) / 2
        v2 = (support.xi2[xi] - support.xi2[gamma]) / 2
        w1 = (support.xi1[eta] - support.xi1[h]) / 2
        w2 = (support.xi2[eta] - support.xi2[h]) / 2
        factor = pair_weight(weight, symbol, v1, v2, w1, w2)
        products = support.values[xi] * support.values[gamma] * support.values[eta] * support.values[h] * factor
        terms.extend(products[products != 0.0].tolist())
    return f.lattice.point_weight ** 3 * math.fsum(terms)


@dataclass(frozen=True)
class QuadFormBound:
    value: float
    bound: float
    ratio: float


def quad_form_bound(
    f: SpectralField,
    weight: QuadWeight,
    bound_constant: float = 1.0,
    symbol: DispersionSymbol | None = None,
    budget: float = 2.0e7,
) -> QuadFormBound:
    """Beide Seiten von Q(f) <~ C ||f||^4 und ihr Quotient."""
    value = quad_form(f, weight, symbol=symbol, budget=budget)
    bound = bound_constant * l2_norm(f) ** 4
    ratio = value / bound if bound > 0 else 0.0
    return QuadFormBound(value=value, bound=bound, ratio=ratio)


def quadrilinear_sum(plan: EvolutionPlan, phi: SpectralField, quadrature: bool = False) -> float:
    """Direkte Auswertung von int |u|^4 (Fensterkern) als faltungsbeschraenkte Summe.

    Mit quadrature=True wird statt des exakten Zeitintegrals die Trapezsumme des
    Fensters benutzt; dann stimmt das Ergebnis bis auf Rundung mit
    l4_space_time_norm(plan, phi) ** 4 ueberein.

    Summe ueber xi + gamma = eta + h von c_xi conj(c_eta) c_gamma conj(c_h)
    K(H(xi) - H(eta) + H(gamma) - H(h)) mit dem Zeitkern K des Fensters.
    """
    support = _support_of(phi)
    symbol = plan.symbol
    h_values = symbol.eval(support.xi1, support.xi2)
    kernel = plan.window.quadrature_kernel if quadrature else plan.window.kernel
    total = 0.0 + 0.0j
    for first, second in _pair_groups(support):
        left, right = np.meshgrid(np.arange(len(first)), np.arange(len(first)), indexing="ij")
        xi, gamma = first[left.ravel()], second[left.ravel()]
        eta, h = first[right.ravel()], second[right.ravel()]
        omega = h_values[xi] - h_values[eta] + h_values[gamma] - h_values[h]
        products = (
            support.values[xi]
            * np.conj(support.values[eta])
            * support.values[gamma]
            * np.conj(support.values[h])
        )
        total += np.sum(products * kernel(omega))
    return float(total.real) * phi.lattice.point_weight ** 3


def octant_comparison(
    f: SpectralField,
    c_a: float = 100.0,
    theta2: float = 2.0,
    symbol: DispersionSymbol | None = None,
    budget: float = 2.0e7,
) -> dict[str, float]:
    """Summe ueber alle acht Oktanten von A2refined gegen A2plain bei theta = theta2 (protokolliert)."""
    refined = {
        octant: quad_form(f, QuadWeight(restriction=Restriction.A2_REFINED, octant=octant, c_a=c_a, theta2=theta2), symbol, budget)
        for octant in OCTANTS
    }
    plain = quad_form(f, QuadWeight(theta=theta2, restriction=Restriction.A2_PLAIN, c_a=c_a), symbol, budget)
    octant_sum = math.fsum(refined.values())
    logger.info("A2-Oktantsumme %.6g gegen A2plain(theta=%g) %.6g.", octant_sum, theta2, plain)
    return {"octant_sum": octant_sum, "a2_plain": plain, **{f"octant_{octant}": value for octant, value in refined.items()}}


def k_slice_diagnostic(
    f: SpectralField,
    symbol: DispersionSymbol | None = None,
    budget: float = 2.0e7,
) -> float:
    """sum_j sum_k int ( int 1_{|H(v)-k|<=1} 1_{J_j}(v) f(u+v) f(u-v) dv )^2 du."""
    symbol = symbol or DispersionSymbol(SymbolKind.HYPERBOLIC)
    support = _support_of(f)
    _guard_support(len(support.values), budget)
    weight = f.lattice.point_weight
    total: list[float] = []
    for first, second in _pair_groups(support):
        v1 = (support.xi1[first] - support.xi1[second]) / 2
        v2 = (support.xi2[first] - support.xi2[second]) / 2
        h_v = symbol.eval(v1, v2)
        products = support.values[first] * support.values[second]
        base = np.floor(h_v).astype(np.int64)
        for octant in OCTANTS:
            inside = _in_octant(symbol, v1, v2, octant)
            slices: dict[int, float] = {}
            for offset in (-1, 0, 1, 2):
                level = base + offset
                hit = inside & (np.abs(h_v - level) <= 1.0)
                for key, value in zip(level[hit].tolist(), products[hit].tolist()):
                    slices[key] = slices.get(key, 0.0) + value
            total.extend((weight * value) ** 2 for value in slices.values())
    return weight * math.fsum(total)


@dataclass(frozen=True)
class GrowthFit:
    power_exponent: float
    log_coefficient: float
    power_residuals: tuple[float, ...]
    log_residuals: tuple[float, ...]


def fit_growth_values(n_values, ratios) -> GrowthFit:
    """Steigung von log R gegen log N und von R^4 gegen log N."""
    n_values = np.asarray(n_values, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    if len(n_values) < 4:
        raise DegenerateInputError(f"fitGrowth braucht mindestens 4 Sweep-Punkte, erhielt {len(n_values)}.")
    if np.ptp(n_values) == 0.0:
        raise DegenerateInputError("Konstantes N im Sweep.")
    power = linear_fit(np.log(n_values), np.log(ratios))
    logarithmic = linear_fit(np.log(n_values), ratios ** 4)
    return GrowthFit(power.slope, logarithmic.slope, power.residuals, logarithmic.residuals)


@dataclass
class RatioSweep:
    """Ergebnis eines Quotienten-Sweeps ueber dyadische N."""

    scenario: str
    n_list: list[int]
    ensemble_max: list[float]
    extremized: list[float] = field(default_factory=list)
    lattice: dict[str, object] = field(default_factory=dict)
    seed: int = 0
    fit: GrowthFit | None = None

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise InvalidParameterError("N-Liste muss streng wachsen.")
        if any(n & (n - 1) for n in self.n_list):
            raise InvalidParameterError("N-Liste muss dyadisch sein.")
        if any(value < 0 for value in self.ensemble_max + self.extremized):
            raise InvalidParameterError("Quotienten sind nichtnegativ.")

    def best(self) -> list[float]:
        """Pro N das Maximum aus Ensemble und Extremierer."""
        if not self.extremized:
            return list(self.ensemble_max)
        return [max(a, b) for a, b in zip(self.ensemble_max, self.extremized)]


def fit_growth(sweep: RatioSweep) -> GrowthFit:
    fit = fit_growth_values(sweep.n_list, sweep.best())
    sweep.fit = fit
    return fit
