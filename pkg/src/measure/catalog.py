"""Katalog der Testmengen: Annuli, A1/A2-Schnitte, E_{a,b} und die (alpha, beta)-Regionen."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import sympy

from src.core.errors import InvalidParameterError
from src.measure.semialgebraic import (
    DEFAULT_COMPLEXITY_BUDGET,
    W1,
    W2,
    Box,
    Constraint,
    Relation,
    SemiAlgebraicSet,
    abs_at_most,
    to_rational,
)
from src.utils.rng import make_generator

logger = logging.getLogger(__name__)

OCTANTS: tuple[tuple[int, int, int], ...] = tuple(
    (j1, j2, j3) for j1 in (-1, 1) for j2 in (-1, 1) for j3 in (-1, 1)
)
# Sicherheitsfaktor auf analytisch hergeleitete Boxgrenzen.
_BOX_MARGIN = 1.05


def _h(x1, x2):
    return x1**2 - x2**2


def _b(x1, x2, y1, y2):
    return x1 * y1 - x2 * y2


def _vector(v) -> tuple[sympy.Rational, sympy.Rational]:
    if len(v) != 2:
        raise InvalidParameterError(f"Erwartet einen Vektor mit zwei Komponenten, erhielt {v!r}.")
    return to_rational(v[0]), to_rational(v[1])


def _nonzero_h(v) -> tuple[sympy.Rational, sympy.Rational, sympy.Rational]:
    v1, v2 = _vector(v)
    h_v = _h(v1, v2)
    if h_v == 0:
        raise InvalidParameterError(f"H(v) = 0 fuer v = {tuple(v)}; der Schnitt setzt H(v) != 0 voraus.")
    return v1, v2, h_v


def rectangle(x0: float, x1: float, y0: float, y1: float, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    return SemiAlgebraicSet(((),), Box(x0, x1, y0, y1), budget, "rectangle")


def disk(radius: float, center=(0.0, 0.0), budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    r = to_rational(radius)
    x, y = _vector(center)
    constraint = Constraint.of(r**2 - (W1 - x) ** 2 - (W2 - y) ** 2, Relation.GE)
    box = Box(float(x) - radius, float(x) + radius, float(y) - radius, float(y) + radius)
    return SemiAlgebraicSet(((constraint,),), box, budget, f"disk({radius})")


def round_annulus(inner: float, outer: float, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    """inner <= |w| <= outer."""
    if not 0 <= inner < outer:
        raise InvalidParameterError("Annulus braucht 0 <= inner < outer.")
    r_in, r_out = to_rational(inner), to_rational(outer)
    norm = W1**2 + W2**2
    clause = (Constraint.of(norm - r_in**2, Relation.GE), Constraint.of(r_out**2 - norm, Relation.GE))
    return SemiAlgebraicSet((clause,), Box.square(outer), budget, f"round_annulus({inner}, {outer})")


def ellipse(
    a: float, b: float, c: float, radius: float, center=(0.0, 0.0), budget: int = DEFAULT_COMPLEXITY_BUDGET
) -> SemiAlgebraicSet:
    """a x^2 + c x y + b y^2 <= radius^2 mit x = w1 - center1, y = w2 - center2."""
    det = a * b - c * c / 4
    if a <= 0 or b <= 0 or det <= 0:
        raise InvalidParameterError("Ellipse braucht eine positiv definite Form.")
    x0, y0 = _vector(center)
    qa, qb, qc, r = (to_rational(item) for item in (a, b, c, radius))
    x, y = W1 - x0, W2 - y0
    constraint = Constraint.of(r**2 - (qa * x**2 + qc * x * y + qb * y**2), Relation.GE)
    half_x = radius * math.sqrt(b / det) * _BOX_MARGIN
    half_y = radius * math.sqrt(a / det) * _BOX_MARGIN
    box = Box(float(x0) - half_x, float(x0) + half_x, float(y0) - half_y, float(y0) + half_y)
    return SemiAlgebraicSet(((constraint,),), box, budget, f"ellipse({a}, {b}, {c}, {radius})")


def hyperbolic_annulus(c0: float, n: float, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    """{|w1^2 - w2^2 - C0| <= 1} in der Box [-N, N]^2."""
    constraints = abs_at_most(_h(W1, W2) - to_rational(c0), 1)
    return SemiAlgebraicSet((constraints,), Box.square(n), budget, f"hyperbolic_annulus({c0}, {n})")


def saddle_annulus(c0: float, n: float, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    """{|w1 w2 - C0| <= 1} in der Box [-N, N]^2."""
    constraints = abs_at_most(W1 * W2 - to_rational(c0), 1)
    return SemiAlgebraicSet((constraints,), Box.square(n), budget, f"saddle_annulus({c0}, {n})")


def _box_from_cd(radius: float, c: float, d: float) -> Box:
    # Mit p = w1 + w2, q = w1 - w2 gilt |p| <= R/|d| und |q| <= R/|c|.
    half = (radius / abs(d) + radius / abs(c)) / 2 * _BOX_MARGIN
    return Box.square(half)


def a1_section(
    v, c_a: float = 100.0, theta: float = 1.0, budget: int = DEFAULT_COMPLEXITY_BUDGET
) -> SemiAlgebraicSet:
    """E(v) = {w : |H(v) - H(w)| <= theta, H(v, w)^2 <= c_A |H(v) H(w)|}."""
    v1, v2, h_v = _nonzero_h(v)
    ca, th = to_rational(c_a), to_rational(theta)
    h_w = _h(W1, W2)
    cross = _b(v1, v2, W1, W2)
    level = abs_at_most(h_v - h_w, th)
    positive = (Constraint.of(h_w, Relation.GE), Constraint.of(ca * abs(h_v) * h_w - cross**2, Relation.GE))
    negative = (Constraint.of(-h_w, Relation.GE), Constraint.of(-ca * abs(h_v) * h_w - cross**2, Relation.GE))
    # X = p d, Y = q c: |X + Y| = 2|H(v,w)|, X Y = H(v) H(w).
    h_abs = abs(float(h_v))
    product = h_abs * (h_abs + theta)
    radius = math.sqrt(product) * (math.sqrt(c_a) + math.sqrt(c_a + 1.0))
    box = _box_from_cd(radius, float(v1 + v2), float(v1 - v2))
    return SemiAlgebraicSet((level + positive, level + negative), box, budget, f"a1_section({v[0]}, {v[1]})")


def _octant_constraints(point: tuple, octant: tuple[int, int, int]) -> tuple[Constraint, ...]:
    j1, j2, j3 = octant
    x1, x2 = point
    return (
        Constraint.of(j1 * x1, Relation.GE),
        Constraint.of(j2 * x2, Relation.GE),
        Constraint.of(j3 * _h(x1, x2), Relation.GE),
    )


def a2_section(
    v,
    c_a: float = 100.0,
    theta: float = 1.0,
    octant: tuple[int, int, int] | None = None,
    budget: int = DEFAULT_COMPLEXITY_BUDGET,
) -> SemiAlgebraicSet:
    """Menge der u, fuer die das Paar (u + v, u - v) in A2 liegt und |H(u+v) - H(u-v)| <= theta.

    Mit octant wird zusaetzlich u + v, u - v in J_j verlangt (verfeinerte Variante).
    """
    if c_a <= 1:
        raise InvalidParameterError("A2-Schnitte brauchen c_A > 1 fuer eine beschraenkte Box.")
    v1, v2, h_v = _nonzero_h(v)
    ca, th = to_rational(c_a), to_rational(theta)
    plus = (W1 + v1, W2 + v2)
    minus = (W1 - v1, W2 - v2)
    gap = _h(*plus) - _h(*minus)
    cross = _h(W1, W2) - h_v
    product = _h(*plus) * _h(*minus)
    level = abs_at_most(gap, th)
    positive = (Constraint.of(product, Relation.GE), Constraint.of(cross**2 - ca * product, Relation.GT))
    negative = (Constraint.of(-product, Relation.GE), Constraint.of(cross**2 + ca * product, Relation.GT))
    extra: tuple[Constraint, ...] = ()
    if octant is not None:
        octant = tuple(int(item) for item in octant)
        if octant not in OCTANTS:
            raise InvalidParameterError(f"Ungueltiger Oktant {octant}.")
        extra = _octant_constraints(plus, octant) + _octant_constraints(minus, octant)
    h_abs = abs(float(h_v))
    # H(u) = H(v)(e - 1) mit |e| durch die A2-Bedingung beschraenkt.
    slack = 4.0 + c_a * theta * theta / (4.0 * h_abs * h_abs)
    e_max = (4.0 + math.sqrt(16.0 + 4.0 * (c_a - 1.0) * slack)) / (2.0 * (c_a - 1.0))
    radius = theta / 4.0 + math.sqrt(theta * theta / 16.0 + h_abs * h_abs * (1.0 + e_max))
    box = _box_from_cd(radius, float(v1 + v2), float(v1 - v2))
    label = f"a2_section({v[0]}, {v[1]}, octant={octant})"
    return SemiAlgebraicSet((level + positive + extra, level + negative + extra), box, budget, label)


def eab_set(a, b, n2: float, theta_res: float = 1.0, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    """E_{a,b} = {eta : |H(eta) + H(a+b-eta) - H(a) - H(b)| <= theta_res, N2/2 <= |eta| <= 2 N2}."""
    a1, a2 = _vector(a)
    b1, b2 = _vector(b)
    s1, s2 = a1 + b1, a2 + b2
    resonance = 2 * _h(W1, W2) - 2 * _b(W1, W2, s1, s2) + 2 * _b(a1, a2, b1, b2)
    radius2 = W1**2 + W2**2
    n = to_rational(n2)
    clause = abs_at_most(resonance, to_rational(theta_res)) + (
        Constraint.of(radius2 - n**2 / 4, Relation.GE),
        Constraint.of(4 * n**2 - radius2, Relation.GE),
    )
    return SemiAlgebraicSet((clause,), Box.square(2.0 * n2), budget, f"eab({tuple(a)}, {tuple(b)})")


class RegionKind(str, Enum):
    EST11 = "est11"
    EST21 = "est21"


@dataclass(frozen=True)
class ChangeOfVarsRegion:
    """Region in (alpha, beta) nach dem Variablenwechsel mit c = v1 + v2, d = v1 - v2."""

    kind: RegionKind
    c: float
    d: float
    similar: float = 3.0
    much_greater: float = 100.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", RegionKind(self.kind))
        if self.c == 0 or self.d == 0 or not (math.isfinite(self.c) and math.isfinite(self.d)):
            raise InvalidParameterError("c und d muessen endlich und ungleich 0 sein.")
        if self.similar < 1 or self.much_greater < 4:
            raise InvalidParameterError("Vergleichskonstanten: similar >= 1, much_greater >= 4.")

    @property
    def epsilon(self) -> float:
        return 1.0 / abs(self.c * self.d)

    def to_set(self, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
        alpha, beta = W1, W2
        eps = 1 / abs(to_rational(self.c) * to_rational(self.d))
        if self.kind is RegionKind.EST11:
            s = to_rational(self.similar)
            clause = abs_at_most(alpha * beta - 1, eps) + (
                Constraint.of(s**2 * beta**2 - alpha**2, Relation.GE),
                Constraint.of(s**2 * alpha**2 - beta**2, Relation.GE),
            )
            half = math.sqrt(self.similar * (1.0 + self.epsilon)) * _BOX_MARGIN
        else:
            m = to_rational(self.much_greater)
            big = (alpha + 1) * (beta - 1)
            small = (alpha - 1) * (beta + 1)
            clause = abs_at_most(alpha + beta, eps) + (Constraint.of(big**2 - m**2 * small**2, Relation.GT),)
            # Ausserhalb dieser Box ist das Verhaeltnis hoechstens 4.
            half = 3.0 + 2.0 * self.epsilon
        return SemiAlgebraicSet((clause,), Box.square(half), budget, f"{self.kind.value}(c={self.c}, d={self.d})")


def a2_plain_section(v, c_a: float = 100.0, theta: float = 1.0, budget: int = DEFAULT_COMPLEXITY_BUDGET):
    return a2_section(v, c_a, theta, None, budget)


def est11_region(c: float, d: float, similar: float = 3.0, budget: int = DEFAULT_COMPLEXITY_BUDGET):
    return ChangeOfVarsRegion(RegionKind.EST11, c, d, similar=similar).to_set(budget)


def est21_region(c: float, d: float, much_greater: float = 100.0, budget: int = DEFAULT_COMPLEXITY_BUDGET):
    return ChangeOfVarsRegion(RegionKind.EST21, c, d, much_greater=much_greater).to_set(budget)


CATALOG: dict[str, Callable[..., SemiAlgebraicSet]] = {
    "rectangle": rectangle,
    "disk": disk,
    "round-annulus": round_annulus,
    "ellipse": ellipse,
    "hyperbolic-annulus": hyperbolic_annulus,
    "saddle-annulus": saddle_annulus,
    "a1-section": a1_section,
    "a2-plain-section": a2_plain_section,
    "a2-refined-section": a2_section,
    "eab": eab_set,
    "est11": est11_region,
    "est21": est21_region,
}


def build_catalog_set(set_id: str, **params) -> SemiAlgebraicSet:
    """Katalogeintrag ueber Id und Parameter (CLI-Zugang)."""
    try:
        constructor = CATALOG[set_id]
    except KeyError as exc:
        raise InvalidParameterError(
            f"Unbekannte Menge '{set_id}'. Verfuegbar: {', '.join(sorted(CATALOG))}"
        ) from exc
    try:
        return constructor(**params)
    except TypeError as exc:
        raise InvalidParameterError(f"Ungueltige Parameter fuer '{set_id}': {exc}") from exc


def _grid_value(rng: np.random.Generator, low: float, high: float, step: float = 0.125) -> float:
    return float(np.round(rng.uniform(low, high) / step) * step)


def lemma_corpus(count: int, seed: int, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> list[SemiAlgebraicSet]:
    """Deterministisches Korpus aus Ellipsen, Kreisringen und hyperbolischen Annuli."""
    sets: list[SemiAlgebraicSet] = []
    for index in range(count):
        rng = make_generator(seed, "lemma-corpus", index)
        kind = index % 3
        if kind == 0:
            a = _grid_value(rng, 0.25, 4.0)
            b = _grid_value(rng, 0.25, 4.0)
            c = _grid_value(rng, -1.6, 1.6) * math.sqrt(a * b)
            c = float(np.round(c * 8) / 8)
            if 4 * a * b - c * c <= 0.25:
                c = 0.0
            center = (_grid_value(rng, -4, 4), _grid_value(rng, -4, 4))
            sets.append(ellipse(a, b, c, _grid_value(rng, 1.0, 8.0), center, budget))
        elif kind == 1:
            inner = _grid_value(rng, 0.5, 5.0)
            sets.append(round_annulus(inner, inner + _grid_value(rng, 0.5, 3.0), budget))
        else:
            sets.append(hyperbolic_annulus(int(rng.integers(-20, 21)), int(rng.integers(4, 17)), budget))
    logger.info("Lemma-Korpus mit %d Mengen erzeugt (seed=%d).", count, seed)
    return sets
