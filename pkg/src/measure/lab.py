"""Mass-Labor: |E|_{R^2}, |E|_{R x Z_{1/lambda}}, Lemma- und Propositions-Checks."""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial

import numpy as np
import sympy
from scipy import integrate

from src.core.errors import DegenerateInputError, InvalidParameterError, QuadratureWarning
from src.measure.catalog import OCTANTS, a1_section, a2_section, saddle_annulus
from src.measure.roots import (
    DEFAULT_MAX_DEGREE,
    DEFAULT_ROOT_TOL,
    monotonicity_changes,
    slice_length,
)
from src.measure.semialgebraic import W1, W2, SemiAlgebraicSet

logger = logging.getLogger(__name__)

# Stuetzstellen fuer die Zaehlung der Monotoniewechsel.
MONOTONICITY_SAMPLES = 257


@dataclass(frozen=True)
class MeasureOptions:
    """Toleranzen fuer Nullstellen und Quadratur (siehe Abschnitt measure in settings.yaml)."""

    root_tol: float = DEFAULT_ROOT_TOL
    max_degree: int = DEFAULT_MAX_DEGREE
    quad_rel: float = 1e-6
    quad_abs: float = 1e-9
    panels: int = 8
    workers: int = 1


DEFAULT_OPTIONS = MeasureOptions()


def lattice_levels(semi_set: SemiAlgebraicSet, lam: float) -> np.ndarray:
    """Alle xi2 in (1/lambda) Z innerhalb der Box, aufsteigend."""
    if lam <= 0 or not math.isfinite(lam):
        raise InvalidParameterError(f"lambda muss positiv und endlich sein, erhielt {lam}.")
    first = math.ceil(semi_set.box.y0 * lam - 1e-9)
    last = math.floor(semi_set.box.y1 * lam + 1e-9)
    return np.arange(first, last + 1) / lam


def lattice_slices(
    semi_set: SemiAlgebraicSet, lam: float, options: MeasureOptions = DEFAULT_OPTIONS
) -> list[tuple[float, float]]:
    """(xi2, Schnittlaenge) fuer alle Gitterschnitte; Reihenfolge unabhaengig von workers."""
    levels = lattice_levels(semi_set, lam).tolist()
    measure = partial(slice_length, semi_set, tol=options.root_tol, max_degree=options.max_degree)
    if options.workers > 1 and len(levels) > 1:
        with ThreadPoolExecutor(max_workers=options.workers) as pool:
            lengths = list(pool.map(measure, levels))
    else:
        lengths = [measure(level) for level in levels]
    return list(zip(levels, lengths))


def rz_measure(semi_set: SemiAlgebraicSet, lam: float, options: MeasureOptions = DEFAULT_OPTIONS) -> float:
    """(1/lambda) * Summe der Schnittlaengen ueber xi2 in Z_{1/lambda}."""
    slices = lattice_slices(semi_set, lam, options)
    return math.fsum(length for _, length in slices) / lam


def _real_roots_in(expr, lo: float, hi: float) -> list[float]:
    poly = sympy.Poly(sympy.expand(expr), W2)
    if poly.is_zero or poly.degree() <= 0:
        return []
    coeffs = np.array([float(item) for item in poly.all_coeffs()])
    roots = np.roots(coeffs)
    found = []
    for root in roots:
        if abs(root.imag) <= 1e-7 * max(1.0, abs(root.real)) and lo <= root.real <= hi:
            found.append(float(root.real))
    return found


def w2_breakpoints(semi_set: SemiAlgebraicSet) -> list[float]:
    """Kandidaten fuer Knicke der Schnittlaenge: Diskriminanten, paarweise Resultanten, Boxkanten."""
    box = semi_set.box
    points = {box.y0, box.y1}
    exprs = [poly.as_expr() for poly in semi_set.polynomials]
    for expr in exprs:
        if sympy.degree(expr, W1) >= 1:
            points.update(_real_roots_in(sympy.resultant(expr, sympy.diff(expr, W1), W1), box.y0, box.y1))
            points.update(_real_roots_in(sympy.Poly(expr, W1).LC(), box.y0, box.y1))
        for edge in (box.x0, box.x1):
            points.update(_real_roots_in(expr.subs(W1, sympy.Rational(repr(float(edge)))), box.y0, box.y1))
    for first, second in itertools.combinations(exprs, 2):
        if sympy.degree(first, W1) >= 1 and sympy.degree(second, W1) >= 1:
            points.update(_real_roots_in(sympy.resultant(first, second, W1), box.y0, box.y1))
    return sorted(points)


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    abs_error: float
    converged: bool


def euclid_measure_estimate(
    semi_set: SemiAlgebraicSet, options: MeasureOptions = DEFAULT_OPTIONS
) -> MeasureEstimate:
    """Adaptive Quadratur der Schnittlaenge ueber w2, stueckweise zwischen den Knickstellen."""
    box = semi_set.box
    points = set(w2_breakpoints(semi_set))
    points.update(np.linspace(box.y0, box.y1, options.panels + 1).tolist())
    grid = sorted(points)
    integrand = partial(slice_length, semi_set, tol=options.root_tol, max_degree=options.max_degree)
    values: list[float] = []
    errors: list[float] = []
    converged = True
    for a, b in zip(grid, grid[1:]):
        if b - a <= 1e-14 * max(1.0, abs(a)):
            continue
        result = integrate.quad(
            integrand, a, b, epsabs=options.quad_abs, epsrel=options.quad_rel, limit=200, full_output=1
        )
        value, error = result[0], result[1]
        if len(result) > 3 or error > max(options.quad_abs, options.quad_rel * abs(value)):
            converged = False
            logger.debug("Quadratur auf [%g, %g] ungenau: Fehler %.3g.", a, b, error)
        values.append(value)
        errors.append(error)
    estimate = MeasureEstimate(math.fsum(values), math.fsum(errors), converged)
    if not converged:
        message = f"Flaechenquadratur fuer {semi_set.label or 'Menge'} nicht konvergiert, Fehler {estimate.abs_error:.3g}."
        logger.warning(message)
        warnings.warn(message, QuadratureWarning, stacklevel=2)
    return estimate


def euclid_measure(semi_set: SemiAlgebraicSet, options: MeasureOptions = DEFAULT_OPTIONS) -> float:
    """Lebesgue-Mass in R^2."""
    return euclid_measure_estimate(semi_set, options).value


@dataclass(frozen=True)
class LemmaRecord:
    lhs: float
    area: float
    max_slice: float
    implied_c: float
    monotonicity_changes: int
    area_error: float = 0.0


def lemma_check(semi_set: SemiAlgebraicSet, lam: float, options: MeasureOptions = DEFAULT_OPTIONS) -> LemmaRecord:
    """Vergleicht |E|_{R x Z_{1/lambda}} mit |E|_{R^2} + (1/lambda) max Schnitt."""
    slices = lattice_slices(semi_set, lam, options)
    lhs = math.fsum(length for _, length in slices) / lam
    max_slice = max((length for _, length in slices), default=0.0)
    estimate = euclid_measure_estimate(semi_set, options)
    denominator = estimate.value + max_slice / lam
    if denominator <= 0.0:
        if lhs > 0.0:
            raise DegenerateInputError("Positives Gittermass bei verschwindender Flaeche und Schnittlaenge.")
        implied = 0.0
    else:
        implied = lhs / denominator
    box = semi_set.box
    samples = np.linspace(box.y0, box.y1, MONOTONICITY_SAMPLES)
    profile = [slice_length(semi_set, level, options.root_tol, options.max_degree) for level in samples]
    record = LemmaRecord(lhs, estimate.value, max_slice, implied, monotonicity_changes(profile), estimate.abs_error)
    logger.debug("Lemma-Check %s: %s", semi_set.label, record)
    return record


def box_sensitivity(
    semi_set: SemiAlgebraicSet, lam: float, factor: float = 2.0, options: MeasureOptions = DEFAULT_OPTIONS
) -> tuple[LemmaRecord, LemmaRecord, float]:
    """Lemma-Check mit gestreckter Box; liefert beide Records und die relative Aenderung von impliedC."""
    base = lemma_check(semi_set, lam, options)
    widened = lemma_check(semi_set.with_box(semi_set.box.scaled(factor)), lam, options)
    change = abs(widened.implied_c - base.implied_c) / base.implied_c if base.implied_c else 0.0
    return base, widened, change


class PropKind(str, Enum):
    A1 = "a1"
    A2_PLAIN = "a2_plain"
    A2_REFINED = "a2_refined"


@dataclass(frozen=True)
class PropRow:
    v: tuple[float, float]
    octant: tuple[int, int, int] | None
    rz: float
    max_slice: float


@dataclass
class PropRecord:
    kind: PropKind
    lam: float
    rows: list[PropRow] = field(default_factory=list)

    @property
    def sup(self) -> float:
        return max((row.rz for row in self.rows), default=0.0)

    @property
    def argmax(self) -> PropRow | None:
        return max(self.rows, key=lambda row: row.rz, default=None)

    @property
    def max_slice(self) -> float:
        return max((row.max_slice for row in self.rows), default=0.0)


def _check_lattice_v(v, lam: float) -> tuple[float, float]:
    v1, v2 = float(v[0]), float(v[1])
    if not (math.isfinite(v1) and math.isfinite(v2)):
        raise InvalidParameterError(f"v muss endlich sein, erhielt {v}.")
    if abs(v2 * lam - round(v2 * lam)) > 1e-9:
        raise InvalidParameterError(f"v2 = {v2} liegt nicht auf (1/lambda) Z fuer lambda = {lam}.")
    if v1 * v1 - v2 * v2 == 0.0:
        raise InvalidParameterError(f"H(v) = 0 fuer v = {v}.")
    return v1, v2


def prop_check(
    kind: PropKind | str,
    v_samples,
    lam: float,
    c_a: float = 100.0,
    theta: float = 1.0,
    theta2: float = 2.0,
    octants=OCTANTS,
    options: MeasureOptions = DEFAULT_OPTIONS,
) -> PropRecord:
    """|E(v)|_{R x Z_{1/lambda}} fuer jeden Testvektor v; bei A2refined pro Oktant."""
    kind = PropKind(kind)
    record = PropRecord(kind, lam)
    for v in v_samples:
        v = _check_lattice_v(v, lam)
        if kind is PropKind.A1:
            sections = [(None, a1_section(v, c_a, theta))]
        elif kind is PropKind.A2_PLAIN:
            sections = [(None, a2_section(v, c_a, theta))]
        else:
            sections = [(octant, a2_section(v, c_a, theta2, octant)) for octant in octants]
        for octant, section in sections:
            slices = lattice_slices(section, lam, options)
            rz = math.fsum(length for _, length in slices) / lam
            max_slice = max((length for _, length in slices), default=0.0)
            record.rows.append(PropRow(v, octant, rz, max_slice))
        logger.debug("Propositions-Check %s fuer v=%s fertig.", kind.value, v)
    logger.info("Propositions-Check %s: sup = %.6g ueber %d Zeilen.", kind.value, record.sup, len(record.rows))
    return record


# Richtungen ohne die Diagonalen |v1| = |v2|, auf denen H(v) = 0 ist.
_SAMPLE_ANGLES = tuple(math.pi * k / 12 for k in range(24) if k % 6 != 3)


def standard_v_samples(lam: float, count: int = 24, v_max: float = 1000.0) -> list[tuple[float, float]]:
    """Log-verteilte |v| in [1, v_max] mit v2 auf (1/lambda) Z und |H(v)| >= 1."""
    samples: list[tuple[float, float]] = []
    for index, radius in enumerate(np.geomspace(1.0, v_max, count)):
        angle = _SAMPLE_ANGLES[index % len(_SAMPLE_ANGLES)]
        v1 = round(radius * math.cos(angle) * 8) / 8
        v2 = round(radius * math.sin(angle) * lam) / lam
        if abs(v1 * v1 - v2 * v2) >= 1.0:
            samples.append((v1, v2))
    return samples


def saddle_max_slice(c0: float, n: float, lam: float, options: MeasureOptions = DEFAULT_OPTIONS) -> float:
    """Groesster Gitterschnitt von {|w1 w2 - C0| <= 1} mit |xi2| <= N."""
    slices = lattice_slices(saddle_annulus(c0, n), lam, options)
    return max((length for _, length in slices), default=0.0)
