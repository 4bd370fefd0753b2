"""Semi-algebraische Mengen in (w1, w2): Klauseln, Begrenzungsbox und Textformat."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np
import sympy

from src.core.errors import ComplexityBudgetError, InvalidParameterError

logger = logging.getLogger(__name__)

W1, W2 = sympy.symbols("w1 w2", real=True)

DEFAULT_COMPLEXITY_BUDGET = 64


class Relation(str, Enum):
    EQ = "=0"
    GT = ">0"
    GE = ">=0"


def to_rational(value) -> sympy.Rational:
    """Exakte rationale Darstellung; Floats ueber ihre kuerzeste Dezimaldarstellung."""
    if isinstance(value, sympy.Rational):
        return value
    if isinstance(value, (int, np.integer)):
        return sympy.Integer(int(value))
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, str):
        return sympy.Rational(value)
    value = float(value)
    if not np.isfinite(value):
        raise InvalidParameterError(f"Koeffizient muss endlich sein, erhielt {value}.")
    return sympy.Rational(repr(value))


@dataclass(frozen=True)
class Constraint:
    """Polynom p(w1, w2) mit rationalen Koeffizienten und Relation p = 0, p > 0 oder p >= 0."""

    poly: sympy.Poly
    relation: Relation

    @classmethod
    def of(cls, expr, relation: Relation | str = Relation.GE) -> "Constraint":
        poly = sympy.Poly(sympy.expand(expr), W1, W2, domain=sympy.QQ)
        return cls(poly, Relation(relation))

    @cached_property
    def degree(self) -> int:
        return max(self.poly.total_degree(), 0)

    @cached_property
    def w1_degree(self) -> int:
        return max(self.poly.degree(W1), 0)

    @cached_property
    def _terms(self) -> tuple[tuple[int, int, float], ...]:
        return tuple((e1, e2, float(coeff)) for (e1, e2), coeff in self.poly.terms())

    def slice_coeffs(self, w2: float) -> np.ndarray:
        """Koeffizienten von p(., w2) in w1, hoechste Potenz zuerst (np.polyval-Konvention)."""
        coeffs = np.zeros(self.w1_degree + 1)
        for e1, e2, coeff in self._terms:
            coeffs[self.w1_degree - e1] += coeff * w2 ** e2
        return coeffs

    def evaluate(self, w1, w2) -> np.ndarray:
        w1 = np.asarray(w1, dtype=float)
        total = np.zeros(np.broadcast(w1, np.asarray(w2)).shape)
        for e1, e2, coeff in self._terms:
            total = total + coeff * w1 ** e1 * np.asarray(w2, dtype=float) ** e2
        return total

    def holds(self, w1, w2) -> np.ndarray:
        return check_relation(self.evaluate(w1, w2), self.relation)

    def holds_exact(self, w1, w2) -> bool:
        value = self.poly.as_expr().subs({W1: to_rational(w1), W2: to_rational(w2)})
        return bool(check_relation(np.sign(int(sympy.sign(value))), self.relation))

    def to_line(self) -> str:
        parts = [self.relation.value]
        for (e1, e2), coeff in sorted(self.poly.terms()):
            parts.extend([str(coeff), str(e1), str(e2)])
        if len(parts) == 1:
            parts.extend(["0", "0", "0"])
        return " ".join(parts)


def check_relation(values, relation: Relation) -> np.ndarray:
    values = np.asarray(values)
    if relation is Relation.EQ:
        return values == 0
    if relation is Relation.GT:
        return values > 0
    return values >= 0


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self) -> None:
        for name in ("x0", "x1", "y0", "y1"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"Box-Grenze {name} muss endlich sein.")
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise InvalidParameterError(f"Leere Box {self}.")

    @classmethod
    def square(cls, half_width: float) -> "Box":
        return cls(-half_width, half_width, -half_width, half_width)

    def scaled(self, factor: float) -> "Box":
        """Um den Ursprung gestreckte Box (Boxsensitivitaet)."""
        return Box(self.x0 * factor, self.x1 * factor, self.y0 * factor, self.y1 * factor)

    def contains(self, w1, w2) -> np.ndarray:
        return (
            (np.asarray(w1) >= self.x0)
            & (np.asarray(w1) <= self.x1)
            & (np.asarray(w2) >= self.y0)
            & (np.asarray(w2) <= self.y1)
        )

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class SemiAlgebraicSet:
    """Endliche Vereinigung von Konjunktionen, geschnitten mit der Begrenzungsbox.

    Eine leere Konjunktion steht fuer die ganze Box.
    """

    clauses: tuple[tuple[Constraint, ...], ...]
    box: Box
    budget: int = DEFAULT_COMPLEXITY_BUDGET
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "clauses", tuple(tuple(clause) for clause in self.clauses))
        if not self.clauses:
            raise InvalidParameterError("Eine Menge braucht mindestens eine Klausel.")
        if self.complexity > self.budget:
            raise ComplexityBudgetError(
                f"Komplexitaet s*D = {self.complexity} ueber Budget {self.budget} ({self.label or 'Menge'}).",
                self.complexity,
                self.budget,
            )

    @cached_property
    def polynomials(self) -> tuple[sympy.Poly, ...]:
        """Verschiedene Randpolynome aller Klauseln (in fester Reihenfolge)."""
        seen: dict[sympy.Poly, None] = {}
        for clause in self.clauses:
            for constraint in clause:
                seen.setdefault(constraint.poly, None)
        return tuple(seen)

    @cached_property
    def constraints(self) -> tuple[Constraint, ...]:
        seen: dict[tuple[sympy.Poly, Relation], Constraint] = {}
        for clause in self.clauses:
            for constraint in clause:
                seen.setdefault((constraint.poly, constraint.relation), constraint)
        return tuple(seen.values())

    @property
    def max_degree(self) -> int:
        return max((max(poly.total_degree(), 0) for poly in self.polynomials), default=0)

    @property
    def complexity(self) -> int:
        return len(self.polynomials) * self.max_degree

    def contains(self, w1, w2) -> np.ndarray:
        """Numerische Zugehoerigkeit (vektorisiert in w1)."""
        w1 = np.asarray(w1, dtype=float)
        inside = np.zeros(np.broadcast(w1, np.asarray(w2)).shape, dtype=bool)
        for clause in self.clauses:
            clause_mask = np.ones_like(inside)
            for constraint in clause:
                clause_mask &= constraint.holds(w1, w2)
            inside |= clause_mask
        return inside & self.box.contains(w1, w2)

    def contains_exact(self, w1, w2) -> bool:
        """Zugehoerigkeit per exakter Vorzeichenauswertung in rationaler Arithmetik."""
        if not bool(self.box.contains(float(w1), float(w2))):
            return False
        return any(all(constraint.holds_exact(w1, w2) for constraint in clause) for clause in self.clauses)

    def with_box(self, box: Box) -> "SemiAlgebraicSet":
        return SemiAlgebraicSet(self.clauses, box, self.budget, self.label)

    def dilate_w1(self, factor: float) -> "SemiAlgebraicSet":
        """Bild unter w1 -> factor * w1 (factor > 0)."""
        if factor <= 0:
            raise InvalidParameterError("Streckfaktor muss positiv sein.")
        scale = to_rational(factor)
        clauses = tuple(
            tuple(
                Constraint.of(constraint.poly.as_expr().subs(W1, W1 / scale), constraint.relation)
                for constraint in clause
            )
            for clause in self.clauses
        )
        box = Box(self.box.x0 * factor, self.box.x1 * factor, self.box.y0, self.box.y1)
        return SemiAlgebraicSet(clauses, box, self.budget, self.label)


def abs_at_most(expr, bound) -> tuple[Constraint, ...]:
    """|expr| <= bound als Konjunktion zweier Ungleichungen."""
    return (Constraint.of(bound - expr, Relation.GE), Constraint.of(bound + expr, Relation.GE))


def format_set(semi_set: SemiAlgebraicSet) -> str:
    """Textformat: 'box x0 x1 y0 y1', dann je Bedingung '<rel> coeff e1 e2 ...', Klauseln durch 'or' getrennt."""
    box = semi_set.box
    lines = []
    if semi_set.label:
        lines.append(f"# {semi_set.label}")
    lines.append(f"box {box.x0!r} {box.x1!r} {box.y0!r} {box.y1!r}")
    for index, clause in enumerate(semi_set.clauses):
        if index:
            lines.append("or")
        lines.extend(constraint.to_line() for constraint in clause)
    return "\n".join(lines) + "\n"


def parse_set(text: str, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    """Liest das Textformat von format_set; '#' leitet Kommentare ein."""
    box: Box | None = None
    label = ""
    clauses: list[list[Constraint]] = [[]]
    for number, raw in enumerate(text.splitlines(), start=1):
        line, _, comment = raw.partition("#")
        if not label and comment.strip() and not line.strip():
            label = comment.strip()
        tokens = line.split()
        if not tokens:
            continue
        head = tokens[0]
        try:
            if head == "box":
                if len(tokens) != 5:
                    raise InvalidParameterError("box braucht vier Grenzen")
                box = Box(*(float(token) for token in tokens[1:]))
            elif head == "or":
                clauses.append([])
            else:
                relation = Relation(head)
                body = tokens[1:]
                if not body or len(body) % 3:
                    raise InvalidParameterError("Monomliste muss aus Tripeln 'coeff e1 e2' bestehen")
                expr = sympy.Integer(0)
                for offset in range(0, len(body), 3):
                    coeff = to_rational(body[offset])
                    e1, e2 = int(body[offset + 1]), int(body[offset + 2])
                    if e1 < 0 or e2 < 0:
                        raise InvalidParameterError("Exponenten muessen nichtnegativ sein")
                    expr += coeff * W1**e1 * W2**e2
                clauses[-1].append(Constraint.of(expr, relation))
        except (ValueError, TypeError) as exc:
            raise InvalidParameterError(f"Zeile {number}: {raw.strip()!r} ({exc})") from exc
    if box is None:
        raise InvalidParameterError("Mengendatei ohne 'box'-Zeile.")
    return SemiAlgebraicSet(tuple(tuple(clause) for clause in clauses), box, budget, label)


def read_set(path: str | Path, budget: int = DEFAULT_COMPLEXITY_BUDGET) -> SemiAlgebraicSet:
    return parse_set(Path(path).read_text(encoding="utf-8"), budget)
