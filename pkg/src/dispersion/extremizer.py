"""Fixpunktsuche nach Beinahe-Extremierern des L4/L2-Strichartz-Quotienten."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.core.errors import DegenerateInputError, InvalidParameterError
from src.core.lattice import FrequencyLattice, ProjectionMode, SpectralField, ensure_same_lattice, gaussian_field, project
from src.core.symbols import DispersionSymbol
from src.dispersion.functional import strichartz_ratio
from src.dispersion.propagator import EvolutionPlan, evolved_coeffs
from src.utils.rng import complex_gaussian, make_generator

logger = logging.getLogger(__name__)


class StopReason(str, Enum):
    TOLERANCE = "tolerance"
    MAX_ITER = "maxIter"
    STALL = "stall"


class InitKind(str, Enum):
    GAUSSIAN = "gaussian"
    X2_CONSTANT = "x2_constant"
    HYPERBOLA = "hyperbola"


@dataclass
class ExtremizerTrace:
    """Verlauf (Quotient, akzeptiert) je Versuch, Endfeld und Abbruchgrund."""

    n: int
    scenario: str
    seed: int
    init_kind: str = ""
    iterates: list[tuple[float, bool]] = field(default_factory=list)
    final: SpectralField | None = None
    stop_reason: StopReason = StopReason.MAX_ITER

    @property
    def accepted_ratios(self) -> list[float]:
        return [ratio for ratio, accepted in self.iterates if accepted]

    @property
    def initial_ratio(self) -> float:
        return self.accepted_ratios[0]

    @property
    def final_ratio(self) -> float:
        return self.accepted_ratios[-1]


def _confine(field_: SpectralField, n: float, mean_zero: bool) -> SpectralField:
    confined = project(field_, ProjectionMode.LE, n)
    if mean_zero:
        confined = project(confined, ProjectionMode.MEAN_ZERO_X2)
    return confined


def fixed_point_image(plan: EvolutionPlan, phi: SpectralField) -> np.ndarray:
    """sum_t weight(t) e(+tH) analyze(|u|^2 u) mit u = e^{itH} phi; erste Variation von ||u||_4^4."""
    ensure_same_lattice(phi, plan.lattice)
    nodes = plan.window.nodes
    weights = plan.window.weights
    step = plan.chunk_size()
    image = np.zeros(plan.lattice.shape, dtype=np.complex128)
    for start in range(0, len(nodes), step):
        stop = min(start + step, len(nodes))
        times = nodes[start:stop]
        values = plan.synthesize(evolved_coeffs(plan, phi.coeffs, times))
        back = plan.analyze(np.abs(values) ** 2 * values)
        back *= np.exp(2j * np.pi * times[:, None, None] * plan.phase_rate[None, :, :])
        image += np.tensordot(weights[start:stop], back, axes=(0, 0))
    return image


def _align_phase(candidate: SpectralField, reference: SpectralField) -> SpectralField:
    overlap = np.vdot(reference.coeffs, candidate.coeffs)
    if overlap == 0:
        return candidate
    return candidate.scaled(np.conj(overlap) / abs(overlap))


def extremize(
    plan: EvolutionPlan,
    n: int,
    init: SpectralField,
    max_iter: int = 200,
    tol: float = 1e-4,
    stall_window: int = 5,
    max_halvings: int = 6,
    mean_zero: bool = False,
    scenario: str = "",
    seed: int = 0,
    init_kind: str = "",
) -> ExtremizerTrace:
    """Iteriert phi <- normalize(P_{<=N} Fixpunktbild) mit monotoner Annahmeregel.

    Ein Kandidat wird nur angenommen, wenn sein Quotient nicht kleiner ist; sonst wird
    er phasenangeglichen halbe-halbe mit dem Vorgaenger gemischt (hoechstens
    max_halvings mal), danach ist die Suche festgefahren.
    """
    if n > plan.lattice.cutoff:
        raise InvalidParameterError(f"N = {n} liegt ueber dem Gitter-Cutoff {plan.lattice.cutoff}.")
    if max_iter < 0 or tol < 0 or stall_window < 1:
        raise InvalidParameterError("max_iter, tol und stall_window muessen nichtnegativ bzw. positiv sein.")
    ensure_same_lattice(init, plan.lattice)
    phi = _confine(init, n, mean_zero)
    if phi.is_zero():
        raise DegenerateInputError("Startfeld verschwindet nach der Projektion.")
    phi = phi.normalized()
    current = strichartz_ratio(plan, phi)
    trace = ExtremizerTrace(n=n, scenario=scenario, seed=seed, init_kind=init_kind, iterates=[(current, True)])
    for iteration in range(max_iter):
        image = _confine(phi.with_coeffs(fixed_point_image(plan, phi)), n, mean_zero)
        if image.is_zero():
            raise DegenerateInputError("Fixpunktbild ist das Nullfeld.")
        candidate = image.normalized()
        ratio = strichartz_ratio(plan, candidate)
        halvings = 0
        while ratio < current and halvings < max_halvings:
            trace.iterates.append((ratio, False))
            aligned = _align_phase(candidate, phi)
            candidate = aligned.with_coeffs(0.5 * (aligned.coeffs + phi.coeffs)).normalized()
            ratio = strichartz_ratio(plan, candidate)
            halvings += 1
        if ratio < current:
            trace.iterates.append((ratio, False))
            trace.stop_reason = StopReason.STALL
            logger.debug("Extremierer festgefahren nach %d Schritten (N=%d).", iteration, n)
            break
        phi = candidate
        current = ratio
        trace.iterates.append((ratio, True))
        accepted = trace.accepted_ratios
        if len(accepted) > stall_window:
            reference = accepted[-1 - stall_window]
            if (accepted[-1] - reference) <= tol * accepted[-1]:
                trace.stop_reason = StopReason.TOLERANCE
                break
    trace.final = phi
    logger.info(
        "Extremierer N=%d (%s): %.6g -> %.6g, Abbruch %s.",
        n,
        init_kind or "init",
        trace.initial_ratio,
        trace.final_ratio,
        trace.stop_reason.value,
    )
    return trace


def init_gaussian(lattice: FrequencyLattice, n: float, rng: np.random.Generator) -> SpectralField:
    return gaussian_field(lattice, rng, n, ProjectionMode.LE)


def init_x2_constant(lattice: FrequencyLattice, n: float, rng: np.random.Generator) -> SpectralField:
    """In x2 konstantes Datum: Gaussprofil in xi1 auf der Zeile xi2 = 0."""
    xi1, _ = lattice.frequencies
    profile = np.exp(-((xi1 / max(n / 4.0, 1e-12)) ** 2)) * (1.0 + 0.1 * complex_gaussian(rng, lattice.shape))
    coeffs = np.where(lattice.indices[1] == 0, profile, 0.0)
    return project(SpectralField(lattice, coeffs), ProjectionMode.LE, n)


def init_hyperbola(
    lattice: FrequencyLattice, n: float, rng: np.random.Generator, symbol: DispersionSymbol
) -> SpectralField:
    """Gauss-Koeffizienten nahe der resonanten Menge |H(xi)| <= 1."""
    xi1, xi2 = lattice.frequencies
    near = np.abs(symbol.eval(xi1, xi2)) <= 1.0
    coeffs = np.where(near, complex_gaussian(rng, lattice.shape), 0.0)
    return project(SpectralField(lattice, coeffs), ProjectionMode.LE, n)


def best_extremizer(
    plan: EvolutionPlan,
    n: int,
    seed: int,
    scenario: str = "",
    mean_zero: bool = False,
    max_iter: int = 200,
    tol: float = 1e-4,
    stall_window: int = 5,
    max_halvings: int = 6,
) -> tuple[ExtremizerTrace, list[ExtremizerTrace]]:
    """Drei Startwerte je (Szenario, N); liefert den besten Verlauf und alle Verlaeufe."""
    lattice = plan.lattice
    builders = {
        InitKind.GAUSSIAN: lambda rng: init_gaussian(lattice, n, rng),
        InitKind.X2_CONSTANT: lambda rng: init_x2_constant(lattice, n, rng),
        InitKind.HYPERBOLA: lambda rng: init_hyperbola(lattice, n, rng, plan.symbol),
    }
    traces: list[ExtremizerTrace] = []
    for kind, build in builders.items():
        rng = make_generator(seed, "extremizer", scenario, n, kind.value)
        try:
            trace = extremize(
                plan,
                n,
                build(rng),
                max_iter=max_iter,
                tol=tol,
                stall_window=stall_window,
                max_halvings=max_halvings,
                mean_zero=mean_zero,
                scenario=scenario,
                seed=seed,
                init_kind=kind.value,
            )
        except DegenerateInputError as exc:
            logger.info("Startwert %s fuer N=%d uebersprungen: %s", kind.value, n, exc)
            continue
        traces.append(trace)
    if not traces:
        raise DegenerateInputError(f"Kein Startwert fuer N = {n} liefert ein nichttriviales Feld.")
    best = max(traces, key=lambda trace: trace.final_ratio)
    return best, traces
