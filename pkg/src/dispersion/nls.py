"""Kubische hyperbolische NLS: Strang-Splitting und Picard-Iteration der Duhamel-Formel.

Normierung: i u_t + (1/2pi) (d_1^2 - d_2^2) u = sigma |u|^2 u, sigma = +1 defokussierend.
Der lineare Anteil ist damit genau evolve(), also Multiplikation mit e(-t H).
Zustaende leben auf dem ganzen (ueberabgetasteten) Ortsgitter des Plans.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft

from src.core.errors import BlowUpError, DegenerateInputError, InvalidParameterError
from src.core.lattice import SpectralField, ensure_same_lattice, l2_norm, write_field
from src.dispersion.propagator import EvolutionPlan

logger = logging.getLogger(__name__)

SCHEME_ID = "strang-split-step"
# Betragsgrenze, ab der ein Zustand als explodiert gilt.
_BLOW_UP_LIMIT = 1e60
# Geometrische Abnahme der Picard-Differenzen ab Iterierte 3.
CONTRACTION_FACTOR = 0.5


class NlsSign(str, Enum):
    FOCUSING = "focusing"
    DEFOCUSING = "defocusing"

    @property
    def sigma(self) -> float:
        return 1.0 if self is NlsSign.DEFOCUSING else -1.0


def default_dt(cutoff: float, dt_factor: float = 8.0) -> float:
    """dt = 1 / (dt_factor N^2)."""
    return 1.0 / (dt_factor * cutoff * cutoff)


class GridDynamics:
    """Linearer und nichtlinearer Teilfluss auf dem Ortsgitter eines Plans."""

    def __init__(self, plan: EvolutionPlan, sign: NlsSign | str) -> None:
        self.plan = plan
        self.sign = NlsSign(sign)

    @cached_property
    def grid_symbol(self) -> np.ndarray:
        """H auf allen FFT-Frequenzen des Ortsgitters."""
        m2, m1 = self.plan.grid_shape
        lattice = self.plan.lattice
        xi1 = scipy.fft.fftfreq(m1, d=lattice.box_length / m1)
        xi2 = scipy.fft.fftfreq(m2, d=lattice.lam / m2)
        grid1, grid2 = np.meshgrid(xi1, xi2)
        return np.asarray(self.plan.symbol.eval(grid1, grid2), dtype=float)

    def initial_values(self, phi: SpectralField) -> np.ndarray:
        ensure_same_lattice(phi, self.plan.lattice)
        return self.plan.synthesize(phi.coeffs)

    def to_field(self, values: np.ndarray) -> SpectralField:
        """Projektion des Gitterzustands auf das Frequenzgitter."""
        return SpectralField(self.plan.lattice, self.plan.analyze(values))

    def linear(self, values: np.ndarray, dt: float) -> np.ndarray:
        spectrum = scipy.fft.fft2(values, workers=self.plan.workers)
        spectrum *= np.exp(-2j * np.pi * dt * self.grid_symbol)
        return scipy.fft.ifft2(spectrum, workers=self.plan.workers)

    def nonlinear(self, values: np.ndarray, dt: float) -> np.ndarray:
        """Exakter Fluss von i u_t = sigma |u|^2 u (|u| bleibt punktweise erhalten)."""
        return values * np.exp(-1j * self.sign.sigma * dt * np.abs(values) ** 2)

    def strang_step(self, values: np.ndarray, dt: float) -> np.ndarray:
        half = self.nonlinear(values, dt / 2)
        return self.nonlinear(self.linear(half, dt), dt / 2)

    def mass(self, values: np.ndarray) -> float:
        return float(np.sum(np.abs(values) ** 2)) * self.plan.cell_volume

    def quartic(self, values: np.ndarray) -> float:
        return float(np.sum(np.abs(values) ** 4)) * self.plan.cell_volume


@dataclass(frozen=True)
class DiagnosticSample:
    step: int
    time: float
    mass: float
    max_amplitude: float


@dataclass
class PicardRecord:
    """Differenzen ||u_{n+1} - u_n||_{L4(I x Box)}, Kontraktionsfaktoren und effektive Konstanten."""

    interval: tuple[float, float]
    iterate_norms: list[float] = field(default_factory=list)
    differences: list[float] = field(default_factory=list)
    effective_constants: list[float] = field(default_factory=list)
    data_norm: float = 0.0
    overflow_at: int | None = None

    @property
    def iterations(self) -> int:
        return len(self.iterate_norms)

    @property
    def contraction_factors(self) -> list[float]:
        factors = []
        for previous, current in zip(self.differences, self.differences[1:]):
            factors.append(current / previous if previous > 0 else (0.0 if current == 0 else math.inf))
        return factors

    @property
    def diverged(self) -> bool:
        """Faktor >= 1 in drei aufeinanderfolgenden Schritten oder Ueberlauf."""
        if self.overflow_at is not None:
            return True
        run = 0
        for factor in self.contraction_factors:
            run = run + 1 if factor >= 1.0 else 0
            if run >= 3:
                return True
        return False

    @property
    def limit_norm(self) -> float:
        return self.iterate_norms[-1] if self.iterate_norms else 0.0


@dataclass
class NlsRun:
    """Parameter und Ergebnisse eines NLS-Laufs ueber [0, duration]."""

    sign: NlsSign
    plan: EvolutionPlan
    initial: SpectralField
    duration: float = 1.0
    dt_factor: float = 8.0
    diagnostic_stride: int = 8
    checkpoint_stride: int = 0
    checkpoint_dir: Path | None = None
    scheme: str = SCHEME_ID
    dt: float = field(init=False)
    steps: int = field(init=False)
    steps_per_unit: int = field(init=False)
    interval_steps: list[int] = field(default_factory=list, init=False)
    diagnostics: list[DiagnosticSample] = field(default_factory=list, init=False)
    interval_l4: list[float] = field(default_factory=list, init=False)
    interval_mass: list[float] = field(default_factory=list, init=False)
    checkpoints: list[Path] = field(default_factory=list, init=False)
    # Ohne checkpoint_dir bleiben Checkpoints im Speicher und werden spaeter geschrieben.
    checkpoint_fields: list[tuple[int, SpectralField]] = field(default_factory=list, init=False, repr=False)
    final_values: np.ndarray | None = field(default=None, init=False, repr=False)
    picard: PicardRecord | None = field(default=None, init=False)

    def __post_init__(self) -> None:
        self.sign = NlsSign(self.sign)
        ensure_same_lattice(self.initial, self.plan.lattice)
        if not math.isfinite(self.duration) or self.duration <= 0:
            raise InvalidParameterError(f"Laufzeit muss positiv sein, erhielt {self.duration}.")
        if self.dt_factor < 8.0:
            raise InvalidParameterError(f"dt_factor {self.dt_factor} < 8 verletzt dt <= 1/(8 N^2).")
        if self.diagnostic_stride < 1 or self.checkpoint_stride < 0:
            raise InvalidParameterError("Diagnose-Schrittweite >= 1, Checkpoint-Schrittweite >= 0.")
        dt_max = default_dt(self.plan.lattice.cutoff, self.dt_factor)
        # Ganzzahlige Schritte pro Zeiteinheit: dt * steps ueberdeckt das Intervall exakt,
        # und verkettete Einheitsintervalle laufen mit demselben dt wie ein Gesamtlauf.
        self.steps_per_unit = max(1, math.ceil(1.0 / dt_max - 1e-9))
        self.steps = max(1, math.ceil(self.duration * self.steps_per_unit - 1e-9))
        self.dt = self.duration / self.steps

    @property
    def mass_drift(self) -> float:
        """Groesste relative Massenabweichung gegenueber t = 0."""
        if not self.diagnostics or self.diagnostics[0].mass == 0.0:
            return 0.0
        reference = self.diagnostics[0].mass
        return max(abs(sample.mass - reference) for sample in self.diagnostics) / reference

    @property
    def final_field(self) -> SpectralField:
        if self.final_values is None:
            raise InvalidParameterError("Lauf wurde noch nicht integriert.")
        return GridDynamics(self.plan, self.sign).to_field(self.final_values)


def checkpoint_name(step: int) -> str:
    return f"nls_step{step:07d}.field"


def _advance(
    run: NlsRun,
    dynamics: GridDynamics,
    values: np.ndarray,
    first_step: int,
    steps: int,
    dt: float,
) -> tuple[np.ndarray, float]:
    """steps Strang-Schritte ab first_step; liefert Endzustand und int int |u|^4 (Trapez in t)."""
    quartic_prev = dynamics.quartic(values)
    integral = 0.0
    for offset in range(1, steps + 1):
        step = first_step + offset
        candidate = dynamics.strang_step(values, dt)
        if not np.all(np.isfinite(candidate)) or np.max(np.abs(candidate)) > _BLOW_UP_LIMIT:
            raise BlowUpError(f"Ueberlauf im Schritt {step}.", values, step)
        values = candidate
        quartic = dynamics.quartic(values)
        integral += abs(dt) / 2 * (quartic_prev + quartic)
        quartic_prev = quartic
        if step % run.diagnostic_stride == 0:
            run.diagnostics.append(
                DiagnosticSample(step, step * dt, dynamics.mass(values), float(np.max(np.abs(values))))
            )
        if run.checkpoint_stride and step % run.checkpoint_stride == 0:
            snapshot = dynamics.to_field(values)
            if run.checkpoint_dir is None:
                run.checkpoint_fields.append((step, snapshot))
            else:
                run.checkpoints.append(write_field(snapshot, Path(run.checkpoint_dir) / checkpoint_name(step)))
    return values, integral


def split_step(run: NlsRun) -> NlsRun:
    """Integriert den Lauf mit Strang-Splitting; Diagnose in festen Schrittabstaenden."""
    dynamics = GridDynamics(run.plan, run.sign)
    values = dynamics.initial_values(run.initial)
    run.diagnostics = [DiagnosticSample(0, 0.0, dynamics.mass(values), float(np.max(np.abs(values))))]
    run.interval_l4, run.interval_mass, run.checkpoints, run.checkpoint_fields = [], [], [], []
    values, integral = _advance(run, dynamics, values, 0, run.steps, run.dt)
    run.interval_steps = [run.steps]
    if run.steps % run.diagnostic_stride:
        run.diagnostics.append(
            DiagnosticSample(run.steps, run.duration, dynamics.mass(values), float(np.max(np.abs(values))))
        )
    run.interval_l4.append(integral ** 0.25)
    run.interval_mass.append(dynamics.mass(values))
    run.final_values = values
    logger.info("Split-Step: %d Schritte, dt=%.3g, Massendrift %.3g.", run.steps, run.dt, run.mass_drift)
    return run


def global_small_data_run(
    plan: EvolutionPlan,
    phi: SpectralField,
    intervals: int,
    sign: NlsSign | str = NlsSign.DEFOCUSING,
    smallness: float | None = 0.1,
    dt_factor: float = 8.0,
    diagnostic_stride: int = 8,
    checkpoint_stride: int = 0,
    checkpoint_dir: Path | None = None,
) -> NlsRun:
    """Verkettet intervals Einheitsintervalle; pro Intervall L4-Norm und Masse."""
    if intervals < 1:
        raise InvalidParameterError("Mindestens ein Einheitsintervall noetig.")
    norm = l2_norm(phi)
    if smallness is not None and norm > smallness:
        raise InvalidParameterError(f"||phi||_2 = {norm:.4g} ueber der Kleinheitsschranke {smallness}.")
    run = NlsRun(
        NlsSign(sign),
        plan,
        phi,
        duration=float(intervals),
        dt_factor=dt_factor,
        diagnostic_stride=diagnostic_stride,
        checkpoint_stride=checkpoint_stride,
        checkpoint_dir=checkpoint_dir,
    )
    if intervals == 1:
        return split_step(run)
    dynamics = GridDynamics(plan, run.sign)
    values = dynamics.initial_values(phi)
    run.diagnostics = [DiagnosticSample(0, 0.0, dynamics.mass(values), float(np.max(np.abs(values))))]
    per_interval = run.steps_per_unit
    if per_interval * intervals != run.steps:
        raise InvalidParameterError(f"{run.steps} Schritte passen nicht auf {intervals} Einheitsintervalle.")
    for index in range(intervals):
        values, integral = _advance(run, dynamics, values, index * per_interval, per_interval, run.dt)
        run.interval_steps.append(per_interval)
        run.interval_l4.append(integral ** 0.25)
        run.interval_mass.append(dynamics.mass(values))
        logger.debug("Intervall %d: L4 %.6g, Masse %.12g.", index + 1, run.interval_l4[-1], run.interval_mass[-1])
    if run.steps % run.diagnostic_stride:
        run.diagnostics.append(
            DiagnosticSample(run.steps, run.duration, dynamics.mass(values), float(np.max(np.abs(values))))
        )
    run.final_values = values
    logger.info("Globaler Lauf ueber %d Intervalle, Massendrift %.3g.", intervals, run.mass_drift)
    return run


def time_reversal_error(plan: EvolutionPlan, phi: SpectralField, sign: NlsSign | str, dt: float) -> float:
    """max |S(-dt) S(dt) u - u| relativ zu max |u|."""
    dynamics = GridDynamics(plan, sign)
    values = dynamics.initial_values(phi)
    back = dynamics.strang_step(dynamics.strang_step(values, dt), -dt)
    scale = float(np.max(np.abs(values))) or 1.0
    return float(np.max(np.abs(back - values))) / scale


def splitting_error_ratio(
    plan: EvolutionPlan,
    phi: SpectralField,
    sign: NlsSign | str = NlsSign.DEFOCUSING,
    duration: float = 1.0,
    dt_factor: float = 8.0,
) -> tuple[float, float, float]:
    """Fehler bei dt und dt/2 gegen eine Referenz mit dt/4; liefert (e(dt), e(dt/2), Quotient).

    Ein Verfahren zweiter Ordnung ergibt einen Quotienten um 5.
    """
    finals = []
    for factor in (dt_factor, 2 * dt_factor, 4 * dt_factor):
        run = split_step(NlsRun(NlsSign(sign), plan, phi, duration=duration, dt_factor=factor, diagnostic_stride=1 << 30))
        finals.append(run.final_values)
    reference = finals[2]
    scale = float(np.max(np.abs(reference))) or 1.0
    coarse = float(np.max(np.abs(finals[0] - reference))) / scale
    fine = float(np.max(np.abs(finals[1] - reference))) / scale
    ratio = coarse / fine if fine > 0 else math.inf
    logger.info("Splitting-Fehler %.3g / %.3g, Quotient %.3g.", coarse, fine, ratio)
    return coarse, fine, ratio


def single_mode_solution(plan: EvolutionPlan, phi: SpectralField, sign: NlsSign | str, t: float) -> SpectralField:
    """Exakte Loesung fuer ein Ein-Moden-Datum: c(t) = c0 e(-t H) exp(-i sigma t |c0 w|^2)."""
    support = phi.support()
    if len(support) != 1:
        raise DegenerateInputError("Ein-Moden-Loesung braucht genau einen Koeffizienten.")
    flat = int(support[0])
    c0 = complex(phi.coeffs.ravel()[flat])
    amplitude = abs(c0) * plan.lattice.point_weight
    phase = -2j * np.pi * t * float(plan.phase_rate.ravel()[flat]) - 1j * NlsSign(sign).sigma * t * amplitude**2
    coeffs = np.zeros(plan.lattice.shape, dtype=np.complex128)
    coeffs.ravel()[flat] = c0 * np.exp(phase)
    return SpectralField(plan.lattice, coeffs)


def _time_grid(cutoff: float, t_end: float, dt_factor: float) -> np.ndarray:
    steps = max(1, math.ceil(abs(t_end) / default_dt(cutoff, dt_factor) - 1e-9))
    return np.linspace(0.0, t_end, steps + 1)


def picard_iterate(
    plan: EvolutionPlan,
    phi: SpectralField,
    sign: NlsSign | str = NlsSign.DEFOCUSING,
    interval: tuple[float, float] = (-1.0, 1.0),
    max_iter: int = 12,
    smallness: float | None = 0.1,
    dt_factor: float = 8.0,
) -> PicardRecord:
    """u_{n+1}(t) = S(t) phi - i sigma S(t) int_0^t S(-s) |u_n|^2 u_n(s) ds auf dem Intervall.

    Alle Iterierten werden gemeinsam zeitlich vorwaerts (und rueckwaerts) ab t = 0
    gestreamt; das s-Integral laeuft als kumulierte Trapezsumme mit.
    """
    t0, t1 = interval
    if not (t0 <= 0.0 <= t1) or t0 == t1:
        raise InvalidParameterError(f"Intervall {interval} muss 0 enthalten.")
    if max_iter < 1:
        raise InvalidParameterError("max_iter muss >= 1 sein.")
    dynamics = GridDynamics(plan, sign)
    sigma = dynamics.sign.sigma
    data_norm = l2_norm(phi)
    if smallness is not None and data_norm > smallness:
        logger.warning("||phi||_2 = %.4g ueber Kleinheitsschranke %g; Kontraktion nicht garantiert.", data_norm, smallness)
    record = PicardRecord(interval=(t0, t1), data_norm=data_norm)
    spectrum0 = scipy.fft.fft2(dynamics.initial_values(phi), workers=plan.workers)
    count = max_iter + 1
    quartic_norms = np.zeros(count)
    quartic_diffs = np.zeros(max_iter)
    alive = count
    for t_end in (t1, t0):
        if t_end == 0.0:
            continue
        times = _time_grid(plan.lattice.cutoff, t_end, dt_factor)
        h = abs(times[1] - times[0])
        duhamel = np.zeros((count, *plan.grid_shape), dtype=np.complex128)
        previous_g: list[np.ndarray | None] = [None] * count
        for index, t in enumerate(times):
            weight = h / 2 if index in (0, len(times) - 1) else h
            forward = np.exp(-2j * np.pi * t * dynamics.grid_symbol)
            iterates: list[np.ndarray] = []
            for k in range(min(count, alive)):
                # Iterierte k benutzt das Duhamel-Integral der Iterierten k-1 bis zur Zeit t.
                spectrum = spectrum0 if k == 0 else spectrum0 - 1j * sigma * duhamel[k - 1]
                values = scipy.fft.ifft2(spectrum * forward, workers=plan.workers)
                if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > _BLOW_UP_LIMIT:
                    alive = k
                    record.overflow_at = k if record.overflow_at is None else min(record.overflow_at, k)
                    logger.warning("Picard-Iterierte %d laeuft bei t=%.4g ueber.", k, t)
                    break
                g = scipy.fft.fft2(np.abs(values) ** 2 * values, workers=plan.workers) / forward
                if index > 0:
                    duhamel[k] += np.sign(t_end) * h / 2 * (previous_g[k] + g)
                    # Integral an Zeit t ist jetzt vollstaendig; Iterierte k+1 nutzt es.
                previous_g[k] = g
                iterates.append(values)
            # Beitrag dieser Zeitschicht zu den L4-Normen (Trapezgewicht).
            for k, values in enumerate(iterates):
                quartic_norms[k] += weight * dynamics.quartic(values)
                if k > 0:
                    quartic_diffs[k - 1] += weight * dynamics.quartic(values - iterates[k - 1])
    valid = min(alive, count)
    record.iterate_norms = [float(item) ** 0.25 for item in quartic_norms[:valid]]
    record.differences = [float(item) ** 0.25 for item in quartic_diffs[: max(valid - 1, 0)]]
    for n in range(valid - 1):
        denominator = data_norm + record.iterate_norms[n] ** 3
        record.effective_constants.append(record.iterate_norms[n + 1] / denominator if denominator > 0 else 0.0)
    if record.diverged:
        logger.warning("Picard-Iteration kontrahiert nicht (||phi||_2 = %.4g).", data_norm)
    logger.info(
        "Picard: %d Iterierte, letzte Differenz %.3g.", record.iterations, record.differences[-1] if record.differences else 0.0
    )
    return record


def split_step_window_norm(
    plan: EvolutionPlan,
    phi: SpectralField,
    sign: NlsSign | str = NlsSign.DEFOCUSING,
    interval: tuple[float, float] = (-1.0, 1.0),
    dt_factor: float = 8.0,
) -> float:
    """L4-Norm der Split-Step-Loesung ueber interval x Box (vorwaerts und rueckwaerts ab 0)."""
    dynamics = GridDynamics(plan, sign)
    initial = dynamics.initial_values(phi)
    total = 0.0
    for t_end in interval:
        if t_end == 0.0:
            continue
        times = _time_grid(plan.lattice.cutoff, t_end, dt_factor)
        dt = times[1] - times[0]
        values = initial
        quartic_prev = dynamics.quartic(values)
        for step in range(1, len(times)):
            candidate = dynamics.strang_step(values, dt)
            if not np.all(np.isfinite(candidate)):
                raise BlowUpError(f"Ueberlauf im Schritt {step}.", values, step)
            values = candidate
            quartic = dynamics.quartic(values)
            total += abs(dt) / 2 * (quartic_prev + quartic)
            quartic_prev = quartic
    return total ** 0.25


def contraction_holds(record: PicardRecord, max_factor: float = CONTRACTION_FACTOR, from_iterate: int = 3) -> bool:
    """Kein Divergenzsignal und alle Faktoren ab from_iterate <= max_factor."""
    factors = record.contraction_factors[max(from_iterate - 1, 0):]
    return not record.diverged and bool(factors) and max(factors) <= max_factor


def calibrate_smallness(
    plan: EvolutionPlan,
    profile: SpectralField,
    sign: NlsSign | str = NlsSign.DEFOCUSING,
    low: float = 1e-3,
    high: float = 10.0,
    rounds: int = 12,
    max_iter: int = 8,
    dt_factor: float = 8.0,
    max_factor: float = CONTRACTION_FACTOR,
) -> float:
    """Bisektion auf ||phi||_2 fuer die Grenze, ab der die Picard-Kontraktion versagt.

    Kontraktion heisst hier dasselbe wie im Akzeptanztest: Faktoren <= max_factor.
    """
    if profile.is_zero():
        raise DegenerateInputError("Kalibrierung braucht ein nichttriviales Profil.")
    shape = profile.normalized()

    def holds(amplitude: float) -> bool:
        record = picard_iterate(plan, shape.scaled(amplitude), sign, max_iter=max_iter, smallness=None, dt_factor=dt_factor)
        return contraction_holds(record, max_factor)

    if not holds(low):
        logger.warning("Kontraktion versagt schon bei ||phi||_2 = %g.", low)
        return low
    if holds(high):
        return high
    for _ in range(rounds):
        middle = math.sqrt(low * high)
        if holds(middle):
            low = middle
        else:
            high = middle
    logger.info("Kalibrierte Kleinheitsschranke: %.4g.", low)
    return low
