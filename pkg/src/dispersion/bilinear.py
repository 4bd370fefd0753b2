"""Bilineare L2-Normen frequenzlokalisierter Fluesse und das Resonanzmass von E_{a,b}."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from src.core.errors import DegenerateInputError, InvalidParameterError
from src.core.lattice import ProjectionMode, SpectralField, ensure_same_lattice, gaussian_field, l2_norm, project
from src.dispersion.functional import l4_space_time_norm
from src.dispersion.propagator import EvolutionPlan, evolved_coeffs
from src.measure.catalog import eab_set
from src.measure.lab import DEFAULT_OPTIONS, MeasureOptions, lattice_slices, rz_measure
from src.measure.roots import slice_intervals
from src.utils.fitting import linear_fit
from src.utils.rng import make_generator

logger = logging.getLogger(__name__)


def _is_dyadic(value: int) -> bool:
    return value >= 1 and not value & (value - 1)


@dataclass(frozen=True)
class BilinearConfig:
    """Frequenzstufen N1 >> N2 (N1/N2 >= 4), Ensemble und Plan."""

    n1: int
    n2: int
    lam: float
    ensemble_size: int
    seed: int
    plan: EvolutionPlan

    def __post_init__(self) -> None:
        if not (_is_dyadic(self.n1) and _is_dyadic(self.n2)):
            raise InvalidParameterError(f"N1 = {self.n1} und N2 = {self.n2} muessen dyadisch sein.")
        if self.n1 < 4 * self.n2:
            raise InvalidParameterError(f"N1 >> N2 verlangt N1/N2 >= 4, erhielt {self.n1}/{self.n2}.")
        if self.n1 > self.plan.lattice.cutoff:
            raise InvalidParameterError(f"N1 = {self.n1} liegt ueber dem Gitter-Cutoff {self.plan.lattice.cutoff}.")
        if self.lam < 1 or self.lam != self.plan.lattice.lam:
            raise InvalidParameterError(f"lambda = {self.lam} passt nicht zum Gitter ({self.plan.lattice.lam}).")
        if self.ensemble_size < 1:
            raise InvalidParameterError("Ensemble braucht mindestens ein Mitglied.")

    @property
    def theorem_bound(self) -> float:
        return theorem_bound(self.n1, self.n2, self.lam)


def theorem_bound(n1: float, n2: float, lam: float) -> float:
    """(1/lambda + N2/N1)^(1/2)."""
    return math.sqrt(1.0 / lam + n2 / n1)


def product_norm(plan: EvolutionPlan, first: SpectralField, second: SpectralField) -> float:
    """||e^{itH} first * e^{itH} second||_{L2} ueber Fenster x Box (Trapezregel in t)."""
    ensure_same_lattice(first, plan.lattice)
    ensure_same_lattice(second, plan.lattice)
    nodes = plan.window.nodes
    weights = plan.window.weights
    step = max(1, plan.chunk_size() // 2)
    total = 0.0
    for start in range(0, len(nodes), step):
        stop = min(start + step, len(nodes))
        u1 = plan.synthesize(evolved_coeffs(plan, first.coeffs, nodes[start:stop]))
        u2 = plan.synthesize(evolved_coeffs(plan, second.coeffs, nodes[start:stop]))
        spatial = np.sum(np.abs(u1 * u2) ** 2, axis=(-2, -1)) * plan.cell_volume
        total += float(np.dot(weights[start:stop], spatial))
    return math.sqrt(max(total, 0.0))


def _shell(field_: SpectralField, n: int) -> SpectralField:
    if field_.is_zero():
        return field_
    projected = project(field_, ProjectionMode.AT, n)
    if projected.is_zero():
        raise DegenerateInputError(f"Projektion auf die Schale N = {n} ist leer.")
    return projected


def bilinear_norm(config: BilinearConfig, phi1: SpectralField, phi2: SpectralField) -> float:
    """||e^{itH} P_{N1} phi1 * e^{itH} P_{N2} phi2||_{L2([0,1] x Box)}; ein Nullfeld ergibt 0."""
    first = _shell(phi1, config.n1)
    second = _shell(phi2, config.n2)
    if first.is_zero() or second.is_zero():
        return 0.0
    return product_norm(config.plan, first, second)


def bilinear_ratio(config: BilinearConfig, phi1: SpectralField, phi2: SpectralField) -> float:
    """Bilineare Norm geteilt durch ||P_{N1} phi1|| ||P_{N2} phi2||."""
    first = _shell(phi1, config.n1)
    second = _shell(phi2, config.n2)
    denominator = l2_norm(first) * l2_norm(second)
    if denominator == 0.0:
        raise DegenerateInputError("Bilinearer Quotient fuer ein Nullfeld ist undefiniert.")
    return product_norm(config.plan, first, second) / denominator


def cauchy_schwarz_ceiling(config: BilinearConfig, phi1: SpectralField, phi2: SpectralField) -> tuple[float, float]:
    """(bilineare Norm, ||u1||_{L4} ||u2||_{L4}); die erste Zahl liegt unter der zweiten."""
    first = _shell(phi1, config.n1)
    second = _shell(phi2, config.n2)
    value = product_norm(config.plan, first, second)
    ceiling = l4_space_time_norm(config.plan, first) * l4_space_time_norm(config.plan, second)
    return value, ceiling


def _member_ratio(config: BilinearConfig, member: int) -> float:
    rng = make_generator(config.seed, "bilinear", config.n1, config.n2, repr(config.lam), member)
    lattice = config.plan.lattice
    phi1 = gaussian_field(lattice, rng, config.n1, ProjectionMode.AT)
    phi2 = gaussian_field(lattice, rng, config.n2, ProjectionMode.AT)
    return bilinear_ratio(config, phi1, phi2)


def ensemble_ratios(config: BilinearConfig, workers: int = 1) -> list[float]:
    """Quotienten aller Ensemble-Mitglieder in Mitgliedsreihenfolge."""
    members = range(config.ensemble_size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ratios = list(pool.map(lambda member: _member_ratio(config, member), members))
    else:
        ratios = [_member_ratio(config, member) for member in members]
    logger.debug("Bilineares Ensemble N1=%d N2=%d lambda=%g: max %.6g.", config.n1, config.n2, config.lam, max(ratios))
    return ratios


@dataclass(frozen=True)
class BilinearFit:
    """Exponenten in N2/N1 und 1/lambda; Regime-Steigungen als Diagnose."""

    exponent_ratio: float
    exponent_lambda: float
    constant: float
    residuals: tuple[float, ...]
    regime_ratio_slope: float | None
    regime_lambda_slope: float | None


def _model(xy: np.ndarray, constant: float, exponent_lambda: float, exponent_ratio: float) -> np.ndarray:
    ratio, inverse_lambda = xy
    return constant * np.sqrt(inverse_lambda ** (2 * exponent_lambda) + ratio ** (2 * exponent_ratio))


def _regime_slope(x: np.ndarray, values: np.ndarray, mask: np.ndarray) -> float | None:
    if len(np.unique(x[mask])) < 2:
        return None
    return linear_fit(np.log(x[mask]), np.log(values[mask])).slope


def bilinear_scaling_fit(samples, regime_factor: float = 4.0) -> BilinearFit:
    """Fit von R = C ((1/lambda)^(2a) + (N2/N1)^(2b))^(1/2) ueber Tupel (N1, N2, lambda, R).

    Variiert nur eine Achse, wird deren Exponent aus der log-log-Steigung bestimmt
    und der andere als NaN gemeldet.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 4 or len(data) < 4:
        raise DegenerateInputError("Skalierungsfit braucht mindestens 4 Tupel (N1, N2, lambda, R).")
    ratio = data[:, 1] / data[:, 0]
    inverse_lambda = 1.0 / data[:, 2]
    values = data[:, 3]
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise DegenerateInputError("Skalierungsfit braucht positive, endliche Quotienten.")
    ratio_varies = len(np.unique(ratio)) >= 2
    lambda_varies = len(np.unique(inverse_lambda)) >= 2
    ratio_regime = ratio >= regime_factor * inverse_lambda
    lambda_regime = inverse_lambda >= regime_factor * ratio
    if ratio_varies and lambda_varies:
        regime_ratio = _regime_slope(ratio, values, ratio_regime)
        regime_lambda = _regime_slope(inverse_lambda, values, lambda_regime)
        if regime_ratio is None or regime_lambda is None:
            raise DegenerateInputError("Gitter deckt nicht beide Regime (N2/N1 >> 1/lambda und umgekehrt) ab.")
        params, _ = optimize.curve_fit(
            _model,
            np.vstack([ratio, inverse_lambda]),
            values,
            p0=(float(np.median(values)), 0.5, 0.5),
            bounds=([0.0, 0.0, 0.0], [np.inf, 2.0, 2.0]),
            maxfev=20000,
        )
        constant, exponent_lambda, exponent_ratio = (float(item) for item in params)
        predicted = _model(np.vstack([ratio, inverse_lambda]), *params)
        residuals = tuple(float(item) for item in np.log(values) - np.log(predicted))
        return BilinearFit(exponent_ratio, exponent_lambda, constant, residuals, regime_ratio, regime_lambda)
    if ratio_varies:
        fit = linear_fit(np.log(ratio), np.log(values))
        return BilinearFit(fit.slope, math.nan, math.exp(fit.intercept), fit.residuals, fit.slope, None)
    if lambda_varies:
        fit = linear_fit(np.log(inverse_lambda), np.log(values))
        return BilinearFit(math.nan, fit.slope, math.exp(fit.intercept), fit.residuals, None, fit.slope)
    raise DegenerateInputError("Weder N2/N1 noch lambda variieren im Gitter.")


def _dyadic_level(vector, given: float | None, comparability: float, name: str) -> float:
    norm = math.hypot(float(vector[0]), float(vector[1]))
    if norm == 0.0:
        raise InvalidParameterError(f"{name} darf nicht der Nullvektor sein.")
    level = given if given is not None else 2.0 ** round(math.log2(norm))
    if not (level / comparability <= norm <= comparability * level):
        raise InvalidParameterError(f"|{name}| = {norm:g} ist nicht vergleichbar mit {level:g} (Konstante {comparability}).")
    return level


def eab_measure(
    a,
    b,
    lam: float,
    theta_res: float = 1.0,
    n1: float | None = None,
    n2: float | None = None,
    comparability: float = 2.0,
    options: MeasureOptions = DEFAULT_OPTIONS,
) -> float:
    """|E_{a,b}|_{R x Z_{1/lambda}} ueber das Mass-Labor."""
    _dyadic_level(a, n1, comparability, "a")
    level2 = _dyadic_level(b, n2, comparability, "b")
    return rz_measure(eab_set(a, b, level2, theta_res), lam, options)


def eab_slice_widths(
    a,
    b,
    lam: float,
    theta_res: float = 1.0,
    n2: float | None = None,
    comparability: float = 2.0,
    options: MeasureOptions = DEFAULT_OPTIONS,
) -> list[tuple[float, float]]:
    """(eta2, laengstes eta1-Intervall) je Gitterschnitt; erwartet wird Breite <~ 1/N1."""
    level2 = _dyadic_level(b, n2, comparability, "b")
    semi_set = eab_set(a, b, level2, theta_res)
    widths = []
    for level, length in lattice_slices(semi_set, lam, options):
        if length == 0.0:
            widths.append((level, 0.0))
            continue
        intervals = slice_intervals(semi_set, level, options.root_tol, options.max_degree)
        widths.append((level, max(right - left for left, right in intervals)))
    return widths


def sample_eab_pairs(n1: int, n2: int, lam: float, count: int, seed: int) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Paare (a, b) mit |a1| in [N1/2, N1] und b in der Schale N2, plus der orthogonale Fall."""
    pairs = [((float(n1), 0.0), (float(n2), 0.0)), ((float(n1), 0.0), (0.0, float(n2)))]
    for index in range(count):
        rng = make_generator(seed, "eab", n1, n2, repr(lam), index)
        a1 = float(rng.choice((-1.0, 1.0)) * rng.uniform(n1 / 2, n1))
        a2 = round(rng.uniform(-n1 / 2, n1 / 2) * lam) / lam
        radius = rng.uniform(n2 / 2 + 1e-9, n2)
        angle = rng.uniform(0.0, 2 * math.pi)
        b1 = float(radius * math.cos(angle))
        b2 = round(radius * math.sin(angle) * lam) / lam
        if math.hypot(b1, b2) < n2 / 2:
            b2 = 0.0
            b1 = math.copysign(max(abs(b1), n2 / 2), b1 or 1.0)
        pairs.append(((a1, a2), (b1, b2)))
    return pairs


def track_correlation(first, second) -> float:
    """Rangkorrelation zweier Messreihen (protokolliert, nicht geprueft)."""
    if len(first) < 3:
        return math.nan
    result = stats.spearmanr(first, second)
    return float(result.statistic if hasattr(result, "statistic") else result[0])
