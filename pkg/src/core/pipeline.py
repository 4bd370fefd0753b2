"""Orchestrierung der Laeufe: Szenarien, Sweeps, Fits, Akzeptanztests und Reports."""

from __future__ import annotations

import inspect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from src.core.config import RunConfig
from src.core.errors import AcceptanceFailure, DegenerateInputError, InvalidParameterError
from src.core.lattice import (
    BOX_FACTOR,
    FrequencyLattice,
    Geometry,
    ProjectionMode,
    SpectralField,
    build_lattice,
    gaussian_field,
    l2_norm,
    project,
    read_field,
    wave_packet_field,
    write_field,
)
from src.core.reports import Report, ReportPaths, run_metadata, write_report
from src.core.symbols import BumpKind, DispersionSymbol, SymbolKind, TimeWindow
from src.dispersion import bilinear, extremizer, functional, nls
from src.dispersion.propagator import EvolutionPlan, evolve
from src.measure import catalog, lab
from src.measure.semialgebraic import read_set
from src.utils.fitting import log_law_fit, power_law_fit
from src.utils.rng import make_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    symbol: SymbolKind
    geometry: Geometry
    mean_zero: bool = False


SCENARIOS: dict[str, Scenario] = {
    "rt-hyperbolic": Scenario("rt-hyperbolic", SymbolKind.HYPERBOLIC, Geometry.RT),
    "rt-elliptic": Scenario("rt-elliptic", SymbolKind.ELLIPTIC, Geometry.RT),
    "rt-mixed": Scenario("rt-mixed", SymbolKind.MIXED, Geometry.RT),
    "rt-mixed-meanzero": Scenario("rt-mixed-meanzero", SymbolKind.MIXED, Geometry.RT, mean_zero=True),
    "tt-elliptic": Scenario("tt-elliptic", SymbolKind.ELLIPTIC, Geometry.TT),
    "tt-hyperbolic": Scenario("tt-hyperbolic", SymbolKind.HYPERBOLIC, Geometry.TT),
}

# Paketzentren liegen in [-PACKET_SPREAD, PACKET_SPREAD].
PACKET_SPREAD = 2.0

# Vergleichstabelle der kanonischen Geometrien.
COMPARISON_SCENARIOS = ("tt-elliptic", "tt-hyperbolic", "rt-elliptic", "rt-mixed", "rt-hyperbolic")


def get_scenario(scenario_id: str) -> Scenario:
    try:
        return SCENARIOS[scenario_id]
    except KeyError as exc:
        raise InvalidParameterError(
            f"Unbekanntes Szenario '{scenario_id}'. Verfuegbar: {', '.join(SCENARIOS)}"
        ) from exc


@dataclass(frozen=True)
class AcceptanceCheck:
    """Ein benannter Akzeptanztest mit Messwert und Schwelle."""

    name: str
    passed: bool
    value: float
    threshold: str
    detail: str = ""

    def to_record(self) -> dict[str, Any]:
        return {
            "check": self.name,
            "passed": self.passed,
            "value": self.value if math.isfinite(self.value) else repr(self.value),
            "threshold": self.threshold,
            "detail": self.detail,
        }


@dataclass
class ScenarioResult:
    command: str
    reports: list[Report] = field(default_factory=list)
    checks: list[AcceptanceCheck] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)
    written: list[ReportPaths] = field(default_factory=list)
    # Felder relativ zum Ausgabeordner; run_scenario schreibt sie erst nach der Rechnung.
    pending_fields: list[tuple[str, SpectralField]] = field(default_factory=list)


@dataclass(frozen=True)
class GateRecord:
    quantity: str
    box_length: float
    value: float
    doubled_value: float
    relative_change: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.relative_change <= self.tolerance


def _relative_change(first: float, second: float) -> float:
    if first == second:
        return 0.0
    scale = max(abs(first), abs(second))
    return abs(second - first) / scale


class ScenarioPipeline:
    """Fuehrt einzelne Kommandos aus; unabhaengige Zellen laufen in einem Thread-Pool."""

    def __init__(self, config: RunConfig) -> None:
        config.validate()
        self.config = config
        self.seed = config.harness.seed
        self.out_dir = Path(config.harness.out_dir)
        self._callbacks: dict[str, Callable] = {}

    def set_callbacks(self, callbacks: dict[str, Callable]) -> None:
        """Setzt Rueckmeldefunktionen, z.B. fuer Fortschrittsausgaben."""
        self._callbacks = callbacks

    def _emit(self, key: str, payload) -> None:
        callback = self._callbacks.get(key)
        if callback:
            callback(payload)

    def _map(self, function: Callable, items: Iterable) -> list:
        """Ordnungserhaltende Abbildung; Ergebnisse kommen in Eingabereihenfolge zurueck."""
        items = list(items)
        threads = self.config.harness.threads
        if threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(function, items))
        return [function(item) for item in items]

    # -- Bausteine -----------------------------------------------------------------

    def measure_options(self) -> lab.MeasureOptions:
        settings = self.config.measure
        return lab.MeasureOptions(
            root_tol=settings.root_tol,
            max_degree=settings.max_degree,
            quad_rel=settings.quad_rel,
            quad_abs=settings.quad_abs,
            panels=settings.panels,
        )

    def lattice_for(self, scenario: Scenario, n: float, box_length: float | None = None, lam: float | None = None):
        lam = self.config.lattice.lam if lam is None else lam
        if scenario.geometry is Geometry.TT:
            return FrequencyLattice.torus(lam, n)
        if box_length is None:
            box_length = max(self.config.lattice.box_length, BOX_FACTOR * max(lam, 1.0))
        return build_lattice(lam, box_length, n, Geometry.RT)

    def plan_for(self, lattice: FrequencyLattice, symbol: SymbolKind) -> EvolutionPlan:
        window_settings = self.config.window
        window = TimeWindow.for_cutoff(
            lattice.cutoff,
            t0=window_settings.t0,
            t1=window_settings.t1,
            bump_kind=BumpKind(window_settings.bump),
            min_samples=window_settings.min_samples,
            tail=window_settings.smooth_tail,
        )
        return EvolutionPlan.create(
            lattice, DispersionSymbol(symbol), window, memory_budget_mb=self.config.harness.memory_budget_mb
        )

    def _member_field(self, lattice: FrequencyLattice, scenario: Scenario, n: float, member: int, tag: str) -> SpectralField:
        # Schluessel ohne L: bei 2L wird dasselbe Profil feiner abgetastet.
        rng = make_generator(self.seed, tag, scenario.scenario_id, repr(float(n)), repr(lattice.lam), member)
        if scenario.geometry is Geometry.RT:
            # Zu kleine Boxen (Negativkontrolle) stauchen die Paketzentren; ab L = 8 bleibt das Profil fest.
            phi = wave_packet_field(lattice, rng, n, spread=min(PACKET_SPREAD, lattice.box_length / 4))
        else:
            phi = gaussian_field(lattice, rng, n, ProjectionMode.LE)
        if scenario.mean_zero:
            phi = project(phi, ProjectionMode.MEAN_ZERO_X2)
        return phi

    def ensemble_max(self, plan: EvolutionPlan, scenario: Scenario, n: float, size: int | None = None) -> float:
        size = self.config.harness.ensemble_size if size is None else size

        def member_ratio(member: int) -> float:
            return functional.strichartz_ratio(plan, self._member_field(plan.lattice, scenario, n, member, "ratio"))

        ratios = self._map(member_ratio, range(size))
        return max(ratios)

    def _best_extremizer(self, plan: EvolutionPlan, scenario: Scenario, n: int):
        settings = self.config.extremizer
        return extremizer.best_extremizer(
            plan,
            n,
            self.seed,
            scenario=scenario.scenario_id,
            mean_zero=scenario.mean_zero,
            max_iter=settings.max_iter,
            tol=settings.tol,
            stall_window=settings.stall_window,
            max_halvings=settings.max_halvings,
        )

    def _nls_initial(self, plan: EvolutionPlan, amplitude: float, tag: str) -> SpectralField:
        rng = make_generator(self.seed, tag, repr(plan.lattice.cutoff))
        phi = gaussian_field(plan.lattice, rng)
        return phi.normalized().scaled(amplitude)

    # -- Kommandos -----------------------------------------------------------------

    def evolve(self, scenario_id: str, n: float, t: float, field_path: str | None = None) -> ScenarioResult:
        """Entwickelt ein Feld (aus Datei oder Zufall) bis zur Zeit t und schreibt es zurueck."""
        scenario = get_scenario(scenario_id)
        if field_path:
            phi = read_field(field_path)
            lattice = phi.lattice
        else:
            lattice = self.lattice_for(scenario, n)
            phi = self._member_field(lattice, scenario, n, 0, "evolve")
        plan = self.plan_for(lattice, scenario.symbol)
        evolved = evolve(plan, phi, t)
        before, after = l2_norm(phi), l2_norm(evolved)
        report = Report("evolve", ("t", "l2Norm", "l2NormInitial", "strichartzRatio"))
        ratio = functional.strichartz_ratio(plan, evolved) if not evolved.is_zero() else 0.0
        report.add_row(t, after, before, ratio)
        drift = _relative_change(before, after)
        check = AcceptanceCheck("unitarity", drift <= 1e-12, drift, "<= 1e-12")
        return ScenarioResult(
            "evolve", [report], [check], pending_fields=[(f"fields/evolve_{scenario.scenario_id}.field", evolved)]
        )

    def ratio_sweep(self, scenario_id: str, n_list: list[int], extremize: bool = False) -> ScenarioResult:
        """Ensemble-Maximum (und optional Extremierer) pro N samt Wachstumsfit."""
        scenario = get_scenario(scenario_id)
        ensemble: list[float] = []
        extremized: list[float] = []
        pending: list[tuple[str, SpectralField]] = []
        for n in n_list:
            plan = self.plan_for(self.lattice_for(scenario, n), scenario.symbol)
            ensemble.append(self.ensemble_max(plan, scenario, n))
            if extremize:
                best, _ = self._best_extremizer(plan, scenario, n)
                extremized.append(best.final_ratio)
                pending.append((f"fields/extremizer_{scenario_id}_N{n}.field", best.final))
            self._emit("cell", {"command": "ratio-sweep", "N": n, "ensemble_max": ensemble[-1]})
            logger.info("Quotienten-Sweep %s N=%d: Ensemble-Max %.6g.", scenario_id, n, ensemble[-1])
        lattice = self.lattice_for(scenario, n_list[0])
        sweep = functional.RatioSweep(
            scenario_id,
            list(n_list),
            ensemble,
            extremized,
            {"lam": lattice.lam, "box_length": lattice.box_length, "geometry": lattice.geometry.value},
            self.seed,
        )
        fit = None
        if len(n_list) >= 4:
            fit = functional.fit_growth(sweep)
        else:
            logger.warning("Wachstumsfit braucht mindestens 4 Werte von N, erhielt %d.", len(n_list))
        exponent = fit.power_exponent if fit else math.nan
        report = Report(f"ratio_sweep_{scenario_id}", ("N", "ensembleMax", "extremized", "fitExponent"))
        for index, n in enumerate(n_list):
            report.add_row(n, ensemble[index], extremized[index] if extremized else math.nan, exponent)
        report.metadata.update(
            scenario=scenario_id,
            lattice=sweep.lattice,
            log_coefficient=fit.log_coefficient if fit else math.nan,
            power_residuals=list(fit.power_residuals) if fit else [],
        )
        checks = []
        gate_passed = True
        if scenario.geometry is Geometry.RT:
            # Die Kennzahl beim groessten N muss bei 2L stehen, bevor die Wachstumstests zaehlen.
            gate = double_box_gate(self, scenario_id, n_list[-1], "extremized" if extremize else "ensemble-max")
            gate_passed = gate.passed
            checks.append(
                AcceptanceCheck("box-gate", gate.passed, gate.relative_change, f"<= {gate.tolerance:g}", f"quantity={gate.quantity}")
            )
            report.metadata.update(
                gate_quantity=gate.quantity, gate_value=gate.value, gate_value_2l=gate.doubled_value,
                gate_change=gate.relative_change,
            )
        best = sweep.best()
        gate_note = "" if gate_passed else ", box-gate failed"
        if fit is not None and scenario_id == "rt-hyperbolic":
            growth = best[-1] / best[0]
            passed = gate_passed and growth <= 1.5 and -0.05 <= exponent <= 0.08
            checks.append(
                AcceptanceCheck(
                    "ratio-bounded", passed, exponent,
                    "R(Nmax)/R(Nmin) <= 1.5, exponent in [-0.05, 0.08], box-gate", f"growth={growth:.4g}{gate_note}",
                )
            )
        if fit is not None and scenario_id == "rt-mixed":
            checks.append(
                AcceptanceCheck("ratio-growth", gate_passed and exponent >= 0.15, exponent, ">= 0.15, box-gate", gate_note.lstrip(", "))
            )
        if extremize and len(extremized) >= 2:
            change = extremized[-1] / extremized[0]
            checks.append(AcceptanceCheck("extremizer-stable", change <= 1.25, change, "R_ext(Nmax)/R_ext(Nmin) <= 1.25"))
        return ScenarioResult("ratio-sweep", [report], checks, pending_fields=pending)

    def compare_geometries(self, n_list: list[int], scenario_ids: Iterable[str] = COMPARISON_SCENARIOS) -> ScenarioResult:
        """Eine Zeile pro Geometrie: Exponent, Log-Koeffizient und Quotient beim groessten N."""
        report = Report("geometry_comparison", ("scenario", "powerExponent", "logCoefficient", "ratioAtMaxN"))
        for scenario_id in scenario_ids:
            scenario = get_scenario(scenario_id)
            values = []
            for n in n_list:
                plan = self.plan_for(self.lattice_for(scenario, n), scenario.symbol)
                values.append(self.ensemble_max(plan, scenario, n))
            fit = functional.fit_growth_values(n_list, values)
            report.add_row(scenario_id, fit.power_exponent, fit.log_coefficient, values[-1])
            logger.info("Geometrie %s: Exponent %.4g.", scenario_id, fit.power_exponent)
        report.metadata["n_list"] = list(n_list)
        return ScenarioResult("compare", [report])

    def quadform(self, n: float, support: int = 24, c_a_sweep: list[float] | None = None) -> ScenarioResult:
        """Quadrilinearform eines zufaelligen f >= 0: Zerlegung A1/A2, Oktanten, k-Schnitte, Orakel."""
        settings = self.config.functional
        c_a_sweep = settings.c_a_sweep if c_a_sweep is None else c_a_sweep
        scenario = SCENARIOS["rt-hyperbolic"]
        lattice = self.lattice_for(scenario, n)
        rng = make_generator(self.seed, "quadform", repr(float(n)), support)
        chosen = rng.choice(lattice.cardinality, size=min(support, lattice.cardinality), replace=False)
        coeffs = np.zeros(lattice.cardinality)
        coeffs[chosen] = np.abs(rng.standard_normal(len(chosen))) + 0.1
        f = SpectralField(lattice, coeffs.reshape(lattice.shape))
        symbol = DispersionSymbol(SymbolKind.HYPERBOLIC)
        budget = settings.quad_budget
        theta = settings.theta
        report = Report("quadform", ("c_a", "restriction", "theta", "value", "ratioToNorm4"))
        checks = []
        norm4 = l2_norm(f) ** 4 * settings.bound_constant
        full = functional.quad_form(f, functional.QuadWeight(theta=theta), symbol, budget)
        report.add_row(math.nan, "none", theta, full, full / norm4)
        for c_a in c_a_sweep:
            parts = {}
            for restriction in (functional.Restriction.A1, functional.Restriction.A2_PLAIN):
                weight = functional.QuadWeight(theta=theta, restriction=restriction, c_a=c_a, theta2=settings.theta2)
                bound = functional.quad_form_bound(f, weight, settings.bound_constant, symbol, budget)
                parts[restriction] = bound.value
                report.add_row(c_a, restriction.value, theta, bound.value, bound.ratio)
            comparison = functional.octant_comparison(f, c_a, settings.theta2, symbol, budget)
            report.add_row(c_a, "a2_refined_sum", settings.theta2, comparison["octant_sum"], comparison["octant_sum"] / norm4)
            report.add_row(c_a, "a2_plain_theta2", settings.theta2, comparison["a2_plain"], comparison["a2_plain"] / norm4)
            gap = abs(full - sum(parts.values()))
            checks.append(
                AcceptanceCheck("quad-partition", gap <= 1e-12 * max(full, 1e-300), gap, "|Q - Q_A1 - Q_A2| <= 1e-12 Q", f"c_A={c_a}")
            )
        diagnostic = functional.k_slice_diagnostic(f, symbol, budget)
        report.add_row(math.nan, "k_slice", settings.theta2, diagnostic, diagnostic / norm4)
        # Orakel: FFT-Raum-Zeit-Quadratur gegen die direkte Summe mit gleichem Zeitkern.
        plan = self.plan_for(lattice, SymbolKind.HYPERBOLIC)
        sampled = functional.l4_space_time_norm(plan, f) ** 4
        oracle_error = _relative_change(functional.quadrilinear_sum(plan, f, quadrature=True), sampled)
        time_error = _relative_change(functional.quadrilinear_sum(plan, f), sampled)
        report.add_row(math.nan, "l4_oracle", math.nan, oracle_error, math.nan)
        report.add_row(math.nan, "time_quadrature_error", math.nan, time_error, math.nan)
        checks.append(AcceptanceCheck("quad-oracle", oracle_error <= 1e-9, oracle_error, "<= 1e-9"))
        report.metadata.update(n=n, support=len(chosen), c_a_sweep=list(c_a_sweep))
        return ScenarioResult("quadform", [report], checks)

    def measure(
        self,
        set_id: str | None,
        params: dict[str, float],
        n_list: list[float] | None = None,
        lam: float | None = None,
        set_file: str | None = None,
    ) -> ScenarioResult:
        """Mass-Zeilen (N, euclid, rz, maxSlice, impliedC) fuer eine Katalog- oder Dateimenge."""
        lam = self.config.lattice.lam if lam is None else lam
        options = self.measure_options()
        budget = self.config.measure.complexity_budget
        if set_file:
            sets = [(math.nan, read_set(set_file, budget))]
        else:
            if set_id is None:
                raise InvalidParameterError("measure braucht --set oder --set-file.")
            accepts_n = "n" in inspect.signature(catalog.CATALOG.get(set_id, catalog.rectangle)).parameters
            if accepts_n and n_list:
                sets = [(n, catalog.build_catalog_set(set_id, n=n, budget=budget, **params)) for n in n_list]
            else:
                sets = [(math.nan, catalog.build_catalog_set(set_id, budget=budget, **params))]

        def row(item):
            n, semi_set = item
            record = lab.lemma_check(semi_set, lam, options)
            return n, record

        rows = self._map(row, sets)
        report = Report(f"measure_{set_id or Path(set_file).stem}", ("N", "euclid", "rz", "maxSlice", "impliedC"))
        for n, record in rows:
            report.add_row(n, record.area, record.lhs, record.max_slice, record.implied_c)
        report.metadata.update(set=set_id, set_params=params, lam=lam)
        checks = []
        ns = [n for n, _ in rows]
        if set_id == "hyperbolic-annulus" and len(rows) >= 3:
            fit, residual = log_law_fit(ns, [record.area for _, record in rows])
            report.metadata.update(log_slope=fit.slope, log_intercept=fit.intercept, relative_residual=residual)
            checks.append(AcceptanceCheck("log-measure", residual < 0.05, residual, "relative residual < 0.05"))
        if set_id == "saddle-annulus" and float(params.get("c0", 0.0)) == 0.0 and n_list:
            worst = max(abs(record.max_slice - 2 * n) / (2 * n) for n, record in rows)
            checks.append(AcceptanceCheck("saddle-slice", worst <= 1e-9, worst, "max slice = 2N"))
        return ScenarioResult("measure", [report], checks)

    def region_scan(self, kind: str, cd_values: list[float]) -> ScenarioResult:
        """Flaeche der (alpha, beta)-Regionen gegen 1/|cd|; K = Flaeche * |cd| pro Zeile."""
        options = self.measure_options()
        settings = self.config.measure

        def area(cd: float) -> tuple[float, float]:
            side = math.sqrt(abs(cd))
            region = catalog.ChangeOfVarsRegion(
                catalog.RegionKind(kind), side, side, similar=settings.similar, much_greater=settings.much_greater
            )
            return cd, lab.euclid_measure(region.to_set(settings.complexity_budget), options)

        rows = self._map(area, cd_values)
        report = Report(f"region_{kind}", ("cd", "euclid", "scaledK"))
        constants = []
        for cd, value in rows:
            constants.append(value * abs(cd))
            report.add_row(cd, value, constants[-1])
        spread = max(constants) / min(constants) if min(constants) > 0 else math.inf
        report.metadata.update(kind=kind, K=max(constants), spread=spread)
        check = AcceptanceCheck("region-bound", spread <= 3.0, spread, "max K / min K <= 3")
        return ScenarioResult("measure", [report], [check])

    def lemma_corpus(self, count: int | None = None, lambdas: list[float] | None = None) -> ScenarioResult:
        """Lemma-Check ueber das deterministische Korpus samt Boxverdopplung."""
        settings = self.config.measure
        count = settings.corpus_size if count is None else count
        lambdas = settings.corpus_lambdas if lambdas is None else lambdas
        options = self.measure_options()
        sets = catalog.lemma_corpus(count, self.seed, settings.complexity_budget)
        cells = [(index, lam) for index in range(len(sets)) for lam in lambdas]

        def check_cell(cell):
            index, lam = cell
            return lab.box_sensitivity(sets[index], lam, 2.0, options)

        results = self._map(check_cell, cells)
        report = Report(
            "lemma_corpus",
            ("index", "label", "lambda", "lhs", "area", "maxSlice", "impliedC", "impliedC2L", "boxChange", "monotonicityChanges"),
        )
        for (index, lam), (base, widened, change) in zip(cells, results):
            report.add_row(
                index, sets[index].label, lam, base.lhs, base.area, base.max_slice, base.implied_c,
                widened.implied_c, change, base.monotonicity_changes,
            )
        worst = max((base.implied_c for base, _, _ in results), default=0.0)
        worst_change = max((change for _, _, change in results), default=0.0)
        report.metadata.update(count=count, lambdas=list(lambdas), max_implied_c=worst, max_box_change=worst_change)
        passed = worst <= 10.0 and worst_change <= 0.2
        check = AcceptanceCheck("lemma-constant", passed, worst, "impliedC <= 10, box change <= 20%", f"box change {worst_change:.3g}")
        return ScenarioResult("lemma-corpus", [report], [check])

    def prop_check(self, kind: str, lam: float | None = None, count: int = 24, v_max: float = 1000.0) -> ScenarioResult:
        """Supremum von |E(v)|_{R x Z_{1/lambda}} ueber die Standardauswahl an Testvektoren."""
        lam = self.config.lattice.lam if lam is None else lam
        settings = self.config.functional
        options = self.measure_options()
        kind = lab.PropKind(kind)
        samples = lab.standard_v_samples(lam, count, v_max)

        def one(v):
            return lab.prop_check(kind, [v], lam, settings.c_a, settings.theta, settings.theta2, options=options)

        record = lab.PropRecord(kind, lam)
        for part in self._map(one, samples):
            record.rows.extend(part.rows)
        report = Report(f"prop_check_{kind.value}", ("v1", "v2", "octant", "rz", "maxSlice"))
        for row in record.rows:
            octant = "" if row.octant is None else ",".join(str(item) for item in row.octant)
            report.add_row(row.v[0], row.v[1], octant, row.rz, row.max_slice)
        argmax = record.argmax
        report.metadata.update(kind=kind.value, lam=lam, sup=record.sup, argmax=list(argmax.v) if argmax else None)
        checks = []
        if kind is not lab.PropKind.A2_PLAIN:
            checks.append(AcceptanceCheck("prop-sup", record.sup <= 50.0, record.sup, "<= 50", kind.value))
        return ScenarioResult("prop-check", [report], checks)

    def bilinear_sweep(
        self,
        n1_list: list[int] | None = None,
        n2_list: list[int] | None = None,
        lambda_list: list[float] | None = None,
        ensemble_size: int | None = None,
        eab_samples: int = 0,
    ) -> ScenarioResult:
        """Ensemble-Maxima des bilinearen Quotienten ueber (N1, N2, lambda) und der Skalierungsfit."""
        settings = self.config.bilinear
        n1_list = settings.n1_list if n1_list is None else n1_list
        n2_list = settings.n2_list if n2_list is None else n2_list
        lambda_list = settings.lambda_list if lambda_list is None else lambda_list
        size = self.config.harness.ensemble_size if ensemble_size is None else ensemble_size
        cells = [(n1, n2, lam) for lam in lambda_list for n1 in n1_list for n2 in n2_list if n1 >= 4 * n2]
        if not cells:
            raise DegenerateInputError("Kein Gitterpunkt mit N1 >= 4 N2.")
        scenario = SCENARIOS["rt-hyperbolic"]
        options = self.measure_options()

        def run_cell(cell):
            n1, n2, lam = cell
            plan = self.plan_for(self.lattice_for(scenario, n1, lam=lam), SymbolKind.HYPERBOLIC)
            config = bilinear.BilinearConfig(n1, n2, lam, size, self.seed, plan)
            ratios = bilinear.ensemble_ratios(config)
            eab_max = math.nan
            if eab_samples:
                pairs = bilinear.sample_eab_pairs(n1, n2, lam, eab_samples, self.seed)
                eab_max = max(
                    bilinear.eab_measure(a, b, lam, settings.theta_res, comparability=settings.comparability, options=options)
                    for a, b in pairs
                )
            return max(ratios), eab_max

        results = self._map(run_cell, cells)
        report = Report("bilinear_sweep", ("N1", "N2", "lambda", "ensembleMax", "theoremBound", "normalized", "eabMax"))
        samples = []
        for (n1, n2, lam), (best, eab_max) in zip(cells, results):
            bound = bilinear.theorem_bound(n1, n2, lam)
            report.add_row(n1, n2, lam, best, bound, best / bound, eab_max)
            samples.append((n1, n2, lam, best))
        checks = []
        try:
            fit = bilinear.bilinear_scaling_fit(samples)
        except DegenerateInputError as exc:
            logger.warning("Skalierungsfit nicht moeglich: %s", exc)
            fit = None
        if fit is not None:
            report.metadata.update(
                exponent_ratio=fit.exponent_ratio,
                exponent_lambda=fit.exponent_lambda,
                constant=fit.constant,
                regime_ratio_slope=fit.regime_ratio_slope,
                regime_lambda_slope=fit.regime_lambda_slope,
            )
            exponents = (fit.exponent_ratio, fit.exponent_lambda)
            passed = all(math.isfinite(item) and 0.4 <= item <= 0.6 for item in exponents)
            checks.append(
                AcceptanceCheck("bilinear-exponents", passed, min(exponents), "both exponents in [0.4, 0.6]", f"{exponents}")
            )
        if eab_samples:
            correlation = bilinear.track_correlation([item[0] for item in results], [item[1] for item in results])
            report.metadata["eab_correlation"] = correlation
        return ScenarioResult("bilinear-sweep", [report], checks)

    def eab(
        self,
        n1_list: list[int] | None = None,
        n2_list: list[int] | None = None,
        lambda_list: list[float] | None = None,
        count: int = 8,
    ) -> ScenarioResult:
        """|E_{a,b}| fuer Testvektorpaare, normiert mit 1/lambda + N2/N1."""
        settings = self.config.bilinear
        n1_list = settings.n1_list if n1_list is None else n1_list
        n2_list = settings.n2_list if n2_list is None else n2_list
        lambda_list = settings.lambda_list if lambda_list is None else lambda_list
        options = self.measure_options()
        cells = [(n1, n2, lam) for lam in lambda_list for n1 in n1_list for n2 in n2_list if n1 >= 4 * n2]

        def run_cell(cell):
            n1, n2, lam = cell
            rows = []
            for a, b in bilinear.sample_eab_pairs(n1, n2, lam, count, self.seed):
                value = bilinear.eab_measure(a, b, lam, settings.theta_res, comparability=settings.comparability, options=options)
                rows.append((n1, n2, lam, a[0], a[1], b[0], b[1], value, value / (1.0 / lam + n2 / n1)))
            return rows

        report = Report("eab", ("N1", "N2", "lambda", "a1", "a2", "b1", "b2", "measure", "normalized"))
        for rows in self._map(run_cell, cells):
            report.extend(rows)
        worst = max((row[-1] for row in report.rows), default=0.0)
        report.metadata.update(max_normalized=worst, count=count)
        return ScenarioResult("eab", [report], [AcceptanceCheck("eab-bounded", worst <= 10.0, worst, "<= 10")])

    def extremize(self, scenario_id: str, n_list: list[int]) -> ScenarioResult:
        """Drei Startwerte pro N; alle Verlaeufe als Zeilen, der beste als Felddatei."""
        scenario = get_scenario(scenario_id)

        def run_cell(n):
            plan = self.plan_for(self.lattice_for(scenario, n), scenario.symbol)
            return self._best_extremizer(plan, scenario, n)

        report = Report(
            f"extremizer_{scenario_id}", ("N", "init", "initialRatio", "finalRatio", "steps", "stopReason", "best")
        )
        pending = []
        finals = []
        for n, (best, traces) in zip(n_list, self._map(run_cell, n_list)):
            for trace in traces:
                report.add_row(
                    n, trace.init_kind, trace.initial_ratio, trace.final_ratio, len(trace.iterates),
                    trace.stop_reason.value, trace is best,
                )
            finals.append(best.final_ratio)
            pending.append((f"fields/extremizer_{scenario_id}_N{n}.field", best.final))
        checks = []
        if len(finals) >= 2:
            change = finals[-1] / finals[0]
            checks.append(AcceptanceCheck("extremizer-stable", change <= 1.25, change, "R_ext(Nmax)/R_ext(Nmin) <= 1.25"))
        return ScenarioResult("extremize", [report], checks, pending_fields=pending)

    def nls_run(self, n: float, intervals: int | None = None, amplitude: float | None = None, order_check: bool = False) -> ScenarioResult:
        """Globaler Lauf mit kleinen Daten: Diagnose-Zeitreihe und Intervallnormen."""
        settings = self.config.nls
        intervals = settings.intervals if intervals is None else intervals
        amplitude = settings.smallness / 2 if amplitude is None else amplitude
        lattice = self.lattice_for(SCENARIOS["rt-hyperbolic"], n)
        plan = self.plan_for(lattice, SymbolKind.HYPERBOLIC)
        phi = self._nls_initial(plan, amplitude, "nls")
        run = nls.global_small_data_run(
            plan,
            phi,
            intervals,
            settings.sign,
            smallness=settings.smallness,
            dt_factor=settings.dt_factor,
            diagnostic_stride=settings.diagnostic_stride,
            checkpoint_stride=settings.checkpoint_stride,
        )
        diagnostics = Report("nls_diagnostics", ("step", "time", "mass", "maxAmplitude"))
        for sample in run.diagnostics:
            diagnostics.add_row(sample.step, sample.time, sample.mass, sample.max_amplitude)
        per_interval = Report("nls_intervals", ("interval", "l4Norm", "mass"))
        for index, (norm, mass) in enumerate(zip(run.interval_l4, run.interval_mass), start=1):
            per_interval.add_row(index, norm, mass)
        meta = {"dt": run.dt, "steps": run.steps, "scheme": run.scheme, "sign": run.sign.value, "mass_drift": run.mass_drift}
        checks = [AcceptanceCheck("mass-drift", run.mass_drift <= 1e-8 * intervals, run.mass_drift, "<= 1e-8 per unit time")]
        if order_check:
            coarse, fine, ratio = nls.splitting_error_ratio(plan, phi, settings.sign, dt_factor=settings.dt_factor)
            meta.update(splitting_error_dt=coarse, splitting_error_half=fine, splitting_ratio=ratio)
            # Im rein linearen Regime ist der Splittingfehler Rundungsrauschen.
            passed = ratio >= 4.0 or coarse <= 1e-12
            checks.append(AcceptanceCheck("splitting-order", passed, ratio, ">= 4"))
        diagnostics.metadata.update(meta)
        per_interval.metadata.update(meta)
        pending = [(f"fields/nls/{nls.checkpoint_name(step)}", snapshot) for step, snapshot in run.checkpoint_fields]
        return ScenarioResult("nls", [diagnostics, per_interval], checks, pending_fields=pending)

    def picard(self, n: float, amplitude: float | None = None, max_iter: int | None = None) -> ScenarioResult:
        """Picard-Iteration auf [-1, 1] und Abgleich mit dem Split-Step-Verfahren."""
        settings = self.config.nls
        amplitude = settings.smallness / 2 if amplitude is None else amplitude
        max_iter = settings.picard_max_iter if max_iter is None else max_iter
        lattice = self.lattice_for(SCENARIOS["rt-hyperbolic"], n)
        plan = self.plan_for(lattice, SymbolKind.HYPERBOLIC)
        phi = self._nls_initial(plan, amplitude, "picard")
        record = nls.picard_iterate(plan, phi, settings.sign, (-1.0, 1.0), max_iter, settings.smallness, settings.dt_factor)
        report = Report("picard", ("iteration", "iterateNorm", "difference", "contractionFactor", "effectiveConstant"))
        factors = record.contraction_factors
        for index, norm in enumerate(record.iterate_norms):
            difference = record.differences[index] if index < len(record.differences) else math.nan
            factor = factors[index - 1] if 0 < index <= len(factors) else math.nan
            constant = record.effective_constants[index] if index < len(record.effective_constants) else math.nan
            report.add_row(index, norm, difference, factor, constant)
        checks = []
        mismatch = math.nan
        if not record.diverged:
            split_norm = nls.split_step_window_norm(plan, phi, settings.sign, (-1.0, 1.0), settings.dt_factor)
            mismatch = _relative_change(record.limit_norm, split_norm)
            report.metadata["split_step_norm"] = split_norm
        tail = factors[2:]
        limit = settings.contraction_factor
        passed = nls.contraction_holds(record, limit) and mismatch <= 1e-3
        checks.append(
            AcceptanceCheck(
                "picard-contraction", passed, max(tail) if tail else math.nan,
                f"factor <= {limit:g} from iterate 3, mismatch <= 1e-3", f"mismatch={mismatch:.3g}",
            )
        )
        report.metadata.update(
            data_norm=record.data_norm, diverged=record.diverged, limit_norm=record.limit_norm, mismatch=mismatch,
            overflow_at=record.overflow_at,
        )
        return ScenarioResult("picard", [report], checks)

    def calibrate(self, n: float, rounds: int = 12) -> ScenarioResult:
        """Bisektion der Kleinheitsschranke; Ergebnis landet in den Metadaten."""
        settings = self.config.nls
        lattice = self.lattice_for(SCENARIOS["rt-hyperbolic"], n)
        plan = self.plan_for(lattice, SymbolKind.HYPERBOLIC)
        profile = self._nls_initial(plan, 1.0, "calibrate")
        threshold = nls.calibrate_smallness(
            plan, profile, settings.sign, rounds=rounds, max_iter=settings.picard_max_iter,
            dt_factor=settings.dt_factor, max_factor=settings.contraction_factor,
        )
        report = Report("calibrate", ("N", "threshold", "configuredSmallness"))
        report.add_row(n, threshold, settings.smallness)
        report.metadata.update(calibrated_smallness=threshold, contraction_factor=settings.contraction_factor)
        return ScenarioResult("calibrate", [report])

    def gate(self, scenario_id: str, n: float, quantity: str = "ensemble-max", box_length: float | None = None) -> ScenarioResult:
        record = double_box_gate(self, scenario_id, n, quantity, box_length)
        report = Report("gate", ("quantity", "L", "value", "value2L", "relChange", "passed"))
        report.add_row(record.quantity, record.box_length, record.value, record.doubled_value, record.relative_change, record.passed)
        check = AcceptanceCheck("double-box-gate", record.passed, record.relative_change, f"<= {record.tolerance:g}")
        return ScenarioResult("gate", [report], [check])


GATE_QUANTITIES = ("single-mode", "ensemble-max", "extremized")


def double_box_gate(
    pipeline: ScenarioPipeline,
    scenario_id: str,
    n: float,
    quantity: str = "ensemble-max",
    box_length: float | None = None,
) -> GateRecord:
    """Wiederholt eine Kenngroesse bei 2L; bestanden bei relativer Aenderung <= Toleranz.

    Der Ein-Moden-Quotient wird mit (L lambda)^(1/4) normiert und ist dann exakt boxunabhaengig.
    Ein ausdruecklich gesetztes box_length umgeht das Box-Kriterium; L = 2 lambda ist die
    Negativkontrolle.
    """
    scenario = get_scenario(scenario_id)
    if scenario.geometry is not Geometry.RT:
        raise InvalidParameterError(f"Szenario {scenario_id} hat keine R-Richtung; Gate nur fuer RT.")
    if quantity not in GATE_QUANTITIES:
        raise InvalidParameterError(f"Unbekannte Gate-Groesse '{quantity}'. Verfuegbar: {', '.join(GATE_QUANTITIES)}")
    if box_length is None:
        base = pipeline.lattice_for(scenario, n)
    else:
        base = FrequencyLattice(pipeline.config.lattice.lam, box_length, n, Geometry.RT)
        logger.warning("Gate mit L = %g ohne Box-Kriterium (Negativkontrolle).", box_length)

    def headline(lattice: FrequencyLattice) -> float:
        plan = pipeline.plan_for(lattice, scenario.symbol)
        if quantity == "single-mode":
            # Modus xi = (1, 0); |u| ist konstant, der Quotient skaliert wie (L lambda)^(-1/4).
            k1 = round(lattice.box_length)
            ratio = functional.strichartz_ratio(plan, SpectralField.single_mode(lattice, min(k1, lattice.k1_max), 0))
            return ratio * (lattice.box_length * lattice.lam) ** 0.25
        if quantity == "ensemble-max":
            return pipeline.ensemble_max(plan, scenario, n)
        best, _ = pipeline._best_extremizer(plan, scenario, int(n))
        return best.final_ratio

    value = headline(base)
    doubled = headline(base.doubled_box())
    record = GateRecord(quantity, base.box_length, value, doubled, _relative_change(value, doubled), pipeline.config.harness.gate_tolerance)
    level = logging.INFO if record.passed else logging.WARNING
    logger.log(level, "Box-Gate %s %s: %.6g -> %.6g (%.3g).", scenario_id, quantity, value, doubled, record.relative_change)
    return record


COMMANDS: dict[str, str] = {
    "evolve": "evolve",
    "ratio-sweep": "ratio_sweep",
    "compare": "compare_geometries",
    "quadform": "quadform",
    "measure": "measure",
    "regions": "region_scan",
    "lemma-corpus": "lemma_corpus",
    "prop-check": "prop_check",
    "bilinear-sweep": "bilinear_sweep",
    "eab": "eab",
    "extremize": "extremize",
    "nls": "nls_run",
    "picard": "picard",
    "calibrate": "calibrate",
    "gate": "gate",
}


def run_scenario(config: RunConfig, command: str, **params: Any) -> ScenarioResult:
    """Fuehrt ein Kommando aus, schreibt Felder und Reports atomar und wertet Akzeptanztests aus.

    Geschrieben wird erst nach vollstaendiger Rechnung; bricht die Rechnung ab,
    bleibt das Ausgabeverzeichnis unberuehrt.
    """
    if command not in COMMANDS:
        raise InvalidParameterError(f"Unbekanntes Kommando '{command}'.")
    pipeline = ScenarioPipeline(config)
    result: ScenarioResult = getattr(pipeline, COMMANDS[command])(**params)
    for relative, snapshot in result.pending_fields:
        result.artifacts.append(write_field(snapshot, pipeline.out_dir / relative))
    mapping = config.to_mapping()
    for report in result.reports:
        report.metadata = run_metadata(
            mapping,
            config.harness.seed,
            command=command,
            params=params,
            checks=[check.to_record() for check in result.checks],
            artifacts=[path.name for path in result.artifacts],
            **report.metadata,
        )
        result.written.append(write_report(report, pipeline.out_dir, config.harness.report_format))
    requested = set(config.harness.acceptance)
    failures = [check.to_record() for check in result.checks if check.name in requested and not check.passed]
    for name in sorted(requested - {check.name for check in result.checks}):
        logger.debug("Akzeptanztest %s wird von '%s' nicht erzeugt.", name, command)
    if failures:
        raise AcceptanceFailure(failures)
    return result
