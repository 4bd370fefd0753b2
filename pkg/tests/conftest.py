"""Gemeinsame Fixtures: kleine Gitter, Plaene und reproduzierbare Zufallsstroeme."""

from __future__ import annotations

import dataclasses

import pytest

from src.core.config import RunConfig
from src.core.lattice import build_lattice, gaussian_field
from src.core.symbols import DispersionSymbol, SymbolKind
from src.dispersion.propagator import EvolutionPlan
from src.utils.rng import make_generator


@pytest.fixture
def small_lattice():
    """lambda = 1, L = 8, N = 1: 17 x 3 Punkte."""
    return build_lattice(1.0, 8.0, 1.0)


@pytest.fixture
def rng():
    return make_generator(7, "tests")


@pytest.fixture
def make_plan():
    def factory(lattice, kind=SymbolKind.HYPERBOLIC, **kwargs):
        return EvolutionPlan.create(lattice, DispersionSymbol(kind), **kwargs)

    return factory


@pytest.fixture
def small_plan(small_lattice, make_plan):
    return make_plan(small_lattice)


@pytest.fixture
def random_field(small_lattice, rng):
    return gaussian_field(small_lattice, rng)


@pytest.fixture
def run_config(tmp_path):
    """Konfiguration im Schreibtischmassstab mit Ausgabe im Temp-Ordner."""
    config = RunConfig()
    harness = dataclasses.replace(config.harness, out_dir=str(tmp_path / "out"), ensemble_size=2)
    measure = dataclasses.replace(config.measure, corpus_size=3, corpus_lambdas=[1.0])
    extremizer = dataclasses.replace(config.extremizer, max_iter=3)
    nls = dataclasses.replace(config.nls, picard_max_iter=4)
    return dataclasses.replace(config, harness=harness, measure=measure, extremizer=extremizer, nls=nls)
