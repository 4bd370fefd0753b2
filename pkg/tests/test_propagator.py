import numpy as np
import pytest

from src.core.errors import InvalidParameterError, LatticeMismatchError, ResourceBudgetError
from src.core.lattice import SpectralField, build_lattice, l2_norm
from src.core.symbols import SymbolKind, TimeWindow
from src.dispersion.propagator import EvolutionPlan, evolve, iter_space_time, sample_space_time


def test_grid_is_oversampled(small_plan):
    rows, cols = small_plan.lattice.shape
    m2, m1 = small_plan.grid_shape
    assert m1 >= 2 * cols and m2 >= 2 * rows


def test_evolution_is_unitary(small_plan, random_field):
    for t in (0.3, -2.5, 17.0):
        assert l2_norm(evolve(small_plan, random_field, t)) == pytest.approx(l2_norm(random_field), rel=1e-13)


def test_group_law(small_plan, random_field):
    once = evolve(small_plan, evolve(small_plan, random_field, 0.4), 0.35)
    direct = evolve(small_plan, random_field, 0.75)
    np.testing.assert_allclose(once.coeffs, direct.coeffs, atol=1e-13)


def test_single_mode_phase(make_plan):
    lattice = build_lattice(1.0, 8.0, 2.0)
    plan = make_plan(lattice)
    # xi = (2, 1): H = 3.
    phi = SpectralField.single_mode(lattice, 16, 1)
    t = 0.37
    evolved = evolve(plan, phi, t)
    expected = np.exp(-2j * np.pi * 3 * t)
    assert evolved.coeffs[1 + lattice.k2_max, 16 + lattice.k1_max] == pytest.approx(expected, abs=1e-14)


def test_non_finite_time(small_plan, random_field):
    with pytest.raises(InvalidParameterError):
        evolve(small_plan, random_field, float("nan"))


def test_lattice_mismatch(small_plan):
    other = SpectralField.zeros(build_lattice(1.0, 16.0, 1.0))
    with pytest.raises(LatticeMismatchError):
        evolve(small_plan, other, 0.1)


def test_synthesize_and_analyze_are_inverse(small_plan, random_field):
    values = small_plan.synthesize(random_field.coeffs)
    np.testing.assert_allclose(small_plan.analyze(values), random_field.coeffs, atol=1e-12)


def test_synthesis_matches_mode_sum(small_plan):
    lattice = small_plan.lattice
    phi = SpectralField.from_modes(lattice, {(3, 1): 2.0, (-5, 0): 1.0j})
    values = small_plan.synthesize(phi.coeffs)
    m2, m1 = small_plan.grid_shape
    x1 = np.arange(m1) * lattice.box_length / m1
    x2 = np.arange(m2) * lattice.lam / m2
    grid1, grid2 = np.meshgrid(x1, x2)
    expected = lattice.point_weight * (
        2.0 * np.exp(2j * np.pi * (grid1 * 3 / 8 + grid2 * 1.0))
        + 1.0j * np.exp(2j * np.pi * (grid1 * -5 / 8))
    )
    np.testing.assert_allclose(values, expected, atol=1e-13)


def test_space_time_tensor(small_plan, random_field):
    tensor = sample_space_time(small_plan, random_field)
    assert tensor.shape == (small_plan.window.samples, *small_plan.grid_shape)
    blocks = list(iter_space_time(small_plan, random_field))
    assert sum(len(weights) for weights, _ in blocks) == small_plan.window.samples


def test_space_time_budget(small_lattice, make_plan, random_field):
    plan = make_plan(small_lattice, memory_budget_mb=1e-3)
    with pytest.raises(ResourceBudgetError) as info:
        sample_space_time(plan, random_field)
    assert info.value.required > info.value.budget


def test_undersampled_window_rejected(small_lattice, make_plan):
    with pytest.raises(InvalidParameterError):
        make_plan(small_lattice, SymbolKind.ELLIPTIC, window=TimeWindow(0.0, 1.0, samples=5))


def test_undersized_grid_rejected(small_plan):
    with pytest.raises(InvalidParameterError):
        EvolutionPlan(small_plan.symbol, small_plan.window, small_plan.lattice, (4, 4))
