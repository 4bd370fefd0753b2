import numpy as np
import pytest

from src.core.errors import InvalidParameterError
from src.core.symbols import BumpKind, DispersionSymbol, SmoothBump, SymbolKind, TimeWindow, required_samples


def test_hyperbolic_polarization_identity(rng):
    symbol = DispersionSymbol(SymbolKind.HYPERBOLIC)
    xi1, xi2, eta1, eta2 = rng.integers(-1000, 1001, size=(4, 10_000))
    lhs = symbol.eval(xi1 + eta1, xi2 + eta2) - symbol.eval(xi1 - eta1, xi2 - eta2)
    rhs = 4 * symbol.eval_bilinear(xi1, xi2, eta1, eta2)
    np.testing.assert_array_equal(lhs, rhs)


@pytest.mark.parametrize("kind", list(SymbolKind))
def test_bilinear_form_on_diagonal(kind):
    symbol = DispersionSymbol(kind)
    xi1 = np.array([0.5, -3.0, 2.0])
    xi2 = np.array([1.5, 4.0, -2.0])
    np.testing.assert_allclose(symbol.eval_bilinear(xi1, xi2, xi1, xi2), symbol.eval(xi1, xi2))


def test_hyperbolic_vanishes_on_diagonals():
    symbol = DispersionSymbol("hyperbolic")
    assert symbol.eval(3, 3) == 0
    assert symbol.eval(3, -3) == 0
    assert symbol.eval(1, 0) == 1


def test_smooth_bump_dominates_window():
    bump = SmoothBump()
    t = np.linspace(-2.0, 2.0, 401)
    assert np.all(bump(t) >= 1.0 - 1e-12)
    assert np.all(bump(np.linspace(-50, 50, 1001)) >= 0.0)


def test_smooth_bump_fourier_support():
    bump = SmoothBump()
    assert bump.support == 0.5
    tau = np.linspace(-1.0, 1.0, 401)
    values = bump.fourier(tau)
    assert np.all(values >= 0.0)
    assert np.all(values[np.abs(tau) > 0.5] == 0.0)


def test_smooth_bump_fourier_at_zero_is_integral():
    bump = SmoothBump()
    t = np.linspace(-400.0, 400.0, 160_001)
    integral = float(np.sum(bump(t))) * (t[1] - t[0])
    assert float(bump.fourier(0.0)) == pytest.approx(integral, rel=1e-9)


def test_bump_rejects_wide_support():
    with pytest.raises(InvalidParameterError):
        SmoothBump(order=8, width=0.125)


def test_sampling_rule():
    assert required_samples(1.0, 1.0) == 17
    assert required_samples(4.0, 1.0) == 8 * 32 + 1
    window = TimeWindow.for_cutoff(2.0, min_samples=4)
    assert window.samples == 8 * 8 + 1
    assert window.nodes[0] == 0.0 and window.nodes[-1] == 1.0


@pytest.mark.parametrize("kind", list(SymbolKind))
@pytest.mark.parametrize("cutoff", [1.0, 3.0, 8.0])
def test_sampling_rule_covers_every_symbol(kind, cutoff):
    # Mindestens 8 Knoten pro schnellster Periode 1/max|H|, fuer jedes Symbol.
    fastest = DispersionSymbol(kind).max_abs(cutoff)
    assert required_samples(cutoff, 1.0) - 1 >= 8 * fastest


def test_trapezoid_weights_sum_to_span():
    window = TimeWindow.for_cutoff(1.0, t0=-1.0, t1=1.0)
    assert float(np.sum(window.weights)) == pytest.approx(2.0, rel=1e-14)


def test_sharp_kernel_matches_quadrature_for_slow_phases():
    window = TimeWindow(0.0, 1.0, samples=2001)
    omega = np.array([0.0, 0.25, -1.0, 2.0])
    np.testing.assert_allclose(window.quadrature_kernel(omega), window.kernel(omega), atol=1e-5)
    assert window.kernel(0.0) == 1.0


def test_smooth_window_uses_bump_fourier():
    window = TimeWindow.for_cutoff(1.0, bump_kind=BumpKind.SMOOTH, tail=20.0)
    assert window.span == 40.0
    assert window.kernel(0.75) == 0.0


def test_empty_window_rejected():
    with pytest.raises(InvalidParameterError):
        TimeWindow(1.0, 1.0)
