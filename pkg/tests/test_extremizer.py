import numpy as np
import pytest

from src.core.errors import DegenerateInputError, InvalidParameterError
from src.core.lattice import SpectralField, gaussian_field
from src.dispersion.extremizer import (
    InitKind,
    StopReason,
    best_extremizer,
    extremize,
    fixed_point_image,
    init_hyperbola,
    init_x2_constant,
)
from src.dispersion.functional import l4_space_time_norm, strichartz_ratio


def test_fixed_point_image_pairs_to_quartic_norm(small_plan, random_field):
    image = fixed_point_image(small_plan, random_field)
    pairing = small_plan.lattice.point_weight * np.vdot(random_field.coeffs, image).real
    assert pairing == pytest.approx(l4_space_time_norm(small_plan, random_field) ** 4, rel=1e-10)


def test_accepted_ratios_never_decrease(small_plan, random_field):
    trace = extremize(small_plan, 1, random_field, max_iter=6, tol=0.0)
    accepted = trace.accepted_ratios
    assert all(b >= a for a, b in zip(accepted, accepted[1:]))
    assert trace.final_ratio >= trace.initial_ratio
    assert trace.final_ratio == pytest.approx(strichartz_ratio(small_plan, trace.final), rel=1e-12)
    assert trace.stop_reason in (StopReason.MAX_ITER, StopReason.STALL, StopReason.TOLERANCE)


def test_zero_iterations_keep_initial_field(small_plan, random_field):
    trace = extremize(small_plan, 1, random_field, max_iter=0)
    assert trace.stop_reason is StopReason.MAX_ITER
    assert len(trace.iterates) == 1
    assert trace.final_ratio == trace.initial_ratio


def test_large_tolerance_stops_early(small_plan, random_field):
    trace = extremize(small_plan, 1, random_field, max_iter=50, tol=1.0, stall_window=1)
    assert trace.stop_reason in (StopReason.TOLERANCE, StopReason.STALL)
    assert len(trace.accepted_ratios) <= 2


def test_invalid_arguments(small_plan, random_field):
    with pytest.raises(InvalidParameterError):
        extremize(small_plan, 2, random_field)
    with pytest.raises(InvalidParameterError):
        extremize(small_plan, 1, random_field, stall_window=0)
    with pytest.raises(DegenerateInputError):
        extremize(small_plan, 1, SpectralField.zeros(small_plan.lattice))


def test_mean_zero_constraint_is_kept(small_plan, random_field):
    trace = extremize(small_plan, 1, random_field, max_iter=2, mean_zero=True)
    k2 = small_plan.lattice.indices[1]
    assert not np.any(trace.final.coeffs[k2 == 0])


def test_structured_initial_data(small_plan, rng):
    lattice = small_plan.lattice
    flat = init_x2_constant(lattice, 1, rng)
    assert not np.any(flat.coeffs[lattice.indices[1] != 0])
    near = init_hyperbola(lattice, 1, rng, small_plan.symbol)
    xi1, xi2 = lattice.frequencies
    assert not np.any(near.coeffs[np.abs(xi1**2 - xi2**2) > 1.0])


def test_best_of_three_starts(small_plan):
    best, traces = best_extremizer(small_plan, 1, seed=11, max_iter=2)
    assert {trace.init_kind for trace in traces} <= {kind.value for kind in InitKind}
    assert best.final_ratio == max(trace.final_ratio for trace in traces)
    again, _ = best_extremizer(small_plan, 1, seed=11, max_iter=2)
    assert again.final_ratio == best.final_ratio


def test_extremizer_beats_random_data(small_plan, rng):
    phi = gaussian_field(small_plan.lattice, rng)
    trace = extremize(small_plan, 1, phi, max_iter=10, tol=0.0)
    assert trace.final_ratio >= strichartz_ratio(small_plan, phi) * (1 - 1e-12)
