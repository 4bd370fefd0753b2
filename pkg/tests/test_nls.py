import math

import numpy as np
import pytest

from src.core.errors import BlowUpError, DegenerateInputError, InvalidParameterError
from src.core.lattice import SpectralField, build_lattice, gaussian_field, l2_norm, read_field
from src.dispersion.nls import (
    GridDynamics,
    NlsRun,
    NlsSign,
    PicardRecord,
    calibrate_smallness,
    checkpoint_name,
    contraction_holds,
    default_dt,
    global_small_data_run,
    picard_iterate,
    single_mode_solution,
    split_step,
    split_step_window_norm,
    splitting_error_ratio,
    time_reversal_error,
)
from src.dispersion.propagator import evolve


@pytest.fixture
def small_data(random_field):
    return random_field.normalized().scaled(0.05)


def test_step_size_rule(small_plan, random_field):
    run = NlsRun(NlsSign.DEFOCUSING, small_plan, random_field, duration=1.0)
    assert default_dt(1.0) == 1 / 8
    assert run.steps == 8
    assert run.dt == pytest.approx(1 / 8)
    with pytest.raises(InvalidParameterError):
        NlsRun(NlsSign.DEFOCUSING, small_plan, random_field, dt_factor=4.0)


def test_zero_data_stays_zero(small_plan):
    run = split_step(NlsRun("defocusing", small_plan, SpectralField.zeros(small_plan.lattice)))
    assert run.final_field.is_zero()
    assert run.mass_drift == 0.0


@pytest.mark.parametrize("sign", list(NlsSign))
def test_single_mode_solution(small_plan, sign):
    phi = SpectralField.single_mode(small_plan.lattice, 3, 1, 4.0 + 1.0j)
    run = split_step(NlsRun(sign, small_plan, phi, duration=1.0))
    exact = single_mode_solution(small_plan, phi, sign, 1.0)
    np.testing.assert_allclose(run.final_field.coeffs, exact.coeffs, atol=1e-8)


def test_single_mode_needs_one_coefficient(small_plan, random_field):
    with pytest.raises(DegenerateInputError):
        single_mode_solution(small_plan, random_field, "defocusing", 1.0)


def test_linear_limit_matches_evolve(small_plan, random_field):
    tiny = random_field.normalized().scaled(1e-9)
    run = split_step(NlsRun("focusing", small_plan, tiny, duration=0.5))
    expected = evolve(small_plan, tiny, 0.5)
    np.testing.assert_allclose(run.final_field.coeffs, expected.coeffs, atol=1e-20)


def test_mass_is_conserved(small_plan, small_data):
    run = split_step(NlsRun("defocusing", small_plan, small_data, duration=2.0, diagnostic_stride=2))
    assert run.mass_drift < 1e-12
    assert run.diagnostics[0].mass == pytest.approx(l2_norm(small_data) ** 2, rel=1e-12)
    assert [sample.step for sample in run.diagnostics] == list(range(0, run.steps + 1, 2))


def test_time_reversal(small_plan, small_data):
    dynamics_dt = default_dt(small_plan.lattice.cutoff)
    assert time_reversal_error(small_plan, small_data, "defocusing", dynamics_dt) < 1e-10
    assert time_reversal_error(small_plan, small_data.scaled(40.0), "focusing", dynamics_dt) < 1e-10


def test_splitting_is_second_order(small_plan, random_field):
    phi = random_field.normalized().scaled(0.5)
    coarse, fine, ratio = splitting_error_ratio(small_plan, phi, "defocusing", duration=0.5)
    assert coarse > fine > 0.0
    # Erste Ordnung gaebe 3, zweite Ordnung 5.
    assert ratio > 3.0


def test_global_run_rejects_large_data(small_plan, random_field):
    with pytest.raises(InvalidParameterError):
        global_small_data_run(small_plan, random_field.normalized(), 1, smallness=0.1)


def test_global_run_per_interval(small_plan, small_data, tmp_path):
    run = global_small_data_run(
        small_plan, small_data, 2, "defocusing", checkpoint_stride=8, checkpoint_dir=tmp_path
    )
    assert len(run.interval_l4) == 2
    assert len(run.interval_mass) == 2
    assert all(norm > 0.0 for norm in run.interval_l4)
    assert run.interval_mass[-1] == pytest.approx(run.interval_mass[0], rel=1e-12)
    assert [path.name for path in run.checkpoints] == ["nls_step0000008.field", "nls_step0000016.field"]
    assert read_field(run.checkpoints[-1]).lattice == small_plan.lattice
    assert run.checkpoint_fields == []


def test_global_run_covers_whole_interval(make_plan, rng):
    # 8 N^2 = 13.52 ist nicht ganzzahlig: 14 Schritte pro Einheitsintervall.
    lattice = build_lattice(1.0, 8.0, 1.3)
    plan = make_plan(lattice)
    phi = gaussian_field(lattice, rng).normalized().scaled(0.05)
    chained = global_small_data_run(plan, phi, 3, "defocusing")
    assert chained.steps_per_unit == 14
    assert chained.interval_steps == [14, 14, 14]
    assert sum(chained.interval_steps) == chained.steps == 42
    assert chained.dt * chained.steps == pytest.approx(3.0, rel=1e-14)
    assert chained.diagnostics[-1].step == chained.steps
    assert chained.diagnostics[-1].time == pytest.approx(3.0, rel=1e-14)

    single = split_step(NlsRun("defocusing", plan, phi, duration=3.0))
    assert single.steps == chained.steps
    np.testing.assert_allclose(chained.final_values, single.final_values, rtol=0.0, atol=1e-14)


def test_checkpoints_stay_in_memory_without_directory(small_plan, small_data):
    run = split_step(NlsRun("defocusing", small_plan, small_data, duration=1.0, checkpoint_stride=4))
    assert run.checkpoints == []
    assert [step for step, _ in run.checkpoint_fields] == [4, 8]
    assert checkpoint_name(8) == "nls_step0000008.field"


def test_blow_up_is_reported(small_plan, random_field):
    huge = random_field.normalized().scaled(1e200)
    with pytest.raises(BlowUpError) as info:
        split_step(NlsRun("focusing", small_plan, huge))
    assert info.value.step == 1
    assert info.value.last_valid_state.shape == small_plan.grid_shape


def test_picard_with_zero_data(small_plan):
    record = picard_iterate(small_plan, SpectralField.zeros(small_plan.lattice), max_iter=4)
    assert record.iterate_norms == [0.0] * 5
    assert record.differences == [0.0] * 4
    assert not record.diverged
    assert contraction_holds(record)


def test_picard_contracts_for_small_data(small_plan, small_data):
    record = picard_iterate(small_plan, small_data, "defocusing", (-1.0, 1.0), max_iter=5)
    assert record.iterations == 6
    assert record.overflow_at is None
    assert not record.diverged
    assert contraction_holds(record)
    assert all(math.isfinite(item) and item > 0.0 for item in record.effective_constants)
    split_norm = split_step_window_norm(small_plan, small_data, "defocusing", (-1.0, 1.0))
    assert record.limit_norm == pytest.approx(split_norm, rel=5e-2)


def test_picard_first_iterate_is_linear_flow(small_plan, small_data):
    record = picard_iterate(small_plan, small_data, interval=(0.0, 1.0), max_iter=1)
    linear = split_step_window_norm(small_plan, small_data.scaled(1e-9), "defocusing", (0.0, 1.0)) * 1e9
    assert record.iterate_norms[0] == pytest.approx(linear, rel=1e-9)


def test_picard_interval_must_contain_zero(small_plan, small_data):
    with pytest.raises(InvalidParameterError):
        picard_iterate(small_plan, small_data, interval=(0.5, 1.0))


def test_divergence_rule():
    record = PicardRecord(interval=(-1.0, 1.0), differences=[1.0, 2.0, 4.0, 8.0])
    assert record.diverged
    record = PicardRecord(interval=(-1.0, 1.0), differences=[1.0, 2.0, 1.0, 2.0, 1.0])
    assert not record.diverged
    assert PicardRecord(interval=(0.0, 1.0), overflow_at=3).diverged


def test_contraction_threshold():
    record = PicardRecord(interval=(-1.0, 1.0), differences=[1.0, 0.6, 0.36, 0.216, 0.1296])
    assert not record.diverged
    assert not contraction_holds(record)
    assert contraction_holds(record, max_factor=0.6 + 1e-12)


def test_calibration_uses_acceptance_threshold(small_plan, random_field):
    # Bei ||phi||_2 = 1 liegen die Faktoren weit ueber 1e-12: die Kalibrierung endet unten.
    threshold = calibrate_smallness(small_plan, random_field, low=1.0, high=1e3, rounds=2, max_iter=5, max_factor=1e-12)
    assert threshold == 1.0


def test_calibration_stays_in_bracket(small_plan, random_field):
    threshold = calibrate_smallness(small_plan, random_field, "defocusing", low=1e-2, high=1e3, rounds=3, max_iter=5)
    assert 1e-2 <= threshold <= 1e3
    with pytest.raises(DegenerateInputError):
        calibrate_smallness(small_plan, SpectralField.zeros(small_plan.lattice))


def test_grid_symbol_matches_lattice(small_plan):
    dynamics = GridDynamics(small_plan, "defocusing")
    m2, m1 = small_plan.grid_shape
    assert dynamics.grid_symbol.shape == (m2, m1)
    # Spalte 3, Zeile 1 des FFT-Gitters ist xi = (3/8, 1).
    assert dynamics.grid_symbol[1, 3] == pytest.approx((3 / 8) ** 2 - 1.0)
