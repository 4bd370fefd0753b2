import math

import numpy as np
import pytest

from src.core.errors import ComplexityBudgetError, InvalidParameterError, RootIsolationError
from src.measure import catalog
from src.measure.lab import (
    PropKind,
    box_sensitivity,
    euclid_measure,
    lattice_levels,
    lemma_check,
    prop_check,
    rz_measure,
    saddle_max_slice,
    standard_v_samples,
)
from src.measure.roots import isolate_roots, monotonicity_changes, scan_slice_length, slice_intervals, slice_length
from src.measure.semialgebraic import Box, format_set, parse_set, read_set
from src.utils.fitting import log_law_fit

DISK_TEXT = """# einheitskreis
box -1 1 -1 1
>=0 1 0 0 -1 2 0 -1 0 2
"""


def test_disk_area():
    assert euclid_measure(catalog.disk(1.0)) == pytest.approx(math.pi, rel=1e-5)


def test_round_annulus_area():
    assert euclid_measure(catalog.round_annulus(1.0, 2.0)) == pytest.approx(3 * math.pi, rel=1e-5)


def test_rectangle_measures_and_lemma():
    rectangle = catalog.rectangle(0.0, 2.0, 0.0, 3.0)
    assert euclid_measure(rectangle) == pytest.approx(6.0, rel=1e-9)
    assert rz_measure(rectangle, 1.0) == pytest.approx(8.0, rel=1e-12)
    record = lemma_check(rectangle, 1.0)
    assert record.max_slice == pytest.approx(2.0)
    assert record.implied_c == pytest.approx(1.0, rel=1e-9)
    assert record.monotonicity_changes == 0


def test_lattice_levels_respect_lambda():
    levels = lattice_levels(catalog.rectangle(0.0, 1.0, -1.0, 1.0), 2.0)
    np.testing.assert_allclose(levels, [-1.0, -0.5, 0.0, 0.5, 1.0])


def test_slice_length_against_scan():
    disk = catalog.disk(1.0)
    exact = slice_length(disk, 0.5)
    assert exact == pytest.approx(2 * math.sqrt(0.75), abs=1e-12)
    assert scan_slice_length(disk, 0.5, step=1e-4) == pytest.approx(exact, abs=1e-3)
    assert slice_length(disk, 1.5) == 0.0


def test_slice_intervals_of_annulus():
    intervals = slice_intervals(catalog.round_annulus(1.0, 2.0), 0.0)
    assert len(intervals) == 2
    (a, b), (c, d) = intervals
    assert (a, b) == pytest.approx((-2.0, -1.0), abs=1e-10)
    assert (c, d) == pytest.approx((1.0, 2.0), abs=1e-10)


def test_isolate_roots():
    roots = isolate_roots(np.array([1.0, 0.0, -2.0]), -2.0, 2.0)
    assert roots == pytest.approx([-math.sqrt(2), math.sqrt(2)], abs=1e-10)
    assert isolate_roots(np.array([3.0]), -1.0, 1.0) == []


def test_isolate_roots_degree_limit():
    with pytest.raises(RootIsolationError):
        isolate_roots(np.array([1.0, 0.0, 0.0, 0.0, 0.0, -1.0]), -2.0, 2.0)


def test_monotonicity_changes():
    assert monotonicity_changes([1, 2, 3, 2, 1, 2]) == 2
    assert monotonicity_changes([1, 1, 1]) == 0


def test_saddle_max_slice_equals_box_width():
    for n in (4, 8, 16):
        assert saddle_max_slice(0.0, n, 1.0) == pytest.approx(2 * n, rel=1e-12)


def test_hyperbolic_annulus_grows_logarithmically():
    ns = [8, 16, 32, 64]
    areas = [euclid_measure(catalog.hyperbolic_annulus(0.0, n)) for n in ns]
    assert areas == sorted(areas)
    fit, residual = log_law_fit(ns, areas)
    assert fit.slope > 0.0
    assert residual < 0.05


def test_set_text_format(tmp_path):
    semi_set = parse_set(DISK_TEXT)
    assert semi_set.label == "einheitskreis"
    assert semi_set.box == Box(-1.0, 1.0, -1.0, 1.0)
    assert semi_set.contains_exact(0, 0)
    assert not semi_set.contains_exact(1, 1)
    path = tmp_path / "disk.set"
    path.write_text(format_set(semi_set), encoding="utf-8")
    restored = read_set(path)
    assert restored.clauses == semi_set.clauses
    assert euclid_measure(restored) == pytest.approx(math.pi, rel=1e-5)


def test_set_text_format_with_union():
    text = "box 0 4 0 1\n>=0 1 0 0 -1 1 0\nor\n>=0 -3 0 0 1 1 0\n"
    semi_set = parse_set(text)
    assert len(semi_set.clauses) == 2
    assert slice_length(semi_set, 0.5) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize(
    "text",
    [
        ">=0 1 0 0\n",
        "box 0 1 0\n>=0 1 0 0\n",
        "box 0 1 0 1\n<=0 1 0 0\n",
        "box 0 1 0 1\n>=0 1 0\n",
        "box 0 1 0 1\n>=0 1 -1 0\n",
    ],
)
def test_set_text_format_errors(text):
    with pytest.raises(InvalidParameterError):
        parse_set(text)


def test_complexity_budget():
    with pytest.raises(ComplexityBudgetError):
        parse_set(DISK_TEXT, budget=1)
    with pytest.raises(ComplexityBudgetError):
        catalog.disk(1.0, budget=1)


def test_catalog_lookup():
    assert catalog.build_catalog_set("disk", radius=2.0).label == "disk(2.0)"
    with pytest.raises(InvalidParameterError):
        catalog.build_catalog_set("dodecahedron")
    with pytest.raises(InvalidParameterError):
        catalog.build_catalog_set("disk", side=2.0)


def test_a2_section_requires_large_constant():
    with pytest.raises(InvalidParameterError):
        catalog.a2_section((2.0, 1.0), 0.5, 1.0)


def test_section_rejects_null_vector():
    with pytest.raises(InvalidParameterError):
        catalog.a1_section((1.0, 1.0), 100.0, 1.0)


def test_lemma_corpus_is_deterministic():
    first = catalog.lemma_corpus(6, seed=3)
    second = catalog.lemma_corpus(6, seed=3)
    assert [item.label for item in first] == [item.label for item in second]
    assert all(item.complexity <= item.budget for item in first)


def test_box_sensitivity_of_disk():
    base, widened, change = box_sensitivity(catalog.disk(1.0), 2.0)
    assert base.lhs == pytest.approx(widened.lhs, rel=1e-12)
    assert change == pytest.approx(0.0, abs=1e-4)


def test_prop_check_rows():
    record = prop_check(PropKind.A2_REFINED, [(2.0, 1.0)], 1.0, c_a=100.0, theta2=2.0)
    assert len(record.rows) == 8
    assert record.sup == max(row.rz for row in record.rows)
    assert record.argmax.v == (2.0, 1.0)


def test_prop_check_rejects_off_lattice_v():
    with pytest.raises(InvalidParameterError):
        prop_check(PropKind.A1, [(2.0, 0.3)], 1.0)


def test_standard_samples_avoid_null_cone():
    for v1, v2 in standard_v_samples(2.0, count=24, v_max=100.0):
        assert abs(v1 * v1 - v2 * v2) >= 1.0
        assert v2 * 2.0 == round(v2 * 2.0)


def test_region_area_scales_with_inverse_cd():
    # |alpha beta - 1| <= 1/(cd): die Flaeche ist proportional zu 1/(cd).
    wide = euclid_measure(catalog.est11_region(1.0, 1.0))
    narrow = euclid_measure(catalog.est11_region(4.0, 4.0))
    assert wide / narrow == pytest.approx(16.0, rel=1e-3)
