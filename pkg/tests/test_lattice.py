import math

import numpy as np
import pytest

from src.core.errors import InvalidParameterError, LatticeMismatchError
from src.core.lattice import (
    FrequencyLattice,
    ProjectionMode,
    SpectralField,
    build_lattice,
    dyadic_range,
    ensure_same_lattice,
    gaussian_field,
    l2_norm,
    parse_field,
    project,
    read_field,
    wave_packet_field,
    write_field,
)
from src.utils.rng import make_generator


@pytest.mark.parametrize(
    "lam, box_length, cutoff, cardinality",
    [(1.0, 8.0, 1.0, 17 * 3), (2.0, 16.0, 4.0, 129 * 17)],
)
def test_cardinality(lam, box_length, cutoff, cardinality):
    lattice = build_lattice(lam, box_length, cutoff)
    assert lattice.cardinality == cardinality
    assert lattice.shape[0] == 2 * lattice.k2_max + 1


def test_box_criterion_rejects_small_box():
    with pytest.raises(InvalidParameterError):
        build_lattice(2.0, 8.0, 1.0)


def test_tt_geometry_fails_box_criterion():
    # L wird auf lambda gesetzt und ist damit zu klein.
    with pytest.raises(InvalidParameterError):
        build_lattice(1.0, 8.0, 1.0, "TT")


def test_torus_lattice_shape():
    lattice = FrequencyLattice.torus(1.0, 2.0)
    assert lattice.shape == (5, 5)
    assert lattice.point_weight == 1.0


@pytest.mark.parametrize("lam, cutoff", [(0.5, 1.0), (1.0, 0.5), (math.inf, 1.0)])
def test_invalid_parameters(lam, cutoff):
    with pytest.raises(InvalidParameterError):
        build_lattice(lam, 8.0, cutoff)


def test_frequencies_on_scaled_integers(small_lattice):
    xi1, xi2 = small_lattice.frequencies
    assert xi1[0, 0] == -1.0
    assert xi1[0, 1] == -7 / 8
    assert sorted(set(xi2[:, 0].tolist())) == [-1.0, 0.0, 1.0]


def test_l2_norm_of_single_modes(small_lattice):
    one = SpectralField.single_mode(small_lattice, 0, 0)
    assert l2_norm(one) == pytest.approx(math.sqrt(1 / 8), rel=1e-15)
    two = SpectralField.from_modes(small_lattice, {(0, 0): 1.0, (3, 1): 1.0j})
    assert l2_norm(two) == pytest.approx(math.sqrt(2 / 8), rel=1e-15)


def test_single_mode_outside_lattice(small_lattice):
    with pytest.raises(InvalidParameterError):
        SpectralField.single_mode(small_lattice, 9, 0)


def test_non_finite_coefficients_rejected(small_lattice):
    coeffs = np.zeros(small_lattice.shape)
    coeffs[1, 1] = np.nan
    with pytest.raises(InvalidParameterError):
        SpectralField(small_lattice, coeffs)


def test_shape_mismatch(small_lattice):
    with pytest.raises(LatticeMismatchError):
        SpectralField(small_lattice, np.zeros((2, 2)))


def test_ensure_same_lattice(small_lattice):
    other = build_lattice(1.0, 16.0, 1.0)
    with pytest.raises(LatticeMismatchError):
        ensure_same_lattice(SpectralField.zeros(other), small_lattice)


def test_projections_are_idempotent(rng):
    lattice = build_lattice(1.0, 8.0, 4.0)
    phi = gaussian_field(lattice, rng)
    for mode, n in ((ProjectionMode.LE, 2), (ProjectionMode.AT, 4), (ProjectionMode.MEAN_ZERO_X2, None)):
        once = project(phi, mode, n)
        twice = project(once, mode, n)
        np.testing.assert_array_equal(once.coeffs, twice.coeffs)


def test_dyadic_shells_tile_the_lattice(rng):
    lattice = build_lattice(1.0, 8.0, 4.0)
    phi = gaussian_field(lattice, rng)
    levels = dyadic_range(lattice.cutoff)
    assert levels == [1, 2, 4]
    total = sum(l2_norm(project(phi, ProjectionMode.AT, n)) ** 2 for n in levels)
    assert total == pytest.approx(l2_norm(phi) ** 2, rel=1e-12)


def test_shell_keeps_mode_in_range():
    lattice = build_lattice(1.0, 8.0, 4.0)
    phi = SpectralField.single_mode(lattice, 24, 0)  # xi = (3, 0)
    assert not project(phi, ProjectionMode.AT, 4).is_zero()
    assert project(phi, ProjectionMode.AT, 2).is_zero()


def test_mean_zero_removes_xi2_zero_row(small_lattice):
    phi = SpectralField.from_modes(small_lattice, {(2, 0): 1.0, (2, 1): 1.0})
    projected = project(phi, ProjectionMode.MEAN_ZERO_X2)
    assert projected.support().tolist() == SpectralField.single_mode(small_lattice, 2, 1).support().tolist()


def test_projection_above_cutoff(small_lattice):
    with pytest.raises(InvalidParameterError):
        project(SpectralField.zeros(small_lattice), ProjectionMode.LE, 2)


def test_le_norms_are_monotone(rng):
    lattice = build_lattice(1.0, 8.0, 4.0)
    phi = gaussian_field(lattice, rng)
    norms = [l2_norm(project(phi, ProjectionMode.LE, n)) for n in (1, 2, 4)]
    assert norms == sorted(norms)


def test_field_file_round_trip(tmp_path, random_field):
    path = write_field(random_field, tmp_path / "phi.field")
    restored = read_field(path)
    assert restored.lattice == random_field.lattice
    np.testing.assert_array_equal(restored.coeffs, random_field.coeffs)


def test_field_file_rejects_bad_header():
    with pytest.raises(InvalidParameterError):
        parse_field("grid 1.0 8.0 1.0 RT\n0 0 1.0 0.0\n")


def test_field_file_rejects_missing_points(small_lattice):
    with pytest.raises(InvalidParameterError):
        parse_field(small_lattice.header() + "\n0 0 1.0 0.0\n")


def test_wave_packets_do_not_feel_the_box():
    small = build_lattice(1.0, 8.0, 2.0)
    large = small.doubled_box()
    first = wave_packet_field(small, make_generator(3, "packets"))
    second = wave_packet_field(large, make_generator(3, "packets"))
    assert l2_norm(second) == pytest.approx(l2_norm(first), rel=1e-6)
    # Gemeinsame Frequenzen tragen denselben Koeffizienten.
    np.testing.assert_allclose(second.coeffs[:, ::2], first.coeffs, rtol=1e-12)


def test_wave_packets_need_room():
    with pytest.raises(InvalidParameterError):
        wave_packet_field(build_lattice(1.0, 8.0, 2.0), make_generator(3), spread=4.0)
