"""Tests for square QAM and ring/phase QAM constellations."""

import numpy as np
import pytest

from hpmimo.modulation import (
    average_energy,
    build_pqam,
    build_qam,
    demap_symbols,
    map_bits,
    polar_geometry,
)


def test_qam_unit_energy():
    for order in (4, 16, 64):
        const = build_qam(order)
        assert const.order == order
        np.testing.assert_allclose(average_energy(const), 1.0, atol=1e-12)


def test_pqam_unit_energy():
    for order, rings in ((16, 2), (16, 4), (16, 8), (64, 4)):
        const = build_pqam(order, rings)
        np.testing.assert_allclose(average_energy(const), 1.0, atol=1e-12)


def test_qam16_point_grid():
    """16-QAM sits on the +-1, +-3 grid scaled to unit energy."""
    const = build_qam(16)
    scale = 1.0 / np.sqrt(10.0)
    levels = np.array([-3.0, -1.0, 1.0, 3.0]) * scale
    re = np.unique(np.round(const.points.real, 12))
    im = np.unique(np.round(const.points.imag, 12))
    np.testing.assert_allclose(re, levels, atol=1e-12)
    np.testing.assert_allclose(im, levels, atol=1e-12)


def test_gray_labels_differ_in_one_bit():
    """Nearest neighbours of every point differ in exactly one bit."""
    for const in (build_qam(4), build_qam(16), build_pqam(16, 4), build_pqam(16, 8)):
        pts = const.points
        for i in range(const.order):
            dist = np.abs(pts - pts[i])
            dist[i] = np.inf
            for j in np.flatnonzero(np.isclose(dist, dist.min(), rtol=1e-9)):
                assert bin(i ^ int(j)).count("1") == 1, (const.label, i, int(j))


def test_pqam_ring_radii():
    """Ring radii follow 1, 3, ..., 2G - 1 over sqrt((4G^2 - 1)/3)."""
    for rings in (2, 4, 8):
        const = build_pqam(16, rings)
        expected = (2.0 * np.arange(rings) + 1.0) / np.sqrt((4.0 * rings**2 - 1.0) / 3.0)
        measured = np.array(
            [np.abs(const.points[const.ring_index == r][0]) for r in range(rings)]
        )
        np.testing.assert_allclose(measured, expected, atol=1e-12)


def test_pqam_phase_grid_starts_at_zero():
    """All rings share one phase grid with a point on the real axis."""
    const = build_pqam(16, 4)
    for r in range(4):
        ring_angles = np.sort(np.mod(np.angle(const.points[const.ring_index == r]), 2 * np.pi))
        np.testing.assert_allclose(
            ring_angles, 2.0 * np.pi * np.arange(4) / 4.0, atol=1e-12
        )


def test_qam16_polar_deltas():
    """Measured gaps match the arctangent geometry of the scaled grid."""
    geo = polar_geometry(build_qam(16))
    np.testing.assert_allclose(
        geo.delta_rho,
        [1.0 - 1.0 / np.sqrt(5.0), 3.0 / np.sqrt(5.0) - 1.0],
        atol=1e-12,
    )
    np.testing.assert_allclose(
        geo.delta_theta,
        [
            np.pi / 2.0,
            2.0 * np.arctan(1.0 / 3.0),
            np.arctan(3.0) - np.arctan(1.0 / 3.0),
            np.pi / 2.0,
        ],
        atol=1e-12,
    )


def test_pqam_polar_deltas_uniform():
    for rings in (2, 4, 8):
        geo = polar_geometry(build_pqam(16, rings))
        gap = 2.0 / np.sqrt((4.0 * rings**2 - 1.0) / 3.0)
        np.testing.assert_allclose(geo.delta_rho, gap, atol=1e-12)
        n_phases = 16 // rings
        if n_phases > 1:
            np.testing.assert_allclose(geo.delta_theta, 2.0 * np.pi / n_phases, atol=1e-12)


def test_qam4_equals_rotated_single_ring_pqam():
    """4-QAM is the G=1 ring constellation rotated by 45 degrees."""
    qam = build_qam(4)
    pqam = build_pqam(4, 1)
    rotated = set(np.round(pqam.points * np.exp(1j * np.pi / 4.0), 12))
    assert set(np.round(qam.points, 12)) == rotated


def test_bit_round_trip():
    rng = np.random.default_rng(21)
    for const in (build_qam(4), build_qam(16), build_pqam(16, 8)):
        bits = rng.integers(0, 2, size=120 * const.bits_per_symbol)
        indices = map_bits(const, bits)
        np.testing.assert_array_equal(demap_symbols(const, indices), bits)


def test_map_bits_msb_first():
    const = build_qam(16)
    # 1010 packs to index 10, 0001 to index 1.
    np.testing.assert_array_equal(map_bits(const, np.array([1, 0, 1, 0, 0, 0, 0, 1])), [10, 1])


def test_invalid_parameters():
    with pytest.raises(ValueError):
        build_qam(12)  # not a power of two
    with pytest.raises(ValueError):
        build_qam(8)  # odd number of bits has no square layout
    with pytest.raises(ValueError):
        build_pqam(16, 3)  # ring count must divide as a power of two
    with pytest.raises(ValueError):
        build_pqam(16, 32)  # ring count exceeds the order
    with pytest.raises(ValueError):
        map_bits(build_qam(16), np.array([0, 1, 1]))  # not a multiple of 4
    with pytest.raises(ValueError):
        map_bits(build_qam(4), np.array([0, 2]))  # non-binary entry
    with pytest.raises(ValueError):
        demap_symbols(build_qam(4), np.array([4]))  # index out of range
