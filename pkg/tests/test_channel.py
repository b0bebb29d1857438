"""Tests for the clustered channel generator and the dump format."""

import numpy as np
import pytest

from hpmimo.channel import (
    ChannelParams,
    array_response,
    generate_channel,
    iter_channel_dump,
    read_channel_dump,
    sample_angles,
    write_channel_dump,
)


def test_array_response_is_unit_norm():
    """Steering vectors carry the 1/sqrt(n) normalization."""
    for n in (1, 4, 36, 144):
        vec = array_response(0.7, n)
        assert vec.shape == (n,)
        np.testing.assert_allclose(np.linalg.norm(vec), 1.0, atol=1e-12)


def test_array_response_phase_progression():
    """Element q carries phase pi * q * sin(theta)."""
    theta = 0.3
    vec = array_response(theta, 8)
    phases = np.angle(vec * np.conj(vec[0]))
    expected = np.mod(np.pi * np.arange(8) * np.sin(theta) + np.pi, 2 * np.pi) - np.pi
    np.testing.assert_allclose(phases, expected, atol=1e-12)


def test_array_response_broadcasts_over_angles():
    thetas = np.array([0.1, 0.2, 0.3])
    out = array_response(thetas, 16)
    assert out.shape == (3, 16)
    np.testing.assert_allclose(out[1], array_response(0.2, 16))


def test_sample_angles_shapes_and_spread():
    """Ray offsets are Laplacian with the configured standard deviation."""
    params = ChannelParams(n_clusters=1, n_rays=200_000)
    rng = np.random.default_rng(11)
    aod, aoa = sample_angles(params, rng)
    assert aod.shape == (1, 200_000)
    assert aoa.shape == (1, 200_000)
    # Subtracting the cluster mean leaves the Laplacian offsets.
    for offsets in (aod - np.mean(aod), aoa - np.mean(aoa)):
        measured = np.std(offsets)
        np.testing.assert_allclose(measured, params.angle_spread_rad, rtol=0.02)
        # Laplacian kurtosis is 6 versus 3 for a Gaussian.
        kurt = np.mean(offsets**4) / np.var(offsets) ** 2
        np.testing.assert_allclose(kurt, 6.0, rtol=0.1)


def test_channel_shape_and_energy():
    """E||H||_F^2 = n_tx * n_rx under the cluster normalization."""
    params = ChannelParams()
    rng = np.random.default_rng(12)
    total = 0.0
    n = 4000
    for _ in range(n):
        h = generate_channel(params, rng)
        total += np.linalg.norm(h) ** 2
    assert h.shape == (params.n_rx, params.n_tx)
    np.testing.assert_allclose(total / n, params.n_tx * params.n_rx, rtol=0.02)


def test_channel_rank_bounded_by_path_count():
    """The sum of n_paths rank-one terms has rank at most n_paths."""
    params = ChannelParams(n_tx=64, n_rx=32, n_clusters=2, n_rays=3)
    rng = np.random.default_rng(13)
    h = generate_channel(params, rng)
    s = np.linalg.svd(h, compute_uv=False)
    assert np.sum(s > s[0] * 1e-9) <= params.n_paths


def test_single_path_channel_is_rank_one():
    params = ChannelParams(n_tx=16, n_rx=8, n_clusters=1, n_rays=1)
    rng = np.random.default_rng(14)
    h = generate_channel(params, rng)
    s = np.linalg.svd(h, compute_uv=False)
    assert s[1] < s[0] * 1e-12


def test_generate_channel_deterministic():
    params = ChannelParams(n_tx=32, n_rx=8)
    a = generate_channel(params, np.random.default_rng(77))
    b = generate_channel(params, np.random.default_rng(77))
    np.testing.assert_array_equal(a, b)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(n_tx=0)
    with pytest.raises(ValueError):
        ChannelParams(n_clusters=0)
    with pytest.raises(ValueError):
        ChannelParams(angle_spread_deg=-1.0)


def test_channel_dump_round_trip(tmp_path):
    """Dumped realizations read back bit-exact with their seeds."""
    params = ChannelParams(n_tx=24, n_rx=6, n_clusters=2, n_rays=4)
    rng = np.random.default_rng(15)
    records = [(seed, generate_channel(params, rng)) for seed in (3, 9, 27)]
    path = tmp_path / "channels.bin"
    write_channel_dump(path, params, records)

    read_params, read_records = read_channel_dump(path)
    assert read_params == params
    assert [seed for seed, _ in read_records] == [3, 9, 27]
    for (_, original), (_, restored) in zip(records, read_records):
        np.testing.assert_array_equal(original, restored)

    streamed = list(iter_channel_dump(path))
    assert len(streamed) == 3
    np.testing.assert_array_equal(streamed[-1][1], records[-1][1])


def test_channel_dump_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a channel dump at all")
    with pytest.raises(ValueError):
        read_channel_dump(path)
