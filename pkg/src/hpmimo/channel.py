"""Clustered multipath MIMO channel with uniform linear arrays.

The channel is a sum of N_c clusters with N_R rays each.  Every ray
carries a CN(0, 1) gain and a pair of departure/arrival angles drawn
around its cluster mean, and the matrix is scaled so that the expected
squared Frobenius norm equals n_tx * n_rx.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from typing import BinaryIO, Iterable, Iterator

import numpy as np

_DUMP_MAGIC = b"HPCD"
_DUMP_VERSION = 1


@dataclass(frozen=True)
class ChannelParams:
    """Geometry and statistics of the clustered channel."""

    n_tx: int = 144
    n_rx: int = 36
    n_clusters: int = 5
    n_rays: int = 10
    angle_spread_deg: float = 10.0

    def __post_init__(self) -> None:
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be positive")
        if self.n_clusters < 1 or self.n_rays < 1:
            raise ValueError("cluster and ray counts must be positive")
        if self.angle_spread_deg < 0:
            raise ValueError("angle spread must be non-negative")

    @property
    def n_paths(self) -> int:
        return self.n_clusters * self.n_rays

    @property
    def angle_spread_rad(self) -> float:
        return float(np.deg2rad(self.angle_spread_deg))


def array_response(theta, n: int) -> np.ndarray:
    """Unit-norm response of an n-element half-wavelength ULA.

    Element i has phase pi * i * sin(theta).  Accepts scalar or array
    angles; the array axis is appended last, so a scalar input yields a
    length-n vector.
    """
    if n < 1:
        raise ValueError("array size must be positive")
    theta = np.asarray(theta, dtype=float)
    phases = 1j * np.pi * np.sin(theta)[..., np.newaxis] * np.arange(n)
    return np.exp(phases) / np.sqrt(n)


def sample_angles(
    params: ChannelParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one (departure, arrival) angle set, shape (n_clusters, n_rays).

    Cluster means are uniform on [0, 2*pi); ray offsets are Laplacian
    with standard deviation equal to the configured angular spread.
    Departure and arrival angles are independent.
    """
    shape = (params.n_clusters, params.n_rays)
    # Laplace(scale=b) has std b*sqrt(2), so divide the target std out.
    scale = params.angle_spread_rad / np.sqrt(2.0)
    aod = rng.uniform(0.0, 2.0 * np.pi, params.n_clusters)[:, None]
    aod = aod + rng.laplace(0.0, scale, shape)
    aoa = rng.uniform(0.0, 2.0 * np.pi, params.n_clusters)[:, None]
    aoa = aoa + rng.laplace(0.0, scale, shape)
    return aod, aoa


def generate_channel(params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Sample one n_rx-by-n_tx channel realization.

    H = sqrt(n_tx * n_rx / n_paths) * sum_l xi_l * a_rx(aoa_l) * a_tx(aod_l)^H
    with xi_l ~ CN(0, 1), which gives E||H||_F^2 = n_tx * n_rx.
    """
    aod, aoa = sample_angles(params, rng)
    n_paths = params.n_paths
    gains = (
        rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)
    ) / np.sqrt(2.0)
    # (n_paths, n) response matrices; transpose puts antennas first.
    a_tx = array_response(aod.ravel(), params.n_tx)
    a_rx = array_response(aoa.ravel(), params.n_rx)
    scale = np.sqrt(params.n_tx * params.n_rx / n_paths)
    return scale * (a_rx.T * gains) @ a_tx.conj()


def _write_record(fh: BinaryIO, seed: int, h: np.ndarray) -> None:
    fh.write(struct.pack("<Q", seed))
    interleaved = np.empty(2 * h.size, dtype="<f8")
    flat = np.ascontiguousarray(h, dtype=np.complex128).ravel()
    interleaved[0::2] = flat.real
    interleaved[1::2] = flat.imag
    fh.write(interleaved.tobytes())


def write_channel_dump(
    path: str, params: ChannelParams, records: Iterable[tuple[int, np.ndarray]]
) -> int:
    """Write channel realizations to a binary dump, returning the count.

    Layout: magic, version, JSON-encoded params, then one record per
    realization holding the seed (uint64) and H as interleaved
    real/imag little-endian float64 in row-major order.
    """
    header = json.dumps(asdict(params), sort_keys=True).encode()
    count = 0
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<II", _DUMP_VERSION, len(header)))
        fh.write(header)
        for seed, h in records:
            if h.shape != (params.n_rx, params.n_tx):
                raise ValueError(f"record shape {h.shape} does not match params")
            _write_record(fh, int(seed), h)
            count += 1
    return count


def read_channel_dump(path: str) -> tuple[ChannelParams, list[tuple[int, np.ndarray]]]:
    """Read a channel dump written by write_channel_dump."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DUMP_MAGIC:
            raise ValueError(f"not a channel dump: bad magic {magic!r}")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != _DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        params = ChannelParams(**json.loads(fh.read(header_len)))
        record_floats = 2 * params.n_rx * params.n_tx
        record_bytes = 8 + 8 * record_floats
        records = []
        while True:
            raw = fh.read(record_bytes)
            if not raw:
                break
            if len(raw) != record_bytes:
                raise ValueError("truncated channel dump record")
            (seed,) = struct.unpack_from("<Q", raw)
            data = np.frombuffer(raw, dtype="<f8", offset=8)
            h = data[0::2] + 1j * data[1::2]
            records.append((seed, h.reshape(params.n_rx, params.n_tx)))
    return params, records


def iter_channel_dump(path: str) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (seed, H) records one at a time without loading the file."""
    _, records = read_channel_dump(path)
    yield from records
