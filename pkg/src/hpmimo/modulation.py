"""Unit-energy constellations with Gray bit labels.

Two families are supported: square QAM with independent Gray coding
per quadrature axis, and ring/phase QAM ("PQAM") that places gamma
amplitude rings at odd-integer spacing and m/gamma phases per ring,
Gray coded separately on the ring bits and the phase bits.  All
constellations are normalized to unit average symbol energy.

Symbol indices equal the packed bit label (MSB first), so the Gray
structure lives in the geometric placement, not in the index order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Constellation:
    """An indexed symbol set; points[i] carries the bit label i."""

    kind: str
    order: int
    n_rings: int
    points: np.ndarray
    ring_index: np.ndarray
    phase_index: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def label(self) -> str:
        return f"{self.order}{self.kind}"


@dataclass(frozen=True)
class PolarGeometry:
    """Ring gaps and per-ring phase gaps of a constellation.

    delta_rho holds the radial distances between consecutive rings.
    delta_theta holds the full angular gaps between phase-adjacent
    symbols, one entry per distinct gap, smallest first within a ring.
    """

    delta_rho: np.ndarray
    delta_theta: np.ndarray


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _gray_inverse(g: np.ndarray) -> np.ndarray:
    """Invert the binary-reflected Gray code elementwise."""
    g = np.asarray(g, dtype=np.int64)
    n = g.copy()
    shift = g >> 1
    while shift.any():
        n ^= shift
        shift >>= 1
    return n


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def build_qam(order: int) -> Constellation:
    """Square QAM on the odd-integer grid, Gray coded per axis.

    The first half of the bit label selects the in-phase level and the
    second half the quadrature level, each through a Gray code, so any
    two grid neighbors differ in exactly one bit.  Levels are scaled
    for unit average energy; 4-QAM lands on (+-1 +- 1j)/sqrt(2), the
    same point set as one ring of four phases rotated by pi/4.
    """
    side = int(round(np.sqrt(order)))
    if side * side != order or not _is_power_of_two(side) or order < 4:
        raise ValueError(f"square QAM order must be an even power of 2, got {order}")
    bits_axis = int(np.log2(side))
    scale = 1.0 / np.sqrt(2.0 * (order - 1) / 3.0)
    levels = (2.0 * np.arange(side) - (side - 1)) * scale

    index = np.arange(order)
    i_field = index >> bits_axis
    q_field = index & (side - 1)
    i_level = levels[_gray_inverse(i_field)]
    q_level = levels[_gray_inverse(q_field)]
    points = i_level + 1j * q_level

    ring_index, phase_index = _polar_indices(points)
    return Constellation(
        kind="qam",
        order=order,
        n_rings=int(ring_index.max()) + 1,
        points=points,
        ring_index=ring_index,
        phase_index=phase_index,
    )


def build_pqam(order: int, n_rings: int) -> Constellation:
    """Ring/phase QAM: n_rings amplitude rings, order/n_rings phases.

    Ring radii are proportional to 1, 3, ..., 2*n_rings - 1 and scaled
    for unit average energy, which makes every radial gap equal to
    2/sqrt((4*n_rings**2 - 1)/3).  All rings share one phase grid
    starting at angle zero (no per-ring stagger).  The label splits
    into ring bits (MSBs) and phase bits (LSBs), each Gray coded.
    """
    if not _is_power_of_two(order) or order < 2:
        raise ValueError(f"order must be a power of 2, got {order}")
    if not _is_power_of_two(n_rings) or order % n_rings != 0:
        raise ValueError(f"ring count {n_rings} must be a power of 2 dividing {order}")
    n_phases = order // n_rings
    if n_rings > order // 2 and n_rings != order:
        raise ValueError("ring count above order/2 is only valid at order itself")

    radii = (2.0 * np.arange(n_rings) + 1.0) / np.sqrt((4.0 * n_rings**2 - 1.0) / 3.0)
    phase_bits = int(np.log2(n_phases)) if n_phases > 1 else 0

    index = np.arange(order)
    ring_field = index >> phase_bits
    phase_field = index & (n_phases - 1)
    ring = _gray_inverse(ring_field)
    slot = _gray_inverse(phase_field)
    points = radii[ring] * np.exp(2j * np.pi * slot / n_phases)

    return Constellation(
        kind="pqam",
        order=order,
        n_rings=n_rings,
        points=points,
        ring_index=ring,
        phase_index=slot,
    )


def _polar_indices(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank each point by radius and by angle within its ring."""
    radius = np.round(np.abs(points), 9)
    rings = np.unique(radius)
    ring_index = np.searchsorted(rings, radius)
    phase_index = np.zeros(points.size, dtype=np.int64)
    angles = np.mod(np.angle(points), 2.0 * np.pi)
    for r in range(rings.size):
        members = np.flatnonzero(ring_index == r)
        order = np.argsort(np.round(angles[members], 9), kind="stable")
        phase_index[members[order]] = np.arange(members.size)
    return ring_index.astype(np.int64), phase_index


def map_bits(constellation: Constellation, bits: np.ndarray) -> np.ndarray:
    """Pack bits MSB-first into symbol indices.

    The bit count must be a multiple of bits_per_symbol and every
    entry must be 0 or 1.
    """
    bits = np.asarray(bits)
    bps = constellation.bits_per_symbol
    if bits.ndim != 1 or bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} is not a multiple of {bps}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    groups = bits.astype(np.int64).reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    return groups @ weights


def demap_symbols(constellation: Constellation, indices: np.ndarray) -> np.ndarray:
    """Unpack symbol indices back into a flat MSB-first bit array."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= constellation.order):
        raise ValueError("symbol index out of range")
    bps = constellation.bits_per_symbol
    shifts = np.arange(bps - 1, -1, -1)
    return ((indices[:, None] >> shifts) & 1).ravel()


def polar_geometry(constellation: Constellation) -> PolarGeometry:
    """Measure ring gaps and angular decision gaps from the point set.

    For 16-QAM this yields radial gaps (1 - 1/sqrt(5), 3/sqrt(5) - 1)
    and angular gaps (pi/2, 2*atan(1/3), atan(3) - atan(1/3), pi/2)
    for the inner ring, the two middle-ring gaps, and the outer ring.
    """
    points = constellation.points
    radius = np.abs(points)
    keys = np.round(radius, 9)
    ring_keys = np.unique(keys)
    # The rounding only groups points; representatives are unrounded means.
    rings = np.array([radius[keys == k].mean() for k in ring_keys])
    delta_rho = np.diff(rings)

    angles = np.mod(np.angle(points), 2.0 * np.pi)
    gaps: list[float] = []
    for k in ring_keys:
        members = np.sort(angles[keys == k])
        if members.size < 2:
            continue
        ring_gaps = np.diff(np.append(members, members[0] + 2.0 * np.pi))
        gap_keys = np.round(ring_gaps, 9)
        for g in np.unique(gap_keys):
            gaps.append(float(ring_gaps[gap_keys == g].mean()))
    return PolarGeometry(delta_rho=delta_rho, delta_theta=np.asarray(gaps))


def average_energy(constellation: Constellation) -> float:
    """Mean squared symbol magnitude; unity by construction."""
    return float(np.mean(np.abs(constellation.points) ** 2))
