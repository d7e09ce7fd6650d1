"""Narrowband geometric MIMO channels, DFT codebooks and beam sweeps.

The channel for a ray set is sqrt(Nt*Nr) * sum_l gain_l * a_rx a_tx^H with
unit-norm planar-array steering vectors on both sides. Beam pairs are scanned
exhaustively and indexed as transmit_beam * n_rx_beams + receive_beam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .raytrace import Ray

UNKNOWN_CLASS = 0  # label assigned to raw keys never seen while fitting


@dataclass(frozen=True)
class ArraySpec:
    """Uniform planar array in the x-y plane: nx by ny elements."""

    nx: int
    ny: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError("array dimensions must be at least 1")

    @property
    def size(self) -> int:
        return self.nx * self.ny


@dataclass(frozen=True)
class SweepResult:
    outputs: np.ndarray  # complex, one entry per beam pair
    best_index: int
    best_pair: tuple[int, int]  # (transmit beam, receive beam)


def upa_steering(azimuth: float, elevation: float, spec: ArraySpec) -> np.ndarray:
    """Unit-norm steering vector for a plane wave from (azimuth, elevation).

    Element (m, n) carries phase 2*pi*spacing*(m*u + n*v) with direction
    cosines u = sin(el)cos(az), v = sin(el)sin(az); elements are flattened
    row-major so index m*ny + n matches the DFT codebook layout.
    """
    u = math.sin(elevation) * math.cos(azimuth)
    v = math.sin(elevation) * math.sin(azimuth)
    m = np.arange(spec.nx)[:, None]
    n = np.arange(spec.ny)[None, :]
    phase = 2.0 * math.pi * spec.spacing_wavelengths * (m * u + n * v)
    return (np.exp(1j * phase) / math.sqrt(spec.size)).reshape(-1)


def compose_channel(rays: Sequence[Ray], tx_spec: ArraySpec, rx_spec: ArraySpec) -> np.ndarray:
    """Sum of per-ray rank-one terms, scaled by sqrt(Nt*Nr); shape (Nr, Nt)."""
    if not rays:
        raise ValueError("cannot compose a channel from an empty ray list")
    h = np.zeros((rx_spec.size, tx_spec.size), dtype=complex)
    for ray in rays:
        a_rx = upa_steering(ray.arr_azimuth, ray.arr_elevation, rx_spec)
        a_tx = upa_steering(ray.dep_azimuth, ray.dep_elevation, tx_spec)
        h += ray.gain * np.outer(a_rx, a_tx.conj())
    return math.sqrt(tx_spec.size * rx_spec.size) * h


def dft_codebook(spec: ArraySpec) -> np.ndarray:
    """Kronecker product of the nx- and ny-point unitary DFT matrices.

    Columns are the beams: unit-norm and mutually orthogonal, with column 0
    the broadside (all-ones) beam.
    """

    def unitary_dft(n: int) -> np.ndarray:
        k = np.arange(n)
        return np.exp(-2j * math.pi * np.outer(k, k) / n) / math.sqrt(n)

    return np.kron(unitary_dft(spec.nx), unitary_dft(spec.ny))


def sweep(h: np.ndarray, tx_codebook: np.ndarray, rx_codebook: np.ndarray) -> SweepResult:
    """Evaluate w^H H f for every beam pair and pick the strongest.

    Pair (p, q) maps to index p * n_rx_beams + q; magnitude ties resolve to
    the smallest index.
    """
    if h.shape != (rx_codebook.shape[0], tx_codebook.shape[0]):
        raise ValueError(
            f"channel shape {h.shape} does not match codebooks "
            f"({rx_codebook.shape[0]} rx, {tx_codebook.shape[0]} tx elements)"
        )
    per_pair = rx_codebook.conj().T @ h @ tx_codebook  # [receive beam, transmit beam]
    outputs = per_pair.T.reshape(-1)
    best = int(np.argmax(np.abs(outputs)))
    n_rx_beams = rx_codebook.shape[1]
    return SweepResult(outputs=outputs, best_index=best, best_pair=(best // n_rx_beams, best % n_rx_beams))


def pair_index(p: int, q: int, n_rx_beams: int, n_tx_beams: int | None = None) -> int:
    if q < 0 or q >= n_rx_beams:
        raise ValueError(f"receive beam {q} out of range [0, {n_rx_beams})")
    if p < 0 or (n_tx_beams is not None and p >= n_tx_beams):
        raise ValueError(f"transmit beam {p} out of range")
    return p * n_rx_beams + q


def pair_from_index(index: int, n_rx_beams: int, n_tx_beams: int | None = None) -> tuple[int, int]:
    if index < 0:
        raise ValueError("pair index must be non-negative")
    if n_tx_beams is not None and index >= n_tx_beams * n_rx_beams:
        raise ValueError(f"pair index {index} out of range")
    return index // n_rx_beams, index % n_rx_beams


def strongest_ray_angles(rays: Sequence[Ray]) -> tuple[float, float, float, float]:
    """Angles of the highest-amplitude ray; amplitude ties go to the earliest arrival."""
    if not rays:
        raise ValueError("empty ray list")
    best = min(rays, key=lambda r: (-abs(r.gain), r.delay))
    return (best.dep_azimuth, best.dep_elevation, best.arr_azimuth, best.arr_elevation)


def angle_ranges(
    angle_tuples: Iterable[tuple[float, float, float, float]]
) -> tuple[tuple[float, float], ...]:
    """Per-dimension (min, max) over a collection of 4-angle tuples."""
    arr = np.array(list(angle_tuples), dtype=float)
    if arr.size == 0:
        raise ValueError("no angle tuples given")
    return tuple((float(lo), float(hi)) for lo, hi in zip(arr.min(axis=0), arr.max(axis=0)))


def quantize_angles(
    angles: Sequence[float],
    n_bins: int,
    ranges: Sequence[tuple[float, float]],
) -> tuple[int, ...]:
    """Uniform scalar quantization per dimension, clamping to the edge bins."""
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    if len(angles) != len(ranges):
        raise ValueError("angles and ranges must have the same length")
    out = []
    for value, (lo, hi) in zip(angles, ranges):
        if lo >= hi:
            raise ValueError(f"invalid range ({lo}, {hi})")
        width = (hi - lo) / n_bins
        out.append(max(0, min(n_bins - 1, int(math.floor((value - lo) / width)))))
    return tuple(out)


@dataclass(frozen=True)
class LabelMap:
    """Bijection between the raw keys seen at fit time and classes 1..M.

    Keys never seen while fitting map to the reserved class 0.
    """

    ordered_keys: tuple[Hashable, ...]

    def __post_init__(self) -> None:
        index = {key: i + 1 for i, key in enumerate(self.ordered_keys)}
        if len(index) != len(self.ordered_keys):
            raise ValueError("duplicate keys in label map")
        object.__setattr__(self, "_index", index)

    @property
    def num_classes(self) -> int:
        return len(self.ordered_keys)

    def apply(self, key: Hashable) -> int:
        return self._index.get(key, UNKNOWN_CLASS)

    def key_for(self, label: int) -> Hashable:
        if not 1 <= label <= self.num_classes:
            raise ValueError(f"label {label} out of range 1..{self.num_classes}")
        return self.ordered_keys[label - 1]


def compact_labels(raw_keys: Iterable[Hashable]) -> LabelMap:
    """Assign classes 1..M to the distinct keys, in canonical sorted order."""
    keys = sorted(set(raw_keys))
    if not keys:
        raise ValueError("no raw keys to compact")
    return LabelMap(tuple(keys))


def one_hot(label: int, num_classes: int) -> np.ndarray:
    """Indicator vector over classes 0..num_classes (slot 0 is the unknown class)."""
    if not 0 <= label <= num_classes:
        raise ValueError(f"label {label} out of range 0..{num_classes}")
    out = np.zeros(num_classes + 1, dtype=np.int8)
    out[label] = 1
    return out
