"""Square M-QAM constellations with Gray bit labeling.

Points are normalised to unit average power and ordered deterministically
(row-major over the in-phase/quadrature level grid), so symbol indices are
stable across runs and platforms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SUPPORTED = (4, 16, 64)


def _gray(i: int) -> int:
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    order: int
    points: np.ndarray          # (M,) complex, unit average power
    bit_labels: np.ndarray      # (M, log2 M) uint8, Gray-coded
    bits_per_symbol: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bits_per_symbol", int(np.log2(self.order)))

    def bits_of(self, indices: np.ndarray) -> np.ndarray:
        """Bit rows for an array of symbol indices (appends a bits axis)."""
        return self.bit_labels[np.asarray(indices)]

    def symbols_of(self, indices: np.ndarray) -> np.ndarray:
        return self.points[np.asarray(indices)]


def qam_constellation(order: int) -> Constellation:
    """Unit-average-power square QAM with per-axis Gray labels.

    Index layout: ``index = i_re * sqrt(M) + i_im`` over amplitude levels
    ``2*i - (sqrt(M)-1)``; the label is the Gray code of ``i_re`` followed by
    the Gray code of ``i_im``, so axis-adjacent points differ in exactly one
    bit.
    """
    if order not in _SUPPORTED:
        raise ValueError(f"unsupported QAM order {order}; expected one of {_SUPPORTED}")
    side = int(np.sqrt(order))
    bits_per_axis = int(np.log2(side))
    levels = 2.0 * np.arange(side) - (side - 1)
    norm = np.sqrt(2.0 * (order - 1) / 3.0)

    points = np.empty(order, dtype=np.complex128)
    labels = np.zeros((order, 2 * bits_per_axis), dtype=np.uint8)
    for i_re in range(side):
        g_re = _gray(i_re)
        for i_im in range(side):
            idx = i_re * side + i_im
            points[idx] = (levels[i_re] + 1j * levels[i_im]) / norm
            g_im = _gray(i_im)
            for b in range(bits_per_axis):
                labels[idx, b] = (g_re >> (bits_per_axis - 1 - b)) & 1
                labels[idx, bits_per_axis + b] = (g_im >> (bits_per_axis - 1 - b)) & 1
    return Constellation(order=order, points=points, bit_labels=labels)


def nearest_symbol(x, constellation: Constellation) -> np.ndarray:
    """Index of the closest constellation point; ties go to the lowest index.

    Accepts a scalar or an array of complex values; returns matching-shape
    integer indices.
    """
    arr = np.asarray(x, dtype=np.complex128)
    if not np.isfinite(arr.view(np.float64)).all():
        raise ValueError("nearest_symbol requires finite inputs")
    d = np.abs(arr[..., None] - constellation.points)
    idx = np.argmin(d, axis=-1)
    return idx if arr.ndim else int(idx)


def bit_error_rate(true_bits: np.ndarray, est_bits: np.ndarray) -> float:
    """Hamming distance over total bit count."""
    a = np.asarray(true_bits)
    b = np.asarray(est_bits)
    if a.shape != b.shape:
        raise ValueError(f"bit array shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty bit arrays")
    return float(np.count_nonzero(a != b) / a.size)
