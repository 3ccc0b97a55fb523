"""Complex matrix helpers shared by the signal model and the detectors.

Complex matrices are plain ``numpy`` arrays of dtype complex128 in dense
row-major layout; these wrappers add the argument checks the rest of the
package relies on.
"""
from __future__ import annotations

import numpy as np

from atomicmimo.rng import RngState


def sample_complex_gaussian(rng: RngState, rows: int, cols: int, variance: float) -> np.ndarray:
    """Draw an i.i.d. circularly-symmetric complex Gaussian matrix.

    Each entry has E|x|^2 = ``variance`` (real and imaginary parts carry half
    the variance each).  ``variance=0`` returns exact zeros.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    if rows < 0 or cols < 0:
        raise ValueError("matrix dimensions must be nonnegative")
    if variance == 0.0:
        return np.zeros((rows, cols), dtype=np.complex128)
    scale = np.sqrt(variance / 2.0)
    parts = rng.normal((2, rows, cols), scale=scale)
    return parts[0] + 1j * parts[1]


def complex_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Complex matrix product with explicit shape validation."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"expected 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions do not match: {a.shape} @ {b.shape}")
    return a @ b


def frobenius(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x).ravel()))
