"""Channels, reference fields, and magnitude-only measurements.

A coherence block is described by a :class:`ChannelScene`: the effective
channel ``H`` (N x K), the effective local-oscillator vector ``r`` and the
per-antenna complex noise variance.  Raw measurements are entrywise
magnitudes ``y = |H s + r + w|``; the receiver knows ``|r|`` and forms the
linearised measurement ``y - |r|``, which for a strong reference approximates
``Re{D H s}`` with ``D = diag(exp(-j*angle(r)))``.

All generation is pure given an :class:`~atomicmimo.rng.RngState`; scenes and
blocks are immutable, so Monte Carlo trials parallelise by RNG splitting.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from atomicmimo.constellation import Constellation
from atomicmimo.numerics import sample_complex_gaussian
from atomicmimo.rng import RngState


@dataclass(frozen=True)
class MultipathSpec:
    """Per-user multipath description: ``h = sum_l rho_l * exp(j*phi_l)``.

    ``gains``/``phases``, when given, fix every path deterministically;
    otherwise gains are Rayleigh with mean-square ``1/num_paths`` each (unit
    average channel power) and phases are uniform on [0, 2*pi).
    """

    num_paths: int
    gains: Optional[Sequence[float]] = None
    phases: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.num_paths < 1:
            raise ValueError("num_paths must be >= 1")
        for name in ("gains", "phases"):
            v = getattr(self, name)
            if v is not None and len(v) != self.num_paths:
                raise ValueError(f"{name} must list one value per path")
        if self.gains is not None and np.any(np.asarray(self.gains) < 0):
            raise ValueError("path gains must be nonnegative")


@dataclass(frozen=True)
class ChannelScene:
    """Ground truth for one coherence block."""

    H: np.ndarray            # (N, K) complex effective channel
    r: np.ndarray            # (N,) complex effective LO contribution
    noise_var: float         # per-antenna complex noise variance (sigma^2)

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise variance must be >= 0")
        if not np.isfinite(self.H.view(np.float64)).all():
            raise ValueError("channel matrix must be finite")

    @property
    def n_antennas(self) -> int:
        return self.H.shape[0]

    @property
    def n_users(self) -> int:
        return self.H.shape[1]

    @property
    def ref_abs(self) -> np.ndarray:
        """|r|, known at the receiver."""
        return np.abs(self.r)

    @property
    def ref_phase_conj(self) -> np.ndarray:
        """Diagonal of D = diag(exp(-j*angle(r))); unit modulus per entry."""
        return np.exp(-1j * np.angle(self.r))


@dataclass(frozen=True)
class PilotBlock:
    """Known pilot symbols with their raw and linearised measurements."""

    symbols: np.ndarray        # (K, P) complex pilot matrix Phi
    symbol_indices: np.ndarray  # (K, P) constellation indices
    bits: np.ndarray           # (K, P, bits_per_symbol) ground-truth bits
    raw: np.ndarray            # (N, P) nonnegative magnitudes Z
    linearized: np.ndarray     # (N, P) Z - |r| per column

    @property
    def n_pilots(self) -> int:
        return self.symbols.shape[1]


@dataclass(frozen=True)
class DataFrame:
    """Unknown data symbols with their measurements (detector input)."""

    symbols: np.ndarray        # (K, Q)
    symbol_indices: np.ndarray
    bits: np.ndarray           # (K, Q, bits_per_symbol)
    raw: np.ndarray            # (N, Q)
    linearized: np.ndarray     # (N, Q)

    @property
    def n_frames(self) -> int:
        return self.symbols.shape[1]


def synthesize_channel_iid(rng: RngState, n_antennas: int, n_users: int, variance: float = 1.0) -> np.ndarray:
    """i.i.d. circularly-symmetric Gaussian channel entries."""
    return sample_complex_gaussian(rng, n_antennas, n_users, variance)


def synthesize_channel_multipath(
    rng: RngState, n_antennas: int, n_users: int, spec: MultipathSpec
) -> np.ndarray:
    """Sum of per-path phasors, independently per antenna/user entry."""
    L = spec.num_paths
    shape = (n_antennas, n_users, L)
    if spec.gains is not None:
        rho = np.broadcast_to(np.asarray(spec.gains, dtype=np.float64), shape)
    else:
        # Rayleigh with E[rho^2] = 1/L so that E|h|^2 = 1
        u = rng.uniform(shape=shape)
        rho = np.sqrt(-np.log(np.maximum(u, np.finfo(np.float64).tiny)) / L)
    if spec.phases is not None:
        phi = np.broadcast_to(np.asarray(spec.phases, dtype=np.float64), shape)
    else:
        phi = rng.uniform(0.0, 2.0 * np.pi, shape=shape)
    return np.sum(rho * np.exp(1j * phi), axis=-1)


def make_reference(rng: RngState, n_antennas: int, lo_gain_db: float, n_users: int) -> np.ndarray:
    """Local-oscillator vector: fixed magnitude, i.i.d. uniform phases.

    The magnitude ``sqrt(K) * 10^(lo_gain_db/20)`` scales the reference
    against the total per-antenna signal amplitude (K unit-power users over a
    unit-variance channel carry power K).
    """
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    amp = np.sqrt(n_users) * 10.0 ** (lo_gain_db / 20.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, shape=n_antennas)
    return amp * np.exp(1j * phases)


def measure(scene: ChannelScene, s: np.ndarray, rng: RngState):
    """One magnitude-only measurement ``y = |H s + r + w|``.

    Returns ``(y, w)``; the drawn noise is handed back so tests can replay
    the measurement deterministically.
    """
    s = np.asarray(s, dtype=np.complex128)
    w = sample_complex_gaussian(rng, scene.n_antennas, 1, scene.noise_var)[:, 0]
    y = np.abs(scene.H @ s + scene.r + w)
    return y, w


def linearize(y: np.ndarray, scene: ChannelScene) -> np.ndarray:
    """Receiver-side strong-reference linearisation: subtract the known |r|.

    Columns of a matrix ``y`` are linearised independently.
    """
    y = np.asarray(y)
    if y.ndim == 1:
        return y - scene.ref_abs
    return y - scene.ref_abs[:, None]


def draw_symbol_block(rng: RngState, constellation: Constellation, n_users: int, count: int):
    """Uniform i.i.d. symbol draws; returns (indices, symbols, bits)."""
    idx = rng.integers(0, constellation.order, shape=(n_users, count))
    return idx, constellation.symbols_of(idx), constellation.bits_of(idx)


def _measure_block(scene: ChannelScene, symbols: np.ndarray, rng: RngState):
    cols = [measure(scene, symbols[:, p], rng)[0] for p in range(symbols.shape[1])]
    return np.stack(cols, axis=1)


def gen_pilot_block(
    scene: ChannelScene, constellation: Constellation, n_pilots: int, rng: RngState
) -> PilotBlock:
    """Pilot symbols uniform over the alphabet, independent noise per pilot."""
    if n_pilots < 1:
        raise ValueError("n_pilots must be >= 1")
    idx, sym, bits = draw_symbol_block(rng, constellation, scene.n_users, n_pilots)
    raw = _measure_block(scene, sym, rng)
    return PilotBlock(symbols=sym, symbol_indices=idx, bits=bits, raw=raw,
                      linearized=linearize(raw, scene))


def gen_data_frame(
    scene: ChannelScene, constellation: Constellation, n_frames: int, rng: RngState
) -> DataFrame:
    """Data symbol vectors under the same coherence block."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    idx, sym, bits = draw_symbol_block(rng, constellation, scene.n_users, n_frames)
    raw = _measure_block(scene, sym, rng)
    return DataFrame(symbols=sym, symbol_indices=idx, bits=bits, raw=raw,
                     linearized=linearize(raw, scene))
