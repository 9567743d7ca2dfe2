"""Finite-level quantizer and the paired difference encoder/decoder.

A channel carries one vector stream (an agent's aggregate tracker or gradient
tracker). The sender quantizes the difference between the current value and a
running reconstruction, scaled by a geometrically decaying factor l(k); the
receiver applies the same integer code to an identical reconstruction. Both
sides therefore hold bit-identical state at every step, and while the
quantizer never saturates the reconstruction error per coordinate is at most
l(k)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, InvalidValueError, ProtocolError, SaturationError


@dataclass(frozen=True)
class UniformQuantizer:
    """Symmetric (2L+1)-level uniform quantizer with saturation at +-L."""

    levels_L: int

    def __post_init__(self):
        if self.levels_L < 1:
            raise ConfigError("levels_L must be a positive integer")
        # codes and l(k)*code products must stay exact in float64
        if self.levels_L > 2**53:
            raise ConfigError(
                "levels_L exceeds the exact float64 integer range; increase l0"
            )


def quantize_scalar(q: UniformQuantizer, x: float) -> int:
    """Map x to the nearest level index: 0 on [-1/2, 1/2], i on ((2i-1)/2, (2i+1)/2],
    clamped to +-L outside.
    """
    if math.isnan(x) or math.isinf(x):
        raise InvalidValueError(f"quantizer input must be finite, got {x!r}")
    a = abs(x)
    if a <= 0.5:
        return 0
    mag = min(float(q.levels_L), math.ceil(a - 0.5))
    return int(math.copysign(mag, x))


def quantize_vector(q: UniformQuantizer, v) -> np.ndarray:
    """Componentwise quantize_scalar over a float vector."""
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise InvalidValueError("quantizer input must be finite")
    codes = np.empty(arr.shape[0], dtype=np.int64)
    _kernels.quantize_block(arr, q.levels_L, codes)
    return codes


def bits_per_scalar(L: int) -> int:
    """Bits to address the 2L nonzero levels: ceil(log2(2L))."""
    if L < 1:
        raise ConfigError("L must be >= 1")
    # (m-1).bit_length() == ceil(log2(m)) for m >= 2, exact in integers
    return (2 * L - 1).bit_length()


@dataclass(frozen=True)
class ScalingSchedule:
    """Geometric scale sequence l(k) = l0 * gamma**k."""

    l0: float
    gamma: float

    def __post_init__(self):
        if not (self.l0 > 0):
            raise ConfigError("l0 must be positive")
        if not (0 < self.gamma < 1):
            raise ConfigError("gamma must lie in (0, 1)")

    def at(self, k: int) -> float:
        # recomputed from k, never cumulative, so encoder and decoder cannot drift
        l = self.l0 * self.gamma**k
        if l == 0.0:
            raise ConfigError(
                f"scale underflowed to zero at round {k}; increase l0 or gamma"
            )
        return l


@dataclass
class ChannelCodec:
    """One directional channel: quantizer, schedule, and running reconstruction.

    The same object serves as the sender's mirror and (replayed) as the
    receiver's decoder; encode() applies the decoder update to its own state so
    the two stay bit-identical by construction.
    """

    quantizer: UniformQuantizer
    schedule: ScalingSchedule
    dim: int
    strict: bool = False
    recon: np.ndarray = field(init=False)
    step: int = field(default=0, init=False)
    saturation_count: int = field(default=0, init=False)
    bits_sent: int = field(default=0, init=False)
    # same stream costed with zero codes free of charge (diagnostic only)
    bits_sent_zero_free: int = field(default=0, init=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("channel dimension must be positive")
        self.recon = np.zeros(self.dim, dtype=np.float64)

    def encode(self, value_now) -> np.ndarray:
        """Quantize (value - recon)/l(step), update the mirror, advance the step."""
        value = np.ascontiguousarray(value_now, dtype=np.float64)
        if value.shape != (self.dim,):
            raise InvalidValueError(f"expected shape ({self.dim},), got {value.shape}")
        if not np.isfinite(value).all():
            raise InvalidValueError("encoder input must be finite")
        l = self.schedule.at(self.step)
        scaled = (value - self.recon) / l
        codes = np.empty(self.dim, dtype=np.int64)
        nsat = _kernels.quantize_block(scaled, self.quantizer.levels_L, codes)
        if nsat and self.strict:
            raise SaturationError(self.step, nsat)
        self.saturation_count += nsat
        per = bits_per_scalar(self.quantizer.levels_L)
        self.bits_sent += self.dim * per
        self.bits_sent_zero_free += int(np.count_nonzero(codes)) * per
        self.recon = self.recon + l * codes.astype(np.float64)
        self.step += 1
        return codes

    def decode(self, code) -> np.ndarray:
        """Apply a received code to the reconstruction; returns the new recon."""
        codes = np.asarray(code, dtype=np.int64)
        if codes.shape != (self.dim,):
            raise ProtocolError(f"expected code shape ({self.dim},), got {codes.shape}")
        L = self.quantizer.levels_L
        if (np.abs(codes) > L).any():
            raise ProtocolError("code outside [-L, L]: encoder/decoder desync")
        l = self.schedule.at(self.step)
        self.recon = self.recon + l * codes.astype(np.float64)
        self.step += 1
        return self.recon
