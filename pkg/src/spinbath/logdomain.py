"""Complex numbers stored as (log magnitude, phase).

Products of up to 10^9 factors of modulus below one underflow any float, so
kernels accumulate ``Σ ln|z_j|`` and ``Σ arg z_j`` instead and only
materialize linear values on request.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Particles per partial sum. Partial sums are formed in this fixed blocking
# no matter how the caller splits the ensemble, so totals are bit-stable.
REDUCE_BLOCK = 4096


def wrap_phase(phase):
    """Reduce to [0, 2π)."""
    out = np.mod(phase, TWO_PI)
    # np.mod can return exactly 2π for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True, eq=False)
class LogComplex:
    """``exp(log_mag + i·phase)``; ``log_mag = -inf`` encodes zero.

    Both fields may be numpy arrays of a common shape.
    """

    log_mag: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        lm = np.asarray(self.log_mag, dtype=float)
        ph = wrap_phase(np.asarray(self.phase, dtype=float))
        ph = np.where(np.isneginf(lm), 0.0, ph)
        object.__setattr__(self, "log_mag", lm)
        object.__setattr__(self, "phase", ph)

    @classmethod
    def one(cls, shape=()):
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_complex(cls, z) -> "LogComplex":
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore"):
            return cls(np.log(np.abs(z)), np.angle(z))

    @property
    def shape(self):
        return self.log_mag.shape

    def value(self) -> np.ndarray:
        """Linear complex value; magnitudes below the float range become 0."""
        return np.exp(self.log_mag) * np.exp(1j * self.phase)

    def abs2_log(self) -> np.ndarray:
        return 2.0 * self.log_mag

    def conj(self) -> "LogComplex":
        return LogComplex(self.log_mag, -self.phase)

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex(self.log_mag + other.log_mag, self.phase + other.phase)

    def __pow__(self, k: float) -> "LogComplex":
        with np.errstate(invalid="ignore"):
            lm = np.where(np.isneginf(self.log_mag) & (k > 0), -np.inf, self.log_mag * k)
        return LogComplex(lm, self.phase * k)

    def __getitem__(self, idx) -> "LogComplex":
        return LogComplex(self.log_mag[idx], self.phase[idx])


def block_sums(x: np.ndarray, wrap: bool = False) -> np.ndarray:
    """Sum the last axis in consecutive blocks of ``REDUCE_BLOCK``."""
    n = x.shape[-1]
    starts = np.arange(0, n, REDUCE_BLOCK)
    out = np.add.reduceat(x, starts, axis=-1)
    return wrap_phase(out) if wrap else out
