"""Minimal two's-complement fixed-point support.

Scalars use :class:`QFixed`; streams stay as integer numpy arrays with the
format carried alongside.  Rounding is half-away-from-zero everywhere and
overflow always saturates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def int_range(width: int) -> tuple[int, int]:
    return -(1 << (width - 1)), (1 << (width - 1)) - 1


def saturate(x, width: int):
    """Clamp integers (scalar or array) into the signed ``width``-bit range."""
    lo, hi = int_range(width)
    if isinstance(x, np.ndarray):
        return np.clip(x, lo, hi)
    return min(max(int(x), lo), hi)


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    if isinstance(x, np.ndarray):
        return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)
    return int(np.sign(x) * np.floor(abs(x) + 0.5))


def round_shift(x, shift: int):
    """Exact integer ``x / 2**shift`` rounded half away from zero."""
    if shift <= 0:
        return x << -shift if not isinstance(x, np.ndarray) else x * (1 << -shift)
    half = 1 << (shift - 1)
    if isinstance(x, np.ndarray):
        mag = (np.abs(x) + half) >> shift
        return np.where(x < 0, -mag, mag)
    mag = (abs(x) + half) >> shift
    return -mag if x < 0 else mag


@dataclass(frozen=True)
class QFixed:
    """Signed fixed-point number: ``value = mantissa / 2**frac_bits``."""

    mantissa: int
    frac_bits: int
    width: int = 16

    def __post_init__(self):
        lo, hi = int_range(self.width)
        if not lo <= self.mantissa <= hi:
            raise OverflowError(f"mantissa {self.mantissa} does not fit in {self.width} bits")

    @classmethod
    def from_float(cls, value: float, frac_bits: int, width: int = 16, saturating: bool = True) -> "QFixed":
        m = round_half_away(value * (1 << frac_bits))
        if saturating:
            m = saturate(m, width)
        return cls(m, frac_bits, width)

    @classmethod
    def saturated(cls, mantissa: int, frac_bits: int, width: int = 16) -> "QFixed":
        return cls(saturate(mantissa, width), frac_bits, width)

    @property
    def value(self) -> float:
        return self.mantissa / (1 << self.frac_bits) if self.frac_bits >= 0 else self.mantissa * (1 << -self.frac_bits)

    def __neg__(self) -> "QFixed":
        # -(most negative) has no representation; clamp to the most positive
        return QFixed.saturated(-self.mantissa, self.frac_bits, self.width)

    def __float__(self) -> float:
        return self.value

    def __int__(self) -> int:
        return self.mantissa
