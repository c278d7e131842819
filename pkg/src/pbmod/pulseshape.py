"""Raised-cosine pulse shaping with a multiplier-less distributed-arithmetic filter.

The interpolating filter is split into ``sps`` polyphase branches.  Branch
``p`` holds taps ``p, p+sps, p+2*sps, ...`` and sees the last ``taps/sps``
input symbols.  Each branch owns one LUT of all subset sums of its taps; the
DA filter forms a LUT address from one bit of every window word, shifts the
lookup by the bit weight and subtracts the sign-bit plane.

Symbol words are the 3-bit level codes from :mod:`pbmod.mapper` (full scale
+1.0 is the integer 3), coefficients are scaled by 4096, so an output
mantissa is in units of ``1 / (3 * 4096)`` of a unit-level, unit-peak pulse
before any output shift.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fixedpoint import QFixed, int_range, round_half_away, round_shift, saturate

ROLLOFFS = (0.22, 0.35, 0.5, 0.9)
NUM_TAPS = 32
SPS = 4
COEFF_FRAC_BITS = 12
COEFF_WIDTH = 16
SYMBOL_WORD_BITS = 3
OUTPUT_WIDTH = 16

_SINGULAR_TOL = 1e-9


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"roll-off factor must be in (0, 1], got {alpha}")


def rc_impulse(t, alpha: float) -> np.ndarray:
    """Raised-cosine response at ``t`` (in symbol periods), h(0) = 1."""
    _check_alpha(alpha)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    denom = 1.0 - (2.0 * alpha * t) ** 2
    singular = np.abs(denom) < _SINGULAR_TOL
    safe = np.where(singular, 0.0, denom)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.sinc(t) * np.cos(np.pi * alpha * t) / np.where(singular, 1.0, safe)
    # limit at t = +-1/(2 alpha)
    h[singular] = np.pi / 4 * np.sinc(1.0 / (2.0 * alpha))
    return h


def rrc_impulse(t, alpha: float) -> np.ndarray:
    """Root-raised-cosine response at ``t`` (in symbol periods), unnormalised."""
    _check_alpha(alpha)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = np.empty_like(t)
    at_zero = np.abs(t) < _SINGULAR_TOL
    at_pole = np.abs(np.abs(t) - 1.0 / (4.0 * alpha)) < _SINGULAR_TOL
    rest = ~(at_zero | at_pole)
    tr = t[rest]
    h[rest] = (np.sin(np.pi * tr * (1 - alpha)) + 4 * alpha * tr * np.cos(np.pi * tr * (1 + alpha))) / (
        np.pi * tr * (1 - (4 * alpha * tr) ** 2)
    )
    h[at_zero] = 1.0 - alpha + 4.0 * alpha / np.pi
    h[at_pole] = alpha / np.sqrt(2.0) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * alpha)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * alpha))
    )
    return h


def tap_times(taps: int, sps: int) -> np.ndarray:
    """Symmetric sampling instants in symbol periods; even ``taps`` straddle t=0."""
    return (np.arange(taps) - (taps - 1) / 2.0) / sps


def _sampled(fn, alpha: float, taps: int, sps: int) -> np.ndarray:
    _check_alpha(alpha)
    if taps < 2 or taps % 2:
        raise ValueError(f"tap count must be even and >= 2, got {taps}")
    if sps < 1:
        raise ValueError(f"samples per symbol must be >= 1, got {sps}")
    h = fn(tap_times(taps, sps), alpha)
    return h / np.max(np.abs(h))


def gen_rc_coeffs(alpha: float, taps: int = NUM_TAPS, sps: int = SPS) -> np.ndarray:
    return _sampled(rc_impulse, alpha, taps, sps)


def gen_rrc_coeffs(alpha: float, taps: int = NUM_TAPS, sps: int = SPS) -> np.ndarray:
    return _sampled(rrc_impulse, alpha, taps, sps)


def quantize_mantissas(real: Sequence[float], frac_bits: int = COEFF_FRAC_BITS, width: int = COEFF_WIDTH) -> np.ndarray:
    """``round(value * 2**frac_bits)`` half away from zero; raises on overflow."""
    m = round_half_away(np.asarray(real, dtype=float) * (1 << frac_bits))
    limit = 1 << (width - 1)
    over = np.flatnonzero(np.abs(m) >= limit)
    if over.size:
        k = int(over[0])
        raise OverflowError(f"coefficient {k} quantises to {int(m[k])}, outside {width}-bit range")
    return m.astype(np.int64)


def quantize_coeffs(real: Sequence[float], frac_bits: int = COEFF_FRAC_BITS, width: int = COEFF_WIDTH) -> list[QFixed]:
    return [QFixed(int(m), frac_bits, width) for m in quantize_mantissas(real, frac_bits, width)]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Coefficients, polyphase split and DA tables for one roll-off factor."""

    alpha: float
    taps: int
    sps: int
    real_coeffs: np.ndarray
    q_coeffs: tuple[QFixed, ...]
    phases: np.ndarray
    da_luts: np.ndarray | None = None
    shape: str = "rrc"
    word_bits: int = SYMBOL_WORD_BITS
    out_width: int = OUTPUT_WIDTH
    out_shift: int = 0
    frac_bits: int = COEFF_FRAC_BITS

    @classmethod
    def design(
        cls,
        alpha: float,
        taps: int = NUM_TAPS,
        sps: int = SPS,
        shape: str = "rrc",
        word_bits: int = SYMBOL_WORD_BITS,
        out_width: int = OUTPUT_WIDTH,
        out_shift: int = 0,
    ) -> "FilterBank":
        if shape not in ("rrc", "rc"):
            raise ValueError(f"unknown pulse shape {shape!r}")
        if taps % sps:
            raise ValueError(f"tap count {taps} is not a multiple of sps={sps}")
        real = gen_rrc_coeffs(alpha, taps, sps) if shape == "rrc" else gen_rc_coeffs(alpha, taps, sps)
        mant = quantize_mantissas(real)
        bank = cls(
            alpha=alpha,
            taps=taps,
            sps=sps,
            real_coeffs=_frozen(real),
            q_coeffs=tuple(QFixed(int(m), COEFF_FRAC_BITS, COEFF_WIDTH) for m in mant),
            phases=_frozen(polyphase(mant, sps)),
            shape=shape,
            word_bits=word_bits,
            out_width=out_width,
            out_shift=out_shift,
        )
        return build_da_luts(bank)

    @property
    def mantissas(self) -> np.ndarray:
        return np.array([c.mantissa for c in self.q_coeffs], dtype=np.int64)

    @property
    def branch_len(self) -> int:
        return self.taps // self.sps

    @property
    def out_frac_bits(self) -> int:
        return self.frac_bits - self.out_shift

    @cached_property
    def lut_rows(self) -> np.ndarray:
        """``da_luts`` transposed to (2**branch_len, sps) so one gather yields all phases."""
        if self.da_luts is None:
            raise ValueError("DA tables have not been built")
        return np.ascontiguousarray(self.da_luts.T, dtype=np.int32)

    def plane_luts(self) -> np.ndarray:
        """Per-plane weighted tables, shape (sps, word_bits, 2**branch_len).

        Plane ``b`` is the base table scaled by ``2**b``; the sign plane is
        negated, so a DA output is the plain sum of one entry per plane.
        """
        if self.da_luts is None:
            raise ValueError("DA tables have not been built")
        weights = np.array([1 << b for b in range(self.word_bits)], dtype=np.int64)
        weights[-1] = -weights[-1]
        return self.da_luts[:, None, :] * weights[None, :, None]


def polyphase(coeffs: np.ndarray, sps: int) -> np.ndarray:
    """Rows are branches: ``out[p, k] = coeffs[p + k*sps]``."""
    coeffs = np.asarray(coeffs)
    return coeffs.reshape(-1, sps).T.copy()


def build_da_luts(bank: FilterBank) -> FilterBank:
    """Fill ``da_luts[p, a]`` with the sum of branch-p taps selected by the bits of ``a``."""
    n = bank.branch_len
    addr = np.arange(1 << n)
    select = (addr[:, None] >> np.arange(n)[None, :]) & 1  # (2**n, n)
    luts = bank.phases @ select.T  # (sps, 2**n)
    return replace(bank, da_luts=_frozen(luts.astype(np.int64)))


def bank_for(alpha: float, taps: int = NUM_TAPS, sps: int = SPS, shape: str = "rrc") -> FilterBank:
    """Shared, immutable bank per design point."""
    return _cached_bank(float(alpha), int(taps), int(sps), shape)


@lru_cache(maxsize=None)
def _cached_bank(alpha: float, taps: int, sps: int, shape: str) -> FilterBank:
    return FilterBank.design(alpha, taps, sps, shape)


class SymbolWindow:
    """Newest-first history of the last ``length`` symbol words of one rail."""

    def __init__(self, length: int = NUM_TAPS // SPS, words: Sequence[int] | None = None):
        if words is None:
            words = [0] * length
        if len(words) != length:
            raise ValueError(f"window needs exactly {length} words, got {len(words)}")
        self.words = [int(w) for w in words]

    def push(self, word: int) -> None:
        self.words = [int(word)] + self.words[:-1]

    def __len__(self) -> int:
        return len(self.words)

    def __repr__(self) -> str:
        return f"SymbolWindow({self.words})"


def _check_words(words: np.ndarray, bits: int) -> None:
    lo, hi = int_range(bits)
    if words.size == 0 or (words.min() >= lo and words.max() <= hi):
        return
    bad = np.flatnonzero((words < lo) | (words > hi))
    raise ValueError(f"symbol word {int(words.flat[bad[0]])} does not fit in {bits} bits")


def _finish(acc, bank: FilterBank):
    acc = round_shift(acc, bank.out_shift)
    if isinstance(acc, np.ndarray):
        lo, hi = int_range(bank.out_width)
        # round_shift always hands back a fresh array, so clip in place
        return np.clip(acc, lo, hi, out=acc)
    return saturate(acc, bank.out_width)


def _to_qfixed(values, bank: FilterBank) -> tuple[QFixed, ...]:
    return tuple(QFixed(int(v), bank.out_frac_bits, bank.out_width) for v in values)


def filter_da(window: SymbolWindow, bank: FilterBank) -> tuple[QFixed, ...]:
    """One symbol's ``sps`` output samples by LUT lookups and shift-adds only."""
    words = np.asarray(window.words, dtype=np.int64)
    _check_words(words, bank.word_bits)
    out = []
    for p in range(bank.sps):
        acc = 0
        for b in range(bank.word_bits):
            addr = 0
            for k, w in enumerate(window.words):
                addr |= ((w >> b) & 1) << k
            part = int(bank.da_luts[p, addr]) << b
            acc += -part if b == bank.word_bits - 1 else part
        out.append(_finish(acc, bank))
    return _to_qfixed(out, bank)


def filter_direct(window: SymbolWindow, bank: FilterBank) -> tuple[QFixed, ...]:
    """Multiply-accumulate reference for :func:`filter_da`."""
    out = []
    for p in range(bank.sps):
        acc = sum(int(w) * int(c) for w, c in zip(window.words, bank.phases[p]))
        out.append(_finish(acc, bank))
    return _to_qfixed(out, bank)


# ---------------------------------------------------------------------------
# block forms: ``windows`` is (n, branch_len), newest word first


def _da_accumulate(plane_addresses, bank: FilterBank) -> np.ndarray:
    """Shift-accumulate LUT words for per-plane address vectors; sign plane subtracted."""
    lut_rows = bank.lut_rows
    acc = None
    for b, addr in enumerate(plane_addresses):
        # int32 is ample: |entry| < 2**18 for 16-bit taps and an 8-word branch
        part = lut_rows[addr] << b
        if acc is None:
            acc = part
        elif b == bank.word_bits - 1:
            acc -= part
        else:
            acc += part
    return _finish(acc, bank)


def filter_da_block(windows: np.ndarray, bank: FilterBank) -> np.ndarray:
    windows = np.asarray(windows, dtype=np.int64)
    _check_words(windows, bank.word_bits)
    place = 1 << np.arange(bank.branch_len, dtype=np.int64)
    return _da_accumulate((((windows >> b) & 1) @ place for b in range(bank.word_bits)), bank)


def _da_stream(words: np.ndarray, bank: FilterBank, history: np.ndarray | None) -> np.ndarray:
    """DA filtering of a word stream, forming addresses straight from the bit-plane shift register."""
    n_hist = bank.branch_len - 1
    if history is None:
        history = np.zeros(n_hist, dtype=np.int64)
    padded = np.concatenate([np.asarray(history, dtype=np.int64), words])
    _check_words(padded, bank.word_bits)
    n = words.size
    pattern = (padded & ((1 << bank.word_bits) - 1)).astype(np.uint16)

    def addresses(b):
        bits = (pattern >> b) & 1
        addr = np.zeros(n, dtype=np.uint16)
        for k in range(bank.branch_len):
            # window slot k (k = 0 newest) of output n is padded[n + n_hist - k]
            addr |= bits[n_hist - k : n_hist - k + n] << k
        return addr

    return _da_accumulate((addresses(b) for b in range(bank.word_bits)), bank)


def filter_direct_block(windows: np.ndarray, bank: FilterBank) -> np.ndarray:
    windows = np.asarray(windows, dtype=np.int64)
    return _finish(windows @ bank.phases.T, bank)


def sliding_windows(words: np.ndarray, history: np.ndarray | None = None, length: int = NUM_TAPS // SPS) -> np.ndarray:
    """Newest-first windows for every word in ``words``.

    ``history`` holds the ``length - 1`` words preceding the block, oldest
    first (zeros when omitted).
    """
    words = np.asarray(words, dtype=np.int64)
    if history is None:
        history = np.zeros(length - 1, dtype=np.int64)
    padded = np.concatenate([np.asarray(history, dtype=np.int64), words])
    if words.size == 0:
        return np.zeros((0, length), dtype=np.int64)
    return sliding_window_view(padded, length)[:, ::-1]


def interpolate(words: np.ndarray, bank: FilterBank, history: np.ndarray | None = None, method: str = "da") -> np.ndarray:
    """Filter a block of symbol words into ``sps * len(words)`` samples."""
    words = np.asarray(words, dtype=np.int64)
    if method == "da":
        return _da_stream(words, bank, history).reshape(-1)
    if method != "direct":
        raise ValueError(f"unknown filter method {method!r}")
    return filter_direct_block(sliding_windows(words, history, bank.branch_len), bank).reshape(-1)
