"""Parameter-controlled modulator: bits -> mapper -> DA interpolator -> fs/4 mixer."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .fixedpoint import QFixed, int_range
from .mapper import DiffState, Scheme, SymbolMapper, as_bits, level_codes
from .pulseshape import NUM_TAPS, ROLLOFFS, SPS, FilterBank, bank_for, interpolate

FLUSH_SYMBOLS = 8
DEFAULT_BLOCK_SIZE = 4096
SAMPLE_WIDTH = 16
# Q rail lag for OQPSK, in output samples (half a symbol)
OQPSK_Q_DELAY = SPS // 2


def _check_selector(name: str, value: int) -> int:
    if isinstance(value, bool) or int(value) != value or not 0 <= int(value) <= 3:
        raise ValueError(f"{name} must be one of 0, 1, 2, 3; got {value!r}")
    return int(value)


@dataclass(frozen=True)
class ModConfig:
    """MOD_SEL/FLT_SEL selection plus the fixed datapath parameters."""

    mod_sel: int
    flt_sel: int
    symbol_rate: float | None = None
    sps: int = SPS
    taps: int = NUM_TAPS
    shape: str = "rrc"
    initial_state: DiffState = field(default_factory=DiffState)

    def __post_init__(self):
        _check_selector("mod_sel", self.mod_sel)
        _check_selector("flt_sel", self.flt_sel)

    @property
    def scheme(self) -> Scheme:
        return Scheme(self.mod_sel)

    @property
    def alpha(self) -> float:
        return ROLLOFFS[self.flt_sel]

    @property
    def bank(self) -> FilterBank:
        return bank_for(self.alpha, self.taps, self.sps, self.shape)

    @property
    def sample_rate(self) -> float | None:
        return None if self.symbol_rate is None else self.symbol_rate * self.sps

    @property
    def carrier_frequency(self) -> float | None:
        return None if self.symbol_rate is None else self.sample_rate / 4


def configure(mod_sel: int, flt_sel: int, **kwargs) -> ModConfig:
    """Validate selectors and prebuild the filter bank for the chosen roll-off."""
    cfg = ModConfig(mod_sel, flt_sel, **kwargs)
    cfg.bank  # noqa: B018 - warm the shared bank cache
    return cfg


@dataclass
class IfStream:
    """Mixed IF output with the tapped pre-mixer rails.

    All arrays are 16-bit mantissas with the filter bank's output format;
    ``sample_index`` is the stream position of the first sample.
    """

    finalout: np.ndarray
    irail: np.ndarray
    qrail: np.ndarray
    sample_index: int = 0

    def __post_init__(self):
        if not len(self.finalout) == len(self.irail) == len(self.qrail):
            raise ValueError("finalout, irail and qrail must have equal lengths")

    def __len__(self) -> int:
        return len(self.finalout)

    @classmethod
    def empty(cls, sample_index: int = 0) -> "IfStream":
        z = np.zeros(0, dtype=np.int16)
        return cls(z, z.copy(), z.copy(), sample_index)

    @classmethod
    def concat(cls, parts: list["IfStream"]) -> "IfStream":
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.finalout for p in parts]),
            np.concatenate([p.irail for p in parts]),
            np.concatenate([p.qrail for p in parts]),
            parts[0].sample_index,
        )


def upconvert_fs4(i: QFixed, q: QFixed, phase_index: int) -> QFixed:
    """fs/4 mixer: +I, +Q, -I, -Q on phase 0, 1, 2, 3."""
    phase_index %= 4
    if phase_index == 0:
        return i
    if phase_index == 1:
        return q
    if phase_index == 2:
        return -i
    return -q


def upconvert_block(irail: np.ndarray, qrail: np.ndarray, start_index: int = 0, width: int = SAMPLE_WIDTH) -> np.ndarray:
    """Vector form of :func:`upconvert_fs4` starting at carrier phase ``start_index % 4``."""
    i = np.asarray(irail, dtype=np.int32)
    q = np.asarray(qrail, dtype=np.int32)
    out = np.empty(len(i), dtype=np.int32)
    for k, (src, sign) in enumerate(((i, 1), (q, 1), (i, -1), (q, -1))):
        first = (k - start_index) % 4
        out[first::4] = src[first::4] if sign > 0 else -src[first::4]
    lo, hi = int_range(width)
    return np.clip(out, lo, hi, out=out).astype(np.int16)


class Modulator:
    """Streaming modulator for one bit stream.

    Push bits in, pull fixed-size :class:`IfStream` blocks out.  A trailing
    odd bit is held until its partner arrives.  :meth:`flush` appends the
    zero-symbol tail that empties the filter.
    """

    def __init__(self, config: ModConfig, block_size: int = DEFAULT_BLOCK_SIZE):
        if block_size < 1:
            raise ValueError("block_size must be positive")
        self.block_size = block_size
        self.sample_index = 0  # samples produced so far
        self.symbol_index = 0
        self._out: list[IfStream] = []
        self._pending_bits = np.zeros(0, dtype=np.uint8)
        self._install(config)

    def _install(self, config: ModConfig) -> None:
        self.config = config
        self.bank = config.bank
        self.mapper = SymbolMapper(config.scheme, config.initial_state)
        hist = self.bank.branch_len - 1
        self._i_hist = np.zeros(hist, dtype=np.int64)
        self._q_hist = np.zeros(hist, dtype=np.int64)
        self._q_delay = np.zeros(OQPSK_Q_DELAY, dtype=np.int64)

    @property
    def at_symbol_boundary(self) -> bool:
        return self._pending_bits.size == 0

    def push(self, bits) -> None:
        arr = np.concatenate([self._pending_bits, as_bits(bits)])
        usable = arr.size - arr.size % 2
        self._pending_bits = arr[usable:]
        if usable:
            i_bits, q_bits = arr[0:usable:2], arr[1:usable:2]
            i_lv, q_lv = self.mapper.map_rails(i_bits, q_bits)
            self._push_words(level_codes(i_lv), level_codes(q_lv))

    def _push_words(self, i_words: np.ndarray, q_words: np.ndarray) -> None:
        if len(i_words) == 0:
            return
        irail = interpolate(i_words, self.bank, self._i_hist)
        qrail = interpolate(q_words, self.bank, self._q_hist)
        n = self.bank.branch_len - 1
        self._i_hist = np.concatenate([self._i_hist, i_words])[-n:]
        self._q_hist = np.concatenate([self._q_hist, q_words])[-n:]
        if self.config.scheme == Scheme.OQPSK:
            qrail = np.concatenate([self._q_delay, qrail])
            self._q_delay = qrail[-OQPSK_Q_DELAY:]
            qrail = qrail[:-OQPSK_Q_DELAY]
        irail = irail.astype(np.int16)
        qrail = qrail.astype(np.int16)
        final = upconvert_block(irail, qrail, self.sample_index)
        self._out.append(IfStream(final, irail, qrail, self.sample_index))
        self.sample_index += len(final)
        self.symbol_index += len(i_words)

    def flush(self) -> None:
        """Emit the zero-symbol tail and return to the initial mapper/filter state."""
        if not self.at_symbol_boundary:
            raise ValueError("cannot flush with half a bit pair pending (odd bit count)")
        zeros = np.zeros(FLUSH_SYMBOLS, dtype=np.int64)
        self._push_words(zeros, zeros)
        self._install(self.config)

    def reconfigure(self, config: ModConfig) -> None:
        """Switch scheme/filter at a symbol boundary; counters keep running."""
        if not self.at_symbol_boundary:
            raise ValueError("reconfigure is only allowed at a symbol boundary (one bit of a pair is pending)")
        self._install(config)

    def available(self) -> int:
        return sum(len(p) for p in self._out)

    def pull(self, partial: bool = False) -> IfStream | None:
        """Next ``block_size`` samples, or None when fewer are buffered.

        With ``partial=True`` a short final block is returned instead.
        """
        have = self.available()
        if have == 0 or (have < self.block_size and not partial):
            return None
        merged = IfStream.concat(self._out)
        take = min(self.block_size, have)
        block = IfStream(merged.finalout[:take], merged.irail[:take], merged.qrail[:take], merged.sample_index)
        rest = IfStream(merged.finalout[take:], merged.irail[take:], merged.qrail[take:], merged.sample_index + take)
        self._out = [rest] if len(rest) else []
        return block

    def blocks(self, partial: bool = True) -> Iterator[IfStream]:
        while (blk := self.pull(partial=partial)) is not None:
            yield blk

    def drain(self) -> IfStream:
        """Everything buffered, as one stream."""
        merged = IfStream.concat(self._out) if self._out else IfStream.empty(self.sample_index)
        self._out = []
        return merged


def modulate(bits, config: ModConfig) -> IfStream:
    """Modulate a complete bit stream, including the flush tail."""
    bits = as_bits(bits)
    if bits.size % 2:
        raise ValueError(f"odd number of bits ({bits.size}); bit pairs need an even count")
    mod = Modulator(config)
    mod.push(bits)
    mod.flush()
    return mod.drain()
