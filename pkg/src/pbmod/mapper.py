"""Bit-to-symbol mapping for QPSK, pi/4-DQPSK, DQPSK and OQPSK.

All constellation points used here sit on the unit circle at multiples of
pi/4, so every symbol is described exactly by its *octant* k (phase k*pi/4)
and by a pair of 5-valued :class:`Level` indices.  No floating point is
involved until a caller asks for ``IqSymbol.i`` / ``IqSymbol.q``.

Phase tables (radians)::

    bits   QPSK / DQPSK step   pi/4-DQPSK step
    00     0                   pi/4
    01     pi/2                3pi/4
    10     pi                  5pi/4
    11     3pi/2               7pi/4
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

HALF_SQRT2 = math.sqrt(2.0) / 2.0


class Scheme(IntEnum):
    """Modulation scheme; the integer value is the MOD_SEL selector."""

    QPSK = 0
    PI4_DQPSK = 1
    DQPSK = 2
    OQPSK = 3

    @property
    def differential(self) -> bool:
        return self in (Scheme.DQPSK, Scheme.PI4_DQPSK)

    @classmethod
    def from_name(cls, name: str) -> "Scheme":
        try:
            return _SCHEME_NAMES[name.lower()]
        except KeyError:
            raise ValueError(f"unknown modulation {name!r}; expected one of {sorted(_SCHEME_NAMES)}") from None

    @property
    def short_name(self) -> str:
        return {v: k for k, v in _SCHEME_NAMES.items()}[self]


_SCHEME_NAMES = {
    "qpsk": Scheme.QPSK,
    "pi4dqpsk": Scheme.PI4_DQPSK,
    "dqpsk": Scheme.DQPSK,
    "oqpsk": Scheme.OQPSK,
}


class Level(IntEnum):
    """Exact rail amplitude from {-1, -sqrt2/2, 0, sqrt2/2, 1}."""

    NEG_ONE = -2
    NEG_HALF_SQRT2 = -1
    ZERO = 0
    HALF_SQRT2 = 1
    ONE = 2

    @property
    def amplitude(self) -> float:
        return LEVEL_AMPLITUDES[self.value + 2]

    @property
    def code(self) -> int:
        """3-bit two's-complement wire code (+1 -> 011, +sqrt2/2 -> 010, ...)."""
        return int(LEVEL_CODES[self.value + 2])


# indexed by level + 2
LEVEL_AMPLITUDES = (-1.0, -HALF_SQRT2, 0.0, HALF_SQRT2, 1.0)
LEVEL_CODES = np.array([-3, -2, 0, 2, 3], dtype=np.int8)
# full-scale code; a rail level of 1.0 is carried as this integer
LEVEL_CODE_SCALE = 3

# (i, q) level per octant k, phase k*pi/4
OCTANT_LEVELS = np.array(
    [(2, 0), (1, 1), (0, 2), (-1, 1), (-2, 0), (-1, -1), (0, -2), (1, -1)], dtype=np.int8
)
_LEVELS_TO_OCTANT = {(int(i), int(q)): k for k, (i, q) in enumerate(OCTANT_LEVELS)}


def level_codes(levels: np.ndarray) -> np.ndarray:
    """Map an array of level indices (-2..2) to 3-bit wire codes."""
    return LEVEL_CODES[np.asarray(levels, dtype=np.int64) + 2]


def codes_to_levels(codes: np.ndarray) -> np.ndarray:
    """Inverse of :func:`level_codes`; raises on codes outside the 5-value set."""
    codes = np.asarray(codes, dtype=np.int64)
    lookup = {-3: -2, -2: -1, 0: 0, 2: 1, 3: 2}
    bad = ~np.isin(codes, list(lookup))
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ValueError(f"invalid level code {int(codes.flat[idx])} at index {idx}")
    out = np.empty(codes.shape, dtype=np.int8)
    for c, lv in lookup.items():
        out[codes == c] = lv
    return out


class BitPair(NamedTuple):
    i_bit: int
    q_bit: int


@dataclass(frozen=True)
class IqSymbol:
    i_level: Level
    q_level: Level
    time_index: int = 0

    @classmethod
    def from_octant(cls, octant: int, time_index: int = 0) -> "IqSymbol":
        i, q = OCTANT_LEVELS[octant % 8]
        return cls(Level(int(i)), Level(int(q)), time_index)

    @property
    def i(self) -> float:
        return self.i_level.amplitude

    @property
    def q(self) -> float:
        return self.q_level.amplitude

    @property
    def value(self) -> complex:
        return complex(self.i, self.q)

    @property
    def octant(self) -> int | None:
        """Phase in units of pi/4, or None if the point is not on the 8-PSK grid."""
        return _LEVELS_TO_OCTANT.get((int(self.i_level), int(self.q_level)))

    def rotated(self, octants: int) -> "IqSymbol":
        """Rotate by ``octants * pi/4``; only defined for points on the 8-PSK grid."""
        k = self.octant
        if k is None:
            raise ValueError(f"cannot rotate off-grid symbol {self}")
        return IqSymbol.from_octant(k + octants, self.time_index)


@dataclass(frozen=True)
class DiffState:
    """Differential encoder memory.

    ``prev_i``/``prev_q`` hold the last encoded bit pair: for DQPSK the pair
    whose absolute QPSK phase equals the current phase, for pi/4-DQPSK the
    last information pair.  The phase is kept as an octant index.
    """

    prev_i: int = 0
    prev_q: int = 0
    octant: int = 0

    @property
    def prev_phase(self) -> float:
        return self.octant * math.pi / 4

    @classmethod
    def from_phase(cls, phase: float, prev_i: int = 0, prev_q: int = 0) -> "DiffState":
        k = phase / (math.pi / 4)
        if not math.isclose(k, round(k), abs_tol=1e-9):
            raise ValueError(f"phase {phase} is not a multiple of pi/4")
        return cls(prev_i, prev_q, round(k) % 8)


def _check_pair(pair: Sequence[int]) -> BitPair:
    i, q = pair
    if i not in (0, 1) or q not in (0, 1):
        raise ValueError(f"bit pair must hold binary digits, got {tuple(pair)}")
    return BitPair(int(i), int(q))


def as_bits(bits: Iterable[int] | np.ndarray) -> np.ndarray:
    """Validate a bit sequence and return it as a uint8 array."""
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.dtype != np.uint8 or arr.max() > 1:
        bad = (arr != 0) & (arr != 1)
        if not bad.any():
            return arr.astype(np.uint8)
        idx = int(np.flatnonzero(bad)[0])
        raise ValueError(f"non-binary value {arr[idx]!r} at index {idx}")
    return arr.astype(np.uint8)


def split_rails(bits, pad: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Serial-to-parallel split into (even/I, odd/Q) bit arrays."""
    arr = as_bits(bits)
    if arr.size % 2:
        if not pad:
            raise ValueError(
                f"odd number of bits ({arr.size}); bit pairs need an even count (pass pad=True to zero-pad)"
            )
        arr = np.append(arr, np.uint8(0))
    return arr[0::2], arr[1::2]


def split_bits(bits, pad: bool = False) -> list[BitPair]:
    i_bits, q_bits = split_rails(bits, pad=pad)
    return [BitPair(int(i), int(q)) for i, q in zip(i_bits, q_bits)]


def _pair_index(pair: BitPair) -> int:
    return 2 * pair.i_bit + pair.q_bit


def map_qpsk(pair: Sequence[int], time_index: int = 0) -> IqSymbol:
    """Absolute mapping: 00 -> 0, 01 -> pi/2, 10 -> pi, 11 -> 3pi/2."""
    p = _check_pair(pair)
    return IqSymbol.from_octant(2 * _pair_index(p), time_index)


def encode_dqpsk(pair: Sequence[int], state: DiffState, time_index: int = 0) -> tuple[IqSymbol, DiffState]:
    """Differential QPSK: new phase = previous phase + the QPSK phase of the pair."""
    p = _check_pair(pair)
    octant = (state.octant + 2 * _pair_index(p)) % 8
    encoded = octant // 2
    new_state = DiffState(encoded >> 1, encoded & 1, octant)
    return IqSymbol.from_octant(octant, time_index), new_state


def map_pi4dqpsk(pair: Sequence[int], state: DiffState, time_index: int = 0) -> tuple[IqSymbol, DiffState]:
    """pi/4-DQPSK: 00, 01, 10, 11 advance the phase by pi/4, 3pi/4, 5pi/4, 7pi/4."""
    p = _check_pair(pair)
    octant = (state.octant + 2 * _pair_index(p) + 1) % 8
    return IqSymbol.from_octant(octant, time_index), DiffState(p.i_bit, p.q_bit, octant)


def _oqpsk_level(bit: int) -> Level:
    return Level.NEG_HALF_SQRT2 if bit else Level.HALF_SQRT2


def map_oqpsk(pairs: Iterable[Sequence[int]], init_q: int = 0) -> list[IqSymbol]:
    """Half-symbol-rate OQPSK stream; Q lags I by one half symbol.

    Each pair yields two samples ``(I_n, Q_{n-1})`` then ``(I_n, Q_n)``; the
    very first Q value comes from ``init_q``.
    """
    out = []
    prev_q = _oqpsk_level(init_q)
    for n, pair in enumerate(pairs):
        p = _check_pair(pair)
        i_lv = _oqpsk_level(p.i_bit)
        q_lv = _oqpsk_level(p.q_bit)
        out.append(IqSymbol(i_lv, prev_q, 2 * n))
        out.append(IqSymbol(i_lv, q_lv, 2 * n + 1))
        prev_q = q_lv
    return out


# ---------------------------------------------------------------------------
# vectorised stream mapping (used by the modulator pipeline)


def octant_steps(i_bits: np.ndarray, q_bits: np.ndarray, scheme: Scheme) -> np.ndarray:
    """Per-symbol octant (absolute for QPSK, increment for the differential schemes)."""
    idx = 2 * i_bits.astype(np.int64) + q_bits.astype(np.int64)
    if scheme == Scheme.PI4_DQPSK:
        return 2 * idx + 1
    return 2 * idx


class SymbolMapper:
    """Stateful mapper for one stream.

    Emits symbol-rate level indices per rail.  Differential schemes emit the
    reference symbol (phase of the initial state) ahead of the first data
    symbol after construction or :meth:`reset`.  OQPSK is emitted here at
    symbol rate with both rails aligned; the half-symbol Q offset is applied
    downstream.
    """

    def __init__(self, scheme: Scheme, initial_state: DiffState | None = None):
        self.scheme = Scheme(scheme)
        self.initial_state = initial_state or DiffState()
        self.reset()

    def reset(self) -> None:
        self.state = self.initial_state
        self._started = False

    def map_rails(self, i_bits: np.ndarray, q_bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lv = OCTANT_LEVELS[self.map_octants(i_bits, q_bits)]
        return lv[:, 0], lv[:, 1]

    def map_octants(self, i_bits: np.ndarray, q_bits: np.ndarray) -> np.ndarray:
        steps = octant_steps(i_bits, q_bits, self.scheme)
        if self.scheme == Scheme.OQPSK:
            # diagonal points: I sign from i_bit, Q sign from q_bit
            table = np.array([[1, 7], [3, 5]])
            return table[i_bits.astype(np.int64), q_bits.astype(np.int64)]
        if self.scheme == Scheme.QPSK:
            return steps
        if len(steps) == 0:
            return np.zeros(0, dtype=np.int64)
        prefix = np.zeros(0, dtype=np.int64)
        if not self._started:
            # reference symbol goes out only once real data follows it
            prefix = np.array([self.state.octant], dtype=np.int64)
            self._started = True
        octants = (self.state.octant + np.cumsum(steps)) % 8
        last = int(octants[-1])
        if self.scheme == Scheme.DQPSK:
            enc = last // 2
            self.state = DiffState(enc >> 1, enc & 1, last)
        else:
            self.state = DiffState(int(i_bits[-1]), int(q_bits[-1]), last)
        return np.concatenate([prefix, octants])


def encode_symbols(bits, scheme: Scheme, state: DiffState | None = None, pad: bool = False) -> list[IqSymbol]:
    """Map a whole bit stream to symbols with the per-operation functions.

    Differential schemes start with the reference symbol; OQPSK is returned at
    half-symbol granularity.
    """
    scheme = Scheme(scheme)
    pairs = split_bits(bits, pad=pad)
    if scheme == Scheme.QPSK:
        return [map_qpsk(p, n) for n, p in enumerate(pairs)]
    if scheme == Scheme.OQPSK:
        return map_oqpsk(pairs, init_q=(state or DiffState()).prev_q)
    st = state or DiffState()
    if not pairs:
        return []
    out = [IqSymbol.from_octant(st.octant, 0)]
    step = encode_dqpsk if scheme == Scheme.DQPSK else map_pi4dqpsk
    for n, p in enumerate(pairs, start=1):
        sym, st = step(p, st, n)
        out.append(sym)
    return out


# ---------------------------------------------------------------------------
# decoding


def decode_octants(octants: np.ndarray, scheme: Scheme) -> np.ndarray:
    """Invert the phase mappings on an octant stream; returns flat bits.

    For the differential schemes the first octant is the reference and
    produces no bits.
    """
    scheme = Scheme(scheme)
    octants = np.asarray(octants, dtype=np.int64)
    if scheme == Scheme.QPSK:
        odd = np.flatnonzero(octants % 2)
        if odd.size:
            raise ValueError(f"symbol {int(odd[0])} is not a QPSK point")
        idx = octants // 2
    elif scheme.differential:
        if octants.size < 2:
            return np.zeros(0, dtype=np.uint8)
        steps = np.diff(octants) % 8
        want_odd = scheme == Scheme.PI4_DQPSK
        bad = np.flatnonzero((steps % 2 == 1) != want_odd)
        if bad.size:
            raise ValueError(f"phase step into symbol {int(bad[0]) + 1} is not a valid {scheme.name} step")
        idx = (steps - 1) // 2 if want_odd else steps // 2
    else:
        raise ValueError("OQPSK is decoded from rails, not octants")
    bits = np.empty(2 * idx.size, dtype=np.uint8)
    bits[0::2] = idx >> 1
    bits[1::2] = idx & 1
    return bits


def decode_oqpsk_rails(i_levels: np.ndarray, q_levels: np.ndarray) -> np.ndarray:
    """Symbol-aligned OQPSK rail levels (+1 -> bit 0, -1 -> bit 1) back to bits."""
    bits = np.empty(2 * len(i_levels), dtype=np.uint8)
    bits[0::2] = np.asarray(i_levels) < 0
    bits[1::2] = np.asarray(q_levels) < 0
    return bits


def _symbol_octants(symbols: Sequence[IqSymbol], allowed: set[int]) -> np.ndarray:
    out = np.empty(len(symbols), dtype=np.int64)
    for n, s in enumerate(symbols):
        k = s.octant
        if k is None or k not in allowed:
            raise ValueError(f"symbol {n} ({s.i:+.4f}, {s.q:+.4f}) is not a valid constellation point")
        out[n] = k
    return out


def diff_decode(symbols: Sequence[IqSymbol], scheme: Scheme) -> np.ndarray:
    """Recover the payload bits from an exact symbol stream."""
    scheme = Scheme(scheme)
    if scheme == Scheme.OQPSK:
        octs = _symbol_octants(symbols, {1, 3, 5, 7})
        if len(octs) % 2:
            raise ValueError("OQPSK half-symbol stream must have even length")
        lv = OCTANT_LEVELS[octs]
        i_lv, q_lv = lv[:, 0], lv[:, 1]
        # I is held across both halves; Q is held across symbol boundaries
        bad = np.flatnonzero(i_lv[0::2] != i_lv[1::2])
        if bad.size:
            raise ValueError(f"I rail changes inside symbol at half-symbol {2 * int(bad[0]) + 1}")
        bad = np.flatnonzero(q_lv[1:-1:2] != q_lv[2::2])
        if bad.size:
            raise ValueError(f"Q rail changes off its half-symbol offset at index {2 * int(bad[0]) + 2}")
        return decode_oqpsk_rails(i_lv[0::2], q_lv[1::2])
    allowed = set(range(0, 8, 2)) if scheme in (Scheme.QPSK, Scheme.DQPSK) else set(range(8))
    return decode_octants(_symbol_octants(symbols, allowed), scheme)


def rotate_symbols(symbols: Iterable[IqSymbol], octants: int) -> list[IqSymbol]:
    return [s.rotated(octants) for s in symbols]
