"""Symbol mapper tests; float phase accumulation is the independent oracle."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbmod.mapper import (
    BitPair,
    DiffState,
    IqSymbol,
    Level,
    Scheme,
    SymbolMapper,
    codes_to_levels,
    decode_octants,
    diff_decode,
    encode_dqpsk,
    encode_symbols,
    level_codes,
    map_oqpsk,
    map_pi4dqpsk,
    map_qpsk,
    rotate_symbols,
    split_bits,
    split_rails,
)

R = math.sqrt(2) / 2
QPSK_STEP = {(0, 0): 0.0, (0, 1): math.pi / 2, (1, 0): math.pi, (1, 1): 3 * math.pi / 2}
PI4_STEP = {(0, 0): math.pi / 4, (0, 1): 3 * math.pi / 4, (1, 0): 5 * math.pi / 4, (1, 1): 7 * math.pi / 4}

bit_lists = st.lists(st.integers(0, 1), min_size=0, max_size=64).map(lambda b: b[: len(b) - len(b) % 2])


def xy(sym: IqSymbol) -> tuple[float, float]:
    return sym.i, sym.q


def oracle_stream(pairs, steps, theta0=0.0):
    """Accumulate phase in floating point and evaluate cos/sin."""
    theta = theta0
    out = [(math.cos(theta), math.sin(theta))]
    for p in pairs:
        theta = (theta + steps[tuple(p)]) % (2 * math.pi)
        out.append((math.cos(theta), math.sin(theta)))
    return out


class TestSplitBits:
    def test_interleave(self):
        assert split_bits([1, 0, 1, 1]) == [(1, 0), (1, 1)]

    def test_empty(self):
        assert split_bits([]) == []

    def test_eight_bits(self):
        assert split_bits([0, 0, 1, 0, 0, 1, 1, 1]) == [(0, 0), (1, 0), (0, 1), (1, 1)]

    def test_pairs_are_named(self):
        pair = split_bits([1, 0])[0]
        assert isinstance(pair, BitPair)
        assert (pair.i_bit, pair.q_bit) == (1, 0)

    def test_odd_length_is_an_error_by_default(self):
        with pytest.raises(ValueError, match="odd number of bits"):
            split_bits([1, 0, 1])

    def test_odd_length_zero_pad_on_request(self):
        assert split_bits([1, 0, 1], pad=True) == [(1, 0), (1, 0)]

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="index 2"):
            split_rails([0, 1, 2, 1])


class TestQpsk:
    @pytest.mark.parametrize(
        "pair, expected",
        [((0, 0), (1, 0)), ((0, 1), (0, 1)), ((1, 0), (-1, 0)), ((1, 1), (0, -1))],
    )
    def test_phase_mapping(self, pair, expected):
        assert xy(map_qpsk(pair)) == expected

    def test_bijection_onto_axis_points(self):
        images = {xy(map_qpsk(p)) for p in QPSK_STEP}
        assert images == {(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)}

    def test_bad_pair(self):
        with pytest.raises(ValueError):
            map_qpsk((0, 2))


class TestDqpsk:
    def test_zero_step(self):
        sym, st_ = encode_dqpsk((0, 0), DiffState())
        assert xy(sym) == (1, 0)
        assert st_.prev_phase == 0

    def test_quarter_turn(self):
        sym, st_ = encode_dqpsk((0, 1), DiffState())
        assert xy(sym) == (0, 1)
        assert st_.prev_phase == pytest.approx(math.pi / 2)

    def test_from_half_pi(self):
        sym, st_ = encode_dqpsk((1, 0), DiffState.from_phase(math.pi / 2))
        assert xy(sym) == (0, -1)
        assert st_.prev_phase == pytest.approx(3 * math.pi / 2)

    def test_encoded_pair_truth_table(self):
        # the encoded pair (I', Q') must be the QPSK label of the accumulated phase
        label = {0: (0, 0), 1: (0, 1), 2: (1, 0), 3: (1, 1)}
        for prev in label.values():
            for cur in label.values():
                prev_phase = QPSK_STEP[prev]
                sym, st_ = encode_dqpsk(cur, DiffState(prev[0], prev[1], round(prev_phase / (math.pi / 4))))
                want_phase = (prev_phase + QPSK_STEP[cur]) % (2 * math.pi)
                want = label[round(want_phase / (math.pi / 2)) % 4]
                assert (st_.prev_i, st_.prev_q) == want
                assert sym.i == pytest.approx(math.cos(want_phase), abs=1e-12)
                assert sym.q == pytest.approx(math.sin(want_phase), abs=1e-12)

    @given(bit_lists)
    def test_matches_phase_oracle(self, bits):
        syms = encode_symbols(bits, Scheme.DQPSK)
        want = oracle_stream(split_bits(bits), QPSK_STEP) if bits else []
        assert len(syms) == len(want)
        for s, (i, q) in zip(syms, want):
            assert s.i == pytest.approx(i, abs=1e-12) and s.q == pytest.approx(q, abs=1e-12)

    @given(bit_lists)
    def test_state_stays_on_axes(self, bits):
        st_ = DiffState()
        for p in split_bits(bits):
            _, st_ = encode_dqpsk(p, st_)
            assert st_.octant % 2 == 0


class TestPi4Dqpsk:
    def test_first_step(self):
        sym, st_ = map_pi4dqpsk((0, 0), DiffState())
        assert xy(sym) == pytest.approx((R, R))
        assert st_.prev_phase == pytest.approx(math.pi / 4)

    def test_wraps_to_zero(self):
        sym, st_ = map_pi4dqpsk((1, 1), DiffState.from_phase(math.pi / 4))
        assert xy(sym) == (1, 0)
        assert st_.prev_phase == 0

    def test_three_quarter_step(self):
        sym, st_ = map_pi4dqpsk((0, 1), DiffState.from_phase(math.pi / 2))
        assert xy(sym) == pytest.approx((-R, -R))
        assert st_.prev_phase == pytest.approx(5 * math.pi / 4)

    @given(bit_lists)
    def test_matches_phase_oracle(self, bits):
        syms = encode_symbols(bits, Scheme.PI4_DQPSK)
        want = oracle_stream(split_bits(bits), PI4_STEP) if bits else []
        for s, (i, q) in zip(syms, want):
            assert s.i == pytest.approx(i, abs=1e-12) and s.q == pytest.approx(q, abs=1e-12)

    @given(bit_lists.filter(lambda b: len(b) >= 2))
    def test_lattices_alternate(self, bits):
        syms = encode_symbols(bits, Scheme.PI4_DQPSK)
        for n, s in enumerate(syms):
            assert s.octant % 2 == n % 2

    @given(bit_lists.filter(lambda b: len(b) >= 2))
    def test_steps_are_odd_quarter_turns(self, bits):
        octs = [s.octant for s in encode_symbols(bits, Scheme.PI4_DQPSK)]
        assert all((b - a) % 8 in (1, 3, 5, 7) for a, b in zip(octs, octs[1:]))

    def test_visits_all_eight_phases(self):
        rng = np.random.default_rng(5)
        octs = {s.octant for s in encode_symbols(rng.integers(0, 2, 200), Scheme.PI4_DQPSK)}
        assert octs == set(range(8))

    @given(bit_lists)
    def test_unit_magnitude(self, bits):
        for scheme in Scheme:
            for s in encode_symbols(bits, scheme):
                assert s.i**2 + s.q**2 == pytest.approx(1.0)


class TestOqpsk:
    def test_constant_input(self):
        syms = map_oqpsk([(0, 0), (0, 0)])
        assert all(xy(s) == pytest.approx((R, R)) for s in syms[1:])

    def test_q_lags_i_by_half_symbol(self):
        syms = map_oqpsk([(0, 0), (1, 1)])
        i_rail = [s.i_level for s in syms]
        q_rail = [s.q_level for s in syms]
        # delay-line oracle: I changes at half-symbol 2 (symbol boundary 1), Q one step later
        assert [k for k in range(1, 4) if i_rail[k] != i_rail[k - 1]] == [2]
        assert [k for k in range(1, 4) if q_rail[k] != q_rail[k - 1]] == [3]

    def test_first_half_symbol_uses_init_value(self):
        assert map_oqpsk([(1, 1)])[0].q_level == Level.HALF_SQRT2
        assert map_oqpsk([(1, 1)], init_q=1)[0].q_level == Level.NEG_HALF_SQRT2

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=40))
    def test_never_both_rails_change(self, pairs):
        syms = map_oqpsk(pairs)
        for a, b in zip(syms, syms[1:]):
            assert (a.i_level != b.i_level) + (a.q_level != b.q_level) <= 1

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=40))
    def test_delay_line_oracle(self, pairs):
        syms = map_oqpsk(pairs)
        q_bits = [0] + [q for _, q in pairs]
        for n, (i, q) in enumerate(pairs):
            assert syms[2 * n].i_level == (Level.NEG_HALF_SQRT2 if i else Level.HALF_SQRT2)
            assert syms[2 * n].q_level == (Level.NEG_HALF_SQRT2 if q_bits[n] else Level.HALF_SQRT2)
            assert syms[2 * n + 1].q_level == (Level.NEG_HALF_SQRT2 if q else Level.HALF_SQRT2)

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=40))
    def test_path_avoids_origin(self, pairs):
        # one rail at a time means every straight segment keeps |other rail| = sqrt2/2
        syms = map_oqpsk(pairs)
        for a, b in zip(syms, syms[1:]):
            if a.i_level != b.i_level:
                assert abs(b.q) == pytest.approx(R)
            if a.q_level != b.q_level:
                assert abs(b.i) == pytest.approx(R)


class TestDiffDecode:
    @pytest.mark.parametrize("scheme", list(Scheme))
    @given(bits=bit_lists)
    def test_round_trip(self, scheme, bits):
        assert diff_decode(encode_symbols(bits, scheme), scheme).tolist() == list(bits)

    @pytest.mark.parametrize("scheme", [Scheme.DQPSK, Scheme.PI4_DQPSK])
    @given(bits=bit_lists, start=st.integers(0, 7))
    def test_round_trip_any_initial_state(self, scheme, bits, start):
        if scheme == Scheme.DQPSK:
            start -= start % 2
        st_ = DiffState(octant=start)
        assert diff_decode(encode_symbols(bits, scheme, st_), scheme).tolist() == list(bits)

    @given(bits=bit_lists, turns=st.integers(0, 3))
    def test_dqpsk_rotation_invariant(self, bits, turns):
        syms = rotate_symbols(encode_symbols(bits, Scheme.DQPSK), 2 * turns)
        assert diff_decode(syms, Scheme.DQPSK).tolist() == list(bits)

    @given(bits=bit_lists, octants=st.integers(0, 7))
    def test_pi4_rotation_invariant(self, bits, octants):
        syms = rotate_symbols(encode_symbols(bits, Scheme.PI4_DQPSK), octants)
        assert diff_decode(syms, Scheme.PI4_DQPSK).tolist() == list(bits)

    def test_pi4_half_turn_rotation(self):
        bits = [0, 0, 1, 1, 0, 1, 1, 0]
        syms = rotate_symbols(encode_symbols(bits, Scheme.PI4_DQPSK), 2)
        assert diff_decode(syms, Scheme.PI4_DQPSK).tolist() == bits

    @pytest.mark.parametrize("scheme", [Scheme.DQPSK, Scheme.PI4_DQPSK])
    def test_single_symbol_gives_nothing(self, scheme):
        assert diff_decode([IqSymbol(Level.ONE, Level.ZERO)], scheme).size == 0

    def test_invalid_point_reports_index(self):
        syms = [map_qpsk((0, 0)), IqSymbol(Level.ONE, Level.ONE), map_qpsk((0, 1))]
        with pytest.raises(ValueError, match="symbol 1"):
            diff_decode(syms, Scheme.QPSK)

    def test_dqpsk_rejects_diagonal(self):
        syms = [map_qpsk((0, 0)), IqSymbol(Level.HALF_SQRT2, Level.HALF_SQRT2)]
        with pytest.raises(ValueError, match="symbol 1"):
            diff_decode(syms, Scheme.DQPSK)

    def test_pi4_rejects_even_step(self):
        syms = [IqSymbol.from_octant(0), IqSymbol.from_octant(2)]
        with pytest.raises(ValueError, match="symbol 1"):
            diff_decode(syms, Scheme.PI4_DQPSK)

    def test_oqpsk_rejects_misaligned_rails(self):
        syms = map_oqpsk([(0, 0), (1, 1)])
        syms[1] = IqSymbol(Level.NEG_HALF_SQRT2, syms[1].q_level)
        with pytest.raises(ValueError, match="I rail"):
            diff_decode(syms, Scheme.OQPSK)


class TestVectorMapper:
    @pytest.mark.parametrize("scheme", list(Scheme))
    @given(bits=bit_lists)
    def test_matches_scalar_ops(self, scheme, bits):
        i_bits, q_bits = split_rails(bits)
        i_lv, q_lv = SymbolMapper(scheme).map_rails(i_bits, q_bits)
        if scheme == Scheme.OQPSK:
            half = map_oqpsk(split_bits(bits))
            # symbol-rate rails are the aligned (I_n, Q_n) half-symbols
            want = [(int(s.i_level), int(s.q_level)) for s in half[1::2]]
        else:
            want = [(int(s.i_level), int(s.q_level)) for s in encode_symbols(bits, scheme)]
        assert list(zip(i_lv.tolist(), q_lv.tolist())) == want

    @pytest.mark.parametrize("scheme", [Scheme.DQPSK, Scheme.PI4_DQPSK])
    def test_chunked_equals_whole(self, scheme):
        rng = np.random.default_rng(2)
        bits = rng.integers(0, 2, 400)
        i_bits, q_bits = split_rails(bits)
        whole = SymbolMapper(scheme).map_octants(i_bits, q_bits)
        m = SymbolMapper(scheme)
        parts = [m.map_octants(i_bits[a:b], q_bits[a:b]) for a, b in ((0, 0), (0, 37), (37, 38), (38, 200))]
        assert np.array_equal(np.concatenate(parts), whole)

    def test_decode_octants_rejects_odd_qpsk(self):
        with pytest.raises(ValueError, match="symbol 1"):
            decode_octants(np.array([0, 3]), Scheme.QPSK)


class TestWireCodes:
    def test_code_mapping(self):
        assert [Level(v).code for v in (2, 1, 0, -1, -2)] == [3, 2, 0, -2, -3]
        # 3-bit two's-complement patterns
        assert [format(Level(v).code & 0b111, "03b") for v in (2, 1, 0, -1, -2)] == ["011", "010", "000", "110", "101"]

    def test_round_trip(self):
        lv = np.array([-2, -1, 0, 1, 2])
        assert codes_to_levels(level_codes(lv)).tolist() == lv.tolist()

    def test_bad_code(self):
        with pytest.raises(ValueError, match="index 1"):
            codes_to_levels(np.array([0, 1]))
