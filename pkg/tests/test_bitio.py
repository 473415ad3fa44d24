import itertools
import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradcodec import bitio
from gradcodec.bitio import (BitCursor, BitString, DecodeError,
                             MalformedCodeError, TruncatedStreamError)


class TestBitString:
    def test_concat_length_additive(self):
        a = BitString([1, 0, 1])
        b = BitString([0, 0])
        assert len(a + b) == 5
        assert (a + b).to01() == "10100"

    @given(st.lists(st.integers(0, 1), max_size=40),
           st.lists(st.integers(0, 1), max_size=40),
           st.lists(st.integers(0, 1), max_size=40))
    def test_concat_associative(self, a, b, c):
        x, y, z = BitString(a), BitString(b), BitString(c)
        assert (x + y) + z == x + (y + z)

    @given(st.lists(st.integers(0, 1), max_size=100))
    def test_bytes_round_trip(self, bits):
        bs = BitString(bits)
        assert BitString.from_bytes(bs.to_bytes(), len(bs)) == bs

    @given(st.integers(0, 2**40 - 1))
    def test_int_round_trip(self, value):
        assert BitString.from_int(value, 40).to_int() == value

    def test_from_int_msb_first(self):
        assert BitString.from_int(5, 4).to01() == "0101"

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            BitString([0, 2])

    def test_cursor_past_end(self):
        cur = BitCursor(BitString([1, 0]))
        cur.read_bits(2)
        with pytest.raises(TruncatedStreamError):
            cur.read_bit()


class TestUnary:
    @pytest.mark.parametrize("k,code", [(1, "0"), (3, "110"), (2, "10")])
    def test_examples(self, k, code):
        assert bitio.write_unary(k).to01() == code

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            bitio.write_unary(0)
        with pytest.raises(ValueError):
            bitio.write_unary(-3)

    def test_read_consumes_exactly(self):
        cur = BitCursor(bitio.write_unary(3) + BitString([1, 1]))
        assert bitio.read_unary(cur) == 3
        assert cur.pos == 3

    def test_read_single_zero(self):
        assert bitio.read_unary(BitCursor(BitString([0, 1]))) == 1

    def test_all_ones_truncated(self):
        with pytest.raises(TruncatedStreamError):
            bitio.read_unary(BitCursor(BitString([1] * 10)))

    @given(st.lists(st.integers(1, 30), min_size=1, max_size=30))
    def test_block_round_trip(self, values):
        bs = bitio.write_unary_block(values)
        assert len(bs) == sum(values)
        cur = BitCursor(bs)
        out = bitio.read_unary_block(cur, len(values))
        assert out.tolist() == values
        assert cur.remaining() == 0


class TestFixed:
    @pytest.mark.parametrize("v,w,code", [(5, 4, "0101"), (0, 3, "000")])
    def test_examples(self, v, w, code):
        assert bitio.write_fixed(v, w).to01() == code

    def test_overflow(self):
        with pytest.raises(ValueError):
            bitio.write_fixed(8, 3)

    @given(st.integers(0, 255), st.integers(8, 16))
    def test_round_trip(self, v, w):
        cur = BitCursor(bitio.write_fixed(v, w))
        assert bitio.read_fixed(cur, w) == v


class TestGolombRice:
    @pytest.mark.parametrize("p,m", [
        (0.4, 1),        # 1.25 <= 2 < 2.5
        (0.25, 1),       # 2 <= 2 < 4
        (0.146447, 2),   # 3.414 <= 4 < 6.828
    ])
    def test_params_examples(self, p, m):
        assert bitio.golomb_rice_params(p) == m

    @given(st.floats(1e-9, 0.499999))
    def test_params_bracket(self, p):
        m = bitio.golomb_rice_params(p)
        assert 1.0 / (2.0 * p) <= 2.0 ** m < 1.0 / p

    @pytest.mark.parametrize("p", [0.0, 0.5, 0.7, -0.1, 1.0])
    def test_params_domain(self, p):
        with pytest.raises(ValueError):
            bitio.golomb_rice_params(p)

    @pytest.mark.parametrize("value,m,code", [
        (5, 2, "0101"),  # q=1, r=1
        (1, 2, "101"),   # q=0, r=1
        (1, 0, "01"),    # q=1, no remainder bits
    ])
    def test_encode_examples(self, value, m, code):
        assert bitio.golomb_rice_encode(value, m).to01() == code

    @given(st.integers(1, 5000), st.integers(0, 8))
    def test_round_trip_and_length(self, value, m):
        bs = bitio.golomb_rice_encode(value, m)
        assert len(bs) == value // (2 ** m) + 1 + m
        cur = BitCursor(bs)
        assert bitio.golomb_rice_decode(cur, m) == value
        assert cur.remaining() == 0

    def test_decode_zero_is_malformed(self):
        cur = BitCursor(BitString([1, 0, 0]))
        with pytest.raises(MalformedCodeError):
            bitio.golomb_rice_decode(cur, 2)

    def test_decode_truncated(self):
        with pytest.raises(TruncatedStreamError):
            bitio.golomb_rice_decode(BitCursor(BitString([0, 0, 0])), 1)

    def test_expected_length_near_entropy(self):
        # mean code length under Geometric(p) stays within 3 bits of -log2 p
        rng = np.random.default_rng(5)
        for p in (0.4, 0.15, 0.03):
            m = bitio.golomb_rice_params(p)
            ts = rng.geometric(p, size=100_000)
            mean_len = np.mean(ts // (2 ** m) + 1 + m)
            assert mean_len <= -math.log2(p) + 3.0


class TestSubsetCode:
    def test_rank_examples(self):
        assert bitio.subset_rank([0, 1], 4, 2) == 0
        assert bitio.subset_rank([2, 3], 4, 2) == 5

    def test_unrank_example(self):
        assert bitio.subset_unrank(5, 4, 2) == [2, 3]

    def test_bijection_all_small_dims(self):
        # exhaustive over every subset for all d <= 8
        for d in range(1, 9):
            for n0 in range(d + 1):
                for rank, subset in enumerate(itertools.combinations(range(d), n0)):
                    assert bitio.subset_rank(list(subset), d, n0) == rank
                    assert bitio.subset_unrank(rank, d, n0) == list(subset)

    def test_large_dimension_round_trip(self):
        rng = np.random.default_rng(0)
        d = 4096
        for n0 in (1, 37, 2048, 4000, 4096):
            positions = sorted(rng.choice(d, size=n0, replace=False).tolist())
            rank = bitio.subset_rank(positions, d, n0)
            assert 0 <= rank < math.comb(d, n0)
            assert bitio.subset_unrank(rank, d, n0) == positions

    def test_width(self):
        assert bitio.subset_code_width(4, 2) == 3  # C(4,2)=6
        assert bitio.subset_code_width(4, 0) == 0
        assert bitio.subset_code_width(4, 4) == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            bitio.subset_rank([1, 1], 4, 2)
        with pytest.raises(ValueError):
            bitio.subset_rank([3, 1], 4, 2)
        with pytest.raises(ValueError):
            bitio.subset_rank([0, 4], 4, 2)
        with pytest.raises(ValueError):
            bitio.subset_unrank(6, 4, 2)


class TestFloatMagnitude:
    def test_zero_is_31_zero_bits(self):
        assert bitio.write_float_magnitude(0.0).to01() == "0" * 31

    def test_one_layout(self):
        # binary32 1.0: exponent 01111111, mantissa zero (sign bit dropped)
        assert bitio.write_float_magnitude(1.0).to01() == "0111111" + "1" + "0" * 23

    @given(st.floats(0.0, 1e6))
    def test_round_trip_is_binary32(self, value):
        cur = BitCursor(bitio.write_float_magnitude(value))
        assert bitio.read_float_magnitude(cur) == float(np.float32(value))

    @pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf, 1e39])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            bitio.write_float_magnitude(bad)

    @given(st.floats(-1e6, 1e6))
    def test_signed_float32_round_trip(self, value):
        cur = BitCursor(bitio.write_float32(value))
        got = bitio.read_float32(cur)
        expect = struct.unpack(">f", struct.pack(">f", value))[0]
        assert got == expect or (math.isnan(got) and math.isnan(expect))

    def test_block_matches_scalar(self):
        values = [0.25, -3.5, 1e-3, 7.0]
        block = bitio.write_float32_block(values)
        scalar = BitString.concat([bitio.write_float32(v) for v in values])
        assert block == scalar
        out = bitio.read_float32_block(BitCursor(block), len(values))
        assert out.tolist() == [float(np.float32(v)) for v in values]


class TestContainer:
    def test_round_trip(self):
        payload = BitString([1, 0, 1, 1, 0])
        blob = bitio.pack_container(3, 17, payload)
        assert blob[:4] == b"GCV1"
        tag, d, got = bitio.unpack_container(blob)
        assert (tag, d) == (3, 17)
        assert got == payload

    def test_bad_magic(self):
        with pytest.raises(DecodeError):
            bitio.unpack_container(b"XXXX" + bytes(9))

    def test_too_short(self):
        with pytest.raises(DecodeError):
            bitio.unpack_container(b"GCV1")

    def test_declared_bits_exceed_payload(self):
        blob = bitio.pack_container(1, 4, BitString([1, 1]))
        broken = blob[:9] + (99).to_bytes(4, "little") + blob[13:]
        with pytest.raises(DecodeError):
            bitio.unpack_container(broken)
