import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semtx.codec import (
    CHROMA_BASE,
    HEADER_BITS,
    LUMA_BASE,
    ROW_MARKER,
    RegionBitstream,
    decode_region,
    decode_region_raw,
    encode_region,
    encode_region_raw,
    quant_table,
    semantic_decode,
    semantic_encode,
)
from semtx.errors import DomainError, StreamHeaderError
from semtx.imaging import Image, RegionMask, crop, min_bounding_rect
from semtx.synth import codec_corpus

from conftest import random_image


def naive_ortho_dct(block):
    """Independent O(N^4) orthonormal 2-D DCT used as a quantizer oracle."""
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            cu = 1 / math.sqrt(2) if u == 0 else 1.0
            cv = 1 / math.sqrt(2) if v == 0 else 1.0
            acc = 0.0
            for y in range(8):
                for x in range(8):
                    acc += (
                        block[y, x]
                        * math.cos((2 * y + 1) * u * math.pi / 16)
                        * math.cos((2 * x + 1) * v * math.pi / 16)
                    )
            out[u, v] = acc * cu * cv / 4.0
    return out


def _row_spans(bits):
    """Locate (payload_start, payload_end) of each row record from the stream."""
    def field(pos, n):
        v = 0
        for i in range(pos, pos + n):
            v = (v << 1) | int(bits[i])
        return v

    spans = []
    pos = HEADER_BITS
    while pos + 40 <= len(bits):
        assert field(pos, 16) == ROW_MARKER
        length = field(pos + 16, 24)
        spans.append((pos + 40, pos + 40 + length))
        pos += 40 + length
    return spans


class TestQuantTable:
    def test_quality_50_is_the_base_table(self):
        assert np.array_equal(quant_table(50, "luma"), LUMA_BASE)
        assert np.array_equal(quant_table(50, "chroma"), CHROMA_BASE)

    def test_quality_100_is_all_ones(self):
        assert (quant_table(100) == 1).all()

    def test_entries_non_increasing_in_quality(self):
        for kind in ("luma", "chroma"):
            prev = quant_table(1, kind)
            for q in range(2, 101):
                cur = quant_table(q, kind)
                assert (cur <= prev).all(), f"q={q} kind={kind}"
                prev = cur

    def test_entries_in_range(self):
        for q in (1, 7, 49, 50, 51, 99, 100):
            t = quant_table(q)
            assert t.min() >= 1 and t.max() <= 1024

    def test_bad_quality_rejected(self):
        for q in (0, 101):
            with pytest.raises(DomainError):
                quant_table(q)


class TestEncodeRegion:
    def test_flat_midgray_bit_length_is_hand_computable(self):
        # per block: DC delta 0 -> 1 bit; EOB (Exp-Golomb of 63) -> 13 bits
        # per row: 16-bit marker + 24-bit length; header: 96 bits
        for h, w, ch in ((16, 16, 1), (8, 24, 1), (16, 8, 3)):
            img = Image.flat(h, w, 128, channels=ch)
            stream = encode_region(img, 50)
            rows = ch * math.ceil(h / 8)
            blocks_per_row = math.ceil(w / 8)
            assert stream.bit_length == 96 + rows * (40 + 14 * blocks_per_row)

    def test_header_fields(self):
        stream = encode_region(Image.flat(10, 20, 0), 37)
        assert stream.header() == (20, 10, 1, 37, 2)

    def test_top_quality_beats_bottom_quality_on_error(self, rng):
        img = random_image(rng, 24, 24)
        ref = img.samples.astype(float)
        mses = {}
        for q in (1, 100):
            dec = decode_region(encode_region(img, q))
            mses[q] = float(np.mean((dec.samples.astype(float) - ref) ** 2))
        assert mses[100] <= mses[1]

    def test_quantizer_fixed_point_round_trips_exactly(self):
        # DC-only pattern: quality 50 has DC divisor 16, and a dequantized
        # DC of 16*m gives the constant block 128 + 2*m, which is integral
        for m in (-10, 3, 25):
            block = np.full((8, 8), 128 + 2 * m, dtype=np.uint8)
            # oracle: the quantizer must see exactly coefficient 16*m
            spectrum = naive_ortho_dct(block.astype(float) - 128.0)
            assert spectrum[0, 0] == pytest.approx(16 * m, abs=1e-9)
            assert np.abs(spectrum).sum() == pytest.approx(abs(16 * m), abs=1e-6)
            img = Image(block)
            decoded = decode_region(encode_region(img, 50))
            assert np.array_equal(decoded.samples, img.samples)

    def test_matches_naive_dct_quantizer_on_one_block(self, rng):
        img = random_image(rng, 8, 8)
        table = quant_table(75)
        spectrum = naive_ortho_dct(img.samples[:, :, 0].astype(float) - 128.0)
        want = np.sign(spectrum) * np.floor(np.abs(spectrum) / table + 0.5)
        dec = decode_region(encode_region(img, 75))
        redec = naive_ortho_dct(dec.samples[:, :, 0].astype(float) - 128.0)
        # decoded pixels must come from exactly the oracle's quantized levels
        assert np.allclose(redec / table, want, atol=0.2)

    def test_round_trip_shape_and_padding(self, rng):
        for h, w in ((9, 13), (8, 8), (17, 31)):
            img = random_image(rng, h, w, 3)
            dec = decode_region(encode_region(img, 90))
            assert (dec.height, dec.width, dec.channels) == (h, w, 3)


class TestDecodeRegion:
    def test_uncorrupted_round_trip_is_stable(self, rng):
        img = random_image(rng, 16, 16)
        stream = encode_region(img, 60)
        a = decode_region(stream)
        b = decode_region(RegionBitstream(stream.bits.copy()))
        assert np.array_equal(a.samples, b.samples)

    def test_single_flip_is_confined_to_its_block_row(self, rng):
        img = random_image(rng, 32, 24)
        stream = encode_region(img, 60)
        clean = decode_region(stream)
        spans = _row_spans(stream.bits)
        for row_idx, (start, end) in enumerate(spans):
            if end <= start:
                continue
            bad = stream.bits.copy()
            bad[(start + end) // 2] ^= 1
            dirty = decode_region(RegionBitstream(bad))
            differing = np.nonzero((dirty.samples != clean.samples).any(axis=(1, 2)))[0]
            lo, hi = row_idx * 8, row_idx * 8 + 8
            assert all(lo <= y < hi for y in differing), f"row {row_idx} leaked"

    def test_fully_randomized_payload_yields_valid_image(self, rng):
        img = random_image(rng, 16, 16)
        stream = encode_region(img, 10)
        bad = stream.bits.copy()
        bad[HEADER_BITS:] = rng.integers(0, 2, size=len(bad) - HEADER_BITS, dtype=np.uint8)
        out = decode_region(RegionBitstream(bad))
        assert (out.height, out.width) == (16, 16)

    @given(seed=st.integers(0, 10_000), flips=st.integers(1, 64))
    @settings(max_examples=120, deadline=None)
    def test_decode_is_total_under_payload_corruption(self, seed, flips):
        img = Image(
            np.random.default_rng(99).integers(0, 256, size=(24, 16, 1), dtype=np.uint8)
        )
        stream = encode_region(img, 30)
        rng = np.random.default_rng(seed)
        bad = stream.bits.copy()
        idx = rng.integers(HEADER_BITS, len(bad), size=flips)
        bad[idx] ^= 1
        out = decode_region(RegionBitstream(bad))
        assert (out.height, out.width, out.channels) == (24, 16, 1)

    def test_unparseable_header_is_a_hard_error(self, rng):
        stream = encode_region(random_image(rng, 8, 8), 50)
        bad = stream.bits.copy()
        bad[0] ^= 1  # break the magic
        with pytest.raises(StreamHeaderError):
            decode_region(RegionBitstream(bad))
        with pytest.raises(StreamHeaderError):
            decode_region(RegionBitstream(np.zeros(40, dtype=np.uint8)))


class TestRawMode:
    def test_round_trip(self, rng):
        img = random_image(rng, 7, 9, 3)
        bits = encode_region_raw(img)
        assert len(bits) == img.bit_length
        out = decode_region_raw(bits, 9, 7, 3)
        assert np.array_equal(out.samples, img.samples)

    def test_bit_errors_flip_sample_bits_directly(self):
        img = Image.flat(2, 2, 0)
        bits = encode_region_raw(img)
        bits[0] ^= 1  # MSB of the first sample
        out = decode_region_raw(bits, 2, 2, 1)
        assert out.samples[0, 0, 0] == 128

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            decode_region_raw(np.zeros(9, dtype=np.uint8), 1, 1, 1)


class TestSemanticCoding:
    def _split(self, rng, h=16, w=16):
        img = random_image(rng, h, w)
        star = RegionMask(np.zeros((h, w), dtype=bool))
        star.bits[:8, :8] = True
        rest = star.complement()
        return img, star, rest

    def test_star_stream_matches_standalone_encoder(self, rng):
        img, star, rest = self._split(rng)
        streams = semantic_encode(img, star, [rest], quality_target=80, quality_base=5)
        rect = min_bounding_rect(star)
        standalone = encode_region(crop(img, rect), 80)
        assert np.array_equal(streams.star[0].bits, standalone.bits)
        assert streams.star[1] == rect

    def test_bit_accounting(self, rng):
        img, star, rest = self._split(rng)
        streams = semantic_encode(img, star, [rest], 80, 5)
        assert streams.total_bits == streams.star[0].bit_length + streams.rest[0].bit_length

    def test_rest_rect_is_the_rest_bounding_box(self, rng):
        img = random_image(rng, 16, 16)
        star = RegionMask(np.zeros((16, 16), dtype=bool))
        star.bits[:, :12] = True
        background = star.complement()  # right-hand strip
        streams = semantic_encode(img, star, [background], 90, 10)
        assert streams.rest[1] == min_bounding_rect(background)

    def test_equal_qualities_match_single_profile_encoding(self, rng):
        img, star, rest = self._split(rng)
        streams = semantic_encode(img, star, [rest], quality_target=40, quality_base=40)
        base = Image.flat(16, 16, 0)
        out = semantic_decode(base, streams.star, star, streams.rest, rest)
        manual = semantic_encode(img, star, [rest], 40, 40)
        manual_out = semantic_decode(base, manual.star, star, manual.rest, rest)
        assert np.array_equal(out.samples, manual_out.samples)

    def test_empty_star_rejected(self, rng):
        img = random_image(rng, 8, 8)
        empty = RegionMask(np.zeros((8, 8), dtype=bool))
        with pytest.raises(DomainError):
            semantic_encode(img, empty, [empty.complement()], 50, 50)

    def test_overlapping_masks_rejected(self, rng):
        img, star, rest = self._split(rng)
        with pytest.raises(DomainError, match="overlap"):
            semantic_encode(img, star, [star], 50, 50)

    def test_empty_rest_gives_single_stream(self, rng):
        img = random_image(rng, 8, 8)
        star = RegionMask.full(8, 8)
        streams = semantic_encode(img, star, [], 50, 1)
        assert streams.rest is None
        out = semantic_decode(Image.flat(8, 8, 0), streams.star, star, None, None)
        decoded = decode_region(streams.star[0])
        assert np.array_equal(out.samples, decoded.samples)


class TestCorpusTrends:
    def test_mse_non_increasing_and_bits_non_decreasing_in_quality(self):
        corpus = codec_corpus(count=4, size=32, seed=5)
        qualities = (1, 25, 75, 100)
        for img in corpus:
            prev_mse = None
            for q in qualities:
                dec = decode_region(encode_region(img, q))
                mse = float(
                    np.mean((dec.samples.astype(float) - img.samples.astype(float)) ** 2)
                )
                if prev_mse is not None:
                    assert mse <= prev_mse + 1e-9
                prev_mse = mse
        avg_bits = [
            np.mean([encode_region(img, q).bit_length for img in corpus])
            for q in qualities
        ]
        assert all(a <= b for a, b in zip(avg_bits, avg_bits[1:]))
