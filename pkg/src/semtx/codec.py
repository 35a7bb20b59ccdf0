"""Quality-factor-parameterized block-DCT codec with an error-resilient stream.

The quality knob q in [1, 100] scales the standard quantization tables.
Blocks are entropy-coded with signed Exp-Golomb codes and grouped into
independently decodable block rows, each behind a 16-bit resync marker and
a 24-bit length field, so payload corruption degrades the output row by
row instead of killing the whole stream. Decoding is total: any payload
corruption yields a well-formed image; only an unparseable header raises.

Stream layout, all fields big-endian, MSB-first within bytes:

    magic "SJC1" (32) | width (16) | height (16) | channels (8) | q (8)
    | row count (16) | rows...
    row: marker 0xB7C3 (16) | payload bit length (24) | payload

A raw mode serializes crops as plain 8-bit samples (no header) for
channel-coding-only studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.fft import dctn, idctn

from .errors import DomainError, StreamHeaderError
from .imaging import Image, Rect, RegionMask, composite_layers, crop, min_bounding_rect, union_masks

MAGIC = 0x534A4331  # "SJC1"
ROW_MARKER = 0xB7C3
HEADER_BITS = 96

# |orthonormal 8x8 DCT coefficient| <= 8 * 128 for level-shifted samples
_COEF_LIMIT = 1024
_DC_DELTA_LIMIT = 2 * _COEF_LIMIT
_EOB_RUN = 63
_MAX_EG_PREFIX = 12  # largest legal symbol is a DC delta: 2*2048 -> 13-bit suffix

LUMA_BASE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 36, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

CHROMA_BASE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

# zigzag scan order over a row-major 8x8 block
ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10,
        17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34,
        27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36,
        29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46,
        53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.int64,
)


def quant_table(quality: int, kind: str = "luma") -> np.ndarray:
    """Quality-scaled divisors; entries are non-increasing in quality."""
    if not 1 <= quality <= 100:
        raise DomainError(f"quality must lie in [1, 100], got {quality}")
    if kind == "luma":
        base = LUMA_BASE
    elif kind == "chroma":
        base = CHROMA_BASE
    else:
        raise DomainError(f"unknown table kind {kind!r}")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor(base * scale / 100.0 + 0.5)
    return np.clip(table, 1, 1024).astype(np.int64)


# ---------------------------------------------------------------------------
# Bit-level coding


class _BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, value: int, nbits: int) -> None:
        for i in range(nbits - 1, -1, -1):
            self.bits.append((value >> i) & 1)

    def write_eg(self, u: int) -> None:
        # order-0 Exp-Golomb: (n-1) zeros then the n-bit value u+1
        m = u + 1
        n = m.bit_length()
        self.write(0, n - 1)
        self.write(m, n)

    def write_signed_eg(self, v: int) -> None:
        self.write_eg(2 * v - 1 if v > 0 else -2 * v)


class _RowViolation(Exception):
    """Internal: code violation inside a block row."""


class _BitReader:
    def __init__(self, bits: Sequence[int], start: int, end: int):
        self.bits = bits
        self.pos = start
        self.end = end

    def read(self, nbits: int) -> int:
        if self.pos + nbits > self.end:
            raise _RowViolation("row payload exhausted")
        v = 0
        for _ in range(nbits):
            v = (v << 1) | self.bits[self.pos]
            self.pos += 1
        return v

    def read_eg(self) -> int:
        zeros = 0
        while self.read(1) == 0:
            zeros += 1
            if zeros > _MAX_EG_PREFIX:
                raise _RowViolation("invalid Exp-Golomb prefix")
        return ((1 << zeros) | self.read(zeros)) - 1 if zeros else 0

    def read_signed_eg(self) -> int:
        u = self.read_eg()
        return (u + 1) // 2 if u % 2 else -(u // 2)


def _encode_block(writer: _BitWriter, coeffs: np.ndarray, dc_prev: int) -> int:
    dc = int(coeffs[0])
    writer.write_signed_eg(dc - dc_prev)
    run = 0
    for level in coeffs[1:]:
        level = int(level)
        if level == 0:
            run += 1
        else:
            writer.write_eg(run)
            writer.write_signed_eg(level)
            run = 0
    writer.write_eg(_EOB_RUN)
    return dc


def _decode_block(reader: _BitReader, dc_prev: int) -> tuple[np.ndarray, int]:
    coeffs = np.zeros(64, dtype=np.int64)
    delta = reader.read_signed_eg()
    if abs(delta) > _DC_DELTA_LIMIT:
        raise _RowViolation("DC delta overflow")
    dc = dc_prev + delta
    if abs(dc) > _COEF_LIMIT:
        raise _RowViolation("DC coefficient overflow")
    coeffs[0] = dc
    index = 1
    while True:
        run = reader.read_eg()
        if run == _EOB_RUN:
            break
        if run > 62:
            raise _RowViolation("run overflow")
        index += run
        if index > 63:
            raise _RowViolation("block overrun")
        level = reader.read_signed_eg()
        if level == 0 or abs(level) > _COEF_LIMIT:
            raise _RowViolation("level overflow")
        coeffs[index] = level
        index += 1
    return coeffs, dc


# ---------------------------------------------------------------------------
# Region streams


@dataclass
class RegionBitstream:
    """Entropy-coded rectangle; ``bits`` is the full stream, header included."""

    bits: np.ndarray  # uint8 values in {0, 1}, MSB-first serialization

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)

    @property
    def bit_length(self) -> int:
        return len(self.bits)

    def header(self) -> tuple[int, int, int, int, int]:
        """Parse (width, height, channels, quality, row_count); hard error if broken."""
        return _parse_header(self.bits)


def _read_field(bits: np.ndarray, pos: int, nbits: int) -> int:
    v = 0
    for i in range(pos, pos + nbits):
        v = (v << 1) | int(bits[i])
    return v


def _parse_header(bits: np.ndarray) -> tuple[int, int, int, int, int]:
    if len(bits) < HEADER_BITS:
        raise StreamHeaderError(f"stream too short for a header: {len(bits)} bits")
    if _read_field(bits, 0, 32) != MAGIC:
        raise StreamHeaderError("bad stream magic")
    width = _read_field(bits, 32, 16)
    height = _read_field(bits, 48, 16)
    channels = _read_field(bits, 64, 8)
    quality = _read_field(bits, 72, 8)
    row_count = _read_field(bits, 80, 16)
    if width < 1 or height < 1:
        raise StreamHeaderError(f"bad dimensions {width}x{height}")
    if channels not in (1, 3):
        raise StreamHeaderError(f"bad channel count {channels}")
    if not 1 <= quality <= 100:
        raise StreamHeaderError(f"bad quality {quality}")
    expected_rows = channels * math.ceil(height / 8)
    if row_count != expected_rows:
        raise StreamHeaderError(f"row count {row_count} inconsistent with dimensions")
    return width, height, channels, quality, row_count


def _pad_to_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return np.pad(plane, ((0, -h % 8), (0, -w % 8)), mode="edge")


def _plane_to_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def _blocks_to_plane(blocks: np.ndarray) -> np.ndarray:
    by, bx = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(by * 8, bx * 8)


def encode_region(region: Image, quality: int) -> RegionBitstream:
    """Compress a rectangular crop at the given quality factor.

    The crop is edge-padded to 8-pixel multiples; padding pixels are cropped
    again on decode and never counted in masks. The reported bit length is
    exact.
    """
    table = quant_table(quality)
    rows_per_channel = math.ceil(region.height / 8)
    row_count = region.channels * rows_per_channel
    if region.width > 0xFFFF or region.height > 0xFFFF or row_count > 0xFFFF:
        raise DomainError("region dimensions exceed the 16-bit header fields")
    writer = _BitWriter()
    writer.write(MAGIC, 32)
    writer.write(region.width, 16)
    writer.write(region.height, 16)
    writer.write(region.channels, 8)
    writer.write(quality, 8)
    writer.write(row_count, 16)

    row_payloads: list[list[int]] = []
    for c in range(region.channels):
        plane = _pad_to_blocks(region.samples[:, :, c].astype(np.float64) - 128.0)
        blocks = _plane_to_blocks(plane)
        spectra = dctn(blocks, axes=(-2, -1), norm="ortho")
        quantized = np.sign(spectra) * np.floor(np.abs(spectra) / table + 0.5)
        scan = quantized.reshape(blocks.shape[0], blocks.shape[1], 64)[:, :, ZIGZAG]
        scan = scan.astype(np.int64)
        for by in range(blocks.shape[0]):
            row_writer = _BitWriter()
            dc_prev = 0  # DC prediction resets per row so rows decode independently
            for bx in range(blocks.shape[1]):
                dc_prev = _encode_block(row_writer, scan[by, bx], dc_prev)
            row_payloads.append(row_writer.bits)

    for payload in row_payloads:
        writer.write(ROW_MARKER, 16)
        writer.write(len(payload), 24)
        writer.bits.extend(payload)
    return RegionBitstream(np.array(writer.bits, dtype=np.uint8))


_MARKER_PATTERN = np.array([(ROW_MARKER >> i) & 1 for i in range(15, -1, -1)], dtype=np.uint8)


def _find_marker(bits: np.ndarray, start: int) -> Optional[int]:
    if len(bits) - start < 16:
        return None
    windows = np.lib.stride_tricks.sliding_window_view(bits[start:], 16)
    hits = np.nonzero((windows == _MARKER_PATTERN).all(axis=1))[0]
    return start + int(hits[0]) if len(hits) else None


def decode_region(stream: RegionBitstream) -> Image:
    """Total decoder: corrupt payloads degrade row by row, never raise.

    On a code violation inside a row the remaining blocks of that row fall
    back to mid-gray and decoding resynchronizes at the next marker; rows
    whose structural fields are unlocatable stay mid-gray.
    """
    width, height, channels, quality, row_count = _parse_header(stream.bits)
    table = quant_table(quality)
    bits = stream.bits.tolist()
    total = len(bits)
    rows_per_channel = math.ceil(height / 8)
    cols = math.ceil(width / 8)

    # all-zero coefficients decode to flat mid-gray, the fill value
    coeffs = np.zeros((row_count, cols, 64), dtype=np.int64)
    pos = HEADER_BITS
    for row_idx in range(row_count):
        if pos + 40 > total:
            break
        if _read_field(stream.bits, pos, 16) != ROW_MARKER:
            found = _find_marker(stream.bits, pos + 1)
            if found is None:
                break
            pos = found
            if pos + 40 > total:
                break
        length = _read_field(stream.bits, pos + 16, 24)
        payload_start = pos + 40
        payload_end = min(payload_start + length, total)
        reader = _BitReader(bits, payload_start, payload_end)
        dc_prev = 0
        try:
            for bx in range(cols):
                block, dc_prev = _decode_block(reader, dc_prev)
                coeffs[row_idx, bx] = block
        except _RowViolation:
            coeffs[row_idx, bx:] = 0  # remainder of the row falls back to mid-gray
        pos = payload_start + length

    dezig = np.zeros_like(coeffs)
    dezig[:, :, ZIGZAG] = coeffs
    out = np.empty((height, width, channels), dtype=np.uint8)
    for c in range(channels):
        rows = dezig[c * rows_per_channel : (c + 1) * rows_per_channel]
        blocks = (rows.reshape(rows_per_channel, cols, 8, 8) * table).astype(np.float64)
        plane = _blocks_to_plane(idctn(blocks, axes=(-2, -1), norm="ortho")) + 128.0
        plane = np.clip(np.floor(plane + 0.5), 0, 255)
        out[:, :, c] = plane[:height, :width].astype(np.uint8)
    return Image(out)


# ---------------------------------------------------------------------------
# Raw (uncompressed) mode


def encode_region_raw(region: Image) -> np.ndarray:
    """Serialize a crop as plain 8-bit samples; bit errors hit samples directly."""
    return np.unpackbits(region.samples.reshape(-1))


def decode_region_raw(bits: np.ndarray, width: int, height: int, channels: int) -> Image:
    expected = width * height * channels * 8
    if len(bits) != expected:
        raise DomainError(f"raw stream holds {len(bits)} bits, expected {expected}")
    samples = np.packbits(np.asarray(bits, dtype=np.uint8))
    return Image(samples.reshape(height, width, channels))


# ---------------------------------------------------------------------------
# Two-rectangle semantic source coding


@dataclass
class SemanticStreams:
    """Streams over the two minimum rectangles: treated content and the rest."""

    star: tuple[RegionBitstream, Rect]
    rest: Optional[tuple[RegionBitstream, Rect]]

    @property
    def total_bits(self) -> int:
        n = self.star[0].bit_length
        if self.rest is not None:
            n += self.rest[0].bit_length
        return n


def semantic_encode(
    img: Image,
    star_mask: RegionMask,
    rest_masks: Sequence[RegionMask],
    quality_target: int,
    quality_base: int,
) -> SemanticStreams:
    """Encode the treated rectangle at the target quality, the rest at the base.

    Both sides cover the minimum bounding rectangle of their masks; total
    source bits are the sum of the two stream lengths.
    """
    if star_mask.empty:
        raise DomainError("star mask is empty")
    rest_union = union_masks(rest_masks) if rest_masks else RegionMask(np.zeros_like(star_mask.bits))
    if (star_mask.bits & rest_union.bits).any():
        raise DomainError("star and rest masks overlap")
    star_rect = min_bounding_rect(star_mask)
    star_stream = encode_region(crop(img, star_rect), quality_target)
    rest: Optional[tuple[RegionBitstream, Rect]] = None
    if not rest_union.empty:
        rest_rect = min_bounding_rect(rest_union)
        rest = (encode_region(crop(img, rest_rect), quality_base), rest_rect)
    return SemanticStreams(star=(star_stream, star_rect), rest=rest)


def semantic_decode(
    base: Image,
    star: tuple[RegionBitstream, Rect],
    star_mask: RegionMask,
    rest: Optional[tuple[RegionBitstream, Rect]],
    rest_mask: Optional[RegionMask],
) -> Image:
    """Decode both rectangles and keep only mask-aligned content of each."""
    layers = [(star[1], decode_region(star[0]), star_mask)]
    if rest is not None:
        if rest_mask is None:
            raise DomainError("rest stream given without a rest mask")
        layers.append((rest[1], decode_region(rest[0]), rest_mask))
    return composite_layers(base, layers)
