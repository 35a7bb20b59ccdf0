"""Rasters, region masks, and the geometry behind region-wise coding.

Covers bit-exact PGM/PPM I/O, grid pre-segmentation of an object mask,
minimum bounding rectangles, mask-driven compositing of independently
decoded rectangles, and the uniform-noise background fill used when the
background is not transmitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, RasterFormatError


@dataclass
class Image:
    """8-bit raster; samples are row-major and channel-interleaved."""

    samples: np.ndarray  # uint8, shape (height, width, channels)

    def __post_init__(self):
        a = np.asarray(self.samples)
        if a.ndim == 2:
            a = a[:, :, np.newaxis]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise DomainError(f"samples must be HxWx1 or HxWx3, got shape {a.shape}")
        if a.size == 0:
            raise DomainError("image must contain at least one pixel")
        if a.dtype != np.uint8:
            if not np.issubdtype(a.dtype, np.integer):
                raise DomainError(f"samples must be integers, got dtype {a.dtype}")
            if a.min() < 0 or a.max() > 255:
                raise DomainError("sample values must lie in [0, 255]")
            a = a.astype(np.uint8)
        self.samples = a

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    @property
    def bit_length(self) -> int:
        """Raw size in bits: width x height x channels x 8."""
        return self.samples.size * 8

    def copy(self) -> "Image":
        return Image(self.samples.copy())

    @staticmethod
    def flat(height: int, width: int, value: int = 128, channels: int = 1) -> "Image":
        return Image(np.full((height, width, channels), value, dtype=np.uint8))


@dataclass
class RegionMask:
    """Boolean pixel mask tied to the dimensions of a companion image."""

    bits: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        a = np.asarray(self.bits)
        if a.ndim != 2:
            raise DomainError(f"mask must be 2-D, got shape {a.shape}")
        self.bits = a.astype(bool)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def empty(self) -> bool:
        return not self.bits.any()

    def union(self, other: "RegionMask") -> "RegionMask":
        self._check_same_shape(other)
        return RegionMask(self.bits | other.bits)

    def complement(self) -> "RegionMask":
        return RegionMask(~self.bits)

    def matches(self, img: Image) -> bool:
        return self.bits.shape == (img.height, img.width)

    def _check_same_shape(self, other: "RegionMask") -> None:
        if self.bits.shape != other.bits.shape:
            raise DomainError("mask dimensions differ")

    @staticmethod
    def empty_like(img: Image) -> "RegionMask":
        return RegionMask(np.zeros((img.height, img.width), dtype=bool))

    @staticmethod
    def full(height: int, width: int) -> "RegionMask":
        return RegionMask(np.ones((height, width), dtype=bool))


def union_masks(masks: Iterable[RegionMask]) -> RegionMask:
    masks = list(masks)
    if not masks:
        raise DomainError("need at least one mask")
    out = masks[0].bits.copy()
    for m in masks[1:]:
        if m.bits.shape != out.shape:
            raise DomainError("mask dimensions differ")
        out |= m.bits
    return RegionMask(out)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: offsets (x0, y0), extent (w, h)."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise DomainError(f"rect extent must be >= 1, got {self.w}x{self.h}")
        if self.x0 < 0 or self.y0 < 0:
            raise DomainError("rect offsets must be non-negative")


@dataclass
class RegionSet:
    """Ordered (region_id, mask) pairs with pairwise-disjoint masks."""

    regions: list[tuple[int, RegionMask]]

    def __post_init__(self):
        if not self.regions:
            raise DomainError("region set must not be empty")
        ids = [rid for rid, _ in self.regions]
        if len(set(ids)) != len(ids):
            raise DomainError("region ids must be unique")
        if any(rid < 1 for rid in ids):
            raise DomainError("region ids must be positive")
        shape = self.regions[0][1].bits.shape
        cover = np.zeros(shape, dtype=np.int32)
        for rid, mask in self.regions:
            if mask.bits.shape != shape:
                raise DomainError("all region masks must share dimensions")
            if mask.empty:
                raise DomainError(f"region {rid} is empty")
            cover += mask.bits
        if (cover > 1).any():
            raise DomainError("region masks overlap")

    def __len__(self) -> int:
        return len(self.regions)

    def ids(self) -> list[int]:
        return [rid for rid, _ in self.regions]

    def mask(self, region_id: int) -> RegionMask:
        for rid, mask in self.regions:
            if rid == region_id:
                return mask
        raise DomainError(f"no region with id {region_id}")

    def union_mask(self) -> RegionMask:
        return union_masks(m for _, m in self.regions)


# ---------------------------------------------------------------------------
# PGM / PPM input and output


def _skip_header_space(buf: bytes, pos: int) -> int:
    """Advance past whitespace and '#' comments inside a PNM header."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    return pos


def _header_token(buf: bytes, pos: int, what: str) -> tuple[bytes, int]:
    pos = _skip_header_space(buf, pos)
    if pos >= len(buf):
        raise RasterFormatError(f"missing {what} in header at byte offset {pos}")
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def _header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _header_token(buf, pos, what)
    if not token.isdigit():
        raise RasterFormatError(
            f"bad {what} {token!r} at byte offset {end - len(token)}"
        )
    return int(token), end


def load_raster(path: str | Path) -> Image:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255, bit exactly."""
    buf = Path(path).read_bytes()
    magic, pos = _header_token(buf, 0, "magic")
    if magic not in (b"P5", b"P6"):
        raise RasterFormatError(f"not a binary PGM/PPM (magic {magic!r} at byte offset 0)")
    channels = 1 if magic == b"P5" else 3
    width, pos = _header_int(buf, pos, "width")
    height, pos = _header_int(buf, pos, "height")
    maxval, pos = _header_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise RasterFormatError(f"bad dimensions {width}x{height} at byte offset {pos}")
    if maxval != 255:
        raise RasterFormatError(f"unsupported maxval {maxval} at byte offset {pos}")
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise RasterFormatError(f"missing whitespace after maxval at byte offset {pos}")
    pos += 1  # exactly one whitespace byte separates header and payload
    expected = width * height * channels
    payload = buf[pos : pos + expected]
    if len(payload) < expected:
        raise RasterFormatError(
            f"truncated payload: expected {expected} bytes, file ends at byte offset {len(buf)}"
        )
    samples = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(samples.copy())


def save_raster(img: Image, path: str | Path) -> None:
    """Write the canonical single-whitespace header form of P5/P6."""
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    Path(path).write_bytes(header + img.samples.tobytes())


def load_mask(path: str | Path) -> RegionMask:
    """Read a P5 mask: sample > 0 means "in mask"."""
    img = load_raster(path)
    if img.channels != 1:
        raise RasterFormatError("masks must be single-channel P5 files")
    return RegionMask(img.samples[:, :, 0] > 0)


def save_mask(mask: RegionMask, path: str | Path) -> None:
    save_raster(Image(mask.bits.astype(np.uint8) * 255), path)


# ---------------------------------------------------------------------------
# Geometry


def min_bounding_rect(*masks: RegionMask) -> Rect:
    """Tightest axis-aligned rectangle containing every set pixel of the union."""
    if not masks:
        raise DomainError("need at least one mask")
    union = union_masks(masks)
    if union.empty:
        raise DomainError("mask union is empty")
    rows = np.nonzero(union.bits.any(axis=1))[0]
    cols = np.nonzero(union.bits.any(axis=0))[0]
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return Rect(x0=x0, y0=y0, w=x1 - x0 + 1, h=y1 - y0 + 1)


def _split_extents(total: int, parts: int) -> list[tuple[int, int]]:
    # remainder pixels are absorbed by the last part
    base = total // parts
    offsets = []
    pos = 0
    for i in range(parts):
        size = base if i < parts - 1 else total - base * (parts - 1)
        offsets.append((pos, size))
        pos += size
    return offsets


def grid_presegment(object_mask: RegionMask, rows: int, cols: int) -> RegionSet:
    """Split the object's bounding box into a rows x cols grid of regions.

    Cells are intersected with the mask; empty intersections are dropped and
    the survivors are renumbered 1..S in row-major order.
    """
    if object_mask.empty:
        raise DomainError("object mask is empty")
    if rows < 1 or cols < 1:
        raise DomainError("rows and cols must be >= 1")
    box = min_bounding_rect(object_mask)
    regions: list[tuple[int, RegionMask]] = []
    next_id = 1
    for ry, rh in _split_extents(box.h, rows):
        for cx, cw in _split_extents(box.w, cols):
            cell = np.zeros_like(object_mask.bits)
            if rh > 0 and cw > 0:
                y0 = box.y0 + ry
                x0 = box.x0 + cx
                cell[y0 : y0 + rh, x0 : x0 + cw] = True
            cell &= object_mask.bits
            if cell.any():
                regions.append((next_id, RegionMask(cell)))
                next_id += 1
    return RegionSet(regions)


def crop(img: Image, rect: Rect) -> Image:
    if rect.x0 + rect.w > img.width or rect.y0 + rect.h > img.height:
        raise DomainError(f"rect {rect} exceeds image {img.width}x{img.height}")
    return Image(img.samples[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w].copy())


def composite_layers(
    base: Image, layers: Sequence[tuple[Rect, Image, RegionMask]]
) -> Image:
    """Overlay decoded rectangles onto a base canvas, gated by their masks.

    Masks must be pairwise disjoint and lie inside their rectangles; pixels
    outside every mask keep the base content.
    """
    out = base.samples.copy()
    cover = np.zeros((base.height, base.width), dtype=np.int32)
    for rect, decoded, mask in layers:
        if not mask.matches(base):
            raise DomainError("layer mask does not match the base image")
        if (decoded.height, decoded.width) != (rect.h, rect.w):
            raise DomainError("decoded layer does not match its rect")
        if decoded.channels != base.channels:
            raise DomainError("layer channel count differs from base")
        cover += mask.bits
        ys, xs = np.nonzero(mask.bits)
        if len(ys) == 0:
            continue
        if (
            ys.min() < rect.y0
            or xs.min() < rect.x0
            or ys.max() >= rect.y0 + rect.h
            or xs.max() >= rect.x0 + rect.w
        ):
            raise DomainError("mask has pixels outside its rect")
        out[ys, xs, :] = decoded.samples[ys - rect.y0, xs - rect.x0, :]
    if (cover > 1).any():
        raise DomainError("layer masks overlap")
    return Image(out)


def composite(
    base: Image,
    star_rect: Rect,
    star_decoded: Image,
    star_mask: RegionMask,
    rest_rect: Rect,
    rest_decoded: Image,
    rest_mask: RegionMask,
) -> Image:
    """Two-layer composite: star content, rest content, base elsewhere."""
    return composite_layers(
        base, [(star_rect, star_decoded, star_mask), (rest_rect, rest_decoded, rest_mask)]
    )


def fill_background_uniform(
    img: Image, background_mask: RegionMask, rng: np.random.Generator
) -> Image:
    """Replace background samples with uniform draws from {0..255}.

    Object pixels are untouched; identical generator state gives identical
    output.
    """
    if not background_mask.matches(img):
        raise DomainError("background mask does not match the image")
    out = img.samples.copy()
    n = background_mask.count
    if n:
        draws = rng.integers(0, 256, size=(n, img.channels), dtype=np.uint8)
        out[background_mask.bits] = draws
    return Image(out)
