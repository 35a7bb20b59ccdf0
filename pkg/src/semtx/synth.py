"""Synthetic test instances with controllable region importance.

Template-matching classifiers ignore pixels where all templates agree, so
planting a pattern in a chosen region of exactly one template makes that
region discriminative (or misleading, when it matches a competitor class).
The builders below construct the instances used by the test-suite and the
demo scripts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import PrototypeModel
from .imaging import Image, RegionMask, RegionSet, grid_presegment
from .seeds import substream


@dataclass
class SyntheticInstance:
    image: Image
    regions: RegionSet
    background_mask: RegionMask
    model: PrototypeModel
    target_class: int
    # ids within regions, for assertions
    discriminative_id: int | None = None
    misleading_id: int | None = None


def checker(height: int, width: int, lo: int, hi: int, cell: int = 2) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    return np.where(((yy // cell + xx // cell) % 2) == 0, lo, hi).astype(np.uint8)


def stripes(height: int, width: int, lo: int, hi: int, period: int = 2) -> np.ndarray:
    col = np.where((np.arange(height) // period) % 2 == 0, lo, hi)
    return np.tile(col[:, None], (1, width)).astype(np.uint8)


def _flat(height: int, width: int, value: int) -> np.ndarray:
    return np.full((height, width), value, dtype=np.uint8)


def two_region_instance() -> SyntheticInstance:
    """16x16 gray image, two 8x16 regions; only region 1 is discriminative."""
    h = w = 16
    base = _flat(h, w, 128)
    pattern = checker(h, 8, 40, 216)
    img = base.copy()
    img[:, :8] = pattern
    t1 = img.copy()  # class 1 carries the region-1 pattern
    t2 = base.copy()  # class 2 is flat everywhere
    model = PrototypeModel(
        templates=[Image(t1), Image(t2)], sharpness=2.0e-3
    )
    object_mask = RegionMask.full(h, w)
    regions = grid_presegment(object_mask, rows=1, cols=2)
    return SyntheticInstance(
        image=Image(img),
        regions=regions,
        background_mask=object_mask.complement(),
        model=model,
        target_class=1,
        discriminative_id=1,
    )


def dummy_region_instance() -> SyntheticInstance:
    """Two 8-aligned regions where region 2 is ignored by the classifier.

    Templates agree on region 2, regions are block-aligned, and the profile
    used with this instance must carry vanishing error rates: then region 2
    is an exact dummy of the coalition game.
    """
    inst = two_region_instance()
    return SyntheticInstance(
        image=inst.image,
        regions=inst.regions,
        background_mask=inst.background_mask,
        model=inst.model,
        target_class=1,
        discriminative_id=1,
    )


def four_region_instance() -> SyntheticInstance:
    """16x16 gray image, 2x2 grid; mixed-importance regions for estimators."""
    h = w = 16
    img = _flat(h, w, 128)
    img[:8, :8] = checker(8, 8, 30, 226)  # region 1: evidence for class 1
    img[8:, 8:] = stripes(8, 8, 0, 255)  # region 4: evidence for class 2
    img[:8, 8:] = checker(8, 8, 96, 160)  # region 2: weak evidence for class 1

    t1 = _flat(h, w, 128)
    t1[:8, :8] = img[:8, :8]
    t1[:8, 8:] = img[:8, 8:]
    t2 = _flat(h, w, 128)
    t2[8:, 8:] = img[8:, 8:]
    t3 = _flat(h, w, 128)
    model = PrototypeModel(
        templates=[Image(t1), Image(t2), Image(t3)], sharpness=2.0e-3
    )
    object_mask = RegionMask.full(h, w)
    regions = grid_presegment(object_mask, rows=2, cols=2)
    return SyntheticInstance(
        image=Image(img),
        regions=regions,
        background_mask=object_mask.complement(),
        model=model,
        target_class=1,
        discriminative_id=1,
        misleading_id=4,
    )


def six_region_instance() -> SyntheticInstance:
    """32x32 gray image with a background margin and a 2x3 object grid.

    Region 2 (top middle) carries the only class-1 evidence; region 4
    (bottom left) carries strong class-2 evidence and misleads the
    classifier when preserved sharply.
    """
    h = w = 32
    img = _flat(h, w, 128)
    img[:, :4] = 90
    img[:, 28:] = 90
    object_bits = np.zeros((h, w), dtype=bool)
    object_bits[:, 4:28] = True
    object_mask = RegionMask(object_bits)
    regions = grid_presegment(object_mask, rows=2, cols=3)  # cells 16x8, ids 1..6

    img[:16, 12:20] = checker(16, 8, 30, 226)  # region 2: discriminative
    img[16:, 4:12] = stripes(16, 8, 0, 255)  # region 4: misleading

    t1 = _flat(h, w, 128)
    t1[:, :4] = 90
    t1[:, 28:] = 90
    t2 = t1.copy()
    t3 = t1.copy()
    t1[:16, 12:20] = img[:16, 12:20]  # class 1 expects the region-2 pattern
    t2[16:, 4:12] = img[16:, 4:12]  # class 2 expects the region-4 pattern
    model = PrototypeModel(
        templates=[Image(t1), Image(t2), Image(t3)], sharpness=4.0e-3
    )
    return SyntheticInstance(
        image=Image(img),
        regions=regions,
        background_mask=object_mask.complement(),
        model=model,
        target_class=1,
        discriminative_id=2,
        misleading_id=4,
    )


def codec_corpus(count: int = 10, size: int = 48, seed: int = 71) -> list[Image]:
    """Smooth natural-looking gray images for rate/distortion checks."""
    images = []
    for index in range(count):
        rng = substream(seed, "corpus", index)
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        field = np.full((size, size), 128.0)
        for _ in range(4):
            fy, fx = rng.uniform(0.5, 3.0, size=2) / size
            amp = rng.uniform(12.0, 42.0)
            phase = rng.uniform(0.0, 2 * np.pi)
            field += amp * np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
        field += rng.normal(0.0, 2.0, size=(size, size))
        images.append(Image(np.clip(np.round(field), 0, 255).astype(np.uint8)))
    return images
