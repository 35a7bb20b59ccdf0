import numpy as np
import pytest

from semtx.imaging import Image, RegionMask


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, height, width, channels=1):
    return Image(rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8))


def mask_from_coords(height, width, coords):
    bits = np.zeros((height, width), dtype=bool)
    for y, x in coords:
        bits[y, x] = True
    return RegionMask(bits)
