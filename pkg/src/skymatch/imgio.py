"""PNG/JPEG raster loading and saving (thin Pillow wrapper)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImageBuffer

SUFFIXES = (".png", ".jpg", ".jpeg")


def load_image(path) -> ImageBuffer:
    path = Path(path)
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return ImageBuffer(arr)


def save_image(img: ImageBuffer, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img.data, mode="RGB").save(path)
