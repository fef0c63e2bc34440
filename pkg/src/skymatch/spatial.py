"""Crop-and-rotate orientation alignment.

Square images are masked to their inscribed circle (radius = half the side
length) and rotated so every view shares one reference heading. Because a
rotation about the center maps the inscribed circle onto itself, rotating a
cropped image never drags corner content into view, which is what makes the
circular crop the right companion to rotation.

Angle convention: positive angles rotate image content counterclockwise with
the y-axis pointing up (equivalently: a pixel on the right edge moves toward
the top edge). Quarter-turn angles use exact trigonometric constants so that
90/180/270-degree rotations are exact pixel permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ImageBuffer

INTERPOLATIONS = ("nearest", "bilinear")

# 54 views per orbit, so one index step is 360/54 degrees by default; datasets
# with a different orbit density override degrees_per_index.
DEFAULT_DEGREES_PER_INDEX = 360.0 / 54.0

_EXACT_QUARTER = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


@dataclass(frozen=True)
class RotationPolicy:
    """How view indices/headings translate into image rotations."""

    degrees_per_index: float = DEFAULT_DEGREES_PER_INDEX
    reference_heading_deg: float = 0.0
    interpolation: str = "bilinear"
    fill: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if not math.isfinite(self.degrees_per_index):
            raise ValueError("degrees_per_index must be finite")
        if not (0.0 <= self.reference_heading_deg < 360.0):
            raise ValueError("reference_heading_deg must lie in [0, 360)")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        if len(self.fill) != 3 or any(not (0 <= v <= 255) for v in self.fill):
            raise ValueError("fill must be an (R, G, B) triple in [0, 255]")


def normalize_angle(angle_deg: float) -> float:
    """Reduce an angle to the interval (-180, 180]."""
    a = math.fmod(angle_deg, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def _require_square(img: ImageBuffer, op: str) -> int:
    if img.width != img.height:
        raise ValueError(f"{op} requires a square image, got {img.width}x{img.height}")
    return img.width


def _trig(angle_deg: float) -> tuple[float, float]:
    # Exact constants at quarter turns keep those rotations pure permutations.
    if angle_deg == math.floor(angle_deg) and int(angle_deg) % 90 == 0:
        return _EXACT_QUARTER[(int(angle_deg) // 90) % 4]
    rad = math.radians(angle_deg)
    return math.cos(rad), math.sin(rad)


def circular_crop(img: ImageBuffer, fill: tuple[int, int, int] = (0, 0, 0)) -> ImageBuffer:
    """Keep pixels strictly inside the inscribed circle; set the rest to fill.

    The circle is centered at (w/2 - 0.5, h/2 - 0.5) with radius w/2; a pixel
    survives iff its distance from the center is strictly less than w/2.
    """
    side = _require_square(img, "circular_crop")
    if side < 2:
        raise ValueError("circular_crop requires side >= 2")
    c = (side - 1) / 2.0
    ax = np.arange(side, dtype=np.float64) - c
    r2 = ax[None, :] ** 2 + ax[:, None] ** 2
    out = img.data.copy()
    out[r2 >= (side / 2.0) ** 2] = np.asarray(fill, dtype=np.uint8)
    return ImageBuffer(out)


def rotate(img: ImageBuffer, angle_deg: float, policy: RotationPolicy = RotationPolicy()) -> ImageBuffer:
    """Rotate image content by angle_deg about the center (see module docstring).

    Sample points outside the inscribed circle take policy.fill, so the output
    is always confined to the circular support; rotate(img, 0) equals
    circular_crop(img, policy.fill) bit for bit.
    """
    side = _require_square(img, "rotate")
    if side < 2:
        raise ValueError("rotate requires side >= 2")
    if not math.isfinite(angle_deg):
        raise ValueError("rotation angle must be finite")
    cos_t, sin_t = _trig(normalize_angle(angle_deg))
    fill = np.asarray(policy.fill, dtype=np.uint8)
    out = _kernels.rotate_resample(
        img.data, cos_t, sin_t, policy.interpolation == "bilinear", fill
    )
    return ImageBuffer(out)


def align_view(img: ImageBuffer, view_index: int, policy: RotationPolicy = RotationPolicy()) -> ImageBuffer:
    """Crop to the inscribed circle, then undo the view's indexed orientation.

    The rotation angle is (reference_heading - view_index * degrees_per_index),
    normalized to (-180, 180].
    """
    if view_index < 0 or view_index != int(view_index):
        raise ValueError("view_index must be a nonnegative integer")
    angle = normalize_angle(
        policy.reference_heading_deg - view_index * policy.degrees_per_index
    )
    return rotate(circular_crop(img, policy.fill), angle, policy)


def align_by_heading(img: ImageBuffer, heading_deg: float, policy: RotationPolicy = RotationPolicy()) -> ImageBuffer:
    """Crop, then rotate a view with a known compass heading onto the reference."""
    if not math.isfinite(heading_deg):
        raise ValueError("heading must be finite")
    angle = normalize_angle(policy.reference_heading_deg - heading_deg)
    return rotate(circular_crop(img, policy.fill), angle, policy)
