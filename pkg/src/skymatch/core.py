"""Shared raster/tensor value types and elementary numeric helpers.

Pixel data is stored as 8-bit interleaved RGB; all transforms compute in
real arithmetic and re-quantize only at module boundaries, with a fixed
rounding rule (half away from zero) so results are bit-reproducible.
All value types are treated as immutable after construction (their arrays
are marked read-only), which makes every operation in this package a pure
function that is safe to call from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_SIDE = 65535  # wider rasters are out of scope

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53

# Annotation alias: part-level and gallery embeddings are plain 1-D float
# arrays; invariants (finite, fixed length) are enforced where they are made.
Vector = np.ndarray


class DegenerateImageError(ValueError):
    """Raised when an image has zero mean luminance (all-black input)."""


# ---------------------------------------------------------------------------
# Deterministic PRNG (SplitMix64)
# ---------------------------------------------------------------------------

def _mix64(z: int) -> int:
    z &= _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    z ^= z >> 31
    return z


class SplitMix64:
    """Counter-based SplitMix64 stream.

    Output i (0-based) equals mix64(seed + (i+1) * GAMMA), so the same
    sequence can be produced incrementally (this class) or in bulk
    (:func:`uniform_draws`). Chosen because it is fully specified in a few
    lines and reproduces bit-for-bit on every platform.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix64(self._state)

    def next_float(self) -> float:
        """Uniform in [0, 1), using the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def next_uniform(self, lo: float, hi: float) -> float:
        return lo + self.next_float() * (hi - lo)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.next_float() * n)


def derive_seed(base: int, *keys: int) -> int:
    """Fold integer keys into a base seed, left to right.

    Used to carve independent, documented sub-streams out of one user seed
    (e.g. per class and per view in the synthetic scene generator).
    """
    s = int(base) & _MASK64
    for k in keys:
        s = _mix64(((s ^ _mix64(int(k) & _MASK64)) + _GAMMA) & _MASK64)
    return s


def uniform_draws(seed: int, count: int, lo: float, hi: float) -> np.ndarray:
    """Vectorized equivalent of ``count`` SplitMix64.next_uniform calls.

    Bit-identical to the incremental stream with the same seed.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA)
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    u = (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return lo + u * (hi - lo)


# ---------------------------------------------------------------------------
# Elementary pixel arithmetic
# ---------------------------------------------------------------------------

def luminance(pixel) -> float:
    """Mean of the three channels of one (R, G, B) pixel, exactly (R+G+B)/3."""
    r, g, b = pixel
    for v in (r, g, b):
        if not (0 <= v <= 255):
            raise ValueError(f"channel value {v!r} outside [0, 255]")
    return (r + g + b) / 3


def clip_channel(v: float) -> int:
    """Quantize one channel value: round half away from zero, clamp to [0, 255]."""
    if not math.isfinite(v):
        raise ValueError(f"non-finite channel value {v!r}")
    r = math.floor(abs(v) + 0.5)
    if v < 0:
        r = -r
    return min(max(r, 0), 255)


def quantize_channels(values: np.ndarray) -> np.ndarray:
    """Vectorized clip_channel over a float array; returns uint8."""
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("non-finite channel values")
    r = np.copysign(np.floor(np.abs(values) + 0.5), values)
    return np.clip(r, 0.0, 255.0).astype(np.uint8)


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """An H x W RGB raster with 8-bit channels, the unit of all pixel transforms.

    ``data`` has shape (height, width, 3), dtype uint8, and is read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        a = self.data
        if not isinstance(a, np.ndarray) or a.ndim != 3 or a.shape[2] != 3:
            raise ValueError("ImageBuffer data must have shape (H, W, 3)")
        if a.dtype != np.uint8:
            raise ValueError(f"ImageBuffer data must be uint8, got {a.dtype}")
        if a.shape[0] > MAX_SIDE or a.shape[1] > MAX_SIDE:
            raise ValueError(f"image sides must not exceed {MAX_SIDE}")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @classmethod
    def from_array(cls, arr, copy: bool = True) -> "ImageBuffer":
        a = np.array(arr, dtype=np.uint8, copy=copy)
        return cls(a)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def num_pixels(self) -> int:
        return self.data.shape[0] * self.data.shape[1]

    def same_pixels(self, other: "ImageBuffer") -> bool:
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A C x H x W real-valued activation tensor (float32, finite, read-only)."""

    data: np.ndarray

    def __post_init__(self):
        a = self.data
        if not isinstance(a, np.ndarray) or a.ndim != 3:
            raise ValueError("FeatureMap data must have shape (C, H, W)")
        if a.dtype != np.float32:
            raise ValueError(f"FeatureMap data must be float32, got {a.dtype}")
        if a.size == 0:
            raise ValueError("FeatureMap must be non-empty")
        if not np.isfinite(a).all():
            raise ValueError("FeatureMap values must be finite")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @classmethod
    def from_array(cls, arr, copy: bool = True) -> "FeatureMap":
        a = np.array(arr, dtype=np.float32, copy=copy)
        return cls(a)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def ensure_vector(v, dim: int | None = None) -> np.ndarray:
    """Validate a 1-D finite float vector, returning it as float64."""
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("vector values must be finite")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected dim {dim}, got {a.shape[0]}")
    return a
