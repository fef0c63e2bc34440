"""FeatureMap production: a deterministic toy convolutional extractor plus a
binary file format (FMAP) for externally computed activations.

The toy extractor stands in for a real CNN backbone so the pipeline runs
end-to-end on a desk: random (seeded) 3x3 convolutions, ReLU, and 2x2 average
pooling per stage, no bias terms and no normalization, all in float32 with a
fixed accumulation order. Real activations exported to FMAP files are
first-class citizens; everything downstream treats both identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .core import FeatureMap, ImageBuffer, Vector, uniform_draws

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
_HEADER = struct.Struct("<4sHIII")  # magic, version, C, H, W

WEIGHT_LOW = -0.1
WEIGHT_HIGH = 0.1


class FeatureMapFormatError(ValueError):
    """Base class for FMAP file format violations."""


class BadMagicError(FeatureMapFormatError):
    pass


class UnsupportedVersionError(FeatureMapFormatError):
    pass


class TruncatedFileError(FeatureMapFormatError):
    pass


class NonFinitePayloadError(FeatureMapFormatError):
    pass


@dataclass(frozen=True)
class ToyExtractorConfig:
    """Stage plan for the toy extractor.

    Weights are drawn from a single SplitMix64 stream seeded by ``seed``:
    uniform in [-0.1, 0.1), cast to float32, consumed stage by stage in
    row-major (out-channel, in-channel, ky, kx) order.
    """

    seed: int = 0
    channel_plan: tuple[int, ...] = (8, 16, 32)

    def __post_init__(self):
        if len(self.channel_plan) == 0:
            raise ValueError("channel_plan must name at least one stage")
        if any(c < 1 for c in self.channel_plan):
            raise ValueError("all stage channel counts must be >= 1")

    @property
    def stages(self) -> int:
        return len(self.channel_plan)

    @property
    def min_side(self) -> int:
        return 2 ** self.stages


def stage_weights(cfg: ToyExtractorConfig) -> list[np.ndarray]:
    """Per-stage (C_out, C_in, 3, 3) float32 weight tensors for the config."""
    plan = [3, *cfg.channel_plan]
    counts = [plan[i + 1] * plan[i] * 9 for i in range(cfg.stages)]
    draws = uniform_draws(cfg.seed, sum(counts), WEIGHT_LOW, WEIGHT_HIGH).astype(np.float32)
    out = []
    pos = 0
    for i, count in enumerate(counts):
        out.append(draws[pos:pos + count].reshape(plan[i + 1], plan[i], 3, 3))
        pos += count
    return out


def extract(img: ImageBuffer, cfg: ToyExtractorConfig = ToyExtractorConfig()) -> FeatureMap:
    """Run the toy extractor: per stage conv(3x3, zero pad 1) -> ReLU -> 2x2 avg pool.

    Input pixels are pre-scaled to [0, 1]. Output shape is
    (channel_plan[-1], side // 2**stages, side // 2**stages).
    """
    if img.width != img.height:
        raise ValueError(f"extract requires a square image, got {img.width}x{img.height}")
    if img.width < cfg.min_side:
        raise ValueError(
            f"image too small: side {img.width} < 2**stages = {cfg.min_side}"
        )
    x = np.ascontiguousarray(
        (img.data.astype(np.float32) / np.float32(255.0)).transpose(2, 0, 1)
    )
    for w in stage_weights(cfg):
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        x = _kernels.conv3x3_relu(xp, w)
        x = np.ascontiguousarray(_kernels.avgpool2x2(x))
    return FeatureMap(x)


# ---------------------------------------------------------------------------
# FMAP binary format
# ---------------------------------------------------------------------------
# Layout: magic "FMAP" | version u16 LE | C, H, W u32 LE | C*H*W float32 LE
# values in channel-major (C, then H, then W) order. 18-byte header.

def write_feature_map(fm: FeatureMap, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(FMAP_MAGIC, FMAP_VERSION, fm.channels, fm.height, fm.width)
    payload = np.ascontiguousarray(fm.data, dtype="<f4").tobytes()
    path.write_bytes(header + payload)


def read_feature_map(path) -> FeatureMap:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: truncated before magic")
    if raw[:4] != FMAP_MAGIC:
        raise BadMagicError(f"{path}: not a feature map file")
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: truncated header")
    _, version, c, h, w = _HEADER.unpack_from(raw)
    if version != FMAP_VERSION:
        raise UnsupportedVersionError(f"{path}: unknown format version {version}")
    if c < 1 or h < 1 or w < 1:
        raise FeatureMapFormatError(f"{path}: invalid dimensions {c}x{h}x{w}")
    expected = _HEADER.size + 4 * c * h * w
    if len(raw) < expected:
        raise TruncatedFileError(
            f"{path}: truncated payload ({len(raw)} bytes, expected {expected})"
        )
    if len(raw) > expected:
        raise FeatureMapFormatError(f"{path}: trailing data after payload")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    if not np.isfinite(data).all():
        raise NonFinitePayloadError(f"{path}: non-finite values in payload")
    return FeatureMap(data.astype(np.float32))


def write_vector(v: Vector, path) -> None:
    """Store a 1-D embedding as a (dim, 1, 1) FMAP tensor."""
    arr = np.asarray(v, dtype=np.float32).reshape(-1, 1, 1)
    write_feature_map(FeatureMap(arr), path)


def read_vector(path) -> np.ndarray:
    fm = read_feature_map(path)
    if fm.height != 1 or fm.width != 1:
        raise FeatureMapFormatError(f"{path}: expected a (dim, 1, 1) vector tensor")
    return fm.data.reshape(-1).astype(np.float64)
