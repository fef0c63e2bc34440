"""Partition pooling: global average pooling plus regular ("n+n") and dense
("n x n") partitions of a feature map into part-level vectors, with optional
linear dimension reduction and descriptor assembly.

A regular partition pools n full-width horizontal stripes and n full-height
vertical stripes (2n parts, two passes over one immutable map); a dense
partition pools an n-by-n grid (n^2 parts, row-major). Parts are unweighted.
Uneven divisions use floor boundaries floor(i*H/n), which makes every
strategy total and reproducible on any map size >= n.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FeatureMap, Vector, ensure_vector, uniform_draws
from .features import FeatureMapFormatError, read_feature_map, write_feature_map

REGULAR = "regular"
DENSE = "dense"
MODES = ("global_only", "parts_only", "concat")

_STRATEGY_RE = re.compile(r"^(\d+)([+x])(\d+)$")


@dataclass(frozen=True)
class PartitionStrategy:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (REGULAR, DENSE):
            raise ValueError(f"kind must be '{REGULAR}' or '{DENSE}'")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def num_parts(self) -> int:
        return 2 * self.n if self.kind == REGULAR else self.n * self.n

    def __str__(self) -> str:
        sep = "+" if self.kind == REGULAR else "x"
        return f"{self.n}{sep}{self.n}"


def parse_strategy(text: str) -> PartitionStrategy:
    """Parse "a+a" (regular) or "axa" (dense) strategy strings.

    Both halves must be equal integers >= 1; anything else is rejected with
    the offending token named.
    """
    m = _STRATEGY_RE.match(text.strip()) if text else None
    if not m:
        raise ValueError(f"malformed partition strategy {text!r}: expected 'n+n' or 'nxn'")
    a, sep, b = int(m.group(1)), m.group(2), int(m.group(3))
    if a != b:
        raise ValueError(f"malformed partition strategy {text!r}: halves differ ({a} vs {b})")
    if a < 1:
        raise ValueError(f"malformed partition strategy {text!r}: n must be >= 1")
    return PartitionStrategy(REGULAR if sep == "+" else DENSE, a)


def _region_mean(data: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    return data[:, r0:r1, c0:c1].mean(axis=(1, 2), dtype=np.float64)


def _bounds(extent: int, n: int) -> list[int]:
    return [(i * extent) // n for i in range(n + 1)]


def global_pool(fm: FeatureMap) -> Vector:
    """Per-channel mean over all spatial cells (GAP); dim = C."""
    return _region_mean(fm.data, 0, fm.height, 0, fm.width)


def pool_parts(fm: FeatureMap, strategy: PartitionStrategy) -> list[Vector]:
    """Average each partition region into one part-level vector of dim C.

    Dense(n): grid cell (i, j) covers rows [floor(iH/n), floor((i+1)H/n)) and
    the matching column band, emitted row-major. Regular(n): the n horizontal
    stripes (full width) followed by the n vertical stripes (full height).
    """
    n = strategy.n
    if n > min(fm.height, fm.width):
        raise ValueError(
            f"partition finer than feature map: n={n} exceeds "
            f"min(H, W)={min(fm.height, fm.width)}"
        )
    data = fm.data
    rows = _bounds(fm.height, n)
    cols = _bounds(fm.width, n)
    parts: list[Vector] = []
    if strategy.kind == DENSE:
        for i in range(n):
            for j in range(n):
                parts.append(_region_mean(data, rows[i], rows[i + 1], cols[j], cols[j + 1]))
    else:
        for i in range(n):
            parts.append(_region_mean(data, rows[i], rows[i + 1], 0, fm.width))
        for j in range(n):
            parts.append(_region_mean(data, 0, fm.height, cols[j], cols[j + 1]))
    return parts


@dataclass(frozen=True, eq=False)
class Projection:
    """A fixed linear map reducing part vectors (e.g. 2048 -> 512).

    Weights are untrained: either seeded (SplitMix64 draws, row-major fill,
    uniform in [-0.1, 0.1)) or loaded from an FMAP file written by
    :meth:`save` (shape C=1, H=out_dim, W=in_dim) so externally trained
    reducers can be plugged in.
    """

    weights: np.ndarray
    source: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float32)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("projection weights must be a (out_dim, in_dim) matrix")
        if not np.isfinite(w).all():
            raise ValueError("projection weights must be finite")
        w = np.ascontiguousarray(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def seeded(cls, in_dim: int, out_dim: int = 512, seed: int = 0) -> "Projection":
        if in_dim < 1 or out_dim < 1:
            raise ValueError("projection dims must be >= 1")
        w = uniform_draws(seed, out_dim * in_dim, -0.1, 0.1).astype(np.float32)
        return cls(w.reshape(out_dim, in_dim), source=f"seeded:{seed}")

    @classmethod
    def loaded(cls, path) -> "Projection":
        fm = read_feature_map(path)
        if fm.channels != 1:
            raise FeatureMapFormatError(
                f"{path}: projection weights must be stored as C=1, H=out, W=in"
            )
        return cls(fm.data[0], source=str(path))

    def save(self, path) -> None:
        write_feature_map(FeatureMap(self.weights[np.newaxis, :, :].astype(np.float32)), path)


def project(v: Vector, p: Projection) -> Vector:
    """Apply the linear map: out[i] = sum_j weights[i][j] * v[j]."""
    v = ensure_vector(v)
    if v.shape[0] != p.in_dim:
        raise ValueError(f"vector dim {v.shape[0]} does not match projection in_dim {p.in_dim}")
    return p.weights.astype(np.float64) @ v


@dataclass(frozen=True, eq=False)
class Descriptor:
    """One retrieval embedding: a global vector plus ordered part vectors."""

    global_vec: Vector
    parts: tuple[Vector, ...]
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def build_descriptor(
    fm: FeatureMap,
    strategy: PartitionStrategy,
    mode: str = "concat",
    projection: Projection | None = None,
) -> Descriptor:
    """Pool the map globally and per part; optionally project the parts.

    The global vector always stays at the map's native channel width (the
    test-time full-width feature); only part vectors pass through the
    projection.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    parts = pool_parts(fm, strategy)
    if projection is not None:
        parts = [project(p, projection) for p in parts]
    return Descriptor(global_vec=global_pool(fm), parts=tuple(parts), mode=mode)


def flatten_embedding(d: Descriptor) -> Vector:
    """Concatenate the descriptor's blocks: global first, then parts in order."""
    if d.mode == "global_only":
        return np.array(d.global_vec, dtype=np.float64)
    if d.mode == "parts_only":
        return np.concatenate([np.asarray(p, dtype=np.float64) for p in d.parts])
    blocks = [np.asarray(d.global_vec, dtype=np.float64)]
    blocks.extend(np.asarray(p, dtype=np.float64) for p in d.parts)
    return np.concatenate(blocks)
