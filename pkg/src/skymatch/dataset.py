"""Dataset ingestion and deterministic synthetic multi-view scene generation.

Scanning expects the <root>/<view>/<class>/<file> layout; drone filenames
carry a trailing integer view index. Manifests persist as line-delimited
tab-separated records (path, class, view, index, heading) so every stage of
the CLI can pass them along.

The synthetic generator draws a top-down "scene" per class (textured
background, colored rectangles, one central target) and renders it once as a
north-up satellite view plus N drone views captured at known headings, each
with optional per-image color-temperature/brightness jitter and per-view
occluder rectangles. Every draw comes from SplitMix64 streams derived from
(seed, class, view slot), so identical parameters reproduce identical bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ImageBuffer, SplitMix64, derive_seed, quantize_channels
from .imgio import SUFFIXES, save_image
from .spatial import RotationPolicy, rotate

KNOWN_VIEWS = ("drone", "satellite", "ground")

_TRAILING_INT = re.compile(r"(\d+)$")


class ManifestError(ValueError):
    """Raised for malformed manifest files."""


@dataclass(frozen=True)
class ManifestRecord:
    path: str  # relative to the manifest root, posix separators
    class_label: str
    view: str
    view_index: int | None = None
    heading_deg: float | None = None

    def __post_init__(self):
        if not self.class_label:
            raise ValueError("class label must be non-empty")
        if self.view not in (*KNOWN_VIEWS, "other"):
            raise ValueError(f"unknown view {self.view!r}")
        # drone records may legitimately lack an index (unparseable filename),
        # but only drone records may carry one
        if self.view != "drone" and self.view_index is not None:
            raise ValueError("view_index is only meaningful for drone records")


@dataclass(frozen=True)
class Manifest:
    root: Path
    records: tuple[ManifestRecord, ...]
    warning_count: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def paths(self) -> list[Path]:
        return [self.root / r.path for r in self.records]


def _sorted_records(records: list[ManifestRecord]) -> tuple[ManifestRecord, ...]:
    return tuple(sorted(records, key=lambda r: (r.class_label, Path(r.path).name, r.view)))


def scan_dataset(root) -> Manifest:
    """Walk <root>/<view>/<class>/<file> into a manifest.

    View directories outside {drone, satellite, ground} map to view "other".
    Drone view indices parse from the trailing integer of the filename stem;
    unparseable names are kept with an absent index and counted as warnings.
    Record order is deterministic: class, then filename.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    records: list[ManifestRecord] = []
    warnings = 0
    for view_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        view = view_dir.name if view_dir.name in KNOWN_VIEWS else "other"
        for class_dir in sorted(p for p in view_dir.iterdir() if p.is_dir()):
            for f in sorted(p for p in class_dir.iterdir() if p.is_file()):
                if f.suffix.lower() not in SUFFIXES:
                    continue
                index = None
                if view == "drone":
                    m = _TRAILING_INT.search(f.stem)
                    if m:
                        index = int(m.group(1))
                    else:
                        warnings += 1
                records.append(
                    ManifestRecord(
                        path=f.relative_to(root).as_posix(),
                        class_label=class_dir.name,
                        view=view,
                        view_index=index,
                    )
                )
    return Manifest(root=root, records=_sorted_records(records), warning_count=warnings)


def write_manifest(manifest: Manifest, path) -> None:
    """Persist records as tab-separated lines: path, class, view, index, heading."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in manifest.records:
        idx = "" if r.view_index is None else str(r.view_index)
        heading = "" if r.heading_deg is None else repr(r.heading_deg)
        lines.append(f"{r.path}\t{r.class_label}\t{r.view}\t{idx}\t{heading}\n")
    path.write_text("".join(lines), encoding="utf-8")


def read_manifest(path) -> Manifest:
    """Inverse of write_manifest; the manifest root is the file's directory."""
    path = Path(path)
    records = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ManifestError(f"{path}:{ln}: expected 5 tab-separated fields, got {len(fields)}")
        p, label, view, idx, heading = fields
        try:
            view_index = int(idx) if idx else None
            heading_deg = float(heading) if heading else None
        except ValueError as exc:
            raise ManifestError(f"{path}:{ln}: {exc}") from exc
        try:
            records.append(
                ManifestRecord(
                    path=p, class_label=label, view=view,
                    view_index=view_index, heading_deg=heading_deg,
                )
            )
        except ValueError as exc:
            raise ManifestError(f"{path}:{ln}: {exc}") from exc
    return Manifest(root=path.parent, records=tuple(records))


# ---------------------------------------------------------------------------
# Synthetic scene generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StyleJitter:
    warm_cool_amplitude: float = 0.0
    brightness_amplitude: float = 0.0

    def __post_init__(self):
        for v in (self.warm_cool_amplitude, self.brightness_amplitude):
            if not (0.0 <= v <= 1.0):
                raise ValueError("jitter amplitudes must lie in [0, 1]")


@dataclass(frozen=True)
class SceneParams:
    seed: int = 0
    num_classes: int = 4
    views_per_class: int = 4
    image_side: int = 64
    heading_step_deg: float | None = None  # None -> 360 / views_per_class
    style_jitter: StyleJitter = field(default_factory=StyleJitter)
    occluder_count: int = 0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.views_per_class < 1:
            raise ValueError("views_per_class must be >= 1")
        if self.image_side < 64:
            raise ValueError("image_side must be >= 64")
        if self.occluder_count < 0:
            raise ValueError("occluder_count must be >= 0")

    @property
    def step_deg(self) -> float:
        if self.heading_step_deg is not None:
            return self.heading_step_deg
        return 360.0 / self.views_per_class


# Stream slots within one class: 0 = layout, 1 = satellite image, 2+i = drone i.
_SLOT_LAYOUT = 0
_SLOT_SATELLITE = 1
_SLOT_DRONE_BASE = 2

_BG_CELL = 8


def _paint_rect(img: np.ndarray, stream: SplitMix64, side: int,
                lo: float, hi: float, color: tuple[int, int, int]) -> None:
    # Draw order per rectangle: center x, center y, width, height.
    cx = stream.next_uniform(0.15, 0.85) * side
    cy = stream.next_uniform(0.15, 0.85) * side
    w = stream.next_uniform(lo, hi) * side
    h = stream.next_uniform(lo, hi) * side
    x0 = max(int(cx - w / 2), 0)
    x1 = min(int(cx + w / 2) + 1, side)
    y0 = max(int(cy - h / 2), 0)
    y1 = min(int(cy + h / 2) + 1, side)
    img[y0:y1, x0:x1] = color


def _render_layout(seed: int, side: int) -> np.ndarray:
    """Draw one class's north-up scene. Draw order is part of the format:
    background base color (3), cell offsets (row-major), rectangle count,
    rectangles (position/size/color each), then the central target."""
    stream = SplitMix64(seed)
    base = [stream.next_uniform(40.0, 100.0) for _ in range(3)]
    cells = (side + _BG_CELL - 1) // _BG_CELL
    offsets = np.empty((cells, cells), dtype=np.float64)
    for i in range(cells):
        for j in range(cells):
            offsets[i, j] = stream.next_uniform(-25.0, 25.0)
    coarse = np.kron(offsets, np.ones((_BG_CELL, _BG_CELL)))[:side, :side]
    img_f = coarse[:, :, None] + np.asarray(base, dtype=np.float64)[None, None, :]
    img = quantize_channels(img_f)

    n_rects = 5 + stream.next_below(8)  # 5..12
    for _ in range(n_rects):
        color = (stream.next_below(256), stream.next_below(256), stream.next_below(256))
        _paint_rect(img, stream, side, 0.08, 0.25, color)

    # central target rectangle, bright so it survives jitter
    size = stream.next_uniform(0.12, 0.20) * side
    color = (96 + stream.next_below(160), 96 + stream.next_below(160), 96 + stream.next_below(160))
    half = size / 2
    x0 = max(int(side / 2 - half), 0)
    x1 = min(int(side / 2 + half) + 1, side)
    img[x0:x1, x0:x1] = color
    return img


def _apply_jitter(img: np.ndarray, stream: SplitMix64, jitter: StyleJitter) -> np.ndarray:
    # Draw order: warm/cool shift, then brightness. Zero amplitudes still
    # consume their draws so downstream draws stay aligned.
    j = stream.next_uniform(-jitter.warm_cool_amplitude, jitter.warm_cool_amplitude)
    b = stream.next_uniform(-jitter.brightness_amplitude, jitter.brightness_amplitude)
    factors = np.array([(1.0 + j) * (1.0 + b), (1.0 + b), (1.0 - j) * (1.0 + b)])
    return quantize_channels(img.astype(np.float64) * factors[None, None, :])


def _apply_occluders(img: np.ndarray, stream: SplitMix64, count: int, side: int) -> None:
    for _ in range(count):
        gray = 30 + stream.next_below(60)
        _paint_rect(img, stream, side, 0.05, 0.15, (gray, gray, gray))


def generate_scene_set(params: SceneParams, out_root) -> Manifest:
    """Render the synthetic set to disk and return its manifest.

    Per class: one satellite view (heading 0, never rotated or occluded) and
    ``views_per_class`` drone views at heading = index * heading_step_deg
    (scene rotated to simulate camera yaw, then occluded, then jittered).
    The manifest is also written to <out_root>/manifest.tsv.
    """
    out_root = Path(out_root)
    side = params.image_side
    policy = RotationPolicy(interpolation="bilinear", fill=(0, 0, 0))
    records: list[ManifestRecord] = []
    for c in range(params.num_classes):
        label = f"{c:04d}"
        scene = _render_layout(derive_seed(params.seed, c, _SLOT_LAYOUT), side)

        sat_stream = SplitMix64(derive_seed(params.seed, c, _SLOT_SATELLITE))
        sat = _apply_jitter(scene, sat_stream, params.style_jitter)
        sat_rel = f"satellite/{label}/sat.png"
        save_image(ImageBuffer(sat), out_root / sat_rel)
        records.append(
            ManifestRecord(path=sat_rel, class_label=label, view="satellite", heading_deg=0.0)
        )

        for i in range(params.views_per_class):
            heading = i * params.step_deg
            stream = SplitMix64(derive_seed(params.seed, c, _SLOT_DRONE_BASE + i))
            view = rotate(ImageBuffer(scene), heading, policy).data.copy()
            _apply_occluders(view, stream, params.occluder_count, side)
            view = _apply_jitter(view, stream, params.style_jitter)
            rel = f"drone/{label}/drone_{i:02d}.png"
            save_image(ImageBuffer(view), out_root / rel)
            records.append(
                ManifestRecord(
                    path=rel, class_label=label, view="drone",
                    view_index=i, heading_deg=heading,
                )
            )
    manifest = Manifest(root=out_root, records=_sorted_records(records))
    write_manifest(manifest, out_root / "manifest.tsv")
    return manifest
