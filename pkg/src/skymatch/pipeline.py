"""End-to-end pipeline configuration and the preprocessing ablation.

The ablation mirrors the incremental preprocessing study: the same dataset is
embedded four times with preprocessing sets {none}, {C}, {C,R}, {C,R,A}
(C = circular crop, R = rotation alignment, A = style alignment) and each
variant is evaluated in both query directions. Style alignment runs on the
raw image before any spatial op, so fill pixels never skew its statistics;
satellite views receive the crop with zero rotation.

Everything is seeded and file-order deterministic: repeating a run yields
byte-identical report tables.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ImageBuffer
from .dataset import Manifest, ManifestRecord
from .features import ToyExtractorConfig, extract
from .imgio import load_image
from .partition import (
    PartitionStrategy,
    Projection,
    build_descriptor,
    flatten_embedding,
    parse_strategy,
)
from .retrieval import (
    EvalReport,
    GalleryEntry,
    build_index,
    evaluate,
    format_records,
    format_report_table,
)
from .spatial import RotationPolicy, align_by_heading, align_view, circular_crop
from .style import StyleConfig, align_style

VARIANTS = ("none", "C", "C+R", "C+R+A")
DIRECTIONS = (("drone", "satellite"), ("satellite", "drone"))


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline, serializable to a JSON config file.

    Documented keys (see to_dict / from_dict, all optional with defaults):
      style:     s_target, strength, bias_sign, factor_clamp, clip_enabled
      rotation:  degrees_per_index, reference_heading_deg, interpolation, fill
      extractor: seed, channel_plan
      partition: strategy ("n+n"/"nxn"), mode, projection_seed,
                 projection_dim, projection_path
      eval:      ks

    fingerprint() hashes the canonical JSON; report tables carry it so a
    table is traceable to the exact configuration that produced it.
    """

    style: StyleConfig = field(default_factory=StyleConfig)
    rotation: RotationPolicy = field(default_factory=RotationPolicy)
    extractor: ToyExtractorConfig = field(default_factory=ToyExtractorConfig)
    strategy: PartitionStrategy = field(default_factory=lambda: parse_strategy("2x2"))
    mode: str = "concat"
    ks: tuple[int, ...] = (1, 5, 10)
    projection_seed: int | None = None
    projection_dim: int = 512
    projection_path: str | None = None

    def __post_init__(self):
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValueError("ks must be non-empty positive integers")
        if self.projection_seed is not None and self.projection_path is not None:
            raise ValueError("choose either a seeded or a loaded projection, not both")
        if not self.style.clip_enabled:
            raise ValueError("the pipeline requires a clip-enabled style config")

    def to_dict(self) -> dict:
        return {
            "style": {
                "s_target": self.style.s_target,
                "strength": self.style.strength,
                "bias_sign": self.style.bias_sign,
                "factor_clamp": list(self.style.factor_clamp),
                "clip_enabled": self.style.clip_enabled,
            },
            "rotation": {
                "degrees_per_index": self.rotation.degrees_per_index,
                "reference_heading_deg": self.rotation.reference_heading_deg,
                "interpolation": self.rotation.interpolation,
                "fill": list(self.rotation.fill),
            },
            "extractor": {
                "seed": self.extractor.seed,
                "channel_plan": list(self.extractor.channel_plan),
            },
            "partition": {
                "strategy": str(self.strategy),
                "mode": self.mode,
                "projection_seed": self.projection_seed,
                "projection_dim": self.projection_dim,
                "projection_path": self.projection_path,
            },
            "eval": {"ks": list(self.ks)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        style = d.get("style", {})
        rotation = d.get("rotation", {})
        extractor = d.get("extractor", {})
        part = d.get("partition", {})
        ev = d.get("eval", {})
        return cls(
            style=StyleConfig(
                s_target=style.get("s_target", 128.0),
                strength=style.get("strength", 1.0),
                bias_sign=style.get("bias_sign", "attenuate"),
                factor_clamp=tuple(style.get("factor_clamp", (0.5, 2.0))),
                clip_enabled=style.get("clip_enabled", True),
            ),
            rotation=RotationPolicy(
                degrees_per_index=rotation.get("degrees_per_index", 360.0 / 54.0),
                reference_heading_deg=rotation.get("reference_heading_deg", 0.0),
                interpolation=rotation.get("interpolation", "bilinear"),
                fill=tuple(rotation.get("fill", (0, 0, 0))),
            ),
            extractor=ToyExtractorConfig(
                seed=extractor.get("seed", 0),
                channel_plan=tuple(extractor.get("channel_plan", (8, 16, 32))),
            ),
            strategy=parse_strategy(part.get("strategy", "2x2")),
            mode=part.get("mode", "concat"),
            ks=tuple(ev.get("ks", (1, 5, 10))),
            projection_seed=part.get("projection_seed"),
            projection_dim=part.get("projection_dim", 512),
            projection_path=part.get("projection_path"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def make_projection(self, in_dim: int) -> Projection | None:
        if self.projection_path is not None:
            return Projection.loaded(self.projection_path)
        if self.projection_seed is not None:
            return Projection.seeded(in_dim, self.projection_dim, self.projection_seed)
        return None


def record_heading(record: ManifestRecord, policy: RotationPolicy) -> float:
    """A record's capture heading: explicit if present, else index-derived."""
    if record.heading_deg is not None:
        return record.heading_deg
    if record.view_index is not None:
        return record.view_index * policy.degrees_per_index
    return 0.0


def preprocess(img: ImageBuffer, record: ManifestRecord, variant: str,
               cfg: PipelineConfig) -> ImageBuffer:
    """Apply one ablation variant's preprocessing to one image."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if variant == "C+R+A":
        img = align_style(img, cfg.style)
    if variant == "none":
        return img
    if variant == "C" or record.view != "drone":
        return circular_crop(img, cfg.rotation.fill)
    # C+R / C+R+A on a drone view: undo the capture orientation
    if record.heading_deg is not None:
        return align_by_heading(img, record.heading_deg, cfg.rotation)
    if record.view_index is not None:
        return align_view(img, record.view_index, cfg.rotation)
    return circular_crop(img, cfg.rotation.fill)


def embed_image(img: ImageBuffer, cfg: PipelineConfig,
                projection: Projection | None = None) -> np.ndarray:
    """Image -> feature map -> descriptor -> flat embedding."""
    fm = extract(img, cfg.extractor)
    d = build_descriptor(fm, cfg.strategy, cfg.mode, projection)
    return flatten_embedding(d)


def entry_id(record: ManifestRecord) -> str:
    p = Path(record.path)
    return p.with_suffix("").as_posix()


def embed_manifest(
    manifest: Manifest,
    cfg: PipelineConfig,
    variant: str = "none",
    jobs: int = 1,
    images: dict[str, ImageBuffer] | None = None,
) -> list[GalleryEntry]:
    """Embed every manifest record under one preprocessing variant.

    ``images`` optionally caches decoded rasters keyed by record path (the
    ablation reuses one cache across variants). Work parallelizes across a
    thread pool; results keep manifest order regardless of jobs.
    """
    if images is None:
        images = {}
    for r in manifest.records:
        if r.path not in images:
            images[r.path] = load_image(manifest.root / r.path)
    # part vectors enter the projection at the extractor's final channel width
    projection = cfg.make_projection(cfg.extractor.channel_plan[-1])

    def work(record: ManifestRecord) -> GalleryEntry:
        img = preprocess(images[record.path], record, variant, cfg)
        emb = embed_image(img, cfg, projection)
        return GalleryEntry(
            id=entry_id(record), class_label=record.class_label,
            view=record.view, embedding=emb,
        )

    if jobs <= 1:
        return [work(r) for r in manifest.records]
    from . import _kernels

    _kernels.warm_up()  # compile before the pool so workers share the JIT
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, manifest.records))


@dataclass(frozen=True)
class AblationResult:
    reports: tuple[tuple[str, EvalReport], ...]  # ((variant, direction-report), ...)
    table: str
    records: str


def split_views(entries: Sequence[GalleryEntry]) -> dict[str, list[GalleryEntry]]:
    out: dict[str, list[GalleryEntry]] = {}
    for e in entries:
        out.setdefault(e.view, []).append(e)
    return out


def run_ablation(manifest: Manifest, cfg: PipelineConfig, jobs: int = 1) -> AblationResult:
    """Run all four preprocessing variants and evaluate both query directions."""
    classes = {r.class_label for r in manifest.records}
    if len(classes) < 2:
        raise ValueError("ablation needs a manifest with at least 2 classes")
    images: dict[str, ImageBuffer] = {}
    labeled: list[tuple[str, EvalReport]] = []
    for variant in VARIANTS:
        entries = embed_manifest(manifest, cfg, variant=variant, jobs=jobs, images=images)
        by_view = split_views(entries)
        for query_view, gallery_view in DIRECTIONS:
            if query_view not in by_view or gallery_view not in by_view:
                continue
            index = build_index(by_view[gallery_view])
            report = evaluate(by_view[query_view], index, cfg.ks)
            labeled.append((variant, report))
    if not labeled:
        raise ValueError("manifest has no drone/satellite views to evaluate")
    table = format_report_table(labeled, fingerprint=cfg.fingerprint())
    return AblationResult(reports=tuple(labeled), table=table, records=format_records(labeled))
