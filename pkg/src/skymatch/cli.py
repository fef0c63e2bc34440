"""skymatch command line: the geo-localization pipeline as composable subcommands.

Stages compose via files: images in a <root>/<view>/<class>/ tree, manifests
(tab-separated records), FMAP tensors, entry dumps (text), and report tables.
Batch commands accept either positional input files (outputs land flat in
--out-dir) or a --manifest, in which case relative paths are mirrored under
--out-dir and an updated manifest is written there for the next stage.

Exit codes: 0 success, 1 data/processing error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import accel
from .core import DegenerateImageError, ImageBuffer
from .dataset import (
    Manifest,
    ManifestError,
    ManifestRecord,
    SceneParams,
    StyleJitter,
    generate_scene_set,
    read_manifest,
    scan_dataset,
    write_manifest,
)
from .features import (
    FeatureMapFormatError,
    ToyExtractorConfig,
    extract,
    read_feature_map,
    read_vector,
    write_feature_map,
    write_vector,
)
from .imgio import load_image, save_image
from .partition import Projection, build_descriptor, flatten_embedding, parse_strategy
from .pipeline import PipelineConfig, run_ablation
from .retrieval import (
    GalleryEntry,
    build_index,
    evaluate,
    format_records,
    format_report_table,
    rank,
    read_entries,
    write_entries,
)
from .spatial import RotationPolicy, align_by_heading, align_view, circular_crop
from .style import StyleConfig, align_style, compute_dataset_target


def _strategy_type(text: str):
    try:
        return parse_strategy(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _fill_type(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"fill must be 'R,G,B', got {text!r}")
    try:
        rgb = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"fill must be integers 'R,G,B', got {text!r}")
    if any(not (0 <= v <= 255) for v in rgb):
        raise argparse.ArgumentTypeError(f"fill channels must lie in [0, 255], got {text!r}")
    return rgb


def _ks_type(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"K list must be integers like '1,5,10', got {text!r}")
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("K values must be >= 1")
    return ks


def _channel_plan_type(text: str) -> tuple[int, ...]:
    try:
        plan = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"channel plan must be integers like '8,16,32', got {text!r}")
    if not plan or any(c < 1 for c in plan):
        raise argparse.ArgumentTypeError("channel counts must be >= 1")
    return plan


def _batch_items(args, out_suffix: str) -> tuple[list[tuple[Path, Path, ManifestRecord | None]], Manifest | None]:
    """Resolve (input path, relative output path, record) triples for a batch command."""
    if args.manifest:
        manifest = read_manifest(args.manifest)
        items = []
        for r in manifest.records:
            rel = Path(r.path).with_suffix(out_suffix)
            items.append((manifest.root / r.path, rel, r))
        return items, manifest
    if not args.inputs:
        raise ValueError("no inputs given: pass files or --manifest")
    items = []
    for p in args.inputs:
        p = Path(p)
        items.append((p, Path(p.name).with_suffix(out_suffix), None))
    return items, None


def _write_stage_manifest(manifest: Manifest, out_dir: Path, out_suffix: str) -> None:
    records = tuple(
        ManifestRecord(
            path=Path(r.path).with_suffix(out_suffix).as_posix(),
            class_label=r.class_label,
            view=r.view,
            view_index=r.view_index,
            heading_deg=r.heading_deg,
        )
        for r in manifest.records
    )
    write_manifest(Manifest(root=out_dir, records=records), out_dir / "manifest.tsv")


def _run_batch(items, jobs: int, work) -> None:
    if jobs <= 1:
        for item in items:
            work(item)
        return
    from concurrent.futures import ThreadPoolExecutor

    from . import _kernels

    _kernels.warm_up()
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(work, items))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_style_align(args) -> int:
    items, manifest = _batch_items(args, out_suffix=".png")
    out_dir = Path(args.out_dir)
    images = {src: load_image(src) for src, _, _ in items}
    if args.target == "auto":
        target = compute_dataset_target(images.values())
    else:
        target = float(args.target)
    cfg = StyleConfig(
        s_target=target,
        strength=args.strength,
        bias_sign=args.bias_sign,
        factor_clamp=(args.factor_min, args.factor_max),
    )

    def work(item):
        src, rel, _ = item
        save_image(align_style(images[src], cfg), out_dir / rel)

    _run_batch(items, args.jobs, work)
    if manifest is not None:
        _write_stage_manifest(manifest, out_dir, ".png")
    print(f"style-align: wrote {len(items)} images to {out_dir} (target {target:g})")
    return 0


def cmd_crop_rotate(args) -> int:
    if args.manifest and (args.index is not None or args.heading_deg is not None):
        raise ValueError("--index/--heading-deg conflict with --manifest (per-record metadata is used)")
    items, manifest = _batch_items(args, out_suffix=".png")
    out_dir = Path(args.out_dir)
    policy = RotationPolicy(
        degrees_per_index=args.degrees_per_index,
        reference_heading_deg=args.reference_heading,
        interpolation=args.interp,
        fill=args.fill,
    )

    def transform(img: ImageBuffer, record: ManifestRecord | None) -> ImageBuffer:
        if record is not None:
            if record.view == "drone" and record.heading_deg is not None:
                return align_by_heading(img, record.heading_deg, policy)
            if record.view == "drone" and record.view_index is not None:
                return align_view(img, record.view_index, policy)
            return circular_crop(img, policy.fill)
        if args.heading_deg is not None:
            return align_by_heading(img, args.heading_deg, policy)
        if args.index is not None:
            return align_view(img, args.index, policy)
        return circular_crop(img, policy.fill)

    def work(item):
        src, rel, record = item
        save_image(transform(load_image(src), record), out_dir / rel)

    _run_batch(items, args.jobs, work)
    if manifest is not None:
        _write_stage_manifest(manifest, out_dir, ".png")
    print(f"crop-rotate: wrote {len(items)} images to {out_dir}")
    return 0


def cmd_extract(args) -> int:
    items, manifest = _batch_items(args, out_suffix=".fmap")
    out_dir = Path(args.out_dir)
    cfg = ToyExtractorConfig(seed=args.seed, channel_plan=args.channels)

    def work(item):
        src, rel, _ = item
        write_feature_map(extract(load_image(src), cfg), out_dir / rel)

    _run_batch(items, args.jobs, work)
    if manifest is not None:
        _write_stage_manifest(manifest, out_dir, ".fmap")
    print(f"extract: wrote {len(items)} feature maps to {out_dir} (seed {args.seed})")
    return 0


def cmd_pool(args) -> int:
    items, manifest = _batch_items(args, out_suffix=".fmap")
    out_dir = Path(args.out_dir)
    projection = None
    if args.proj_weights:
        projection = Projection.loaded(args.proj_weights)
    elif args.proj_seed is not None:
        first = read_feature_map(items[0][0])
        projection = Projection.seeded(first.channels, args.proj_dim, args.proj_seed)

    def work(item):
        src, rel, _ = item
        fm = read_feature_map(src)
        d = build_descriptor(fm, args.strategy, args.mode, projection)
        write_vector(flatten_embedding(d), out_dir / rel)

    _run_batch(items, args.jobs, work)
    if manifest is not None:
        _write_stage_manifest(manifest, out_dir, ".fmap")
    print(f"pool: wrote {len(items)} embeddings to {out_dir} (strategy {args.strategy}, mode {args.mode})")
    return 0


def cmd_index(args) -> int:
    manifest = read_manifest(args.manifest)
    entries = []
    for r in manifest.records:
        if args.view and r.view != args.view:
            continue
        emb = read_vector(manifest.root / r.path)
        entries.append(
            GalleryEntry(
                id=Path(r.path).with_suffix("").as_posix(),
                class_label=r.class_label,
                view=r.view,
                embedding=emb,
            )
        )
    if not entries:
        raise ValueError(f"no records matched view {args.view!r}")
    build_index(entries)  # validates dims, ids, norms before anything is written
    write_entries(entries, args.out)
    print(f"index: wrote {len(entries)} entries to {args.out}")
    return 0


def cmd_query(args) -> int:
    index = build_index(read_entries(args.index))
    for qpath in args.queries:
        emb = read_vector(qpath)
        ranked = rank(emb, index)[: args.top]
        qid = Path(qpath).stem
        for position, (id_, score) in enumerate(ranked, start=1):
            print(f"{qid}\t{position}\t{id_}\t{score:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    gallery = build_index(read_entries(args.gallery))
    queries = read_entries(args.queries)
    report = evaluate(queries, gallery, args.k)
    canon = json.dumps({"ks": list(args.k)}, sort_keys=True, separators=(",", ":"))
    fingerprint = hashlib.sha256(canon.encode()).hexdigest()[:12]
    table = format_report_table([("eval", report)], fingerprint=fingerprint)
    sys.stdout.write(table)
    if args.records:
        sys.stdout.write(format_records([("eval", report)]))
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    return 0


def cmd_scan(args) -> int:
    manifest = scan_dataset(args.root)
    write_manifest(manifest, args.out)
    msg = f"scan: {len(manifest)} records -> {args.out}"
    if manifest.warning_count:
        msg += f" ({manifest.warning_count} drone files without a parseable index)"
    print(msg)
    return 0


def cmd_gen_synthetic(args) -> int:
    params = SceneParams(
        seed=args.seed,
        num_classes=args.classes,
        views_per_class=args.views,
        image_side=args.side,
        heading_step_deg=args.heading_step,
        style_jitter=StyleJitter(
            warm_cool_amplitude=args.warm_cool,
            brightness_amplitude=args.brightness,
        ),
        occluder_count=args.occluders,
    )
    manifest = generate_scene_set(params, args.out)
    print(f"gen-synthetic: {len(manifest)} images under {args.out} (manifest.tsv written)")
    return 0


def cmd_ablate(args) -> int:
    data = Path(args.data)
    manifest_path = data / "manifest.tsv" if data.is_dir() else data
    manifest = read_manifest(manifest_path)
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    # flags override the config file only when given explicitly
    d = cfg.to_dict()
    if args.seed is not None:
        d["extractor"]["seed"] = args.seed
    if args.channels is not None:
        d["extractor"]["channel_plan"] = list(args.channels)
    if args.strategy is not None:
        d["partition"]["strategy"] = str(args.strategy)
    if args.mode is not None:
        d["partition"]["mode"] = args.mode
    if args.k is not None:
        d["eval"]["ks"] = list(args.k)
    cfg = PipelineConfig.from_dict(d)
    result = run_ablation(manifest, cfg, jobs=args.jobs)
    sys.stdout.write(result.table)
    if args.records:
        sys.stdout.write(result.records)
    if args.out:
        Path(args.out).write_text(result.table, encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_batch_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("inputs", nargs="*", help="input files (or use --manifest)")
    p.add_argument("--manifest", help="process a manifest's records, mirroring paths")
    p.add_argument("--out-dir", "-o", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker threads (default: number of processors)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skymatch",
        description="Drone-to-satellite geo-localization pipeline "
                    "(style alignment, crop-and-rotate, partition pooling, retrieval).",
    )
    parser.add_argument(
        "--backend", choices=accel.CHOICES, default=None,
        help="kernel backend (default: SKYMATCH_BACKEND env or auto)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("style-align", help="normalize image style toward a target luminance")
    _add_batch_args(p)
    p.add_argument("--target", default="128.0",
                   help="target mean luminance, or 'auto' to average the inputs")
    p.add_argument("--strength", type=float, default=1.0, help="bias correction strength in [0, 1]")
    p.add_argument("--bias-sign", choices=("attenuate", "amplify"), default="attenuate")
    p.add_argument("--factor-min", type=float, default=0.5)
    p.add_argument("--factor-max", type=float, default=2.0)
    p.set_defaults(fn=cmd_style_align)

    p = sub.add_parser(
        "crop-rotate",
        help="mask to the inscribed circle and rotate onto the reference heading",
        epilog="Positive angles rotate content counterclockwise (y axis up). "
               "With --manifest, drone records use their own heading/index and "
               "other views are cropped without rotation.",
    )
    _add_batch_args(p)
    p.add_argument("--index", type=int, default=None, help="view index to undo")
    p.add_argument("--heading-deg", type=float, default=None, help="capture heading to undo")
    p.add_argument("--degrees-per-index", type=float, default=360.0 / 54.0)
    p.add_argument("--reference-heading", type=float, default=0.0)
    p.add_argument("--interp", choices=("nearest", "bilinear"), default="bilinear")
    p.add_argument("--fill", type=_fill_type, default=(0, 0, 0), help="R,G,B fill color")
    p.set_defaults(fn=cmd_crop_rotate)

    p = sub.add_parser("extract", help="run the deterministic toy extractor to FMAP files")
    _add_batch_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", type=_channel_plan_type, default=(8, 16, 32),
                   help="per-stage output channels, e.g. 8,16,32")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("pool", help="partition-pool FMAP tensors into embeddings")
    _add_batch_args(p)
    p.add_argument("--strategy", type=_strategy_type, default=parse_strategy("2x2"),
                   help="'n+n' regular or 'nxn' dense partition")
    p.add_argument("--mode", choices=("global_only", "parts_only", "concat"), default="concat")
    p.add_argument("--proj-seed", type=int, default=None, help="seeded part projection")
    p.add_argument("--proj-dim", type=int, default=512)
    p.add_argument("--proj-weights", default=None, help="FMAP file of projection weights")
    p.set_defaults(fn=cmd_pool)

    p = sub.add_parser("index", help="collect embeddings of one view into an entry dump")
    p.add_argument("--manifest", required=True, help="manifest whose records point at embeddings")
    p.add_argument("--view", default=None, choices=("drone", "satellite", "ground", "other"),
                   help="keep only this view (default: all records)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("query", help="rank an entry dump against query embeddings")
    p.add_argument("queries", nargs="+", help="query embedding .fmap files")
    p.add_argument("--index", required=True, help="entry dump from the index subcommand")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("evaluate", help="Recall@K and mAP of queries against a gallery")
    p.add_argument("--gallery", required=True, help="gallery entry dump")
    p.add_argument("--queries", required=True, help="query entry dump")
    p.add_argument("--k", type=_ks_type, default=(1, 5, 10), help="comma-separated K list")
    p.add_argument("--records", action="store_true", help="also print key-value records")
    p.add_argument("--out", default=None, help="also write the table to this file")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("scan", help="index a <root>/<view>/<class>/<file> tree into a manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("gen-synthetic", help="generate a deterministic synthetic multi-view set")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--heading-step", type=float, default=None,
                   help="degrees between drone views (default: 360/views)")
    p.add_argument("--warm-cool", type=float, default=0.0, help="color temperature jitter amplitude")
    p.add_argument("--brightness", type=float, default=0.0, help="brightness jitter amplitude")
    p.add_argument("--occluders", type=int, default=0, help="per-view occluder rectangles")
    p.set_defaults(fn=cmd_gen_synthetic)

    p = sub.add_parser("ablate", help="run the {none, C, C+R, C+R+A} preprocessing ablation")
    p.add_argument("--data", required=True, help="dataset dir (with manifest.tsv) or manifest path")
    p.add_argument("--config", default=None, help="PipelineConfig JSON file")
    p.add_argument("--seed", type=int, default=None, help="extractor seed (default 0)")
    p.add_argument("--channels", type=_channel_plan_type, default=None,
                   help="extractor channel plan (default 8,16,32)")
    p.add_argument("--strategy", type=_strategy_type, default=None,
                   help="partition strategy (default 2x2)")
    p.add_argument("--mode", choices=("global_only", "parts_only", "concat"), default=None)
    p.add_argument("--k", type=_ks_type, default=None, help="K list (default 1,5,10)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--records", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend is not None:
        accel.set_backend(args.backend)
    try:
        return args.fn(args)
    except (ValueError, OSError, ManifestError, FeatureMapFormatError, DegenerateImageError) as exc:
        print(f"skymatch {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
