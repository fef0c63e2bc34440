"""skymatch: drone-to-satellite image geo-localization pipeline.

Statistical style alignment, circular crop-and-rotate orientation alignment,
partition pooling over feature maps, and a retrieval evaluator (Recall@K,
mAP), runnable end to end with a deterministic built-in feature extractor or
externally supplied feature maps.
"""

from .core import FeatureMap, ImageBuffer, SplitMix64
from .dataset import Manifest, SceneParams, generate_scene_set, read_manifest, scan_dataset, write_manifest
from .features import ToyExtractorConfig, extract, read_feature_map, write_feature_map
from .partition import (
    Descriptor,
    PartitionStrategy,
    Projection,
    build_descriptor,
    flatten_embedding,
    global_pool,
    parse_strategy,
    pool_parts,
    project,
)
from .pipeline import PipelineConfig, run_ablation
from .retrieval import (
    EvalReport,
    GalleryEntry,
    average_precision,
    build_index,
    evaluate,
    rank,
    recall_at_k,
)
from .spatial import RotationPolicy, align_by_heading, align_view, circular_crop, rotate
from .style import StyleConfig, StyleStats, align_style, compute_dataset_target, compute_stats

__version__ = "0.1.0"

__all__ = [
    "Descriptor",
    "EvalReport",
    "FeatureMap",
    "GalleryEntry",
    "ImageBuffer",
    "Manifest",
    "PartitionStrategy",
    "PipelineConfig",
    "Projection",
    "RotationPolicy",
    "SceneParams",
    "SplitMix64",
    "StyleConfig",
    "StyleStats",
    "ToyExtractorConfig",
    "align_by_heading",
    "align_style",
    "align_view",
    "average_precision",
    "build_descriptor",
    "build_index",
    "circular_crop",
    "compute_dataset_target",
    "compute_stats",
    "evaluate",
    "extract",
    "flatten_embedding",
    "generate_scene_set",
    "global_pool",
    "parse_strategy",
    "pool_parts",
    "project",
    "rank",
    "read_feature_map",
    "read_manifest",
    "recall_at_k",
    "rotate",
    "run_ablation",
    "scan_dataset",
    "write_feature_map",
    "write_manifest",
]
