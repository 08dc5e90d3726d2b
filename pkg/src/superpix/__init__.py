"""Superpixel pre-segmentation toolkit for stained histopathology patches."""

from .imagecore import (
    FeatureMap,
    LabelMap,
    RasterImage,
    densify_labels,
    load_image,
    load_label_map,
    read_feature_tensor,
    rgb_to_feature,
    save_image,
    save_label_map,
    upsample,
    write_feature_tensor,
)
from .merge import (
    Dendrogram,
    RegionAdjacencyGraph,
    agglomerate,
    build_rag,
    cut_dendrogram,
    load_dendrogram,
    save_dendrogram,
    ward_delta,
)
from .metrics import (
    GroundTruth,
    MetricsReport,
    asa,
    boundary_prf,
    evaluate,
    extract_boundaries,
)
from .pipeline import RunConfig, render_overlay, run_segment, run_sweep
from .polygons import (
    geojson_to_polygons,
    polygons_to_geojson,
    rasterize_polygons,
    trace_region_polygons,
)
from .slic import (
    SlicParams,
    SuperpixelSegmentation,
    enforce_connectivity,
    init_centers,
    slic_segment,
)
from .stain import StainMatrix, SuppressionParams, hed_to_rgb, rgb_to_hed, suppress_channel

__version__ = "0.1.0"

__all__ = [
    "FeatureMap",
    "LabelMap",
    "RasterImage",
    "densify_labels",
    "load_image",
    "load_label_map",
    "read_feature_tensor",
    "rgb_to_feature",
    "save_image",
    "save_label_map",
    "upsample",
    "write_feature_tensor",
    "Dendrogram",
    "RegionAdjacencyGraph",
    "agglomerate",
    "build_rag",
    "cut_dendrogram",
    "load_dendrogram",
    "save_dendrogram",
    "ward_delta",
    "GroundTruth",
    "MetricsReport",
    "asa",
    "boundary_prf",
    "evaluate",
    "extract_boundaries",
    "RunConfig",
    "render_overlay",
    "run_segment",
    "run_sweep",
    "geojson_to_polygons",
    "polygons_to_geojson",
    "rasterize_polygons",
    "trace_region_polygons",
    "SlicParams",
    "SuperpixelSegmentation",
    "enforce_connectivity",
    "init_centers",
    "slic_segment",
    "StainMatrix",
    "SuppressionParams",
    "hed_to_rgb",
    "rgb_to_hed",
    "suppress_channel",
]
