"""Method presets, artifact handling, and the metric sweep.

Three presegmentation methods share one clustering core and differ only in
the feature map fed to it: ``rgb-slic`` scales the raw image to [0, 1],
``hed-slic`` unmixes stains and suppresses the hematoxylin channel, and
``feature-slic`` ingests an external feature tensor (e.g. network
embeddings) and upsamples it to image resolution. A sweep runs method x
diameter cells, optionally merges superpixels hierarchically, and scores
every cell against ground truth.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import merge as merge_mod
from . import metrics as metrics_mod
from .imagecore import (
    FeatureMap,
    LabelMap,
    RasterImage,
    label_map_filename,
    load_image,
    load_label_map,
    read_feature_tensor,
    save_image,
    save_label_map,
    upsample,
)
from .metrics import GroundTruth, evaluate, extract_boundaries
from .polygons import polygons_to_geojson, trace_region_polygons
from .slic import SlicParams, SuperpixelSegmentation, slic_segment
from .stain import DEFAULT_STAIN_RGB, StainMatrix, SuppressionParams, rgb_to_hed, suppress_channel

METHODS = ("rgb-slic", "hed-slic", "feature-slic")

BOUNDARY_BLACK = (0, 0, 0)
BOUNDARY_BLUE = (0, 0, 255)


@dataclass
class RunConfig:
    """Everything one run needs; TOML file fields, overridable by CLI flags."""

    image: str | None = None
    method: str = "rgb-slic"
    features: str | None = None
    step: int = 120
    compactness: float = 10.0
    iterations: int = 10
    min_region_frac: float = 0.25
    normalize_features: bool | None = None
    upsample_mode: str = "bilinear"
    stain_rows: tuple = DEFAULT_STAIN_RGB
    suppress_channel_idx: int = 0
    suppress_sigma: float = 15.0
    suppress_alpha: float = 0.25
    methods: list[str] | None = None
    diameters: list[int] = field(default_factory=lambda: [40, 60, 80, 120, 160, 240])
    cluster_counts: list[int | None] = field(default_factory=lambda: [None])
    tolerance: float = 15.0
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    timing: bool = True
    microns_per_pixel: float | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method == "feature-slic" and not self.features:
            raise ValueError("feature-slic requires a feature tensor path")
        if not self.diameters:
            raise ValueError("diameter sweep list must be non-empty")
        if not self.cluster_counts:
            raise ValueError("cluster-count sweep list must be non-empty")
        for m in self.methods or []:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r} in sweep list")


@dataclass(frozen=True)
class SweepRow:
    method: str
    diameter: int
    compactness: float
    k: int | None
    n_regions: int
    asa: float
    recall: float
    precision: float
    f1: float
    runtime_ms: int

    COLUMNS = (
        "method",
        "diameter",
        "compactness",
        "k",
        "n_regions",
        "asa",
        "recall",
        "precision",
        "f1",
        "runtime_ms",
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    cfg = RunConfig()
    simple = (
        "image", "method", "features", "step", "compactness", "iterations",
        "min_region_frac", "normalize_features", "upsample_mode", "tolerance",
        "out_dir", "seed", "threads", "timing", "microns_per_pixel",
    )
    for key in simple:
        if key in doc:
            setattr(cfg, key, doc[key])
    if "stain" in doc and "rows" in doc["stain"]:
        cfg.stain_rows = tuple(tuple(r) for r in doc["stain"]["rows"])
    sup = doc.get("suppress", {})
    cfg.suppress_channel_idx = sup.get("channel", cfg.suppress_channel_idx)
    cfg.suppress_sigma = sup.get("sigma", cfg.suppress_sigma)
    cfg.suppress_alpha = sup.get("alpha", cfg.suppress_alpha)
    sweep = doc.get("sweep", {})
    if "methods" in sweep:
        cfg.methods = list(sweep["methods"])
    if "diameters" in sweep:
        cfg.diameters = [int(d) for d in sweep["diameters"]]
    if "cluster_counts" in sweep:
        cfg.cluster_counts = [None if k == "none" else int(k) for k in sweep["cluster_counts"]]
    return cfg


def compute_feature_map(config: RunConfig, image: RasterImage, method: str | None = None) -> FeatureMap:
    """Produce the feature map a method preset feeds into clustering."""
    method = method or config.method
    if method == "rgb-slic":
        from .imagecore import rgb_to_feature

        return rgb_to_feature(image)
    if method == "hed-slic":
        hed = rgb_to_hed(image, StainMatrix(np.array(config.stain_rows)))
        params = SuppressionParams(
            channel=config.suppress_channel_idx,
            sigma=config.suppress_sigma,
            alpha=config.suppress_alpha,
        )
        return suppress_channel(hed, params)
    if method == "feature-slic":
        if not config.features:
            raise ValueError("feature-slic requires a feature tensor path")
        tensor = read_feature_tensor(config.features)
        return upsample(tensor, image.height, image.width, config.upsample_mode)
    raise ValueError(f"unknown method {method!r}")


def slic_params(config: RunConfig, step: int | None = None) -> SlicParams:
    return SlicParams(
        step=step if step is not None else config.step,
        compactness=config.compactness,
        iterations=config.iterations,
        min_region_frac=config.min_region_frac,
        normalize_features=config.normalize_features,
    )


def segment_image(config: RunConfig, image: RasterImage, method: str | None = None, step: int | None = None) -> SuperpixelSegmentation:
    fmap = compute_feature_map(config, image, method)
    return slic_segment(fmap, slic_params(config, step))


def run_segment(config: RunConfig) -> SuperpixelSegmentation:
    """Execute the configured method preset and write run artifacts.

    Writes ``labels.png`` (or ``labels.lbl`` past 65536 regions),
    ``stats.json`` with per-label counts and mean features, and
    ``overlay.png`` with boundaries painted onto the input image.
    """
    config.validate()
    if not config.image:
        raise ValueError("an input image is required")
    image = load_image(config.image)
    seg = segment_image(config, image)
    os.makedirs(config.out_dir, exist_ok=True)
    save_label_map(seg.labels, os.path.join(config.out_dir, label_map_filename(seg.n_superpixels)))
    write_stats(seg, config, os.path.join(config.out_dir, "stats.json"))
    overlay = render_overlay(image, seg.labels)
    save_image(overlay, os.path.join(config.out_dir, "overlay.png"))
    return seg


def write_stats(seg: SuperpixelSegmentation, config: RunConfig, path: str | os.PathLike) -> None:
    doc = {
        "method": config.method,
        "step": config.step,
        "compactness": config.compactness,
        "iterations": config.iterations,
        "seed": config.seed,
        "microns_per_pixel": config.microns_per_pixel,
        "n_regions": seg.n_superpixels,
        "counts": seg.counts.tolist(),
        "means": seg.means.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_segmentation(out_dir: str | os.PathLike) -> SuperpixelSegmentation:
    """Rehydrate a segmentation from the artifacts run_segment wrote."""
    out_dir = os.fspath(out_dir)
    stats_path = os.path.join(out_dir, "stats.json")
    with open(stats_path) as fh:
        stats = json.load(fh)
    labels = None
    for name in ("labels.png", "labels.lbl"):
        path = os.path.join(out_dir, name)
        if os.path.exists(path):
            labels = load_label_map(path)
            break
    if labels is None:
        raise FileNotFoundError(f"no labels.png/labels.lbl under {out_dir}")
    return SuperpixelSegmentation(
        labels=labels,
        counts=np.asarray(stats["counts"], dtype=np.int64),
        means=np.asarray(stats["means"], dtype=np.float64),
    )


def render_overlay(image: RasterImage, base: LabelMap, clustered: LabelMap | None = None) -> RasterImage:
    """Paint base boundaries black, then clustered boundaries blue on top."""
    if (image.height, image.width) != (base.height, base.width):
        raise ValueError("image and label map dimensions differ")
    out = image.data.copy()
    out[extract_boundaries(base)] = BOUNDARY_BLACK
    if clustered is not None:
        if (clustered.height, clustered.width) != (image.height, image.width):
            raise ValueError("image and clustered map dimensions differ")
        out[extract_boundaries(clustered)] = BOUNDARY_BLUE
    return RasterImage(out)


def load_ground_truth(path: str | os.PathLike, names_path: str | os.PathLike | None = None) -> GroundTruth:
    labels = load_label_map(path)
    names = None
    if names_path:
        with open(names_path) as fh:
            names = list(json.load(fh))
    return GroundTruth(labels=labels, class_names=names)


def export_polygons(labels: LabelMap, path: str | os.PathLike, classes: dict[int, str] | None = None) -> None:
    doc = polygons_to_geojson(trace_region_polygons(labels), classes)
    with open(path, "w") as fh:
        json.dump(doc, fh)


# ---------------------------------------------------------------------------
# sweep


def _now_ms(config: RunConfig, t0: float) -> int:
    return int(round((time.perf_counter() - t0) * 1000.0)) if config.timing else 0


def _sweep_cell(config: RunConfig, image: RasterImage, gt: GroundTruth, method: str, diameter: int, segment_fn=None) -> list[SweepRow]:
    t0 = time.perf_counter()
    if segment_fn is not None:
        seg = segment_fn(config, image, method, diameter)
    else:
        seg = segment_image(config, image, method, diameter)
    seg_ms = _now_ms(config, t0)

    rows = []
    report = evaluate(seg.labels, gt, config.tolerance)
    rows.append(
        SweepRow(
            method=method,
            diameter=diameter,
            compactness=config.compactness,
            k=None,
            n_regions=report.n_regions,
            asa=report.asa,
            recall=report.boundary_recall,
            precision=report.boundary_precision,
            f1=report.boundary_f1,
            runtime_ms=seg_ms,
        )
    )
    ks = [k for k in config.cluster_counts if k is not None]
    if ks:
        t0 = time.perf_counter()
        rag = merge_mod.build_rag(seg)
        dendrogram = merge_mod.agglomerate(seg, rag)
        dend_ms = _now_ms(config, t0)
        for k in ks:
            t0 = time.perf_counter()
            k_eff = min(max(k, dendrogram.n_components), dendrogram.initial_count)
            cut = merge_mod.cut_dendrogram(dendrogram, seg, k_eff)
            cut_ms = _now_ms(config, t0)
            report = evaluate(cut, gt, config.tolerance)
            rows.append(
                SweepRow(
                    method=method,
                    diameter=diameter,
                    compactness=config.compactness,
                    k=k,
                    n_regions=report.n_regions,
                    asa=report.asa,
                    recall=report.boundary_recall,
                    precision=report.boundary_precision,
                    f1=report.boundary_f1,
                    runtime_ms=dend_ms + cut_ms,
                )
            )
    return rows


def run_sweep(config: RunConfig, gt: GroundTruth, segment_fn=None) -> list[SweepRow]:
    """Score every method x diameter cell, with and without merging.

    Each cell is segmented once; merging runs once per cell and is cut at
    every requested cluster count (requested counts outside the dendrogram's
    valid range are clamped; the requested value still names the row). Cells
    run on a thread pool but results are gathered in deterministic
    (method, diameter, k) order.
    """
    config.validate()
    if not config.image:
        raise ValueError("an input image is required")
    image = load_image(config.image)
    if (gt.labels.height, gt.labels.width) != (image.height, image.width):
        raise ValueError("ground truth dimensions do not match the image")
    methods = config.methods or [config.method]
    cells = [(m, d) for m in methods for d in config.diameters]

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(_sweep_cell, config, image, gt, m, d, segment_fn) for m, d in cells]
            per_cell = [f.result() for f in futures]
    else:
        per_cell = [_sweep_cell(config, image, gt, m, d, segment_fn) for m, d in cells]

    return [row for rows in per_cell for row in rows]
