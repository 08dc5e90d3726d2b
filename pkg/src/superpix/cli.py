"""Command-line front end.

Subcommands operate on a shared artifact directory (``--out``):

  segment            image -> labels.png/.lbl + stats.json + overlay.png
  cluster            labels + stats -> dendrogram.json + labels_k{K}
  export-dendrogram  labels + stats -> dendrogram.json
  eval               labels (optionally cut at --k) vs ground truth
  sweep              method x diameter x k grid -> report.csv + figures
  render             repaint overlay.png, optionally with a cluster cut
  export-polygons    labels (optionally cut at --k) -> regions.geojson

Flags override values from a TOML ``--config`` file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import merge as merge_mod
from . import pipeline, report
from .imagecore import label_map_filename, load_image, save_image, save_label_map
from .metrics import evaluate


def _base_parser(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="TOML config file")
    sub.add_argument("--image", help="input image (PNG/JPEG)")
    sub.add_argument("--method", choices=pipeline.METHODS, help="segmentation preset")
    sub.add_argument("--features", help="feature tensor (FTM) for feature-slic")
    sub.add_argument("--step", type=int, help="superpixel diameter in pixels")
    sub.add_argument("--compactness", type=float, help="spatial regularity weight")
    sub.add_argument("--k", type=int, help="cluster count for dendrogram cuts")
    sub.add_argument("--tolerance", type=float, help="boundary tolerance in pixels")
    sub.add_argument("--gt", help="ground-truth label map (PNG/.lbl)")
    sub.add_argument("--gt-classes", help="optional JSON list of class names")
    sub.add_argument("--out", help="artifact directory")
    sub.add_argument("--seed", type=int, help="run seed recorded in stats")
    sub.add_argument("--threads", type=int, help="worker threads for sweeps")
    sub.add_argument("--no-timing", action="store_true", help="write zeros for runtimes (byte-reproducible reports)")


def build_config(args: argparse.Namespace) -> pipeline.RunConfig:
    cfg = pipeline.load_config(args.config) if args.config else pipeline.RunConfig()
    overrides = {
        "image": args.image,
        "method": args.method,
        "features": args.features,
        "step": args.step,
        "compactness": args.compactness,
        "tolerance": args.tolerance,
        "out_dir": args.out,
        "seed": args.seed,
        "threads": args.threads,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.no_timing:
        cfg.timing = False
    return cfg


def _load_cut(cfg: pipeline.RunConfig, k: int | None):
    seg = pipeline.load_segmentation(cfg.out_dir)
    if k is None:
        return seg.labels
    dend_path = os.path.join(cfg.out_dir, "dendrogram.json")
    if os.path.exists(dend_path):
        dendrogram = merge_mod.load_dendrogram(dend_path)
    else:
        dendrogram = merge_mod.agglomerate(seg, merge_mod.build_rag(seg))
    return merge_mod.cut_dendrogram(dendrogram, seg, k)


def cmd_segment(args) -> int:
    cfg = build_config(args)
    seg = pipeline.run_segment(cfg)
    print(f"segment: {seg.n_superpixels} superpixels -> {cfg.out_dir}")
    return 0


def cmd_cluster(args) -> int:
    cfg = build_config(args)
    if args.k is None:
        raise SystemExit("cluster requires --k")
    seg = pipeline.load_segmentation(cfg.out_dir)
    dendrogram = merge_mod.agglomerate(seg, merge_mod.build_rag(seg))
    merge_mod.save_dendrogram(dendrogram, os.path.join(cfg.out_dir, "dendrogram.json"))
    cut = merge_mod.cut_dendrogram(dendrogram, seg, args.k)
    name = label_map_filename(int(cut.labels.max()) + 1, stem=f"labels_k{args.k}")
    save_label_map(cut, os.path.join(cfg.out_dir, name))
    print(f"cluster: cut at k={args.k} -> {name}")
    return 0


def cmd_export_dendrogram(args) -> int:
    cfg = build_config(args)
    seg = pipeline.load_segmentation(cfg.out_dir)
    dendrogram = merge_mod.agglomerate(seg, merge_mod.build_rag(seg))
    merge_mod.save_dendrogram(dendrogram, os.path.join(cfg.out_dir, "dendrogram.json"))
    print(f"export-dendrogram: {len(dendrogram.merges)} merges -> dendrogram.json")
    return 0


def cmd_eval(args) -> int:
    cfg = build_config(args)
    if not args.gt:
        raise SystemExit("eval requires --gt")
    gt = pipeline.load_ground_truth(args.gt, args.gt_classes)
    labels = _load_cut(cfg, args.k)
    rep = evaluate(labels, gt, cfg.tolerance)
    doc = {
        "asa": rep.asa,
        "boundary_recall": rep.boundary_recall,
        "boundary_precision": rep.boundary_precision,
        "boundary_f1": rep.boundary_f1,
        "n_regions": rep.n_regions,
        "tolerance_px": rep.tolerance_px,
    }
    with open(os.path.join(cfg.out_dir, "metrics.json"), "w") as fh:
        json.dump(doc, fh)
    print(
        f"eval: asa={rep.asa:.4f} recall={rep.boundary_recall:.4f} "
        f"precision={rep.boundary_precision:.4f} f1={rep.boundary_f1:.4f} "
        f"regions={rep.n_regions}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    if not args.gt:
        raise SystemExit("sweep requires --gt")
    gt = pipeline.load_ground_truth(args.gt, args.gt_classes)
    rows = pipeline.run_sweep(cfg, gt)
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, "report.csv")
    report.write_sweep_csv(rows, csv_path)
    figures = report.render_sweep_figures(rows, cfg.out_dir)
    print(f"sweep: {len(rows)} rows -> {csv_path} (+{len(figures)} figures)")
    return 0


def cmd_render(args) -> int:
    cfg = build_config(args)
    if not cfg.image:
        raise SystemExit("render requires --image")
    image = load_image(cfg.image)
    seg = pipeline.load_segmentation(cfg.out_dir)
    clustered = _load_cut(cfg, args.k) if args.k is not None else None
    overlay = pipeline.render_overlay(image, seg.labels, clustered)
    save_image(overlay, os.path.join(cfg.out_dir, "overlay.png"))
    print(f"render: overlay.png ({'base+clustered' if clustered is not None else 'base'})")
    return 0


def cmd_export_polygons(args) -> int:
    cfg = build_config(args)
    labels = _load_cut(cfg, args.k)
    path = os.path.join(cfg.out_dir, "regions.geojson")
    pipeline.export_polygons(labels, path)
    print(f"export-polygons: -> {path}")
    return 0


_COMMANDS = {
    "segment": cmd_segment,
    "cluster": cmd_cluster,
    "export-dendrogram": cmd_export_dendrogram,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "render": cmd_render,
    "export-polygons": cmd_export_polygons,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="superpix", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub = subs.add_parser(name)
        _base_parser(sub)
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
