"""Acceptance gate: one test per criterion, one printed line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS lines.
Synthetic corpora stand in for clinical data, so the checks are exact
oracle equivalences, direction-of-effect comparisons, and resource budgets
rather than absolute score reproduction.
"""

from __future__ import annotations

import filecmp
import json
import resource
import subprocess
import sys
import time

import numpy as np
import pytest
from PIL import Image

from superpix.imagecore import FeatureMap, LabelMap, RasterImage, rgb_to_feature, upsample
from superpix.merge import agglomerate, build_rag, cut_dendrogram
from superpix.metrics import asa, boundary_prf, contingency_table
from superpix.polygons import rasterize_polygons, trace_region_polygons
from superpix.slic import SlicParams, slic_segment
from superpix.stain import StainMatrix, hed_to_rgb, rgb_to_hed

from conftest import brute_asa, brute_boundaries, flood_components

SEED = 20240811


def report(name: str, detail: str) -> None:
    print(f"[{name}] PASS - {detail}")


def warm_up_jit() -> None:
    slic_segment(FeatureMap(np.zeros((8, 8, 3), dtype=np.float32)), SlicParams(step=4, iterations=1))


# ---------------------------------------------------------------------------
# synthetic corpora


def two_region_image(rng, n=256):
    theta = rng.uniform(0, np.pi)
    nx, ny = np.cos(theta), np.sin(theta)
    cx, cy = rng.uniform(0.3 * n, 0.7 * n, size=2)
    yy, xx = np.mgrid[0:n, 0:n]
    gt = ((xx - cx) * nx + (yy - cy) * ny > 0).astype(np.uint32)
    c0 = rng.uniform(0.1, 0.45, size=3)
    c1 = c0 + rng.uniform(0.35, 0.5, size=3) * rng.choice([-1, 1], size=3)
    img = np.where(gt[..., None] == 1, c1, c0).astype(np.float32)
    img += rng.normal(0, 0.01, img.shape).astype(np.float32)
    return FeatureMap(np.clip(img, -1, 2)), LabelMap(gt)


def four_region_image(rng, n=256):
    yy, xx = np.mgrid[0:n, 0:n]
    split_x = (n // 2 + 12 * np.sin(yy[:, 0] / 17.0)).astype(int)
    split_y = (n // 2 + 10 * np.cos(xx[0] / 23.0)).astype(int)
    gt = np.zeros((n, n), dtype=np.uint32)
    gt[(xx >= split_x[:, None]) & (yy < split_y[None, :])] = 1
    gt[(xx < split_x[:, None]) & (yy >= split_y[None, :])] = 2
    gt[(xx >= split_x[:, None]) & (yy >= split_y[None, :])] = 3
    colors = np.array(
        [[0.2, 0.3, 0.7], [0.8, 0.2, 0.3], [0.3, 0.8, 0.3], [0.7, 0.7, 0.2]], dtype=np.float32
    )
    img = colors[gt] + rng.normal(0, 0.01, (n, n, 3)).astype(np.float32)
    return FeatureMap(np.clip(img, -1, 2)), LabelMap(gt)


def textured_image(rng, n=480, k=12):
    sy = rng.uniform(0, n, k)
    sx = rng.uniform(0, n, k)
    yy, xx = np.mgrid[0:n, 0:n]
    d = (yy[..., None] - sy) ** 2 + (xx[..., None] - sx) ** 2
    gt = d.argmin(axis=2).astype(np.uint32)
    cols = rng.uniform(0.15, 0.85, (k, 3)).astype(np.float32)
    img = cols[gt] + rng.normal(0, 0.04, (n, n, 3)).astype(np.float32)
    return FeatureMap(np.clip(img, -1, 2)), LabelMap(gt)


def majority_reconstruction(seg, gt: LabelMap) -> LabelMap:
    """Assign every superpixel its majority reference label (the map an
    annotator could reach by relabeling regions, which ASA scores)."""
    table, pu, gu = contingency_table(seg.labels, gt)
    majority = gu[table.argmax(axis=1)]
    lut = np.zeros(int(pu.max()) + 1, dtype=np.uint32)
    lut[pu] = majority.astype(np.uint32)
    return LabelMap(lut[seg.labels.labels])


def allpairs_prf(pred: np.ndarray, gt: np.ndarray, tol: int):
    """Integer-exact all-pairs boundary matching (squared distances)."""
    pb = np.argwhere(brute_boundaries(pred))
    gb = np.argwhere(brute_boundaries(gt))
    if len(pb) == 0 and len(gb) == 0:
        return 1.0, 1.0, 1.0
    if len(gb) == 0:
        return 1.0, 0.0, 0.0
    if len(pb) == 0:
        return 0.0, 0.0, 0.0
    d2 = ((pb[:, None, :] - gb[None, :, :]) ** 2).sum(axis=2)
    recall = float(np.count_nonzero(d2.min(axis=0) <= tol * tol) / len(gb))
    precision = float(np.count_nonzero(d2.min(axis=1) <= tol * tol) / len(pb))
    f1 = 0.0 if recall + precision == 0 else 2 * precision * recall / (precision + recall)
    return recall, precision, f1


# ---------------------------------------------------------------------------
# criteria


def test_metric_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    for _ in range(200):
        pred = LabelMap(rng.integers(0, 5, size=(16, 16)).astype(np.uint32))
        gt = LabelMap(rng.integers(0, 5, size=(16, 16)).astype(np.uint32))
        assert abs(asa(pred, gt) - brute_asa(pred.labels, gt.labels)) <= 1e-12
        for tol in (0, 1, 2):
            got = boundary_prf(pred, gt, tol)
            want = allpairs_prf(pred.labels, gt.labels, tol)
            for g, w in zip(got, want):
                assert abs(g - w) <= 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report("metric-oracle-equivalence", f"200 pairs x 3 tolerances exact in {elapsed:.1f}s")


def test_slic_correctness():
    warm_up_jit()
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst_asa, worst_f1, worst_recall = 1.0, 1.0, 1.0
    for _ in range(20):
        fmap, gt = two_region_image(rng)
        for step in (16, 32, 64):
            seg = slic_segment(fmap, SlicParams(step=step, compactness=0.1))
            a = asa(seg.labels, gt)
            recon = majority_reconstruction(seg, gt)
            _, _, f1 = boundary_prf(recon, gt, 2)
            recall, _, _ = boundary_prf(seg.labels, gt, 2)
            worst_asa = min(worst_asa, a)
            worst_f1 = min(worst_f1, f1)
            worst_recall = min(worst_recall, recall)
    elapsed = time.perf_counter() - t0
    assert worst_asa >= 0.99
    assert worst_f1 >= 0.95
    assert worst_recall >= 0.95
    assert elapsed < 30.0
    report(
        "slic-correctness",
        f"worst ASA {worst_asa:.4f}, worst achievable F1 {worst_f1:.4f}, "
        f"worst raw recall {worst_recall:.4f} in {elapsed:.1f}s",
    )


def test_merge_correctness():
    warm_up_jit()
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    fmap, gt = four_region_image(rng)
    seg = slic_segment(fmap, SlicParams(step=16, compactness=0.5))
    assert seg.n_superpixels >= 100
    dend = agglomerate(seg, build_rag(seg))
    cut = cut_dendrogram(dend, seg, 4)

    a = asa(cut, gt)
    assert a >= 0.999
    assert len(np.unique(cut.labels)) == 4
    comp = flood_components(cut.labels)
    assert len(np.unique(comp)) == 4  # every cut region spatially connected

    _, _, f1_cut = boundary_prf(cut, gt, 15)
    _, _, f1_raw = boundary_prf(seg.labels, gt, 15)
    assert f1_cut > f1_raw
    elapsed = time.perf_counter() - t0
    assert elapsed < 20.0
    report(
        "merge-correctness",
        f"{seg.n_superpixels} superpixels -> k=4: ASA {a:.5f}, "
        f"F1 {f1_raw:.3f} -> {f1_cut:.3f} in {elapsed:.1f}s",
    )


def test_asa_monotonic_under_merging():
    warm_up_jit()
    rng = np.random.default_rng(SEED)
    checked = 0
    for _ in range(50):
        fmap = FeatureMap(rng.uniform(0, 1, size=(32, 32, 2)).astype(np.float32))
        gt = LabelMap(rng.integers(0, 4, size=(32, 32)).astype(np.uint32))
        seg = slic_segment(fmap, SlicParams(step=8, compactness=5.0, iterations=3))
        dend = agglomerate(seg, build_rag(seg))
        prev = None
        for k in range(seg.n_superpixels, dend.n_components - 1, -1):
            value = asa(cut_dendrogram(dend, seg, k), gt)
            if prev is not None:
                assert value <= prev + 1e-15
                checked += 1
            prev = value
    report("asa-monotonic-under-merging", f"{checked} consecutive cuts on 50 fixtures")


def test_trend_reproduction():
    warm_up_jit()
    diameters = [40, 80, 120, 160, 240]
    per_image = []
    for i in range(10):
        fmap, gt = textured_image(np.random.default_rng(SEED + i))
        per_image.append(
            [asa(slic_segment(fmap, SlicParams(step=d, compactness=10.0)).labels, gt) for d in diameters]
        )
    mean_asa = np.asarray(per_image).mean(axis=0)
    inversions = int(np.sum(np.diff(mean_asa) > 0))
    assert inversions <= 1
    report(
        "trend-reproduction",
        "mean ASA by diameter " + ", ".join(f"{v:.3f}" for v in mean_asa) + f" ({inversions} inversions)",
    )


def _run_cli(args, cwd):
    proc = subprocess.run(
        [sys.executable, "-m", "superpix.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def test_determinism(tmp_path):
    rng = np.random.default_rng(SEED)
    fmap, gt = four_region_image(rng, n=96)
    img = (np.clip(fmap.data, 0, 1) * 255).astype(np.uint8)
    img_path = tmp_path / "img.png"
    gt_path = tmp_path / "gt.png"
    Image.fromarray(img).save(img_path)
    Image.fromarray(gt.labels.astype(np.uint16)).save(gt_path)
    cfg_path = tmp_path / "sweep.toml"
    cfg_path.write_text('[sweep]\ndiameters = [16, 32]\ncluster_counts = ["none", 4]\n')

    outs = []
    for name, threads in (("a", 1), ("b", 8), ("c", 1)):
        out = tmp_path / name
        _run_cli(
            ["segment", "--image", str(img_path), "--method", "rgb-slic",
             "--step", "16", "--out", str(out), "--threads", str(threads)],
            tmp_path,
        )
        _run_cli(["export-dendrogram", "--out", str(out)], tmp_path)
        _run_cli(
            ["sweep", "--config", str(cfg_path), "--image", str(img_path), "--gt", str(gt_path),
             "--method", "rgb-slic", "--out", str(out), "--threads", str(threads), "--no-timing"],
            tmp_path,
        )
        outs.append(out)

    artifacts = ["labels.png", "stats.json", "dendrogram.json", "report.csv"]
    for other in outs[1:]:
        for name in artifacts:
            assert filecmp.cmp(outs[0] / name, other / name, shallow=False), name
    report("determinism", "labels, stats, dendrogram, and report byte-identical across runs and thread counts")


def test_stain_round_trip():
    rng = np.random.default_rng(SEED)
    matrix = StainMatrix.default()
    worst = 0
    for _ in range(10):
        conc = rng.uniform(0.0, 1.2, size=(64, 64, 3))
        od = conc @ matrix.rows
        img = RasterImage(np.clip(np.round(256.0 * 10.0 ** (-od) - 1.0), 0, 255).astype(np.uint8))
        back = hed_to_rgb(rgb_to_hed(img, matrix), matrix)
        bright = img.data.min(axis=2) >= 10
        err = np.abs(back.data.astype(int) - img.data.astype(int)).max(axis=2)
        if bright.any():
            worst = max(worst, int(err[bright].max()))
    assert worst <= 2
    report("stain-round-trip", f"max intensity error {worst} on 10 random stain images")


def test_polygon_round_trip():
    rng = np.random.default_rng(SEED)
    for trial in range(100):
        h = int(rng.integers(1, 17))
        w = int(rng.integers(1, 17))
        labels = LabelMap(rng.integers(0, 6, size=(h, w)).astype(np.uint32))
        back = rasterize_polygons(trace_region_polygons(labels), h, w)
        assert (back.labels == labels.labels).all(), f"trial {trial}"
    report("polygon-round-trip", "100 random label maps reproduced exactly")


def test_performance():
    warm_up_jit()
    rng = np.random.default_rng(SEED)
    low = rng.uniform(0, 1, size=(47, 47, 3)).astype(np.float32)
    texture = upsample(FeatureMap(low), 750, 750, "bilinear")
    tile = (texture.data * 255).astype(np.uint8)
    image = RasterImage(np.tile(tile, (8, 8, 1)))
    assert image.data.shape == (6000, 6000, 3)

    t0 = time.perf_counter()
    seg = slic_segment(rgb_to_feature(image), SlicParams(step=120, compactness=10.0, iterations=10))
    elapsed = time.perf_counter() - t0
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1e6
    assert seg.n_superpixels > 0
    assert elapsed < 60.0
    assert peak_gb < 4.0
    report("performance", f"6000x6000 rgb-slic in {elapsed:.1f}s, peak RSS {peak_gb:.2f} GB")
