"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own code paths: metrics
are recomputed with explicit loops, connectivity with a scratch flood
fill, and clustering with exhaustive pair scans, so tests compare two
independent routes to the same answer.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np
import pytest

from superpix.imagecore import FeatureMap, LabelMap


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_label_map(rng, h, w, n_labels) -> LabelMap:
    return LabelMap(rng.integers(0, n_labels, size=(h, w)).astype(np.uint32))


def random_feature_map(rng, h, w, c, lo=-4.0, hi=4.0) -> FeatureMap:
    return FeatureMap(rng.uniform(lo, hi, size=(h, w, c)).astype(np.float32))


# ---------------------------------------------------------------------------
# connectivity oracle


def flood_components(labels: np.ndarray) -> np.ndarray:
    """4-connected components of equal-valued pixels via BFS; -1 = unvisited."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    current = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] != -1:
                continue
            value = labels[sy, sx]
            queue = deque([(sy, sx)])
            comp[sy, sx] = current
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] == -1 and labels[ny, nx] == value:
                        comp[ny, nx] = current
                        queue.append((ny, nx))
            current += 1
    return comp


def assert_labels_connected(labels: np.ndarray) -> None:
    """Every label's pixel set must form a single 4-connected component."""
    comp = flood_components(labels)
    seen: dict[int, int] = {}
    for y in range(labels.shape[0]):
        for x in range(labels.shape[1]):
            lab = int(labels[y, x])
            c = int(comp[y, x])
            if lab in seen:
                assert seen[lab] == c, f"label {lab} split into multiple components"
            else:
                seen[lab] = c


def assert_labels_dense(labels: np.ndarray) -> None:
    values = np.unique(labels)
    assert values[0] == 0 and values[-1] == len(values) - 1, "labels are not dense"


# ---------------------------------------------------------------------------
# metric oracles


def brute_asa(pred: np.ndarray, gt: np.ndarray) -> float:
    """Contingency-table ASA with explicit loops, float64 accumulation."""
    total = 0
    for p in np.unique(pred):
        sel = gt[pred == p]
        best = 0
        for g in np.unique(sel):
            best = max(best, int(np.sum(sel == g)))
        total += best
    return float(total) / float(pred.size)


def brute_boundaries(labels: np.ndarray) -> np.ndarray:
    h, w = labels.shape
    mask = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            if x + 1 < w and labels[y, x] != labels[y, x + 1]:
                mask[y, x] = mask[y, x + 1] = True
            if y + 1 < h and labels[y, x] != labels[y + 1, x]:
                mask[y, x] = mask[y + 1, x] = True
    return mask


def brute_boundary_prf(pred: np.ndarray, gt: np.ndarray, tol: float):
    """All-pairs Euclidean matching of boundary pixels."""
    pb = [tuple(p) for p in np.argwhere(brute_boundaries(pred))]
    gb = [tuple(p) for p in np.argwhere(brute_boundaries(gt))]
    if not pb and not gb:
        return 1.0, 1.0, 1.0
    if not gb:
        return 1.0, 0.0, 0.0
    if not pb:
        return 0.0, 0.0, 0.0

    def within(points, others):
        hit = 0
        for y, x in points:
            dmin = min(math.hypot(y - oy, x - ox) for oy, ox in others)
            if dmin <= tol:
                hit += 1
        return hit / len(points)

    recall = within(gb, pb)
    precision = within(pb, gb)
    f1 = 0.0 if recall + precision == 0 else 2 * precision * recall / (precision + recall)
    return recall, precision, f1


# ---------------------------------------------------------------------------
# clustering oracle


def brute_agglomerate(counts, means, edges):
    """Exhaustive greedy constrained merging; returns the merge list."""
    counts = {i: int(n) for i, n in enumerate(counts)}
    means = {i: np.asarray(m, dtype=np.float64) for i, m in enumerate(means)}
    adj = {i: set() for i in counts}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    next_id = len(counts)
    merges = []
    while True:
        best = None
        for a in sorted(adj):
            for b in sorted(adj[a]):
                if a >= b:
                    continue
                d = means[a] - means[b]
                delta = counts[a] * counts[b] / (counts[a] + counts[b]) * float(np.dot(d, d))
                key = (delta, a, b)
                if best is None or key < best:
                    best = key
        if best is None:
            break
        delta, a, b = best
        new = next_id
        next_id += 1
        n = counts[a] + counts[b]
        means[new] = (counts[a] * means[a] + counts[b] * means[b]) / n
        counts[new] = n
        neighbors = (adj[a] | adj[b]) - {a, b}
        adj[new] = neighbors
        for x in neighbors:
            adj[x] -= {a, b}
            adj[x].add(new)
        del adj[a], adj[b], counts[a], counts[b], means[a], means[b]
        merges.append((a, b, delta, new))
    return merges


# ---------------------------------------------------------------------------
# resampling oracle


def brute_bilinear(src: np.ndarray, th: int, tw: int) -> np.ndarray:
    """Scalar-loop half-pixel-center bilinear upsampling with edge clamp."""
    h, w, c = src.shape
    out = np.zeros((th, tw, c), dtype=np.float64)
    for y in range(th):
        sy = min(max((y + 0.5) * h / th - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        ty = sy - y0
        for x in range(tw):
            sx = min(max((x + 0.5) * w / tw - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            tx = sx - x0
            for ch in range(c):
                top = (1 - tx) * src[y0, x0, ch] + tx * src[y0, x1, ch]
                bot = (1 - tx) * src[y1, x0, ch] + tx * src[y1, x1, ch]
                out[y, x, ch] = (1 - ty) * top + ty * bot
    return out


def voronoi_grid_labels(h: int, w: int, step: int) -> np.ndarray:
    """Nearest grid center per pixel, ties to the lower center index."""
    xs = [min(int((i + 0.5) * step), w - 1) for i in range((w + step - 1) // step)]
    ys = [min(int((j + 0.5) * step), h - 1) for j in range((h + step - 1) // step)]
    centers = [(x, y) for y in ys for x in xs]
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            best = None
            for idx, (cx, cy) in enumerate(centers):
                d = (x - cx) ** 2 + (y - cy) ** 2
                if best is None or d < best[0]:
                    best = (d, idx)
            out[y, x] = best[1]
    return out
