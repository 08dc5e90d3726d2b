"""Localized iterative clustering over C-channel feature maps.

The classic superpixel scheme generalized to arbitrary channel counts:
cluster centers seeded on a regular grid (perturbed off gradients), a few
rounds of windowed assignment/update under the joint distance
``D^2 = d_f^2 + m^2 * d_s^2 / S^2``, then connectivity enforcement that
absorbs undersized fragments into their biggest neighbor.

Everything here is deterministic: assignment scans centers in index order
with strict-improvement updates (ties go to the lower center index), and
the update step accumulates per-label sums in float64 in row-major pixel
order, so outputs are bit-identical across runs and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from skimage.measure import label as _cc_label

from .imagecore import FeatureMap, LabelMap, densify_labels


@dataclass(frozen=True)
class SlicParams:
    """Grid spacing S (the superpixel diameter), compactness m, iteration
    count, the fraction of S^2 below which fragments are absorbed, and
    whether channels are standardized first (defaults on for C > 3)."""

    step: int
    compactness: float = 10.0
    iterations: int = 10
    min_region_frac: float = 0.25
    normalize_features: bool | None = None

    def __post_init__(self):
        if self.step < 2:
            raise ValueError("step must be >= 2")
        if self.compactness < 0:
            raise ValueError("compactness must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.min_region_frac < 1.0:
            raise ValueError("min_region_frac must lie in (0, 1)")


@dataclass(frozen=True)
class ClusterCenter:
    feature: np.ndarray
    x: float
    y: float
    count: int = 0


@dataclass(frozen=True)
class SuperpixelSegmentation:
    """Dense label map plus per-label pixel counts and mean feature vectors."""

    labels: LabelMap
    counts: np.ndarray  # (L,) int64
    means: np.ndarray  # (L, C) float64

    @property
    def n_superpixels(self) -> int:
        return len(self.counts)


def _gradient_at(feat: np.ndarray, y: int, x: int) -> float:
    """Squared central-difference gradient at an interior pixel."""
    gx = feat[y, x + 1].astype(np.float64) - feat[y, x - 1].astype(np.float64)
    gy = feat[y + 1, x].astype(np.float64) - feat[y - 1, x].astype(np.float64)
    return float(np.dot(gx, gx) + np.dot(gy, gy))


def init_centers(fmap: FeatureMap, step: int) -> list[ClusterCenter]:
    """Seed centers on a regular grid and nudge each to the strictly
    lowest-gradient pixel in its 3x3 neighborhood (border pixels have no
    defined gradient and are excluded)."""
    h, w = fmap.height, fmap.width
    if step > min(h, w):
        raise ValueError(f"step {step} exceeds image extent {h}x{w}")
    feat = fmap.data
    xs = [min(int((i + 0.5) * step), w - 1) for i in range((w + step - 1) // step)]
    ys = [min(int((j + 0.5) * step), h - 1) for j in range((h + step - 1) // step)]
    centers = []
    for cy in ys:
        for cx in xs:
            bx, by = cx, cy
            if 0 < cy < h - 1 and 0 < cx < w - 1:
                best = _gradient_at(feat, cy, cx)
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 < ny < h - 1 and 0 < nx < w - 1:
                            g = _gradient_at(feat, ny, nx)
                            if g < best:
                                best = g
                                bx, by = nx, ny
            centers.append(ClusterCenter(feature=feat[by, bx].astype(np.float64), x=float(bx), y=float(by)))
    return centers


@njit(cache=True, nogil=True)
def _assign(feat, cx, cy, cf, ms, step, labels, best):  # pragma: no cover - jitted
    h, w, c = feat.shape
    best[:, :] = np.inf
    for k in range(cx.shape[0]):
        xi = int(cx[k] + 0.5)
        yi = int(cy[k] + 0.5)
        x0 = max(xi - step, 0)
        x1 = min(xi + step, w)
        y0 = max(yi - step, 0)
        y1 = min(yi + step, h)
        for y in range(y0, y1):
            for x in range(x0, x1):
                df2 = 0.0
                for ch in range(c):
                    d = np.float64(feat[y, x, ch]) - cf[k, ch]
                    df2 += d * d
                dx = x - cx[k]
                dy = y - cy[k]
                dist = np.float32(df2 + ms * (dx * dx + dy * dy))
                if dist < best[y, x]:
                    best[y, x] = dist
                    labels[y, x] = k
    return labels


@njit(cache=True, nogil=True)
def _accumulate(feat, labels, k):  # pragma: no cover - jitted
    """Per-label pixel counts and position/feature sums, row-major order."""
    h, w, c = feat.shape
    counts = np.zeros(k, dtype=np.int64)
    sx = np.zeros(k, dtype=np.float64)
    sy = np.zeros(k, dtype=np.float64)
    fs = np.zeros((k, c), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            counts[lab] += 1
            sx[lab] += x
            sy[lab] += y
            for ch in range(c):
                fs[lab, ch] += np.float64(feat[y, x, ch])
    return counts, sx, sy, fs


def _grid_cell_labels(h: int, w: int, step: int, nx: int, ny: int) -> np.ndarray:
    """Fallback assignment: the grid cell containing each pixel."""
    col = np.minimum(np.arange(w) // step, nx - 1).astype(np.int32)
    row = np.minimum(np.arange(h) // step, ny - 1).astype(np.int32)
    return row[:, None] * np.int32(nx) + col[None, :]


def _standardize(data: np.ndarray) -> np.ndarray:
    f = data.astype(np.float64)
    mean = f.mean(axis=(0, 1))
    std = f.std(axis=(0, 1))
    std[std == 0] = 1.0
    return ((f - mean) / std).astype(np.float32)


def slic_segment(fmap: FeatureMap, params: SlicParams) -> SuperpixelSegmentation:
    """Run the windowed clustering loop and return a connected segmentation."""
    h, w, c = fmap.height, fmap.width, fmap.channels
    step = params.step
    if step > min(h, w):
        raise ValueError(f"step {step} exceeds image extent {h}x{w}")

    normalize = params.normalize_features
    if normalize is None:
        normalize = c > 3
    work = FeatureMap(_standardize(fmap.data)) if normalize else fmap
    feat = work.data

    centers = init_centers(work, step)
    k = len(centers)
    cx = np.array([ctr.x for ctr in centers], dtype=np.float64)
    cy = np.array([ctr.y for ctr in centers], dtype=np.float64)
    cf = np.stack([ctr.feature for ctr in centers]).astype(np.float64)

    nx = (w + step - 1) // step
    ny = (h + step - 1) // step
    labels = _grid_cell_labels(h, w, step, nx, ny)
    best = np.empty((h, w), dtype=np.float32)
    ms = (params.compactness * params.compactness) / float(step * step)

    for _ in range(params.iterations):
        _assign(feat, cx, cy, cf, ms, step, labels, best)
        counts, sx, sy, fs = _accumulate(feat, labels, k)
        nonzero = counts > 0
        denom = counts[nonzero].astype(np.float64)
        cx[nonzero] = sx[nonzero] / denom
        cy[nonzero] = sy[nonzero] / denom
        cf[nonzero] = fs[nonzero] / denom[:, None]

    connected = enforce_connectivity(LabelMap(labels.astype(np.uint32)), step, params.min_region_frac)
    return segmentation_from_labels(connected, work)


def segmentation_from_labels(labels: LabelMap, fmap: FeatureMap) -> SuperpixelSegmentation:
    """Compute per-label counts and float64 mean features for a dense map."""
    if (labels.height, labels.width) != (fmap.height, fmap.width):
        raise ValueError("label map and feature map dimensions differ")
    lab32 = labels.labels.astype(np.int32)
    n = int(lab32.max()) + 1
    counts, _, _, fs = _accumulate(fmap.data, lab32, n)
    means = fs / counts[:, None].astype(np.float64)
    return SuperpixelSegmentation(labels=labels, counts=counts, means=means)


def enforce_connectivity(labels: LabelMap, step: int, min_region_frac: float = 0.25) -> LabelMap:
    """Split labels into 4-connected components and absorb undersized ones.

    Components smaller than ``min_region_frac * step**2`` are relabeled to
    the adjacent component with the largest pixel count (ties go to the
    smaller label), repeatedly, until nothing undersized remains. Output
    labels are dense in first-occurrence row-major order; disconnected
    same-label components that survive get distinct labels.
    """
    lab = labels.labels.astype(np.int32)
    comp = _cc_label(lab, connectivity=1, background=-1)
    comp -= 1
    n = int(comp.max()) + 1
    flat = comp.ravel()
    sizes = np.bincount(flat, minlength=n).astype(np.int64)
    comp_label = np.zeros(n, dtype=np.int64)
    comp_label[flat[::-1]] = lab.ravel()[::-1]

    neighbors: list[set[int]] = [set() for _ in range(n)]
    for a, b in _adjacent_pairs(comp):
        neighbors[a].add(b)
        neighbors[b].add(a)

    parent = np.arange(n, dtype=np.int64)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    threshold = min_region_frac * step * step
    changed = True
    while changed:
        changed = False
        for ci in range(n):
            if find(ci) != ci or sizes[ci] >= threshold:
                continue
            roots = {find(x) for x in neighbors[ci]}
            roots.discard(ci)
            if not roots:
                continue
            target = min(roots, key=lambda r: (-sizes[r], comp_label[r], r))
            parent[ci] = target
            sizes[target] += sizes[ci]
            neighbors[target] |= neighbors[ci]
            neighbors[ci] = set()
            changed = True

    roots = np.array([find(i) for i in range(n)], dtype=np.int64)
    # rank roots by first pixel occurrence, then relabel densely
    first = np.empty(n, dtype=np.int64)
    first[flat[::-1]] = np.arange(flat.size - 1, -1, -1, dtype=np.int64)
    root_first = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(root_first, roots, first)
    alive = np.unique(roots)
    order = np.argsort(root_first[alive], kind="stable")
    remap = np.empty(n, dtype=np.uint32)
    remap[alive[order]] = np.arange(len(alive), dtype=np.uint32)
    return LabelMap(remap[roots[comp]])


def _adjacent_pairs(comp: np.ndarray) -> np.ndarray:
    """Unique unordered pairs of 4-adjacent component ids."""
    right_mask = comp[:, :-1] != comp[:, 1:]
    down_mask = comp[:-1, :] != comp[1:, :]
    right = np.stack([comp[:, :-1][right_mask], comp[:, 1:][right_mask]], axis=1)
    down = np.stack([comp[:-1, :][down_mask], comp[1:, :][down_mask]], axis=1)
    pairs = np.concatenate([right, down])
    if len(pairs) == 0:
        return pairs
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)
