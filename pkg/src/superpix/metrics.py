"""Ground-truth evaluation: achievable accuracy and boundary scores.

Achievable segmentation accuracy (ASA) is the best pixel accuracy a
refinement step could reach by giving every predicted region its majority
reference label. Boundary recall/precision match boundary pixels between
prediction and reference under a Euclidean pixel tolerance; the default
tolerance is 15 px, i.e. 3.75 um at 0.25 um/px.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .imagecore import LabelMap

DEFAULT_TOLERANCE_PX = 15


@dataclass(frozen=True)
class GroundTruth:
    """Reference label map plus optional class names indexed by label."""

    labels: LabelMap
    class_names: list[str] | None = None


@dataclass(frozen=True)
class MetricsReport:
    asa: float
    boundary_recall: float
    boundary_precision: float
    boundary_f1: float
    n_regions: int
    tolerance_px: float


def _check_dims(a: LabelMap, b: LabelMap) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(f"dimension mismatch: {a.height}x{a.width} vs {b.height}x{b.width}")


def contingency_table(pred: LabelMap, gt: LabelMap, mask: np.ndarray | None = None):
    """Overlap counts between predicted and reference regions.

    Returns (table, pred_values, gt_values) where table[i, j] counts pixels
    with pred == pred_values[i] and gt == gt_values[j].
    """
    p = pred.labels.ravel()
    g = gt.labels.ravel()
    if mask is not None:
        keep = mask.ravel()
        p = p[keep]
        g = g[keep]
    pu, pi = np.unique(p, return_inverse=True)
    gu, gi = np.unique(g, return_inverse=True)
    code = pi.astype(np.int64) * len(gu) + gi
    table = np.bincount(code, minlength=len(pu) * len(gu)).reshape(len(pu), len(gu))
    return table, pu, gu


def asa(pred: LabelMap, gt: LabelMap, ignore_label: int | None = None) -> float:
    """Fraction of pixels covered when every predicted region takes its
    majority reference label."""
    _check_dims(pred, gt)
    mask = None
    if ignore_label is not None:
        mask = gt.labels != ignore_label
        if not mask.any():
            return 1.0
    table, _, _ = contingency_table(pred, gt, mask)
    total = int(table.sum())
    return float(table.max(axis=1).sum() / total)


def extract_boundaries(labels: LabelMap) -> np.ndarray:
    """Boolean mask of label-change pixels.

    A pixel is marked iff its right or bottom in-image 4-neighbor carries a
    different label; the neighbor is marked symmetrically. The image border
    itself is never marked just for being the border.
    """
    lab = labels.labels
    mask = np.zeros(lab.shape, dtype=bool)
    horiz = lab[:, :-1] != lab[:, 1:]
    mask[:, :-1] |= horiz
    mask[:, 1:] |= horiz
    vert = lab[:-1, :] != lab[1:, :]
    mask[:-1, :] |= vert
    mask[1:, :] |= vert
    return mask


def boundary_prf(
    pred: LabelMap,
    gt: LabelMap,
    tolerance: float = DEFAULT_TOLERANCE_PX,
    ignore_label: int | None = None,
) -> tuple[float, float, float]:
    """Boundary (recall, precision, f1) at a Euclidean pixel tolerance.

    recall = fraction of reference boundary pixels within ``tolerance`` of
    some predicted boundary pixel; precision swaps the roles. Empty-set
    conventions: both empty -> (1,1,1); reference empty -> recall 1,
    precision 0; prediction empty -> (0,0,0).
    """
    _check_dims(pred, gt)
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    pred_b = extract_boundaries(pred)
    gt_b = extract_boundaries(gt)
    if ignore_label is not None:
        keep = gt.labels != ignore_label
        pred_b &= keep
        gt_b &= keep

    has_pred = bool(pred_b.any())
    has_gt = bool(gt_b.any())
    if not has_pred and not has_gt:
        return 1.0, 1.0, 1.0
    if not has_gt:
        return 1.0, 0.0, 0.0
    if not has_pred:
        return 0.0, 0.0, 0.0

    # exact Euclidean distance transforms of each boundary set
    dist_to_pred = distance_transform_edt(~pred_b)
    dist_to_gt = distance_transform_edt(~gt_b)
    recall = float(np.count_nonzero(dist_to_pred[gt_b] <= tolerance) / np.count_nonzero(gt_b))
    precision = float(np.count_nonzero(dist_to_gt[pred_b] <= tolerance) / np.count_nonzero(pred_b))
    f1 = 0.0 if recall + precision == 0 else 2.0 * precision * recall / (precision + recall)
    return recall, precision, f1


def evaluate(
    pred: LabelMap,
    gt: GroundTruth,
    tolerance: float = DEFAULT_TOLERANCE_PX,
    ignore_label: int | None = None,
) -> MetricsReport:
    """Bundle ASA, boundary scores, and the region count for one map."""
    recall, precision, f1 = boundary_prf(pred, gt.labels, tolerance, ignore_label)
    return MetricsReport(
        asa=asa(pred, gt.labels, ignore_label),
        boundary_recall=recall,
        boundary_precision=precision,
        boundary_f1=f1,
        n_regions=len(np.unique(pred.labels)),
        tolerance_px=tolerance,
    )
