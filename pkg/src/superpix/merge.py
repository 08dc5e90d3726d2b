"""Neighbor-constrained agglomerative merging of superpixels.

Superpixels are summarized by their mean feature vector; adjacent clusters
are merged greedily in order of the Ward criterion
``(n_a * n_b / (n_a + n_b)) * ||mu_a - mu_b||^2``, so within-cluster
variance grows as slowly as possible. Only spatial neighbors may merge,
which keeps every cut of the resulting dendrogram 4-connected. Because of
that adjacency constraint, recorded merge heights are not necessarily
monotone: pairs that become adjacent late can carry smaller deltas than
earlier merges. Cuts are therefore addressed by cluster count, never by
height threshold.
"""

from __future__ import annotations

import heapq
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .imagecore import LabelMap, densify_labels
from .slic import SuperpixelSegmentation, _adjacent_pairs


@dataclass(frozen=True)
class RegionAdjacencyGraph:
    """Undirected adjacency over superpixel labels 0..n-1."""

    n: int
    neighbors: tuple[frozenset, ...]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])


@dataclass(frozen=True)
class ClusterNode:
    id: int
    members: frozenset
    n: int
    mu: np.ndarray


@dataclass(frozen=True)
class MergeStep:
    a: int
    b: int
    height: float
    new_id: int


@dataclass(frozen=True)
class Dendrogram:
    """Ordered merge record over an initial set of superpixels.

    ``new_id = initial_count + merge index``; a connected adjacency graph
    yields exactly ``initial_count - 1`` merges. Node means/counts are
    carried along so the structure round-trips through JSON on its own.
    """

    initial_count: int
    merges: tuple[MergeStep, ...]
    superpixel_means: np.ndarray = field(repr=False)
    superpixel_counts: np.ndarray = field(repr=False)

    @property
    def n_components(self) -> int:
        return self.initial_count - len(self.merges)


def build_rag(seg: SuperpixelSegmentation) -> RegionAdjacencyGraph:
    """Edges join labels whose pixels touch through a 4-neighbor pair."""
    n = seg.n_superpixels
    neighbors: list[set] = [set() for _ in range(n)]
    for a, b in _adjacent_pairs(seg.labels.labels.astype(np.int64)):
        neighbors[int(a)].add(int(b))
        neighbors[int(b)].add(int(a))
    return RegionAdjacencyGraph(n=n, neighbors=tuple(frozenset(s) for s in neighbors))


def ward_delta(a: ClusterNode, b: ClusterNode) -> float:
    """Increase in within-cluster variance if a and b were merged."""
    diff = a.mu - b.mu
    return float((a.n * b.n) / (a.n + b.n) * np.dot(diff, diff))


def _pair_delta(na: float, nb: float, mua: np.ndarray, mub: np.ndarray) -> float:
    diff = mua - mub
    return float((na * nb) / (na + nb) * np.dot(diff, diff))


def agglomerate(seg: SuperpixelSegmentation, rag: RegionAdjacencyGraph) -> Dendrogram:
    """Greedy neighbor-constrained Ward merging down to one cluster per
    connected component.

    Each step merges the currently adjacent pair with the smallest delta;
    ties resolve to the lexicographically smallest (min id, max id) pair.
    The merged node gets the pixel-count-weighted mean of its parents.
    """
    if rag.n != seg.n_superpixels:
        raise ValueError("adjacency graph does not match the segmentation")
    n0 = seg.n_superpixels
    counts = {i: int(seg.counts[i]) for i in range(n0)}
    means = {i: seg.means[i].astype(np.float64) for i in range(n0)}
    nbrs = {i: set(rag.neighbors[i]) for i in range(n0)}

    heap: list[tuple[float, int, int]] = []
    for i in range(n0):
        for j in rag.neighbors[i]:
            if i < j:
                heap.append((_pair_delta(counts[i], counts[j], means[i], means[j]), i, j))
    heapq.heapify(heap)

    merges: list[MergeStep] = []
    next_id = n0
    alive = set(range(n0))
    while heap:
        delta, a, b = heapq.heappop(heap)
        if a not in alive or b not in alive:
            continue
        new = next_id
        next_id += 1
        na, nb = counts.pop(a), counts.pop(b)
        mua, mub = means.pop(a), means.pop(b)
        counts[new] = na + nb
        means[new] = (na * mua + nb * mub) / (na + nb)
        merged_nbrs = (nbrs.pop(a) | nbrs.pop(b)) - {a, b}
        nbrs[new] = merged_nbrs
        alive.discard(a)
        alive.discard(b)
        alive.add(new)
        for x in merged_nbrs:
            nbrs[x].discard(a)
            nbrs[x].discard(b)
            nbrs[x].add(new)
            lo, hi = (x, new) if x < new else (new, x)
            heapq.heappush(heap, (_pair_delta(counts[x], counts[new], means[x], means[new]), lo, hi))
        merges.append(MergeStep(a=a, b=b, height=delta, new_id=new))

    return Dendrogram(
        initial_count=n0,
        merges=tuple(merges),
        superpixel_means=seg.means.copy(),
        superpixel_counts=seg.counts.copy(),
    )


def cut_dendrogram(dendrogram: Dendrogram, seg: SuperpixelSegmentation, k: int) -> LabelMap:
    """Apply the first L-k merges and return the dense relabeled map."""
    n0 = dendrogram.initial_count
    if seg.n_superpixels != n0:
        raise ValueError("segmentation does not match the dendrogram")
    if not dendrogram.n_components <= k <= n0:
        raise ValueError(
            f"k={k} outside valid range [{dendrogram.n_components}, {n0}]"
        )
    parent = np.arange(n0 + len(dendrogram.merges), dtype=np.int64)
    for step in dendrogram.merges[: n0 - k]:
        parent[step.a] = step.new_id
        parent[step.b] = step.new_id

    root = np.arange(n0, dtype=np.int64)
    for i in range(n0):
        r = i
        while parent[r] != r:
            r = parent[r]
        root[i] = r
    return LabelMap(densify_labels(root[seg.labels.labels.astype(np.int64)]))


# ---------------------------------------------------------------------------
# JSON interchange, consumed by the annotation frontend


def dendrogram_to_dict(dendrogram: Dendrogram) -> dict:
    return {
        "initial_count": dendrogram.initial_count,
        "merges": [[m.a, m.b, m.height, m.new_id] for m in dendrogram.merges],
        "superpixel_means": dendrogram.superpixel_means.tolist(),
        "superpixel_counts": dendrogram.superpixel_counts.tolist(),
    }


def dendrogram_from_dict(doc: dict) -> Dendrogram:
    n0 = int(doc["initial_count"])
    merges = tuple(
        MergeStep(a=int(a), b=int(b), height=float(h), new_id=int(nid))
        for a, b, h, nid in doc["merges"]
    )
    for idx, m in enumerate(merges):
        if m.new_id != n0 + idx:
            raise ValueError("merge record ids are not sequential")
    return Dendrogram(
        initial_count=n0,
        merges=merges,
        superpixel_means=np.asarray(doc["superpixel_means"], dtype=np.float64),
        superpixel_counts=np.asarray(doc["superpixel_counts"], dtype=np.int64),
    )


def save_dendrogram(dendrogram: Dendrogram, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(dendrogram_to_dict(dendrogram), fh)


def load_dendrogram(path: str | os.PathLike) -> Dendrogram:
    with open(path) as fh:
        return dendrogram_from_dict(json.load(fh))
