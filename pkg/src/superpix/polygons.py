"""Exact polygon export of label maps, and its rasterization inverse.

Every region is traced along pixel edges into closed rings with vertices
at integer pixel-corner coordinates (x right, y down). Walking keeps the
region on the left, so outer rings and hole rings come out with opposite
orientation; at checkerboard corners the walk turns left, which keeps
4-connected components on separate rings. Rasterizing the rings with
even-odd parity reproduces the label map bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import find_objects

from .imagecore import LabelMap

Ring = list[tuple[int, int]]
Polygon = tuple[Ring, list[Ring]]  # (outer, holes)

# directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y
_DX = (1, 0, -1, 0)
_DY = (0, 1, 0, -1)


def _trace_mask(mask: np.ndarray, x_off: int, y_off: int) -> list[Ring]:
    """All boundary rings of a boolean mask, region kept on the left."""
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask

    out_dirs: dict[tuple[int, int], int] = {}
    starts: list[tuple[int, int, int]] = []

    def add_edge(x: int, y: int, d: int) -> None:
        out_dirs[(x, y)] = out_dirs.get((x, y), 0) | (1 << d)
        starts.append((y, x, d))

    above = padded[:-1, 1:-1]
    below = padded[1:, 1:-1]
    for y, x in np.argwhere(above & ~below):
        add_edge(x, y, 0)  # region above: walk +x
    for y, x in np.argwhere(below & ~above):
        add_edge(x + 1, y, 2)  # region below: walk -x
    left = padded[1:-1, :-1]
    right = padded[1:-1, 1:]
    for y, x in np.argwhere(right & ~left):
        add_edge(x, y, 1)  # region to the right: walk +y
    for y, x in np.argwhere(left & ~right):
        add_edge(x, y + 1, 3)  # region to the left: walk -y

    starts.sort()
    rings: list[Ring] = []
    for sy, sx, sd in starts:
        if not out_dirs.get((sx, sy), 0) & (1 << sd):
            continue
        ring: Ring = [(sx, sy)]
        x, y, d = sx, sy, sd
        out_dirs[(x, y)] &= ~(1 << d)
        while True:
            x += _DX[d]
            y += _DY[d]
            avail = out_dirs.get((x, y), 0)
            if not avail:
                break
            ring.append((x, y))
            for turn in (3, 0, 1):  # prefer left, then straight, then right
                nd = (d + turn) % 4
                if avail & (1 << nd):
                    d = nd
                    break
            else:
                break
            out_dirs[(x, y)] &= ~(1 << d)
        ring.append((sx, sy))
        rings.append([(int(px) + x_off, int(py) + y_off) for px, py in _collapse_collinear(ring)])
    return rings


def _collapse_collinear(ring: Ring) -> Ring:
    """Drop intermediate vertices of straight runs; keeps closure."""
    pts = ring[:-1]
    n = len(pts)
    out = []
    for i in range(n):
        x0, y0 = pts[i - 1]
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (x1 - x0) * (y2 - y1) != (y1 - y0) * (x2 - x1):
            out.append(pts[i])
    out.append(out[0])
    return out


def ring_area(ring: Ring) -> float:
    """Shoelace sum in pixel coordinates (y down): negative for rings traced
    with the region on the left around the outside, positive for holes."""
    total = 0
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        total += x0 * y1 - x1 * y0
    return total / 2.0


def _point_in_ring(px: float, py: float, ring: Ring) -> bool:
    """Even-odd test using the ring's vertical segments."""
    inside = False
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        if x0 != x1:
            continue
        ylo, yhi = (y0, y1) if y0 < y1 else (y1, y0)
        if x0 < px and ylo <= py < yhi:
            inside = not inside
    return inside


def _interior_point(ring: Ring) -> tuple[float, float]:
    x, y = min(ring[:-1], key=lambda p: (p[1], p[0]))
    return x + 0.5, y + 0.5


def trace_region_polygons(labels: LabelMap) -> dict[int, list[Polygon]]:
    """Closed rings for every label, grouped into (outer, holes) polygons."""
    lab = labels.labels.astype(np.int64)
    regions: dict[int, list[Polygon]] = {}
    slices = find_objects(lab + 1)
    for idx, sl in enumerate(slices):
        if sl is None:
            continue
        ys, xs = sl
        mask = lab[ys, xs] == idx
        rings = _trace_mask(mask, xs.start, ys.start)
        outers = [(r, ring_area(r)) for r in rings if ring_area(r) < 0]
        holes = [r for r in rings if ring_area(r) > 0]
        polygons: list[Polygon] = [(outer, []) for outer, _ in outers]
        for hole in holes:
            px, py = _interior_point(hole)
            candidates = [
                (abs(area), i)
                for i, (outer, area) in enumerate(outers)
                if _point_in_ring(px, py, outer)
            ]
            _, owner = min(candidates)
            polygons[owner][1].append(hole)
        regions[idx] = polygons
    return regions


def rasterize_polygons(regions: dict[int, list[Polygon]], height: int, width: int) -> LabelMap:
    """Even-odd fill of every region's rings back into a label map."""
    out = np.zeros((height, width), dtype=np.int64)
    filled = np.zeros((height, width), dtype=bool)
    for label in sorted(regions):
        mask = np.zeros((height, width), dtype=bool)
        for outer, holes in regions[label]:
            for ring in [outer, *holes]:
                for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
                    if x0 != x1:
                        continue
                    ylo, yhi = (y0, y1) if y0 < y1 else (y1, y0)
                    mask[ylo:yhi, x0:] ^= True
        if (filled & mask).any():
            raise ValueError("overlapping polygons")
        out[mask] = label
        filled |= mask
    if not filled.all():
        raise ValueError("polygons do not cover the raster")
    return LabelMap(out.astype(np.uint32))


# ---------------------------------------------------------------------------
# GeoJSON interchange (pixel coordinates, y down)


def polygons_to_geojson(
    regions: dict[int, list[Polygon]], classes: dict[int, str] | None = None
) -> dict:
    features = []
    for label in sorted(regions):
        polygons = regions[label]
        coords = [
            [[list(pt) for pt in outer]] + [[list(pt) for pt in hole] for hole in holes]
            for outer, holes in polygons
        ]
        if len(coords) == 1:
            geometry = {"type": "Polygon", "coordinates": coords[0]}
        else:
            geometry = {"type": "MultiPolygon", "coordinates": coords}
        features.append(
            {
                "type": "Feature",
                "geometry": geometry,
                "properties": {
                    "label": int(label),
                    "class": classes.get(label) if classes else None,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def geojson_to_polygons(doc: dict) -> dict[int, list[Polygon]]:
    if doc.get("type") != "FeatureCollection":
        raise ValueError("expected a FeatureCollection")
    regions: dict[int, list[Polygon]] = {}
    for feature in doc["features"]:
        label = int(feature["properties"]["label"])
        geom = feature["geometry"]
        if geom["type"] == "Polygon":
            blocks = [geom["coordinates"]]
        elif geom["type"] == "MultiPolygon":
            blocks = geom["coordinates"]
        else:
            raise ValueError(f"unsupported geometry {geom['type']}")
        polygons: list[Polygon] = []
        for block in blocks:
            outer = [tuple(map(int, pt)) for pt in block[0]]
            holes = [[tuple(map(int, pt)) for pt in ring] for ring in block[1:]]
            polygons.append((outer, holes))
        regions[label] = polygons
    return regions
