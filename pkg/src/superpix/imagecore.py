"""Raster containers and file I/O shared by the whole toolkit.

Three array-backed types travel through the pipeline: 8-bit images
(``RasterImage``), float feature rasters (``FeatureMap``) that unify RGB,
stain-concentration, and embedding inputs, and integer segmentations
(``LabelMap``). Backing arrays are frozen after construction so instances
can be shared across threads.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

FTM_MAGIC = b"FTM1"
LBL_MAGIC_SIZE = 8  # two little-endian u32: height, width


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RasterImage:
    """8-bit image of shape (H, W, C), channel-interleaved."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3 or d.dtype != np.uint8:
            raise ValueError("RasterImage expects a uint8 array of shape (H, W, C)")
        if d.shape[0] < 1 or d.shape[1] < 1 or d.shape[2] < 1:
            raise ValueError("zero-sized image")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FeatureMap:
    """Float32 feature raster of shape (H, W, C); all samples finite."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3:
            raise ValueError("FeatureMap expects an array of shape (H, W, C)")
        if d.dtype != np.float32:
            d = d.astype(np.float32)
        if d.shape[0] < 1 or d.shape[1] < 1 or d.shape[2] < 1:
            raise ValueError("zero-sized feature map")
        if not np.isfinite(d).all():
            raise ValueError("feature map contains NaN or Inf samples")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel unsigned 32-bit labels, shape (H, W).

    Labels produced by segmentation or merging are dense in [0, L) and
    4-connected per label; maps loaded from disk are only required to be
    non-negative integers.
    """

    labels: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.labels)
        if d.ndim != 2:
            raise ValueError("LabelMap expects an array of shape (H, W)")
        if d.dtype != np.uint32:
            if np.issubdtype(d.dtype, np.signedinteger) and d.size and d.min() < 0:
                raise ValueError("labels must be non-negative")
            d = d.astype(np.uint32)
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("zero-sized label map")
        object.__setattr__(self, "labels", _frozen(d))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def n_labels(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def densify_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber labels to [0, L) in order of first row-major occurrence."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(int(uniq.max()) + 1 if uniq.size else 0, dtype=np.uint32)
    remap[uniq[order]] = np.arange(len(uniq), dtype=np.uint32)
    return remap[flat].reshape(labels.shape)


# ---------------------------------------------------------------------------
# image I/O


def load_image(path: str | os.PathLike) -> RasterImage:
    """Decode an 8-bit PNG or JPEG; grayscale is replicated to 3 channels."""
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise ValueError(f"unsupported bit depth for image {path!s} (mode {im.mode})")
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.uint8)
        else:
            raise ValueError(f"unsupported channel layout for image {path!s} (mode {im.mode})")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"zero-sized image {path!s}")
    return RasterImage(arr)


def save_image(image: RasterImage, path: str | os.PathLike) -> None:
    """Write an image as PNG (or JPEG, by extension)."""
    Image.fromarray(np.asarray(image.data)).save(path)


# ---------------------------------------------------------------------------
# label-map I/O
#
# Maps with at most 65536 labels are stored as 16-bit grayscale PNG; larger
# ones fall back to a raw `.lbl` file: u32le height, u32le width, then
# height*width u32le labels row-major.


def save_label_map(labels: LabelMap, path: str | os.PathLike) -> None:
    path = os.fspath(path)
    if path.endswith(".lbl"):
        arr = labels.labels.astype("<u4")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<II", labels.height, labels.width))
            fh.write(arr.tobytes())
        return
    if labels.n_labels() > 65536:
        raise ValueError("more than 65536 labels; use the .lbl container")
    arr = labels.labels.astype(np.uint16)
    Image.fromarray(arr).save(path)


def load_label_map(path: str | os.PathLike) -> LabelMap:
    path = os.fspath(path)
    if path.endswith(".lbl"):
        with open(path, "rb") as fh:
            header = fh.read(LBL_MAGIC_SIZE)
            if len(header) != LBL_MAGIC_SIZE:
                raise ValueError(f"truncated label file {path}")
            h, w = struct.unpack("<II", header)
            payload = fh.read(4 * h * w)
        if len(payload) != 4 * h * w:
            raise ValueError(f"truncated label file {path}")
        return LabelMap(np.frombuffer(payload, dtype="<u4").reshape(h, w))
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"label map {path} must be single-channel integer")
    return LabelMap(arr.astype(np.uint32))


def label_map_filename(n_labels: int, stem: str = "labels") -> str:
    """Pick the on-disk container for a given label count."""
    return f"{stem}.png" if n_labels <= 65536 else f"{stem}.lbl"


# ---------------------------------------------------------------------------
# FTM feature-tensor container
#
# Byte layout: magic "FTM1", u32le height, width, channels, then
# height*width*channels float32le samples, row-major, channel-interleaved.
# The format is bit-exact: write followed by read reproduces every sample.


def write_feature_tensor(fmap: FeatureMap, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(FTM_MAGIC)
        fh.write(struct.pack("<III", fmap.height, fmap.width, fmap.channels))
        fh.write(fmap.data.astype("<f4").tobytes())


def read_feature_tensor(path: str | os.PathLike) -> FeatureMap:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FTM_MAGIC:
            raise ValueError(f"bad magic in feature tensor {path!s}")
        header = fh.read(12)
        if len(header) != 12:
            raise ValueError(f"truncated feature tensor {path!s}")
        h, w, c = struct.unpack("<III", header)
        if h < 1 or w < 1 or c < 1:
            raise ValueError(f"degenerate dimensions in feature tensor {path!s}")
        payload = fh.read(4 * h * w * c)
    if len(payload) != 4 * h * w * c:
        raise ValueError(f"truncated feature tensor {path!s}")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    if not np.isfinite(data).all():
        raise ValueError(f"feature tensor {path!s} contains NaN or Inf samples")
    return FeatureMap(data)


# ---------------------------------------------------------------------------
# resampling


def upsample(fmap: FeatureMap, target_h: int, target_w: int, mode: str = "bilinear") -> FeatureMap:
    """Upsample a feature map to (target_h, target_w).

    Coordinates follow the half-pixel-center convention
    ``src = (dst + 0.5) * (src_size / dst_size) - 0.5`` with edge clamping;
    nearest mode takes ``floor((dst + 0.5) * src_size / dst_size)``.
    Downscaling is out of contract and rejected.
    """
    h, w = fmap.height, fmap.width
    if target_h < h or target_w < w:
        raise ValueError(f"upsample target {target_h}x{target_w} smaller than source {h}x{w}")
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"unknown mode {mode!r}")
    if target_h == h and target_w == w:
        return fmap

    if mode == "nearest":
        ys = np.minimum((np.arange(target_h) + 0.5) * (h / target_h), h - 1).astype(np.int64)
        xs = np.minimum((np.arange(target_w) + 0.5) * (w / target_w), w - 1).astype(np.int64)
        out = fmap.data[ys][:, xs]
        return FeatureMap(out)

    # separable bilinear, rows then columns, accumulated in float64
    sy = np.clip((np.arange(target_h) + 0.5) * (h / target_h) - 0.5, 0.0, h - 1)
    sx = np.clip((np.arange(target_w) + 0.5) * (w / target_w) - 0.5, 0.0, w - 1)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ty = (sy - y0)[:, None, None]
    tx = (sx - x0)[None, :, None]

    src = fmap.data.astype(np.float64)
    rows = (1.0 - ty) * src[y0] + ty * src[y1]
    out = (1.0 - tx) * rows[:, x0] + tx * rows[:, x1]
    return FeatureMap(out.astype(np.float32))


def rgb_to_feature(image: RasterImage) -> FeatureMap:
    """Scale an 8-bit RGB image into a [0, 1] float feature map."""
    if image.channels != 3:
        raise ValueError("rgb_to_feature expects a 3-channel image")
    return FeatureMap(image.data.astype(np.float32) / np.float32(255.0))
