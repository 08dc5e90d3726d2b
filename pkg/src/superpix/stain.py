"""Stain-space preprocessing for immunohistochemistry patches.

RGB intensities are converted to optical density with
``od = -log10((I + 1) / 256)`` (the +1 avoids log(0) without an epsilon
branch) and unmixed against a row-unit stain basis into per-stain
concentrations (hematoxylin, eosin, DAB). The hematoxylin channel, which
mostly depicts nuclei, can then be flattened with a wide Gaussian and
attenuated so downstream clustering keys on the immunostain instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .imagecore import FeatureMap, RasterImage

# Standard H/E/DAB optical-density basis (rows over R, G, B), renormalized
# to unit length on load. Override via configuration for recalibrated stains.
DEFAULT_STAIN_RGB = (
    (0.65, 0.70, 0.29),
    (0.07, 0.99, 0.11),
    (0.27, 0.57, 0.78),
)

_MAX_CONDITION = 1e8


@dataclass(frozen=True)
class StainMatrix:
    """3x3 stain basis; rows are unit optical-density vectors for H, E, DAB."""

    rows: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.rows, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("stain matrix must be 3x3")
        norms = np.linalg.norm(m, axis=1)
        if np.any(norms == 0):
            raise ValueError("stain matrix has a zero row")
        m = m / norms[:, None]
        if np.linalg.cond(m) > _MAX_CONDITION:
            raise ValueError("stain matrix is singular or near-singular")
        m.setflags(write=False)
        object.__setattr__(self, "rows", m)

    @classmethod
    def default(cls) -> "StainMatrix":
        return cls(np.array(DEFAULT_STAIN_RGB))

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.rows)


@dataclass(frozen=True)
class SuppressionParams:
    """Which channel to flatten, the Gaussian width, and the attenuation."""

    channel: int = 0
    sigma: float = 15.0
    alpha: float = 0.25

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.channel < 0:
            raise ValueError("channel must be >= 0")


def optical_density(image: RasterImage) -> np.ndarray:
    """Per-pixel optical density, float64 of shape (H, W, 3)."""
    return -np.log10((image.data.astype(np.float64) + 1.0) / 256.0)


def rgb_to_hed(image: RasterImage, matrix: StainMatrix | None = None) -> FeatureMap:
    """Unmix an RGB image into H/E/DAB concentrations.

    Concentrations are clamped below at zero: negative stain density is
    physically meaningless and destabilizes downstream distances.
    """
    if image.channels != 3:
        raise ValueError("rgb_to_hed expects a 3-channel image")
    matrix = matrix or StainMatrix.default()
    od = optical_density(image)
    hed = od @ matrix.inverse
    np.maximum(hed, 0.0, out=hed)
    return FeatureMap(hed.astype(np.float32))


def hed_to_rgb(hed: FeatureMap, matrix: StainMatrix | None = None) -> RasterImage:
    """Recompose concentrations into an 8-bit RGB image (round-trip partner)."""
    if hed.channels != 3:
        raise ValueError("hed_to_rgb expects a 3-channel map")
    matrix = matrix or StainMatrix.default()
    od = hed.data.astype(np.float64) @ matrix.rows
    intensity = np.round(256.0 * np.power(10.0, -od) - 1.0)
    return RasterImage(np.clip(intensity, 0, 255).astype(np.uint8))


def gaussian_blur(channel: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur; kernel radius ceil(3*sigma), sum-normalized,
    symmetric (edge-repeating) reflect padding. sigma=0 is the identity."""
    if sigma == 0:
        return channel.astype(np.float64)
    radius = int(np.ceil(3.0 * sigma))
    out = gaussian_filter1d(channel.astype(np.float64), sigma, axis=0, mode="reflect", radius=radius)
    return gaussian_filter1d(out, sigma, axis=1, mode="reflect", radius=radius)


def suppress_channel(hed: FeatureMap, params: SuppressionParams | None = None) -> FeatureMap:
    """Replace one channel by alpha * GaussianBlur(channel); others untouched."""
    params = params or SuppressionParams()
    if params.channel >= hed.channels:
        raise ValueError(f"channel {params.channel} out of range for C={hed.channels}")
    out = hed.data.copy()
    blurred = gaussian_blur(hed.data[:, :, params.channel], params.sigma)
    out[:, :, params.channel] = (params.alpha * blurred).astype(np.float32)
    return FeatureMap(out)
