"""Deterministic matching/image feature extraction at quarter resolution.

Stands in for a trained backbone behind the same contract: photoconsistent
surfaces must correlate across views. The descriptor is a fixed recipe of
luma, gradient, local-contrast, color, and coarse-luma channels, each
standardized over the image and then L2-normalized per pixel, which makes
the downstream plane-sweep correlation land in [-1, 1] and be invariant to
global brightness/contrast changes.

Every channel has a receptive field of at most 2 feature pixels, so
feature maps commute exactly with 4-pixel input shifts away from a 2-pixel
border (the property the warping tests rely on).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SizeMismatchError
from .imaging import ImageRGB, box_downsample2, box_filter_mean

MATCH_CHANNELS = 8
IMAGE_CHANNELS = 4
FEATURE_SCALE = 4  # feature maps live at 1/4 input resolution

_NORM_EPS = 1e-8


@dataclass
class FeatureMap:
    """(H, W, C) float32 feature raster.

    `normalized` marks matching features whose per-pixel L2 norm is <= 1
    (all-zero raw vectors stay all-zero); image features skip that
    invariant.
    """

    data: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 3:
            raise ValueError(f"expected (H, W, C) array, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("feature map contains non-finite values")
        if self.normalized:
            norms = np.linalg.norm(a.astype(np.float64), axis=2)
            if norms.max(initial=0.0) > 1.0 + 1e-6:
                raise ValueError(f"per-pixel norm {norms.max():.8f} exceeds 1")
        self.data = a

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def _local_std3(arr: np.ndarray) -> np.ndarray:
    mean = box_filter_mean(arr, 1)
    mean_sq = box_filter_mean(arr * arr, 1)
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return np.sqrt(var)


def _standardize(channel: np.ndarray) -> np.ndarray:
    return (channel - channel.mean()) / (channel.std() + _NORM_EPS)


def luma_of(rgb: np.ndarray) -> np.ndarray:
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def raw_match_channels(img: ImageRGB) -> np.ndarray:
    """The 8 matching channels before standardization/normalization.

    Channel order: luma, d/dx luma, d/dy luma, 3x3 local luma std,
    R, G, B, coarse (5x5 box) luma. All at quarter resolution.
    """
    if img.width % FEATURE_SCALE or img.height % FEATURE_SCALE:
        raise SizeMismatchError(
            f"image dims {img.width}x{img.height} not divisible by {FEATURE_SCALE}")
    quarter = box_downsample2(box_downsample2(img.data.astype(np.float64)))
    luma = luma_of(quarter)
    dy, dx = np.gradient(luma)
    return np.stack([
        luma,
        dx,
        dy,
        _local_std3(luma),
        quarter[..., 0],
        quarter[..., 1],
        quarter[..., 2],
        box_filter_mean(luma, 2),
    ], axis=2)


def extract_features(img: ImageRGB) -> tuple[FeatureMap, FeatureMap]:
    """Matching features F_m (normalized) and image features F_e.

    F_m: the raw channels standardized per channel over the image, then
    L2-normalized per pixel with epsilon 1e-8 (all-zero vectors stay
    zero). F_e: quarter-res RGB plus luma, untouched.
    """
    raw = raw_match_channels(img)
    standardized = np.stack(
        [_standardize(raw[..., c]) for c in range(raw.shape[2])], axis=2)
    norms = np.linalg.norm(standardized, axis=2, keepdims=True)
    matching = standardized / (norms + _NORM_EPS)

    quarter = box_downsample2(box_downsample2(img.data.astype(np.float64)))
    image_feats = np.concatenate([quarter, luma_of(quarter)[..., None]], axis=2)
    return (
        FeatureMap(matching.astype(np.float32), normalized=True),
        FeatureMap(image_feats.astype(np.float32), normalized=False),
    )
