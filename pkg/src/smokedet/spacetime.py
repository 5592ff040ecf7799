"""Stage 4: space-time features of a block over its last ``q`` frames.

Two families are provided: moments of the inter-frame difference stack
(BIFD) and plane descriptors over the three orthogonal planes of the
block volume (TOP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ContractError
from .ingest import BlockRef
from .texture import code_histogram, get_kernel, neighborhoods

TOP_KERNELS = ("uniform-LBP", "EOH", "RTU", "BGC3")


@dataclass(frozen=True)
class BlockVolume:
    """Gray voxels of one block over consecutive frames, shape ``(q, B_h, B_w)``."""

    voxels: np.ndarray
    block: Optional[BlockRef] = None
    last_index: int = 0

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.ndim != 3:
            raise ContractError(f"volume must be 3-D (q, h, w), got shape {v.shape}")
        if v.shape[0] < 2:
            raise ContractError(f"volume depth must be >= 2, got {v.shape[0]}")

    @property
    def depth(self) -> int:
        return self.voxels.shape[0]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: str

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _voxels(volume) -> np.ndarray:
    v = volume.voxels if isinstance(volume, BlockVolume) else np.asarray(volume)
    if v.ndim != 3:
        raise ContractError(f"volume must be 3-D (q, h, w), got shape {v.shape}")
    return v


def build_bda(volume) -> list[np.ndarray]:
    """Absolute differences between consecutive slices: ``q - 1`` rasters."""
    v = _voxels(volume)
    if v.shape[0] < 2:
        raise ContractError(f"volume depth must be >= 2, got {v.shape[0]}")
    d = np.abs(np.diff(v.astype(np.int16), axis=0)).astype(np.uint8)
    return list(d)


def color_moments(raster) -> tuple[float, float, float]:
    """Mean, population standard deviation and signed cube-root skewness.

    Integer rasters use exact power sums, since the third central moment
    of difference images often cancels down to a tiny value that float
    accumulation cannot resolve.
    """
    a = np.asarray(raster)
    if a.size == 0:
        raise ContractError("color moments of an empty raster")
    if np.issubdtype(a.dtype, np.integer) or np.issubdtype(a.dtype, np.bool_):
        return _exact_moments(a.ravel())
    x = a.astype(np.float64).ravel()
    mu = x.mean()
    dev = x - mu
    sigma = np.sqrt(np.mean(dev * dev))
    skew = np.cbrt(np.mean(dev * dev * dev))
    return float(mu), float(sigma), float(skew)


def _exact_moments(x: np.ndarray) -> tuple[float, float, float]:
    n = int(x.size)
    pairs = [(int(v), int(c)) for v, c in zip(*np.unique(x, return_counts=True))]
    s1 = sum(v * c for v, c in pairs)
    s2 = sum(v * v * c for v, c in pairs)
    s3 = sum(v ** 3 * c for v, c in pairs)
    var = Fraction(n * s2 - s1 * s1, n * n)
    m3 = Fraction(n * n * s3 - 3 * n * s1 * s2 + 2 * s1 ** 3, n ** 3)
    return float(Fraction(s1, n)), math.sqrt(var), float(np.cbrt(float(m3)))


def hu_moments(raster) -> tuple[np.ndarray, bool]:
    """The seven Hu invariants of a non-negative field.

    Returns ``(values, degenerate)``; a field with zero total mass yields
    seven zeros and ``degenerate=True``.
    """
    f = np.asarray(raster, dtype=np.float64)
    if f.ndim != 2:
        raise ContractError(f"expected a 2-D raster, got shape {f.shape}")
    m00 = f.sum()
    if m00 <= 0:
        return np.zeros(7), True
    ys, xs = np.indices(f.shape, dtype=np.float64)
    xc = (xs * f).sum() / m00
    yc = (ys * f).sum() / m00
    dx = xs - xc
    dy = ys - yc

    def eta(p, q):
        mu = (dx ** p * dy ** q * f).sum()
        return mu / m00 ** (1 + (p + q) / 2)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)

    a = n30 + n12
    b = n21 + n03
    h = np.empty(7)
    h[0] = n20 + n02
    h[1] = (n20 - n02) ** 2 + 4 * n11 ** 2
    h[2] = (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2
    h[3] = a ** 2 + b ** 2
    h[4] = (n30 - 3 * n12) * a * (a ** 2 - 3 * b ** 2) + (3 * n21 - n03) * b * (3 * a ** 2 - b ** 2)
    h[5] = (n20 - n02) * (a ** 2 - b ** 2) + 4 * n11 * a * b
    h[6] = (3 * n21 - n03) * a * (a ** 2 - 3 * b ** 2) - (n30 - 3 * n12) * b * (3 * a ** 2 - b ** 2)
    return h, False


def bifd_cm(bda) -> FeatureVector:
    vals = [m for dif in bda for m in color_moments(dif)]
    return FeatureVector(np.asarray(vals, dtype=np.float64), "BIFD_CM")


def bifd_hu(bda) -> FeatureVector:
    vals = np.concatenate([hu_moments(dif)[0] for dif in bda])
    return FeatureVector(vals, "BIFD_Hu")


def orthogonal_planes(volume) -> dict[str, np.ndarray]:
    """Plane stacks of a ``(T, Y, X)`` volume: XY ``(T, Y, X)``, XT ``(Y, T, X)``, YT ``(X, T, Y)``."""
    v = _voxels(volume)
    return {"XY": v, "XT": v.transpose(1, 0, 2), "YT": v.transpose(2, 0, 1)}


def top_descriptor(volume, plane_kernel: str = "EOH") -> FeatureVector:
    """Concatenated XY, XT and YT histograms of a plane descriptor.

    Each plane type is accumulated over every plane of that orientation and
    normalised on its own, so each third sums to one.
    """
    kernel = get_kernel(plane_kernel)
    if kernel.name not in TOP_KERNELS:
        raise ContractError(f"{kernel.name} is not a TOP plane kernel (choose from {TOP_KERNELS})")
    v = _voxels(volume)
    if min(v.shape) < 3:
        raise ContractError(f"TOP needs at least 3 voxels along every axis, got {v.shape}")
    parts = []
    for planes in orthogonal_planes(v).values():
        center, ring = neighborhoods(planes)
        codes = kernel.pattern_fn(center, ring, None)
        weights = kernel.weight_fn(center, ring) if kernel.weight_fn is not None else None
        parts.append(code_histogram(codes, kernel.bin_count, weights)[0])
    return FeatureVector(np.concatenate(parts), f"TOP:{kernel.name}")


def top_length(plane_kernel: str) -> int:
    return 3 * get_kernel(plane_kernel).bin_count


def spacetime_feature(volume, top_kernel: str = "EOH") -> FeatureVector:
    """BIFD colour moments followed by the TOP histogram; ``3(q-1) + 3K`` values."""
    cm = bifd_cm(build_bda(volume))
    top = top_descriptor(volume, top_kernel)
    return FeatureVector(np.concatenate([cm.values, top.values]), "FUSED")


def fused_length(q: int, top_kernel: str = "EOH") -> int:
    return 3 * (q - 1) + top_length(top_kernel)
