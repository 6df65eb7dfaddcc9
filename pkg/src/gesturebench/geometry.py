"""Contour extraction, uniform arc-length resampling and the Euclidean
distance transform of a mask measured from its contour."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import GeometryError


@dataclass
class Contour:
    """Closed boundary as an ordered (n, 2) array of (x, y) points;
    consecutive points are 8-adjacent in the source grid."""

    points: np.ndarray
    closed: bool = True

    def __len__(self):
        return len(self.points)


@dataclass
class SampledContour:
    """Fixed-size uniform arc-length subsample of a contour."""

    points: np.ndarray
    source_length: int

    def __len__(self):
        return len(self.points)


@dataclass
class DistanceField:
    """Per-pixel distance to the nearest contour pixel, defined on the mask
    interior; out-of-mask pixels carry 0 with in_domain False."""

    values: np.ndarray
    in_domain: np.ndarray

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]


def extract_contour(nmask):
    """Boundary of the largest 8-connected component, traced in consistent
    order by Moore-neighbor tracing. Holes are ignored."""
    comp_u8, r0, c0 = kernels.largest_component(nmask.packed)
    if r0 < 0:
        raise GeometryError("empty mask")
    rc = kernels.trace_boundary(comp_u8, r0, c0)
    if len(rc) < 3:
        raise GeometryError(f"contour too small ({len(rc)} points)")
    pts = np.empty((len(rc), 2), dtype=np.float64)
    pts[:, 0] = rc[:, 1]  # x = column
    pts[:, 1] = rc[:, 0]  # y = row
    return Contour(points=pts)


def resample_contour(contour, count=20):
    """Resample a closed contour to `count` points at uniform arc-length
    spacing, starting from the point with minimal y (ties: minimal x)."""
    pts = np.asarray(contour.points, dtype=np.float64)
    m = len(pts)
    if m < 3:
        raise GeometryError(f"too few contour points ({m})")
    if count < 3:
        raise GeometryError(f"sample count must be >= 3 (got {count})")

    sampled = kernels.resample_closed(pts, count)
    if len(sampled) == 0:
        raise GeometryError("degenerate contour (zero perimeter)")
    return SampledContour(points=sampled, source_length=m)


def distance_transform(nmask, contour):
    """Exact Euclidean distance of every in-mask pixel to the nearest
    contour pixel, via the two-pass separable lower-envelope transform."""
    grid = nmask.grid
    if not grid.any():
        raise GeometryError("empty mask")
    values = kernels.edt_from_contour(nmask.packed, contour.points)
    return DistanceField(values=values, in_domain=grid.copy())
