"""Pairwise matching costs: chi-square histogram distance, optimal
assignment, contour-matching cost, weighted combined cost, sliding
template difference, Hausdorff distance and Hu-vector distance."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MatchingError

HU_LOG_EPS = 1e-30


@dataclass(frozen=True)
class CombineWeights:
    """Weights of the combined cost alpha * contour_cost + beta * appearance."""

    alpha: float = 0.17
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("weights must be non-negative with alpha + beta > 0")


@dataclass
class Assignment:
    """Minimum-cost assignment: permutation pi (row i -> column pi[i]) and
    total_cost = sum_i cost[i, pi[i]]."""

    permutation: tuple
    total_cost: float


def _hist_array(h):
    if hasattr(h, "bins"):
        h = h.bins
    return np.ascontiguousarray(h, dtype=np.float64)


def chi_square(h1, h2):
    """Chi-square distance between two equal-length histograms: bins with a
    zero sum contribute 0; unit-sum inputs give a value in [0, 2]."""
    a = _hist_array(h1)
    b = _hist_array(h2)
    if a.shape != b.shape or a.ndim != 1:
        raise MatchingError(f"bin count mismatch ({a.shape} vs {b.shape})")
    return kernels.chi2(a, b)


def _validate_cost_matrix(cost):
    a = np.ascontiguousarray(cost, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MatchingError(f"cost matrix must be square, got {a.shape}")
    if a.shape[0] < 1:
        raise MatchingError("cost matrix must have n >= 1")
    if not np.isfinite(a).all():
        raise MatchingError("cost matrix has non-finite entries")
    return a


def hungarian(cost):
    """Minimum-cost assignment with ties broken toward the lexicographically
    smallest permutation.

    A fast O(n^3) solve fixes the optimal value; rows are then pinned to
    the smallest column that still admits an optimal completion (checked by
    re-solving the reduced problem, skipped while the fast solution itself
    is the pending completion).
    """
    a = _validate_cost_matrix(cost)
    n = a.shape[0]
    perm0, best = kernels.assignment(a)
    tie_eps = 1e-12 * max(1.0, abs(best))

    perm = np.empty(n, dtype=np.int64)
    remaining = list(range(n))
    fixed = 0.0
    on_fast_path = True
    for i in range(n):
        chosen = -1
        fallback_j, fallback_val = remaining[0], np.inf
        for j in remaining:
            if on_fast_path and j == perm0[i]:
                # the fast solution completes this prefix at exactly `best`
                chosen = j
                break
            if i + 1 == n:
                completion = 0.0
            else:
                cols = [c for c in remaining if c != j]
                sub = np.ascontiguousarray(a[i + 1:][:, cols])
                completion = kernels.assignment(sub)[1]
            value = fixed + a[i, j] + completion
            if value <= best + tie_eps:
                chosen = j
                break
            if value < fallback_val:
                fallback_j, fallback_val = j, value
        if chosen < 0:  # numerical guard: take the best candidate seen
            chosen = fallback_j
        if chosen != perm0[i]:
            on_fast_path = False
        fixed += a[i, chosen]
        remaining.remove(chosen)
        perm[i] = chosen

    total = 0.0
    for i in range(n):
        total += a[i, perm[i]]
    return Assignment(permutation=tuple(int(j) for j in perm), total_cost=float(total))


def sc_cost(a, b):
    """Total contour-matching cost of two shape context sets: per-pair cost
    is the halved chi-square of the point histograms, optimally assigned,
    and the assigned total is averaged over the points, giving [0, 1]."""
    if len(a.hist) != len(b.hist):
        raise MatchingError(
            f"point count mismatch ({len(a.hist)} vs {len(b.hist)})")
    costs = kernels.sc_cost_batch(a.hist, b.hist[None, :, :])
    return float(costs[0])


def combined_cost(c_sc, d_app, weights=None):
    """Weighted sum alpha * c_sc + beta * d_app of the contour cost and a
    normalized appearance distance, both expected in [0, 1]."""
    weights = weights or CombineWeights()
    if not (-1e-9 <= c_sc <= 1.0 + 1e-9):
        raise MatchingError(f"contour cost {c_sc} outside [0, 1]")
    if not (-1e-9 <= d_app <= 1.0 + 1e-9):
        raise MatchingError(f"appearance distance {d_app} outside [0, 1]")
    return weights.alpha * c_sc + weights.beta * d_app


def _mask_grid_u8(m):
    if hasattr(m, "packed"):
        return m.packed
    if hasattr(m, "pixels"):
        return np.ascontiguousarray(m.pixels, dtype=np.uint8)
    return np.ascontiguousarray(m, dtype=np.uint8)


def template_ssd(a, b):
    """Sliding-window squared-difference cost of two equal-width masks.

    The shorter mask slides vertically over the taller one; the minimum
    squared-difference sum over offsets is divided by the template pixel
    count, giving [0, 1] for 0/1 rasters.
    """
    ga = _mask_grid_u8(a)
    gb = _mask_grid_u8(b)
    if ga.shape[1] != gb.shape[1]:
        raise MatchingError(f"width mismatch ({ga.shape[1]} vs {gb.shape[1]})")
    if ga.size == 0 or gb.size == 0:
        raise MatchingError("empty mask")
    return float(kernels.template_cost(ga, gb))


def _point_array(c):
    pts = c.points if hasattr(c, "points") else c
    return np.ascontiguousarray(pts, dtype=np.float64)


def hausdorff(a, b):
    """Symmetric Hausdorff distance between two contours or point sets."""
    pa = _point_array(a)
    pb = _point_array(b)
    if len(pa) == 0 or len(pb) == 0:
        raise MatchingError("empty point set")
    return float(kernels.hausdorff(pa, pb))


def hu_log(values):
    """Signed log-magnitude transform used to compare Hu vectors, which
    span many orders of magnitude."""
    v = values.values if hasattr(values, "values") else np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.log10(np.abs(v) + HU_LOG_EPS)


def hu_distance(a, b):
    """L1 distance between signed log-magnitude Hu vectors."""
    return float(np.abs(hu_log(a) - hu_log(b)).sum())
