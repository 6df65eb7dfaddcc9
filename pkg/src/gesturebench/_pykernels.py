"""Pure-Python (numpy) implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available. Function signatures and semantics match gesturebench._ckernels
exactly; the compiled module is a C translation of the algorithms below.
"""

import numpy as np
from scipy import ndimage

BACKEND_NAME = "python"


# ---------------------------------------------------------------------------
# chi-square distances

def chi2(h1, h2):
    """Chi-square distance: sum over bins of (a-b)^2/(a+b), empty bins adding 0."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    den = h1 + h2
    num = (h1 - h2) ** 2
    nz = den > 0.0
    return float(np.sum(num[nz] / den[nz]))


def chi2_pair_matrix(a, b):
    """All-pairs halved chi-square: out[i, j] = chi2(a[i], b[j]) / 2."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = a[:, None, :] + b[None, :, :]
    num = (a[:, None, :] - b[None, :, :]) ** 2
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    return terms.sum(axis=2) / 2.0


def chi2_rows(p, rows):
    """chi2(p, rows[k]) for every row; used for histogram-only scoring."""
    p = np.asarray(p, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.float64)
    den = p[None, :] + rows
    num = (p[None, :] - rows) ** 2
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    return terms.sum(axis=1)


# ---------------------------------------------------------------------------
# minimum-cost assignment (Jonker-Volgenant style shortest augmenting paths)

def assignment(cost):
    """Optimal assignment of a square cost matrix.

    Returns (perm, total) where perm[i] is the column assigned to row i and
    total = sum_i cost[i, perm[i]] accumulated in ascending row order.
    Ties are resolved deterministically (first minimal column during the
    dual update) but no lexicographic guarantee is made here; see
    matching.hungarian for the tie-broken public operation.
    """
    a = np.ascontiguousarray(cost, dtype=np.float64)
    n = a.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)        # p[j] = row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = np.nonzero(~used[1:])[0] + 1
            cur = a[i0 - 1, free - 1] - u[i0] - v[free]
            better = cur < minv[free]
            way[free[better]] = j0
            minv[free] = np.where(better, cur, minv[free])
            k = int(np.argmin(minv[free]))
            j1 = int(free[k])
            delta = minv[j1]
            np.add.at(u, p[used], delta)
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.int64)
    perm[p[1:] - 1] = np.arange(n, dtype=np.int64)
    total = 0.0
    for i in range(n):
        total += a[i, perm[i]]
    return perm, float(total)


def sc_cost_batch(probe_hists, gallery_hists):
    """Mean optimally-assigned halved chi-square cost of a probe's shape
    context set against each gallery entry's set.

    probe_hists: (n, K); gallery_hists: (G, n, K). Returns (G,) costs in [0, 1].
    """
    gal = np.asarray(gallery_hists, dtype=np.float64)
    n = gal.shape[1]
    out = np.empty(gal.shape[0])
    for k in range(gal.shape[0]):
        m = chi2_pair_matrix(probe_hists, gal[k])
        _, total = assignment(m)
        out[k] = total / n
    return out


# ---------------------------------------------------------------------------
# Hausdorff distance

def hausdorff(a, b):
    """Symmetric Hausdorff distance between two point sets (n,2)/(m,2)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    h_ab = d2.min(axis=1).max()
    h_ba = d2.min(axis=0).max()
    return float(np.sqrt(max(h_ab, h_ba)))


def hausdorff_batch(probe_pts, flat_pts, offsets):
    """Hausdorff of probe_pts vs each point set in the packed flat array."""
    out = np.empty(len(offsets) - 1)
    for k in range(len(offsets) - 1):
        out[k] = hausdorff(probe_pts, flat_pts[offsets[k]:offsets[k + 1]])
    return out


# ---------------------------------------------------------------------------
# vertical-sliding template cost

def template_cost(a, b):
    """Min over vertical offsets of the per-pixel squared-difference sum of
    the shorter mask against the taller, divided by the template pixel count.

    a, b: uint8 0/1 arrays of equal width. For 0/1 pixels the squared
    difference sum is the count of differing pixels.
    """
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape[0] <= b.shape[0]:
        t, s = a, b
    else:
        t, s = b, a
    ht = t.shape[0]
    best = None
    for j in range(s.shape[0] - ht + 1):
        diff = int(np.count_nonzero(t != s[j:j + ht]))
        if best is None or diff < best:
            best = diff
    return best / float(t.size)


def template_cost_batch(probe, flat_rows, heights):
    """template_cost of probe vs each mask packed row-wise in flat_rows."""
    out = np.empty(len(heights))
    start = 0
    for k, h in enumerate(heights):
        out[k] = template_cost(probe, flat_rows[start:start + h])
        start += h
    return out


# ---------------------------------------------------------------------------
# squared Euclidean distance transform (two-pass separable lower envelope)

def _envelope_1d(f):
    """1-D squared-distance transform of a sampled function (lower envelope
    of parabolas)."""
    n = f.shape[0]
    d = np.empty(n)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1)
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def edt_sq(seed):
    """Exact squared EDT of a seed grid (0 at sites, large elsewhere).

    Infinite seeds must be encoded as a large finite value by the caller so
    the envelope intersections stay finite.
    """
    seed = np.asarray(seed, dtype=np.float64)
    h, w = seed.shape
    tmp = np.empty_like(seed)
    for c in range(w):
        tmp[:, c] = _envelope_1d(seed[:, c])
    out = np.empty_like(seed)
    for r in range(h):
        out[r, :] = _envelope_1d(tmp[r, :])
    return out


# ---------------------------------------------------------------------------
# per-image descriptor kernels

def sc_histograms(pts, radial_edges, angular_bins):
    """Log-polar histograms of relative point positions, one unit-sum row
    per point; radii normalized by the mean pairwise distance before
    binning, out-of-range radii clamped into the end bins.

    Returns (hist (n, R*A), mean_distance); mean_distance 0 flags a
    degenerate all-coincident set (hist is then all zero).
    """
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    radial_bins = len(radial_edges) - 1
    dx = pts[None, :, 0] - pts[:, None, 0]
    dy = pts[None, :, 1] - pts[:, None, 1]
    dist = np.sqrt(dx * dx + dy * dy)
    off_diag = ~np.eye(n, dtype=bool)
    mean_dist = dist[off_diag].mean()
    nbins = radial_bins * angular_bins
    if mean_dist == 0.0:
        return np.zeros((n, nbins)), 0.0
    r_idx = np.searchsorted(radial_edges, dist / mean_dist, side="right") - 1
    r_idx = np.clip(r_idx, 0, radial_bins - 1)
    theta = np.arctan2(dy, dx)
    theta[theta < 0.0] += 2.0 * np.pi
    a_idx = np.clip((theta / (2.0 * np.pi / angular_bins)).astype(np.int64),
                    0, angular_bins - 1)
    flat = r_idx * angular_bins + a_idx
    keyed = (np.arange(n)[:, None] * nbins + flat)[off_diag]
    hist = np.bincount(keyed, minlength=n * nbins).reshape(n, nbins)
    return hist.astype(np.float64) / (n - 1), float(mean_dist)


def sobel_orient_hist(grid, nbins):
    """Magnitude-weighted histogram of 3x3 Sobel orientations folded to
    [0, 180), with edge-replicate padding; returns unnormalized weights."""
    p = np.pad(np.asarray(grid, dtype=np.float64), 1, mode="edge")
    gx = ((p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:])
          - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]))
    gy = ((p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
          - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]))
    mag = np.sqrt(gx * gx + gy * gy)
    nz = mag > 0.0
    if not nz.any():
        return np.zeros(nbins)
    ang = np.degrees(np.arctan2(gy[nz], gx[nz])) % 180.0
    idx = np.clip((ang / (180.0 / nbins)).astype(np.int64), 0, nbins - 1)
    return np.bincount(idx, weights=mag[nz], minlength=nbins).astype(np.float64)


def mask_moment_sums(grid):
    """Central moment sums of the true pixels up to order 3.

    Returns (n, mu20, mu11, mu02, mu30, mu21, mu12, mu03) with the centroid
    taken from exact integer coordinate sums.
    """
    ys, xs = np.nonzero(np.asarray(grid, dtype=bool))
    n = len(xs)
    if n == 0:
        return (0,) + (0.0,) * 7
    x_bar = int(xs.sum(dtype=np.int64)) / n
    y_bar = int(ys.sum(dtype=np.int64)) / n
    dx = xs.astype(np.float64) - x_bar
    dy = ys.astype(np.float64) - y_bar
    dx2 = dx * dx
    dy2 = dy * dy
    return (n,
            float(np.sum(dx2)), float(np.sum(dx * dy)), float(np.sum(dy2)),
            float(np.sum(dx2 * dx)), float(np.sum(dx2 * dy)),
            float(np.sum(dx * dy2)), float(np.sum(dy2 * dy)))


def clamped_hist_counts(values, domain, bin_width, nbins):
    """Counts of values[domain] binned by floor(v / bin_width), clamped to
    the last bin. Returns (counts float64, in-domain count)."""
    vals = np.asarray(values, dtype=np.float64)[np.asarray(domain, dtype=bool)]
    if vals.size == 0:
        return np.zeros(nbins), 0
    idx = np.clip((vals / bin_width).astype(np.int64), 0, nbins - 1)
    return np.bincount(idx, minlength=nbins).astype(np.float64), int(vals.size)


def edt_from_contour(grid, contour_xy):
    """Distance of every true pixel to the nearest contour pixel; false
    pixels carry 0. One fused call: seed, two-pass envelope, sqrt, mask.

    Contour points are float (x, y); they are rounded and clipped into the
    grid to form the zero-distance sites.
    """
    grid = np.asarray(grid, dtype=bool)
    h, w = grid.shape
    far = float(4 * (h * h + w * w) + 16)
    seed = np.full((h, w), far, dtype=np.float64)
    pts = np.asarray(contour_xy, dtype=np.float64)
    cx = np.clip(np.rint(pts[:, 0]).astype(np.int64), 0, w - 1)
    cy = np.clip(np.rint(pts[:, 1]).astype(np.int64), 0, h - 1)
    seed[cy, cx] = 0.0
    values = np.sqrt(edt_sq(seed))
    values[~grid] = 0.0
    return values


def largest_component(grid):
    """Mask of the largest 8-connected true component plus its first pixel
    in row-major order. Ties go to the component seen first in scan order.

    Returns (component uint8 grid, r0, c0); r0 = -1 for an empty grid.
    """
    grid = np.asarray(grid, dtype=bool)
    labels, count = ndimage.label(grid, structure=np.ones((3, 3), dtype=np.int32))
    if count == 0:
        return np.zeros_like(grid, dtype=np.uint8), -1, -1
    if count == 1:
        comp = grid
    else:
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        comp = labels == sizes.argmax()
    comp_u8 = np.ascontiguousarray(comp, dtype=np.uint8)
    flat = int(comp_u8.ravel().argmax())
    r0, c0 = divmod(flat, comp_u8.shape[1])
    return comp_u8, r0, c0


def resample_closed(pts, count):
    """`count` points at uniform arc-length spacing along the closed
    polyline, starting from the point with minimal y (ties: minimal x);
    cyclic order preserved."""
    pts = np.asarray(pts, dtype=np.float64)
    m = len(pts)
    start = int(np.lexsort((pts[:, 0], pts[:, 1]))[0])
    pts = np.roll(pts, -start, axis=0)
    seg = np.roll(pts, -1, axis=0) - pts
    seg_len = np.sqrt((seg ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    if total == 0.0:
        return np.zeros((0, 2))
    targets = np.arange(count) * (total / count)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, m - 1)
    frac = (targets - cum[idx]) / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)
    return pts[idx] + frac[:, None] * seg[idx]


def compute_features(grid, sample_count, radial_edges, angular_bins, dt_bins,
                     orient_bins, want_contour, want_sampled, want_sc,
                     want_dt, want_orient, want_hu):
    """All requested per-image descriptors in one call; see the compiled
    twin for the result contract. The fallback simply composes the
    individual kernels."""
    grid_u8 = np.ascontiguousarray(grid, dtype=np.uint8)
    w = grid_u8.shape[1]
    out = {}
    rc = None
    pts = None
    if want_contour or want_sampled or want_sc or want_dt:
        comp, r0, c0 = largest_component(grid_u8)
        if r0 >= 0:
            rc = trace_boundary(comp, r0, c0)
        out["contour_rc"] = rc
        if rc is not None and len(rc) >= 3:
            pts = np.empty((len(rc), 2), dtype=np.float64)
            pts[:, 0] = rc[:, 1]
            pts[:, 1] = rc[:, 0]
    sampled = None
    if want_sampled or want_sc:
        if pts is not None:
            s = resample_closed(pts, sample_count)
            sampled = s if len(s) else None
        out["sampled"] = sampled
    if want_sc:
        if sampled is not None:
            hist, mean = sc_histograms(sampled, radial_edges, angular_bins)
            out["sc_hist"], out["sc_mean"] = hist, mean
        else:
            out["sc_hist"], out["sc_mean"] = None, 0.0
    if want_dt:
        if pts is not None:
            values = edt_from_contour(grid_u8, pts)
            counts, n = clamped_hist_counts(values, grid_u8,
                                            (w / 2.0) / dt_bins, dt_bins)
            out["dt_counts"], out["dt_n"] = counts, n
        else:
            out["dt_counts"], out["dt_n"] = None, 0
    if want_orient:
        out["orient"] = sobel_orient_hist(grid_u8, orient_bins)
    if want_hu:
        sums = mask_moment_sums(grid_u8)
        out["hu_n"] = sums[0]
        out["hu_sums"] = sums[1:]
    return out


def compute_features_batch(flat_rows, heights, sample_count, radial_edges,
                           angular_bins, dt_bins, orient_bins, want_contour,
                           want_sampled, want_sc, want_dt, want_orient,
                           want_hu):
    """compute_features over a batch of equal-width masks packed row-wise;
    returns one result dict per image."""
    flat_rows = np.ascontiguousarray(flat_rows, dtype=np.uint8)
    out = []
    row0 = 0
    for h in heights:
        out.append(compute_features(
            flat_rows[row0:row0 + h], sample_count, radial_edges,
            angular_bins, dt_bins, orient_bins, want_contour, want_sampled,
            want_sc, want_dt, want_orient, want_hu))
        row0 += h
    return out


# ---------------------------------------------------------------------------
# Moore-neighbor boundary tracing

# clockwise Moore neighborhood in (row, col), starting west
_DIRS = np.array(
    [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)],
    dtype=np.int64,
)
_DIR_INDEX = {(int(dr), int(dc)): i for i, (dr, dc) in enumerate(_DIRS)}


def trace_boundary(grid, r0, c0):
    """Trace the outer boundary of the 8-connected blob containing (r0, c0).

    (r0, c0) must be the first foreground pixel in row-major scan order so
    its west neighbor is background. Returns the boundary as an (N, 2) array
    of (row, col) pixels in consistent traversal order; terminates when the
    tracer is about to leave the start pixel along the same edge as its
    first departure, which handles spurs passing through the start pixel.
    """
    grid = np.asarray(grid, dtype=np.uint8)
    h, w = grid.shape
    pts = []
    pr, pc = r0, c0
    back = 0  # direction index from current pixel toward the backtrack pixel
    first_state = None
    limit = 4 * h * w + 8
    for _ in range(limit):
        found = -1
        for step in range(1, 9):
            d = (back + step) % 8
            qr = pr + _DIRS[d, 0]
            qc = pc + _DIRS[d, 1]
            if 0 <= qr < h and 0 <= qc < w and grid[qr, qc]:
                found = d
                break
        if found == -1:
            return np.array([(r0, c0)], dtype=np.int64)  # isolated pixel
        if first_state is None:
            first_state = (pr, pc, found)
        elif (pr, pc, found) == first_state:
            break
        pts.append((pr, pc))
        qr = pr + _DIRS[found, 0]
        qc = pc + _DIRS[found, 1]
        # backtrack for the next scan: the last background pixel examined,
        # which is the neighbor preceding `found` in the clockwise order
        gr = pr + _DIRS[(found + 7) % 8, 0]
        gc = pc + _DIRS[(found + 7) % 8, 1]
        back = _DIR_INDEX[(gr - qr, gc - qc)]
        pr, pc = qr, qc
    return np.array(pts, dtype=np.int64)
