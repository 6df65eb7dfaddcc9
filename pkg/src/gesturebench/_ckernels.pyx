# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: chi-square cost matrices, assignment, Hausdorff,
sliding template cost, squared EDT, boundary tracing and the per-image
descriptor pipeline (fused into one GIL-free call per image).

Semantics mirror gesturebench._pykernels; loops release the GIL so batch
classification and feature extraction scale across Python threads.
"""

import threading

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, M_PI, atan2, fmod, llround, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"

# per-thread scratch buffers for the fused feature kernel: repeated
# ~100 KB allocations from pool threads trigger glibc arena trimming and
# page-fault storms that serialize the workers, so scratch space is
# allocated once per thread and reused
_tls = threading.local()


def _feature_workspace(h, w):
    hw = h * w
    side = max(h, w)
    ws = getattr(_tls, "ws", None)
    if ws is None or ws["hw"] < hw or ws["side"] < side:
        cap = 4 * hw + 9
        ws = {
            "hw": hw,
            "side": side,
            "comp": np.empty(hw, dtype=np.uint8),
            "labels": np.empty(hw, dtype=np.int32),
            "stack": np.empty(hw, dtype=np.int64),
            "trace": np.empty((cap, 2), dtype=np.int64),
            "pts": np.empty((cap, 2), dtype=np.float64),
            "cum": np.empty(cap + 1, dtype=np.float64),
            "edt": np.empty(hw, dtype=np.float64),
            "edt_tmp": np.empty(hw, dtype=np.float64),
            "dbuf": np.empty(side, dtype=np.float64),
            "vbuf": np.empty(side, dtype=np.int64),
            "zbuf": np.empty(side + 1, dtype=np.float64),
        }
        _tls.ws = ws
    return ws


# ---------------------------------------------------------------------------
# chi-square distances

cdef double _chi2_one(const double[::1] h1, const double[::1] h2) nogil:
    cdef Py_ssize_t k, n = h1.shape[0]
    cdef double den, diff, tot = 0.0
    for k in range(n):
        den = h1[k] + h2[k]
        if den > 0.0:
            diff = h1[k] - h2[k]
            tot += diff * diff / den
    return tot


def chi2(h1, h2):
    """Chi-square distance: sum over bins of (a-b)^2/(a+b), empty bins adding 0."""
    cdef double[::1] a = np.ascontiguousarray(h1, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(h2, dtype=np.float64)
    cdef double out
    with nogil:
        out = _chi2_one(a, b)
    return out


cdef void _chi2_matrix_core(const double[:, ::1] a, const double[:, ::1] b,
                            double[:, ::1] out) nogil:
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], nbins = a.shape[1]
    cdef double den, diff, tot
    for i in range(n):
        for j in range(m):
            tot = 0.0
            for k in range(nbins):
                den = a[i, k] + b[j, k]
                if den > 0.0:
                    diff = a[i, k] - b[j, k]
                    tot += diff * diff / den
            out[i, j] = tot / 2.0


def chi2_pair_matrix(a, b):
    """All-pairs halved chi-square: out[i, j] = chi2(a[i], b[j]) / 2."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty((av.shape[0], bv.shape[0]), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        _chi2_matrix_core(av, bv, ov)
    return out


def chi2_rows(p, rows):
    """chi2(p, rows[k]) for every row; used for histogram-only scoring."""
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] rv = np.ascontiguousarray(rows, dtype=np.float64)
    out = np.empty(rv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(rv.shape[0]):
            ov[k] = _chi2_one(pv, rv[k])
    return out


# ---------------------------------------------------------------------------
# minimum-cost assignment (Jonker-Volgenant style shortest augmenting paths)

cdef double _assignment_core(const double[:, ::1] a, Py_ssize_t n,
                             double[::1] u, double[::1] v,
                             long long[::1] p, long long[::1] way,
                             double[::1] minv, unsigned char[::1] used,
                             long long[::1] perm) nogil:
    cdef Py_ssize_t i, j, i0
    cdef long long j0, j1
    cdef double cur, delta, total
    for j in range(n + 1):
        u[j] = 0.0
        v[j] = 0.0
        p[j] = 0
        way[j] = 0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    total = 0.0
    for i in range(n):
        total += a[i, perm[i]]
    return total


def assignment(cost):
    """Optimal assignment of a square cost matrix.

    Returns (perm, total) with total accumulated in ascending row order.
    """
    a = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef Py_ssize_t n = av.shape[0]
    cdef double[::1] u = np.empty(n + 1)
    cdef double[::1] v = np.empty(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef long long[::1] p = np.empty(n + 1, dtype=np.int64)
    cdef long long[::1] way = np.empty(n + 1, dtype=np.int64)
    cdef unsigned char[::1] used = np.empty(n + 1, dtype=np.uint8)
    perm = np.empty(n, dtype=np.int64)
    cdef long long[::1] pv = perm
    cdef double total
    with nogil:
        total = _assignment_core(av, n, u, v, p, way, minv, used, pv)
    return perm, total


def sc_cost_batch(probe_hists, gallery_hists):
    """Mean optimally-assigned halved chi-square cost of a probe's shape
    context set against each gallery entry's set.

    probe_hists: (n, K); gallery_hists: (G, n, K). Returns (G,) costs.
    """
    cdef double[:, ::1] pv = np.ascontiguousarray(probe_hists, dtype=np.float64)
    cdef double[:, :, ::1] gv = np.ascontiguousarray(gallery_hists, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0]
    cdef Py_ssize_t g = gv.shape[0]
    cdef double[:, ::1] work = np.empty((n, n), dtype=np.float64)
    cdef double[::1] u = np.empty(n + 1)
    cdef double[::1] v = np.empty(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef long long[::1] p = np.empty(n + 1, dtype=np.int64)
    cdef long long[::1] way = np.empty(n + 1, dtype=np.int64)
    cdef unsigned char[::1] used = np.empty(n + 1, dtype=np.uint8)
    cdef long long[::1] perm = np.empty(n, dtype=np.int64)
    out = np.empty(g, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(g):
            _chi2_matrix_core(pv, gv[k], work)
            ov[k] = _assignment_core(work, n, u, v, p, way, minv, used, perm) / n
    return out


# ---------------------------------------------------------------------------
# Hausdorff distance

cdef double _hausdorff_sq(const double[:, ::1] a, const double[:, ::1] b) nogil:
    cdef Py_ssize_t i, j
    cdef double dx, dy, d2, best, worst = 0.0
    for i in range(a.shape[0]):
        best = INFINITY
        for j in range(b.shape[0]):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        if best > worst:
            worst = best
    return worst


def hausdorff(a, b):
    """Symmetric Hausdorff distance between two point sets (n,2)/(m,2)."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double h_ab, h_ba
    with nogil:
        h_ab = _hausdorff_sq(av, bv)
        h_ba = _hausdorff_sq(bv, av)
    return sqrt(h_ab if h_ab > h_ba else h_ba)


def hausdorff_batch(probe_pts, flat_pts, offsets):
    """Hausdorff of probe_pts vs each point set in the packed flat array."""
    cdef double[:, ::1] pv = np.ascontiguousarray(probe_pts, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(flat_pts, dtype=np.float64)
    cdef long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t g = off.shape[0] - 1
    out = np.empty(g, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t k
    cdef double h_ab, h_ba
    with nogil:
        for k in range(g):
            h_ab = _hausdorff_sq(pv, fv[off[k]:off[k + 1]])
            h_ba = _hausdorff_sq(fv[off[k]:off[k + 1]], pv)
            ov[k] = sqrt(h_ab if h_ab > h_ba else h_ba)
    return out


# ---------------------------------------------------------------------------
# vertical-sliding template cost

cdef double _template_core(const unsigned char[:, ::1] t,
                           const unsigned char[:, ::1] s) nogil:
    cdef Py_ssize_t ht = t.shape[0], w = t.shape[1]
    cdef Py_ssize_t hs = s.shape[0]
    cdef Py_ssize_t i, j, r
    cdef long long diff, best = -1
    for r in range(hs - ht + 1):
        diff = 0
        for i in range(ht):
            for j in range(w):
                diff += t[i, j] ^ s[r + i, j]
        if best < 0 or diff < best:
            best = diff
    return best / <double>(ht * w)


def template_cost(a, b):
    """Min over vertical offsets of the differing-pixel count of the shorter
    mask against the taller, divided by the template pixel count."""
    cdef unsigned char[:, ::1] av = np.ascontiguousarray(a, dtype=np.uint8)
    cdef unsigned char[:, ::1] bv = np.ascontiguousarray(b, dtype=np.uint8)
    cdef double out
    with nogil:
        if av.shape[0] <= bv.shape[0]:
            out = _template_core(av, bv)
        else:
            out = _template_core(bv, av)
    return out


def template_cost_batch(probe, flat_rows, heights):
    """template_cost of probe vs each mask packed row-wise in flat_rows."""
    cdef unsigned char[:, ::1] pv = np.ascontiguousarray(probe, dtype=np.uint8)
    cdef unsigned char[:, ::1] fv = np.ascontiguousarray(flat_rows, dtype=np.uint8)
    cdef long long[::1] hv = np.ascontiguousarray(heights, dtype=np.int64)
    cdef Py_ssize_t g = hv.shape[0]
    out = np.empty(g, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t k
    cdef long long start = 0
    with nogil:
        for k in range(g):
            if pv.shape[0] <= hv[k]:
                ov[k] = _template_core(pv, fv[start:start + hv[k]])
            else:
                ov[k] = _template_core(fv[start:start + hv[k]], pv)
            start += hv[k]
    return out


# ---------------------------------------------------------------------------
# squared Euclidean distance transform (two-pass separable lower envelope)

cdef void _envelope_1d(const double[::1] f, double[::1] d,
                       long long[::1] v, double[::1] z) nogil:
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t q
    cdef long long k = 0
    cdef double s
    v[0] = 0
    z[0] = -INFINITY
    z[1] = INFINITY
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INFINITY
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


cdef void _transpose_blocked(const double[:, ::1] src, double[:, ::1] dst,
                             Py_ssize_t h, Py_ssize_t w) nogil:
    """Cache-blocked transpose of the logical h x w region; keeps both EDT
    passes on contiguous rows. Buffers may be larger than the region."""
    cdef Py_ssize_t r0, c0, r, c, r1, c1
    for r0 in range(0, h, 32):
        r1 = r0 + 32
        if r1 > h:
            r1 = h
        for c0 in range(0, w, 32):
            c1 = c0 + 32
            if c1 > w:
                c1 = w
            for r in range(r0, r1):
                for c in range(c0, c1):
                    dst[c, r] = src[r, c]


cdef void _edt_sq_passes(double[:, ::1] sv, double[:, ::1] tmp,
                         double[::1] dbuf, long long[::1] vbuf,
                         double[::1] zbuf) nogil:
    """Two-pass squared EDT over the seed grid sv, in place; tmp is a
    (w, h) scratch grid."""
    cdef Py_ssize_t h = sv.shape[0], w = sv.shape[1]
    cdef Py_ssize_t r, c
    _transpose_blocked(sv, tmp, h, w)
    for c in range(w):  # contiguous rows of tmp are columns of sv
        _envelope_1d(tmp[c, :h], dbuf[:h], vbuf, zbuf)
        for r in range(h):
            tmp[c, r] = dbuf[r]
    _transpose_blocked(tmp, sv, w, h)
    for r in range(h):
        _envelope_1d(sv[r], dbuf[:w], vbuf, zbuf)
        for c in range(w):
            sv[r, c] = dbuf[c]


def edt_sq(seed):
    """Exact squared EDT of a seed grid (0 at sites, large elsewhere).

    Infinite seeds must be encoded as a large finite value by the caller so
    the envelope intersections stay finite.
    """
    out = np.array(seed, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] sv = out
    cdef Py_ssize_t h = sv.shape[0], w = sv.shape[1]
    cdef Py_ssize_t m = h if h > w else w
    cdef double[:, ::1] tmp = np.empty((w, h), dtype=np.float64)
    cdef double[::1] dbuf = np.empty(m, dtype=np.float64)
    cdef long long[::1] vbuf = np.empty(m, dtype=np.int64)
    cdef double[::1] zbuf = np.empty(m + 1, dtype=np.float64)
    with nogil:
        _edt_sq_passes(sv, tmp, dbuf, vbuf, zbuf)
    return out


cdef void _edt_distances_core(const unsigned char[:, ::1] gv,
                              const long long[:, ::1] rc, Py_ssize_t nrc,
                              double[:, ::1] sv, double[:, ::1] tmp,
                              double[::1] dbuf, long long[::1] vbuf,
                              double[::1] zbuf) nogil:
    """Distances of true pixels to the nearest of the rc pixels into sv;
    false pixels get 0. Seeds go straight into the transposed scratch and
    the sqrt/mask step is fused into the final pass to keep traffic low."""
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef double far = 4.0 * (h * h + w * w) + 16.0
    cdef Py_ssize_t r, c, k
    for c in range(w):
        for r in range(h):
            tmp[c, r] = far
    for k in range(nrc):
        tmp[rc[k, 1], rc[k, 0]] = 0.0
    for c in range(w):  # contiguous rows of tmp are columns of the grid
        _envelope_1d(tmp[c, :h], dbuf[:h], vbuf, zbuf)
        for r in range(h):
            tmp[c, r] = dbuf[r]
    _transpose_blocked(tmp, sv, w, h)
    for r in range(h):
        _envelope_1d(sv[r], dbuf[:w], vbuf, zbuf)
        for c in range(w):
            sv[r, c] = sqrt(dbuf[c]) if gv[r, c] else 0.0


def edt_from_contour(grid, contour_xy):
    """Distance of every true pixel to the nearest contour pixel; false
    pixels carry 0. One fused call: seed, two-pass envelope, sqrt, mask.

    Contour points are float (x, y); they are rounded and clipped into the
    grid to form the zero-distance sites.
    """
    cdef unsigned char[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.uint8)
    cdef double[:, ::1] xy = np.ascontiguousarray(contour_xy, dtype=np.float64)
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef Py_ssize_t m = h if h > w else w
    cdef Py_ssize_t k, r, c
    rc_arr = np.empty((xy.shape[0], 2), dtype=np.int64)
    cdef long long[:, ::1] rc = rc_arr
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] sv = out
    cdef double[:, ::1] tmp = np.empty((w, h), dtype=np.float64)
    cdef double[::1] dbuf = np.empty(m, dtype=np.float64)
    cdef long long[::1] vbuf = np.empty(m, dtype=np.int64)
    cdef double[::1] zbuf = np.empty(m + 1, dtype=np.float64)
    with nogil:
        for k in range(xy.shape[0]):
            c = <Py_ssize_t>llround(xy[k, 0])
            r = <Py_ssize_t>llround(xy[k, 1])
            rc[k, 0] = 0 if r < 0 else (h - 1 if r > h - 1 else r)
            rc[k, 1] = 0 if c < 0 else (w - 1 if c > w - 1 else c)
        _edt_distances_core(gv, rc, rc.shape[0], sv, tmp, dbuf, vbuf, zbuf)
    return out


# ---------------------------------------------------------------------------
# connected components and Moore-neighbor boundary tracing

cdef long long _flood_fill_core(const unsigned char[:, ::1] gv,
                                int[:, ::1] lv, long long[::1] stack,
                                unsigned char[:, ::1] ov,
                                long long* out_r0, long long* out_c0) nogil:
    """Label 8-connected components; write the largest one into ov and its
    row-major first pixel into out_r0/out_c0. Returns its size (0 if none)."""
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef Py_ssize_t r, c, rr, cc, nr, nc
    cdef long long top, size, best_size = 0
    cdef int label = 0, best_label = 0
    out_r0[0] = -1
    out_c0[0] = -1
    for r in range(h):
        for c in range(w):
            if gv[r, c] and lv[r, c] == 0:
                label += 1
                size = 0
                top = 0
                stack[top] = r * w + c
                top += 1
                lv[r, c] = label
                while top > 0:
                    top -= 1
                    rr = stack[top] / w
                    cc = stack[top] % w
                    size += 1
                    for nr in range(rr - 1, rr + 2):
                        for nc in range(cc - 1, cc + 2):
                            if (0 <= nr < h and 0 <= nc < w
                                    and gv[nr, nc] and lv[nr, nc] == 0):
                                lv[nr, nc] = label
                                stack[top] = nr * w + nc
                                top += 1
                if size > best_size:
                    best_size = size
                    best_label = label
                    out_r0[0] = r
                    out_c0[0] = c
    if best_label > 0:
        for r in range(h):
            for c in range(w):
                ov[r, c] = 1 if lv[r, c] == best_label else 0
    return best_size


def largest_component(grid):
    """Mask of the largest 8-connected true component plus its first pixel
    in row-major order. Ties go to the component seen first in scan order.

    Returns (component uint8 grid, r0, c0); r0 = -1 for an empty grid.
    """
    cdef unsigned char[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.uint8)
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    out = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] ov = out
    cdef int[:, ::1] lv = np.zeros((h, w), dtype=np.int32)
    cdef long long[::1] stack = np.empty(h * w, dtype=np.int64)
    cdef long long r0 = -1, c0 = -1
    with nogil:
        _flood_fill_core(gv, lv, stack, ov, &r0, &c0)
    return out, int(r0), int(c0)


cdef long long _DR[8]
cdef long long _DC[8]
_DR[0] = 0; _DC[0] = -1   # W
_DR[1] = -1; _DC[1] = -1  # NW
_DR[2] = -1; _DC[2] = 0   # N
_DR[3] = -1; _DC[3] = 1   # NE
_DR[4] = 0; _DC[4] = 1    # E
_DR[5] = 1; _DC[5] = 1    # SE
_DR[6] = 1; _DC[6] = 0    # S
_DR[7] = 1; _DC[7] = -1   # SW


cdef long long _dir_index(long long dr, long long dc) nogil:
    cdef long long i
    for i in range(8):
        if _DR[i] == dr and _DC[i] == dc:
            return i
    return -1


cdef long long _trace_core(const unsigned char[:, ::1] gv,
                           long long r0, long long c0,
                           long long[:, ::1] buf) nogil:
    """Moore-neighbor trace from the row-major-first pixel (west neighbor is
    background). Returns boundary length; 1 for an isolated pixel."""
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef long long limit = 4 * h * w + 8
    cdef long long pr = r0, pc = c0
    cdef long long back = 0, count = 0
    cdef long long sr = -1, sc = -1, sd = -1
    cdef long long step, d, found, qr, qc, gr, gc, it
    for it in range(limit):
        found = -1
        for step in range(1, 9):
            d = (back + step) % 8
            qr = pr + _DR[d]
            qc = pc + _DC[d]
            if 0 <= qr < h and 0 <= qc < w and gv[qr, qc]:
                found = d
                break
        if found == -1:
            buf[0, 0] = r0
            buf[0, 1] = c0
            return 1  # isolated pixel
        if sd == -1:
            sr = pr
            sc = pc
            sd = found
        elif pr == sr and pc == sc and found == sd:
            break
        buf[count, 0] = pr
        buf[count, 1] = pc
        count += 1
        qr = pr + _DR[found]
        qc = pc + _DC[found]
        gr = pr + _DR[(found + 7) % 8]  # cdivision: keep the operand positive
        gc = pc + _DC[(found + 7) % 8]
        back = _dir_index(gr - qr, gc - qc)
        pr = qr
        pc = qc
    return count


def trace_boundary(grid, r0, c0):
    """Trace the outer boundary of the 8-connected blob containing (r0, c0).

    (r0, c0) must be the first foreground pixel in row-major scan order so
    its west neighbor is background. Returns the boundary as an (N, 2) array
    of (row, col) pixels in consistent traversal order.
    """
    cdef unsigned char[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.uint8)
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    buf = np.empty((4 * h * w + 8, 2), dtype=np.int64)
    cdef long long[:, ::1] bv = buf
    cdef long long count, rr = r0, cc = c0
    with nogil:
        count = _trace_core(gv, rr, cc, bv)
    return buf[:count].copy()


# ---------------------------------------------------------------------------
# per-image descriptor kernels

cdef bint _resample_core(const double[:, ::1] pv, double[::1] cum,
                         double[:, ::1] ov) nogil:
    """Uniform arc-length resample of the closed polyline pv into ov,
    starting from the (min-y, min-x) point. False if degenerate."""
    cdef Py_ssize_t m = pv.shape[0]
    cdef Py_ssize_t n_out = ov.shape[0]
    cdef Py_ssize_t s0 = 0
    cdef Py_ssize_t i, a, b, k
    cdef double dx, dy, total, target, seg, frac
    for i in range(1, m):  # start: minimal y, ties minimal x
        if (pv[i, 1] < pv[s0, 1]
                or (pv[i, 1] == pv[s0, 1] and pv[i, 0] < pv[s0, 0])):
            s0 = i
    cum[0] = 0.0
    for i in range(m):
        a = (s0 + i) % m
        b = (s0 + i + 1) % m
        dx = pv[b, 0] - pv[a, 0]
        dy = pv[b, 1] - pv[a, 1]
        cum[i + 1] = cum[i] + sqrt(dx * dx + dy * dy)
    total = cum[m]
    if total <= 0.0:
        return False
    k = 0
    for i in range(n_out):
        target = i * (total / n_out)
        while k < m - 1 and cum[k + 1] <= target:
            k += 1
        a = (s0 + k) % m
        b = (s0 + k + 1) % m
        dx = pv[b, 0] - pv[a, 0]
        dy = pv[b, 1] - pv[a, 1]
        seg = sqrt(dx * dx + dy * dy)
        frac = (target - cum[k]) / seg if seg > 0.0 else 0.0
        ov[i, 0] = pv[a, 0] + frac * dx
        ov[i, 1] = pv[a, 1] + frac * dy
    return True


def resample_closed(pts, count):
    """`count` points at uniform arc-length spacing along the closed
    polyline, starting from the point with minimal y (ties: minimal x);
    cyclic order preserved."""
    cdef double[:, ::1] pv = np.ascontiguousarray(pts, dtype=np.float64)
    cdef Py_ssize_t m = pv.shape[0]
    out = np.empty((count, 2), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double[::1] cum = np.empty(m + 1, dtype=np.float64)
    cdef bint ok
    with nogil:
        ok = _resample_core(pv, cum, ov)
    if not ok:
        return np.zeros((0, 2))
    return out


cdef double _sc_hist_core(const double[:, ::1] pv, const double[::1] ev,
                          Py_ssize_t abins, double[:, ::1] hv) nogil:
    """Fill per-point log-polar histograms; returns the mean pairwise
    distance (0 flags a degenerate all-coincident set)."""
    cdef Py_ssize_t n = pv.shape[0]
    cdef Py_ssize_t radial_bins = ev.shape[0] - 1
    cdef Py_ssize_t nbins = radial_bins * abins
    cdef Py_ssize_t i, j, ri, ai
    cdef double dx, dy, d, mean_dist = 0.0, theta, two_pi = 2.0 * M_PI
    for i in range(n):
        for j in range(nbins):
            hv[i, j] = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                dx = pv[j, 0] - pv[i, 0]
                dy = pv[j, 1] - pv[i, 1]
                mean_dist += sqrt(dx * dx + dy * dy)
    mean_dist /= n * (n - 1)
    if mean_dist == 0.0:
        return 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx = pv[j, 0] - pv[i, 0]
            dy = pv[j, 1] - pv[i, 1]
            d = sqrt(dx * dx + dy * dy) / mean_dist
            ri = 0
            while ri < radial_bins and d >= ev[ri + 1]:
                ri += 1
            if ri >= radial_bins:
                ri = radial_bins - 1
            theta = atan2(dy, dx)
            if theta < 0.0:
                theta += two_pi
            ai = <Py_ssize_t>(theta / (two_pi / abins))
            if ai >= abins:
                ai = abins - 1
            hv[i, ri * abins + ai] += 1.0
    for i in range(n):
        for j in range(nbins):
            hv[i, j] /= n - 1
    return mean_dist


def sc_histograms(pts, radial_edges, angular_bins):
    """Log-polar histograms of relative point positions, one unit-sum row
    per point; radii normalized by the mean pairwise distance before
    binning, out-of-range radii clamped into the end bins.

    Returns (hist (n, R*A), mean_distance); mean_distance 0 flags a
    degenerate all-coincident set (hist is then all zero).
    """
    cdef double[:, ::1] pv = np.ascontiguousarray(pts, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(radial_edges, dtype=np.float64)
    hist = np.empty((pv.shape[0], (ev.shape[0] - 1) * angular_bins),
                    dtype=np.float64)
    cdef double[:, ::1] hv = hist
    cdef Py_ssize_t abins = angular_bins
    cdef double mean_dist
    with nogil:
        mean_dist = _sc_hist_core(pv, ev, abins, hv)
    return hist, mean_dist


cdef double _sobel_hist_core(const unsigned char[:, ::1] gv,
                             double[::1] ov) nogil:
    """Magnitude-weighted orientation histogram; returns the total weight."""
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef Py_ssize_t bins = ov.shape[0]
    cdef Py_ssize_t r, c, rm, rp, cm, cp, idx
    cdef double gx, gy, mag, ang, total = 0.0, bw = 180.0 / bins
    for idx in range(bins):
        ov[idx] = 0.0
    for r in range(h):
        rm = r - 1 if r > 0 else 0
        rp = r + 1 if r < h - 1 else h - 1
        for c in range(w):
            cm = c - 1 if c > 0 else 0
            cp = c + 1 if c < w - 1 else w - 1
            gx = (gv[rm, cp] + 2.0 * gv[r, cp] + gv[rp, cp]
                  - gv[rm, cm] - 2.0 * gv[r, cm] - gv[rp, cm])
            gy = (gv[rp, cm] + 2.0 * gv[rp, c] + gv[rp, cp]
                  - gv[rm, cm] - 2.0 * gv[rm, c] - gv[rm, cp])
            mag = sqrt(gx * gx + gy * gy)
            if mag > 0.0:
                ang = fmod(atan2(gy, gx) * (180.0 / M_PI), 180.0)
                if ang < 0.0:
                    ang += 180.0
                idx = <Py_ssize_t>(ang / bw)
                if idx >= bins:
                    idx = bins - 1
                ov[idx] += mag
                total += mag
    return total


def sobel_orient_hist(grid, nbins):
    """Magnitude-weighted histogram of 3x3 Sobel orientations folded to
    [0, 180), with edge-replicate padding; returns unnormalized weights."""
    cdef unsigned char[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.uint8)
    out = np.zeros(nbins, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        _sobel_hist_core(gv, ov)
    return out


cdef long long _moments_core(const unsigned char[:, ::1] gv,
                             double* m) nogil:
    """Central moment sums (order 2 and 3) of the true pixels into m[0..6];
    returns the pixel count."""
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef long long n = 0, sx = 0, sy = 0
    cdef Py_ssize_t r, c, k
    cdef double xb, yb, dx, dy, dx2, dy2
    for k in range(7):
        m[k] = 0.0
    for r in range(h):
        for c in range(w):
            if gv[r, c]:
                n += 1
                sx += c
                sy += r
    if n == 0:
        return 0
    xb = <double>sx / n
    yb = <double>sy / n
    for r in range(h):
        for c in range(w):
            if gv[r, c]:
                dx = c - xb
                dy = r - yb
                dx2 = dx * dx
                dy2 = dy * dy
                m[0] += dx2
                m[1] += dx * dy
                m[2] += dy2
                m[3] += dx2 * dx
                m[4] += dx2 * dy
                m[5] += dx * dy2
                m[6] += dy2 * dy
    return n


def mask_moment_sums(grid):
    """Central moment sums of the true pixels up to order 3.

    Returns (n, mu20, mu11, mu02, mu30, mu21, mu12, mu03) with the centroid
    taken from exact integer coordinate sums.
    """
    cdef unsigned char[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.uint8)
    cdef double m[7]
    cdef long long n
    with nogil:
        n = _moments_core(gv, m)
    return (int(n), m[0], m[1], m[2], m[3], m[4], m[5], m[6])


cdef long long _clamped_hist_core(const double[:, ::1] vv,
                                  const unsigned char[:, ::1] dv,
                                  double bw, double[::1] ov) nogil:
    """Bin vv[dv] by floor(v / bw) clamped to the last bin; returns count."""
    cdef Py_ssize_t bins = ov.shape[0]
    cdef Py_ssize_t r, c, idx
    cdef long long total = 0
    for idx in range(bins):
        ov[idx] = 0.0
    for r in range(vv.shape[0]):
        for c in range(vv.shape[1]):
            if dv[r, c]:
                total += 1
                idx = <Py_ssize_t>(vv[r, c] / bw)
                if idx >= bins:
                    idx = bins - 1
                elif idx < 0:
                    idx = 0
                ov[idx] += 1.0
    return total


def clamped_hist_counts(values, domain, bin_width, nbins):
    """Counts of values[domain] binned by floor(v / bin_width), clamped to
    the last bin. Returns (counts float64, in-domain count)."""
    cdef double[:, ::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef unsigned char[:, ::1] dv = np.ascontiguousarray(domain, dtype=np.uint8)
    out = np.zeros(nbins, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double bw = bin_width
    cdef long long total
    with nogil:
        total = _clamped_hist_core(vv, dv, bw, ov)
    return out, int(total)


def compute_features(grid, sample_count, radial_edges, angular_bins, dt_bins,
                     orient_bins, want_contour, want_sampled, want_sc,
                     want_dt, want_orient, want_hu):
    """All requested per-image descriptors in a single GIL-free region.

    Returns a dict with keys among contour_rc, sampled, sc_hist, sc_mean,
    dt_counts, dt_n, orient, hu_n, hu_sums; entries are present exactly for
    the requested features (contour-dependent ones are None when the
    contour is missing or too small).
    """
    cdef unsigned char[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.uint8)
    cdef Py_ssize_t h = gv.shape[0], w = gv.shape[1]
    cdef Py_ssize_t m_line = h if h > w else w
    cdef Py_ssize_t n_sample = sample_count
    cdef Py_ssize_t abins = angular_bins

    cdef bint w_contour = want_contour or want_sampled or want_sc or want_dt
    cdef bint w_sampled = want_sampled or want_sc
    cdef bint w_sc = want_sc
    cdef bint w_dt = want_dt
    cdef bint w_orient = want_orient
    cdef bint w_hu = want_hu

    cdef double[::1] ev = np.ascontiguousarray(radial_edges, dtype=np.float64)

    # reusable per-thread scratch plus small fresh output arrays
    ws = _feature_workspace(h, w)
    comp_arr = ws["comp"][:h * w].reshape(h, w)
    if w_contour:
        comp_arr[:] = 0
        ws["labels"][:h * w] = 0
    cdef unsigned char[:, ::1] comp_v = comp_arr
    cdef int[:, ::1] lv = ws["labels"][:h * w].reshape(h, w)
    cdef long long[::1] stack = ws["stack"]
    cdef long long[:, ::1] trace_v = ws["trace"]
    cdef double[:, ::1] pts_v = ws["pts"]
    cdef double[::1] cum = ws["cum"]
    sampled = np.empty((n_sample, 2), dtype=np.float64) if w_sampled else None
    cdef double[:, ::1] sampled_v = (sampled if w_sampled
                                     else np.empty((1, 2), dtype=np.float64))
    sc_hist = (np.empty((n_sample, (ev.shape[0] - 1) * abins), dtype=np.float64)
               if w_sc else None)
    cdef double[:, ::1] sc_v = (sc_hist if w_sc
                                else np.empty((1, 1), dtype=np.float64))
    cdef double[:, ::1] edt_v = ws["edt"][:h * w].reshape(h, w)
    cdef double[:, ::1] edt_tmp = ws["edt_tmp"][:h * w].reshape(w, h)
    dt_counts = np.zeros(dt_bins, dtype=np.float64) if w_dt else None
    cdef double[::1] dt_v = (dt_counts if w_dt
                             else np.empty(1, dtype=np.float64))
    orient = np.zeros(orient_bins, dtype=np.float64) if w_orient else None
    cdef double[::1] orient_v = (orient if w_orient
                                 else np.empty(1, dtype=np.float64))
    cdef double[::1] dbuf = ws["dbuf"][:m_line]
    cdef long long[::1] vbuf = ws["vbuf"][:m_line]
    cdef double[::1] zbuf = ws["zbuf"][:m_line + 1]

    cdef double dt_bw = (w / 2.0) / dt_bins
    cdef long long r0 = -1, c0 = -1, n_contour = 0, dt_n = 0, hu_n = 0
    cdef double sc_mean = 0.0
    cdef double hu_sums[7]
    cdef bint sampled_ok = False
    cdef Py_ssize_t k

    with nogil:
        if w_contour:
            if _flood_fill_core(gv, lv, stack, comp_v, &r0, &c0) > 0:
                n_contour = _trace_core(comp_v, r0, c0, trace_v)
                for k in range(n_contour):
                    pts_v[k, 0] = <double>trace_v[k, 1]  # x = column
                    pts_v[k, 1] = <double>trace_v[k, 0]  # y = row
        if w_sampled and n_contour >= 3:
            sampled_ok = _resample_core(pts_v[:n_contour], cum, sampled_v)
        if w_sc and sampled_ok:
            sc_mean = _sc_hist_core(sampled_v, ev, abins, sc_v)
        if w_dt and n_contour >= 3:
            _edt_distances_core(gv, trace_v, n_contour, edt_v, edt_tmp,
                                dbuf, vbuf, zbuf)
            dt_n = _clamped_hist_core(edt_v, gv, dt_bw, dt_v)
        if w_orient:
            _sobel_hist_core(gv, orient_v)
        if w_hu:
            hu_n = _moments_core(gv, hu_sums)

    out = {}
    if want_contour or want_sampled or want_sc or want_dt:
        out["contour_rc"] = np.array(ws["trace"][:n_contour]) if n_contour else None
    if want_sampled or want_sc:
        out["sampled"] = sampled if sampled_ok else None
    if want_sc:
        out["sc_hist"] = sc_hist if sampled_ok else None
        out["sc_mean"] = sc_mean
    if want_dt:
        out["dt_counts"] = dt_counts if n_contour >= 3 else None
        out["dt_n"] = dt_n
    if want_orient:
        out["orient"] = orient
    if want_hu:
        out["hu_n"] = hu_n
        out["hu_sums"] = tuple(hu_sums[k] for k in range(7))
    return out


def compute_features_batch(flat_rows, heights, sample_count, radial_edges,
                           angular_bins, dt_bins, orient_bins, want_contour,
                           want_sampled, want_sc, want_dt, want_orient,
                           want_hu):
    """compute_features over a batch of equal-width masks packed row-wise
    in flat_rows, inside a single GIL-free region.

    Returns one result dict per image, matching compute_features.
    """
    cdef unsigned char[:, ::1] fv = np.ascontiguousarray(flat_rows, dtype=np.uint8)
    cdef long long[::1] hv = np.ascontiguousarray(heights, dtype=np.int64)
    cdef Py_ssize_t n_img = hv.shape[0]
    cdef Py_ssize_t w = fv.shape[1]
    cdef Py_ssize_t hmax = 0
    cdef Py_ssize_t i
    for i in range(n_img):
        if hv[i] > hmax:
            hmax = hv[i]
    cdef Py_ssize_t m_line = hmax if hmax > w else w
    cdef Py_ssize_t n_sample = sample_count
    cdef Py_ssize_t abins = angular_bins

    cdef bint w_contour = want_contour or want_sampled or want_sc or want_dt
    cdef bint w_sampled = want_sampled or want_sc
    cdef bint w_sc = want_sc
    cdef bint w_dt = want_dt
    cdef bint w_orient = want_orient
    cdef bint w_hu = want_hu

    cdef double[::1] ev = np.ascontiguousarray(radial_edges, dtype=np.float64)
    cdef Py_ssize_t nbins_sc = (ev.shape[0] - 1) * abins

    ws = _feature_workspace(hmax, w)
    cdef unsigned char[:, ::1] comp_v = ws["comp"][:hmax * w].reshape(hmax, w)
    cdef int[:, ::1] lv = ws["labels"][:hmax * w].reshape(hmax, w)
    cdef long long[::1] stack = ws["stack"]
    cdef long long[:, ::1] trace_v = ws["trace"]
    cdef double[:, ::1] pts_v = ws["pts"]
    cdef double[::1] cum = ws["cum"]
    cdef double[:, ::1] edt_v = ws["edt"][:hmax * w].reshape(hmax, w)
    cdef double[:, ::1] edt_tmp = ws["edt_tmp"][:hmax * w].reshape(w, hmax)
    cdef double[::1] dbuf = ws["dbuf"][:m_line]
    cdef long long[::1] vbuf = ws["vbuf"][:m_line]
    cdef double[::1] zbuf = ws["zbuf"][:m_line + 1]

    # batch outputs
    sampled_all = np.zeros((n_img, n_sample, 2)) if w_sampled else None
    cdef double[:, :, ::1] sampled_v3 = (sampled_all if w_sampled
                                         else np.zeros((1, 1, 2)))
    sc_all = np.zeros((n_img, n_sample, nbins_sc)) if w_sc else None
    cdef double[:, :, ::1] sc_v3 = sc_all if w_sc else np.zeros((1, 1, 1))
    dt_all = np.zeros((n_img, dt_bins)) if w_dt else None
    cdef double[:, ::1] dt_v2 = dt_all if w_dt else np.zeros((1, 1))
    orient_all = np.zeros((n_img, orient_bins)) if w_orient else None
    cdef double[:, ::1] orient_v2 = (orient_all if w_orient
                                     else np.zeros((1, 1)))
    hu_sums_all = np.zeros((n_img, 7)) if w_hu else None
    cdef double[:, ::1] hu_v2 = hu_sums_all if w_hu else np.zeros((1, 1))

    n_contour_arr = np.zeros(n_img, dtype=np.int64)
    cdef long long[::1] ncv = n_contour_arr
    offsets = np.zeros(n_img + 1, dtype=np.int64)
    cdef long long[::1] offv = offsets
    sampled_ok_arr = np.zeros(n_img, dtype=np.uint8)
    cdef unsigned char[::1] okv = sampled_ok_arr
    sc_mean_arr = np.zeros(n_img)
    cdef double[::1] smv = sc_mean_arr
    dt_n_arr = np.zeros(n_img, dtype=np.int64)
    cdef long long[::1] dtnv = dt_n_arr
    hu_n_arr = np.zeros(n_img, dtype=np.int64)
    cdef long long[::1] hunv = hu_n_arr

    # contour staging buffer, grown under the GIL when needed
    contour_store = np.empty((4096 * (n_img if n_img > 0 else 1), 2),
                             dtype=np.int64)
    cdef long long[:, ::1] cs_v = contour_store
    cdef long long cs_cap = cs_v.shape[0]

    cdef Py_ssize_t h_i, r, c, k
    cdef long long row0 = 0, r0 = 0, c0 = 0, n_contour, used = 0
    cdef double dt_bw = (w / 2.0) / dt_bins
    cdef double hu_sums[7]
    cdef bint ok

    with nogil:
        for i in range(n_img):
            h_i = hv[i]
            n_contour = 0
            ok = False
            if w_contour:
                for r in range(h_i):
                    for c in range(w):
                        comp_v[r, c] = 0
                        lv[r, c] = 0
                if _flood_fill_core(fv[row0:row0 + h_i], lv[:h_i], stack,
                                    comp_v[:h_i], &r0, &c0) > 0:
                    n_contour = _trace_core(comp_v[:h_i], r0, c0, trace_v)
                    if used + n_contour > cs_cap:
                        with gil:
                            grown = np.empty((max(cs_cap * 2,
                                                  used + n_contour), 2),
                                             dtype=np.int64)
                            grown[:used] = contour_store[:used]
                            contour_store = grown
                            cs_v = contour_store
                            cs_cap = cs_v.shape[0]
                    for k in range(n_contour):
                        cs_v[used + k, 0] = trace_v[k, 0]
                        cs_v[used + k, 1] = trace_v[k, 1]
                        pts_v[k, 0] = <double>trace_v[k, 1]  # x = column
                        pts_v[k, 1] = <double>trace_v[k, 0]  # y = row
                    used += n_contour
            ncv[i] = n_contour
            offv[i + 1] = used
            if w_sampled and n_contour >= 3:
                ok = _resample_core(pts_v[:n_contour], cum, sampled_v3[i])
                okv[i] = 1 if ok else 0
            if w_sc and ok:
                smv[i] = _sc_hist_core(sampled_v3[i], ev, abins, sc_v3[i])
            if w_dt and n_contour >= 3:
                _edt_distances_core(fv[row0:row0 + h_i], trace_v, n_contour,
                                    edt_v[:h_i], edt_tmp, dbuf, vbuf, zbuf)
                dtnv[i] = _clamped_hist_core(edt_v[:h_i], fv[row0:row0 + h_i],
                                             dt_bw, dt_v2[i])
            if w_orient:
                _sobel_hist_core(fv[row0:row0 + h_i], orient_v2[i])
            if w_hu:
                hunv[i] = _moments_core(fv[row0:row0 + h_i], hu_sums)
                for k in range(7):
                    hu_v2[i, k] = hu_sums[k]
            row0 += h_i

    results = []
    for i in range(n_img):
        out = {}
        nc = int(n_contour_arr[i])
        s_ok = bool(sampled_ok_arr[i])
        if want_contour or want_sampled or want_sc or want_dt:
            out["contour_rc"] = (np.array(contour_store[offsets[i]:offsets[i + 1]])
                                 if nc else None)
        if want_sampled or want_sc:
            out["sampled"] = sampled_all[i] if s_ok else None
        if want_sc:
            out["sc_hist"] = sc_all[i] if s_ok else None
            out["sc_mean"] = float(sc_mean_arr[i])
        if want_dt:
            out["dt_counts"] = dt_all[i] if nc >= 3 else None
            out["dt_n"] = int(dt_n_arr[i])
        if want_orient:
            out["orient"] = orient_all[i]
        if want_hu:
            out["hu_n"] = int(hu_n_arr[i])
            out["hu_sums"] = tuple(hu_sums_all[i])
        results.append(out)
    return results
