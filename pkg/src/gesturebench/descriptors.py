"""Per-image shape features: log-polar shape contexts of the sampled
contour, distance-transform histogram, gradient orientation histogram and
the seven Hu moment invariants, plus the bundle that groups them."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernels
from .errors import DescriptorError, GeometryError
from .params import Params


@dataclass
class ShapeContextSet:
    """One unit-sum log-polar histogram per sampled contour point.

    hist has shape (points, radial_bins * angular_bins); radii are binned
    after division by the mean pairwise distance, so the descriptor is
    translation and scale invariant.
    """

    hist: np.ndarray
    radial_edges: np.ndarray
    angular_bins: int

    def __len__(self):
        return len(self.hist)


@dataclass
class DTHistogram:
    """Unit-sum histogram of in-mask distance-transform values over
    [0, width/2]; overflow clamps into the last bin."""

    bins: np.ndarray
    pixel_count: int


@dataclass
class OrientationHistogram:
    """Magnitude-weighted, unit-sum histogram of gradient orientations
    folded to [0, 180)."""

    bins: np.ndarray


@dataclass
class HuVector:
    """The seven classical moment invariants of the binary mask."""

    values: np.ndarray


@dataclass
class DescriptorBundle:
    """All features of one normalized mask. Members may be None when built
    with partial=True; failures are then recorded in feature_errors."""

    mask: object
    contour: object = None
    sampled: object = None
    sc: ShapeContextSet = None
    dt_hist: DTHistogram = None
    ohist: OrientationHistogram = None
    hu: HuVector = None
    feature_errors: dict = field(default_factory=dict)


_EDGES_CACHE = {}


def _radial_edges(params):
    key = (params.sc_r_inner, params.sc_r_outer, params.sc_radial_bins)
    if key not in _EDGES_CACHE:
        _EDGES_CACHE[key] = np.geomspace(params.sc_r_inner, params.sc_r_outer,
                                         params.sc_radial_bins + 1)
    return _EDGES_CACHE[key]


def shape_contexts(sampled, params=None):
    """Log-polar histograms of the relative positions of the other points,
    one per sampled contour point."""
    params = params or Params()
    pts = np.asarray(sampled.points, dtype=np.float64)
    n = len(pts)
    if n < 4:
        raise DescriptorError("shape_contexts", f"need >= 4 points, got {n}")
    edges = _radial_edges(params)
    hist, mean_dist = kernels.sc_histograms(pts, edges, params.sc_angular_bins)
    if mean_dist == 0.0:
        raise DescriptorError("shape_contexts", "all points coincide")
    return ShapeContextSet(hist=hist, radial_edges=edges,
                           angular_bins=params.sc_angular_bins)


def dt_histogram(dfield, params=None):
    """Histogram of in-mask distance values over [0, width/2]."""
    params = params or Params()
    top = dfield.width / 2.0
    bins, count = kernels.clamped_hist_counts(
        dfield.values, dfield.in_domain, top / params.dt_bins, params.dt_bins)
    if count == 0:
        raise DescriptorError("dt_histogram", "no in-mask pixels")
    return DTHistogram(bins=bins / count, pixel_count=count)


def orientation_histogram(nmask, params=None):
    """Magnitude-weighted histogram of Sobel gradient orientations folded
    to [0, 180), computed on the 0/1 raster with edge-replicate padding so
    a uniform image has no gradient."""
    params = params or Params()
    bins = kernels.sobel_orient_hist(nmask.packed, params.orient_bins)
    total = bins.sum()
    if total == 0.0:
        raise DescriptorError("orientation_histogram", "uniform image has no gradient")
    return OrientationHistogram(bins=bins / total)


def _hu_from_sums(n, sums):
    m20, m11, m02, m30, m21, m12, m03 = sums
    m00 = float(n)
    e20 = m20 / m00 ** 2
    e11 = m11 / m00 ** 2
    e02 = m02 / m00 ** 2
    e30 = m30 / m00 ** 2.5
    e21 = m21 / m00 ** 2.5
    e12 = m12 / m00 ** 2.5
    e03 = m03 / m00 ** 2.5

    a = e30 + e12
    b = e21 + e03
    c = e30 - 3.0 * e12
    d = 3.0 * e21 - e03

    return np.array([
        e20 + e02,
        (e20 - e02) ** 2 + 4.0 * e11 ** 2,
        c ** 2 + d ** 2,
        a ** 2 + b ** 2,
        c * a * (a ** 2 - 3.0 * b ** 2) + d * b * (3.0 * a ** 2 - b ** 2),
        (e20 - e02) * (a ** 2 - b ** 2) + 4.0 * e11 * a * b,
        d * a * (a ** 2 - 3.0 * b ** 2) - c * b * (3.0 * a ** 2 - b ** 2),
    ])


def hu_moments(nmask):
    """Seven Hu invariants from normalized central moments of the mask.

    The centroid comes from exact integer coordinate sums, keeping the
    invariants stable under integer translations.
    """
    sums = kernels.mask_moment_sums(nmask.packed)
    if sums[0] == 0:
        raise DescriptorError("hu_moments", "empty mask")
    return HuVector(values=_hu_from_sums(sums[0], sums[1:]))


# features each matching method needs; "mask" is always present
FEATURE_DEPS = {
    "contour": (),
    "sampled": ("contour",),
    "sc": ("sampled",),
    "dt_hist": ("contour",),
    "ohist": (),
    "hu": (),
}
ALL_FEATURES = ("contour", "sampled", "sc", "dt_hist", "ohist", "hu")


# error label used when a feature computation fails loudly
_FEATURE_OP_NAMES = {
    "contour": "contour",
    "sampled": "sampled",
    "sc": "shape_contexts",
    "dt_hist": "dt_histogram",
    "ohist": "orientation_histogram",
    "hu": "hu_moments",
}


def _want_flags(wanted):
    return ("contour" in wanted, "sampled" in wanted, "sc" in wanted,
            "dt_hist" in wanted, "ohist" in wanted, "hu" in wanted)


def _assemble_bundle(nmask, params, wanted, partial, res, edges):
    """Turn one kernel feature-result dict into a DescriptorBundle."""
    bundle = DescriptorBundle(mask=nmask)

    def fail(name, message):
        if not partial:
            raise DescriptorError(_FEATURE_OP_NAMES[name], message)
        bundle.feature_errors[name] = message

    contour_ok = False
    if "contour_rc" in res:
        rc = res["contour_rc"]
        if rc is None:
            fail("contour", "empty mask")
        elif len(rc) < 3:
            fail("contour", f"contour too small ({len(rc)} points)")
        else:
            pts = np.empty((len(rc), 2), dtype=np.float64)
            pts[:, 0] = rc[:, 1]
            pts[:, 1] = rc[:, 0]
            bundle.contour = geometry.Contour(points=pts)
            contour_ok = True
    if "sampled" in wanted and contour_ok:
        if res["sampled"] is None:
            fail("sampled", "degenerate contour (zero perimeter)")
        else:
            bundle.sampled = geometry.SampledContour(
                points=res["sampled"], source_length=len(res["contour_rc"]))
    if "sc" in wanted and bundle.sampled is not None:
        if res["sc_mean"] == 0.0:
            fail("sc", "all points coincide")
        else:
            bundle.sc = ShapeContextSet(hist=res["sc_hist"], radial_edges=edges,
                                        angular_bins=params.sc_angular_bins)
    if "dt_hist" in wanted and contour_ok:
        if res["dt_n"] == 0:
            fail("dt_hist", "no in-mask pixels")
        else:
            bundle.dt_hist = DTHistogram(bins=res["dt_counts"] / res["dt_n"],
                                         pixel_count=res["dt_n"])
    if "ohist" in wanted:
        total = res["orient"].sum()
        if total == 0.0:
            fail("ohist", "uniform image has no gradient")
        else:
            bundle.ohist = OrientationHistogram(bins=res["orient"] / total)
    if "hu" in wanted:
        if res["hu_n"] == 0:
            fail("hu", "empty mask")
        else:
            bundle.hu = HuVector(values=_hu_from_sums(res["hu_n"],
                                                      res["hu_sums"]))
    return bundle


def _build_bundle_fused(nmask, params, wanted, partial):
    """Single-kernel-call bundle build (one GIL release per image)."""
    edges = _radial_edges(params)
    res = kernels.compute_features(
        nmask.packed, params.sample_points, edges, params.sc_angular_bins,
        params.dt_bins, params.orient_bins, *_want_flags(wanted))
    return _assemble_bundle(nmask, params, wanted, partial, res, edges)


def build_bundle(nmask, params=None, features=None, partial=False, pool=None):
    """Compute the requested features (default: all) of a normalized mask.

    The independent features may be computed concurrently when a pool is
    given; assembly is deterministic, so the result is identical for any
    thread count. With partial=True failures are recorded per feature
    instead of raised.
    """
    params = params or Params()
    wanted = _resolve_features(features)

    if pool is None:
        return _build_bundle_fused(nmask, params, wanted, partial)

    bundle = DescriptorBundle(mask=nmask)

    def run(name, fn):
        try:
            setattr(bundle, name, fn())
        except (DescriptorError, GeometryError) as exc:
            if not partial:
                if isinstance(exc, DescriptorError):
                    raise
                raise DescriptorError(name, str(exc)) from exc
            bundle.feature_errors[name] = str(exc)

    # contour chain first: sampled/sc/dt_hist depend on it
    if "contour" in wanted:
        run("contour", lambda: geometry.extract_contour(nmask))
    if "sampled" in wanted and bundle.contour is not None:
        run("sampled", lambda: geometry.resample_contour(
            bundle.contour, params.sample_points))

    tasks = []
    if "sc" in wanted and bundle.sampled is not None:
        tasks.append(("sc", lambda: shape_contexts(bundle.sampled, params)))
    if "dt_hist" in wanted and bundle.contour is not None:
        tasks.append(("dt_hist", lambda: dt_histogram(
            geometry.distance_transform(nmask, bundle.contour), params)))
    if "ohist" in wanted:
        tasks.append(("ohist", lambda: orientation_histogram(nmask, params)))
    if "hu" in wanted:
        tasks.append(("hu", lambda: hu_moments(nmask)))

    if pool is not None and len(tasks) > 1:
        futures = [(name, pool.submit(fn)) for name, fn in tasks]
        for name, fut in futures:
            run(name, fut.result)
    else:
        for name, fn in tasks:
            run(name, fn)
    return bundle


def _resolve_features(features):
    wanted = set(ALL_FEATURES if features is None else features)
    frontier = list(wanted)
    while frontier:  # transitive dependency closure
        for dep in FEATURE_DEPS[frontier.pop()]:
            if dep not in wanted:
                wanted.add(dep)
                frontier.append(dep)
    return wanted


# chunk size for batched feature extraction: large enough to amortize the
# per-batch GIL handoff, small enough to bound the contour staging buffer
_BUILD_CHUNK = 24


def _build_chunk(nmasks, params, wanted, partial):
    """One kernel call for a whole chunk of equal-width masks."""
    edges = _radial_edges(params)
    widths = {m.grid.shape[1] for m in nmasks}
    if len(nmasks) > 1 and len(widths) == 1:
        heights = np.array([m.grid.shape[0] for m in nmasks], dtype=np.int64)
        flat = np.concatenate([m.packed for m in nmasks], axis=0)
        results = kernels.compute_features_batch(
            flat, heights, params.sample_points, edges,
            params.sc_angular_bins, params.dt_bins, params.orient_bins,
            *_want_flags(wanted))
        return [_assemble_bundle(m, params, wanted, partial, res, edges)
                for m, res in zip(nmasks, results)]
    return [_build_bundle_fused(m, params, wanted, partial) for m in nmasks]


def build_bundles(nmasks, params=None, threads=1, features=None, partial=False):
    """build_bundle over a batch, optionally fanned out across threads;
    results keep input order regardless of thread count.

    Equal-width masks are processed in chunked batch kernel calls so worker
    threads spend long stretches outside the GIL.
    """
    params = params or Params()
    wanted = _resolve_features(features)
    chunks = [nmasks[i:i + _BUILD_CHUNK]
              for i in range(0, len(nmasks), _BUILD_CHUNK)]
    if threads <= 1 or len(chunks) <= 1:
        out = []
        for chunk in chunks:
            out.extend(_build_chunk(chunk, params, wanted, partial))
        return out
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(
            lambda chunk: _build_chunk(chunk, params, wanted, partial), chunks)
        return [b for part in parts for b in part]
