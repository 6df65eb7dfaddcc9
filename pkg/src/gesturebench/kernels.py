"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback keeps the
package fully functional without a C toolchain. Set GESTUREBENCH_BACKEND
to "compiled" or "python" to force one (forcing "compiled" raises if the
extension is missing).
"""

import os

from . import _pykernels

_requested = os.environ.get("GESTUREBENCH_BACKEND", "").strip().lower()

if _requested not in ("", "compiled", "python"):
    raise ImportError(
        f"GESTUREBENCH_BACKEND={_requested!r} not recognized (use 'compiled' or 'python')"
    )

if _requested == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _pykernels

BACKEND = _impl.BACKEND_NAME

chi2 = _impl.chi2
chi2_pair_matrix = _impl.chi2_pair_matrix
chi2_rows = _impl.chi2_rows
assignment = _impl.assignment
sc_cost_batch = _impl.sc_cost_batch
hausdorff = _impl.hausdorff
hausdorff_batch = _impl.hausdorff_batch
template_cost = _impl.template_cost
template_cost_batch = _impl.template_cost_batch
edt_sq = _impl.edt_sq
edt_from_contour = _impl.edt_from_contour
largest_component = _impl.largest_component
trace_boundary = _impl.trace_boundary
sc_histograms = _impl.sc_histograms
sobel_orient_hist = _impl.sobel_orient_hist
mask_moment_sums = _impl.mask_moment_sums
clamped_hist_counts = _impl.clamped_hist_counts
resample_closed = _impl.resample_closed
compute_features = _impl.compute_features
compute_features_batch = _impl.compute_features_batch


def backends():
    """Available backend modules keyed by name (for parity tests and the
    kernel microbenchmark)."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["compiled"] = _ckernels
    except ImportError:
        pass
    return found
