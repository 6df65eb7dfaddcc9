"""Timing harness: per-method feature-extraction and classification wall
times, speedup S = tau(1)/tau(T) and efficiency E = S/T, plus a kernel
microbenchmark comparing the compiled and pure-Python backends."""

import csv
import json
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .classify import (Gallery, LabeledBundle, Method, METHOD_FEATURES,
                       ProbeError, classify_batch, draw_galleries)
from .dataset import bundle_dataset
from .descriptors import build_bundles
from .errors import DatasetError


@dataclass
class BenchRecord:
    """One timing row: medians of repeated runs at a fixed thread count."""

    method: Method
    g: int
    threads: int
    tau_f: float          # probe feature extraction seconds
    tau_c: float          # classification seconds
    speedup: float
    efficiency: float
    results: list = field(default=None, repr=False, compare=False)

    @property
    def tau(self):
        return self.tau_f + self.tau_c


def superlinear_flag(record):
    """True iff the measured speedup exceeds the thread count (E > 1)."""
    return record.speedup > record.threads


def _split_gallery(labeled_masks, g, seed):
    by_class = {}
    for idx, lm in enumerate(labeled_masks):
        by_class.setdefault(lm.label, []).append(idx)
    for label in sorted(by_class):
        if len(by_class[label]) <= g:
            raise DatasetError(f"class {label!r} needs more than g={g} images")
    counts = {lab: len(v) for lab, v in by_class.items()}
    draw = draw_galleries(counts, g, repeats=1, seed=seed)[0]
    gallery_ids = set()
    gallery_masks = []
    for label in sorted(by_class):
        for k in draw[label]:
            idx = by_class[label][int(k)]
            gallery_masks.append(labeled_masks[idx])
            gallery_ids.add(idx)
    probes = [lm for idx, lm in enumerate(labeled_masks) if idx not in gallery_ids]
    return gallery_masks, probes


def time_analysis(labeled_masks, method, g, threads, repetitions=3, *,
                  baseline=None, seed=0, params=None, weights=None,
                  log=None):
    """Median feature-extraction and classification time of the full probe
    pipeline at the given thread count, after one discarded warm-up run.

    The gallery (drawn with `seed`, bundles prepared outside the timed
    region) is fixed across repetitions. For threads > 1 a T=1 BenchRecord
    from the same session must be supplied as the speedup baseline.
    """
    if repetitions < 3:
        raise DatasetError("repetitions must be >= 3")
    if not labeled_masks:
        raise DatasetError("dataset is empty")
    if threads > 1 and baseline is None:
        raise DatasetError("threads > 1 requires the T=1 baseline record")

    features = set(METHOD_FEATURES[method])
    gallery_masks, probe_masks = _split_gallery(labeled_masks, g, seed)
    gallery = Gallery.build(
        [(it.label, it.bundle) for it in
         bundle_dataset(gallery_masks, params, threads=1, features=features)])
    gallery.pack(method)
    probe_nmasks = [lm.nmask for lm in probe_masks]

    # warm-up plus timed repetitions
    taus_f, taus_c = [], []
    results = None
    for rep in range(repetitions + 1):
        t0 = time.perf_counter()
        bundles = build_bundles(probe_nmasks, params, threads=threads,
                                features=features)
        t1 = time.perf_counter()
        items = [LabeledBundle(lm.image_id, lm.label, b)
                 for lm, b in zip(probe_masks, bundles)]
        out = classify_batch(items, gallery, method, threads=threads,
                             weights=weights)
        t2 = time.perf_counter()
        if rep == 0:
            continue
        taus_f.append(t1 - t0)
        taus_c.append(t2 - t1)
        results = out
        if log is not None:
            log.write(json.dumps({"method": method.value, "T": threads,
                                  "rep": rep, "tau_f": t1 - t0,
                                  "tau_c": t2 - t1}) + "\n")

    failures = [r for r in results if isinstance(r, ProbeError)]
    if failures:
        raise DatasetError(f"bench probes failed, first: "
                           f"{failures[0].probe_id}: {failures[0].error}")
    tau_f = statistics.median(taus_f)
    tau_c = statistics.median(taus_c)
    if threads == 1:
        speedup = 1.0
    else:
        speedup = baseline.tau / (tau_f + tau_c)
    return BenchRecord(method=method, g=g, threads=threads,
                       tau_f=tau_f, tau_c=tau_c,
                       speedup=speedup, efficiency=speedup / threads,
                       results=results)


def run_bench(labeled_masks, methods, g, threads_list, repetitions=3, *,
              seed=0, params=None, weights=None, jsonl_path=None):
    """time_analysis for each (method, T); T=1 is measured first as the
    baseline. threads_list must contain 1."""
    threads_list = list(dict.fromkeys(threads_list))
    if 1 not in threads_list:
        raise DatasetError("threads list must contain 1 (the speedup baseline)")
    records = []
    log = open(jsonl_path, "w", encoding="utf-8") if jsonl_path else None
    try:
        for method in methods:
            base = time_analysis(labeled_masks, method, g, 1, repetitions,
                                 seed=seed, params=params, weights=weights,
                                 log=log)
            records.append(base)
            for t in threads_list:
                if t == 1:
                    continue
                records.append(time_analysis(
                    labeled_masks, method, g, t, repetitions, baseline=base,
                    seed=seed, params=params, weights=weights, log=log))
    finally:
        if log is not None:
            log.close()
    return records


def emit_bench_table(records, path):
    """CSV rows `method,g,T,tau_f_s,tau_c_s,tau_s,speedup,efficiency`
    sorted by (g, method, T); re-emitting equal records is byte-identical."""
    if not records:
        raise DatasetError("no bench records")
    rows = sorted(records, key=lambda r: (r.g, r.method.value, r.threads))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "g", "T", "tau_f_s", "tau_c_s", "tau_s",
                         "speedup", "efficiency"])
        for r in rows:
            writer.writerow([r.method.value, r.g, r.threads,
                             f"{r.tau_f:.6f}", f"{r.tau_c:.6f}",
                             f"{r.tau:.6f}", f"{r.speedup:.4f}",
                             f"{r.efficiency:.4f}"])


# ---------------------------------------------------------------------------
# backend microbenchmark

def _kernel_inputs(rng):
    hists = rng.random((20, 60))
    hists /= hists.sum(axis=1, keepdims=True)
    hists2 = rng.random((20, 60))
    hists2 /= hists2.sum(axis=1, keepdims=True)
    cost = rng.random((20, 20))
    pts_a = rng.random((400, 2)) * 100.0
    pts_b = rng.random((400, 2)) * 100.0
    mask_a = (rng.random((130, 100)) < 0.5).astype(np.uint8)
    mask_b = (rng.random((120, 100)) < 0.5).astype(np.uint8)
    seed_grid = np.full((100, 130), 4.0 * (100 ** 2 + 130 ** 2) + 16.0)
    pix = rng.integers(0, 100 * 130, size=300)
    seed_grid.ravel()[pix] = 0.0
    blob = np.zeros((130, 100), dtype=np.uint8)
    ys, xs = np.mgrid[0:130, 0:100]
    blob[((xs - 50) / 38.0) ** 2 + ((ys - 65) / 52.0) ** 2 <= 1.0] = 1
    edges = np.geomspace(0.125, 2.0, 6)
    feature_args = (20, edges, 12, 32, 36, True, True, True, True, True, True)
    return {
        "chi2_pair_matrix": lambda k: k.chi2_pair_matrix(hists, hists2),
        "assignment": lambda k: k.assignment(cost),
        "sc_cost_batch": lambda k: k.sc_cost_batch(hists, hists2[None, :, :]),
        "hausdorff": lambda k: k.hausdorff(pts_a, pts_b),
        "template_cost": lambda k: k.template_cost(mask_a, mask_b),
        "edt_sq": lambda k: k.edt_sq(seed_grid),
        "trace_boundary": lambda k: k.trace_boundary(blob, 13, 50),
        "compute_features": lambda k: k.compute_features(blob, *feature_args),
    }


def kernel_bench(repeats=20, seed=123):
    """Per-kernel wall time for every available backend.

    Returns rows of dicts: kernel, backend, seconds per call, and the
    speedup of each backend relative to the pure-Python one.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    cases = _kernel_inputs(rng)
    backends = kernels.backends()
    rows = []
    for name, fn in cases.items():
        base = None
        for backend_name in ("python", "compiled"):
            if backend_name not in backends:
                continue
            impl = backends[backend_name]
            fn(impl)  # warm-up
            t0 = time.perf_counter()
            for _ in range(repeats):
                fn(impl)
            per_call = (time.perf_counter() - t0) / repeats
            if backend_name == "python":
                base = per_call
            rows.append({"kernel": name, "backend": backend_name,
                         "seconds_per_call": per_call,
                         "speedup_vs_python": (base / per_call) if base else 1.0})
    return rows


def write_kernel_bench_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kernel", "backend", "seconds_per_call",
                         "speedup_vs_python"])
        for row in rows:
            writer.writerow([row["kernel"], row["backend"],
                             f"{row['seconds_per_call']:.9f}",
                             f"{row['speedup_vs_python']:.2f}"])
