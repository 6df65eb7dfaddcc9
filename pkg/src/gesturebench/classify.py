"""Gallery/probe classification engine: per-method scoring, ranked
candidate lists, batch classification across threads and the repeated
gallery-draw evaluation that produces cumulative response curves."""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels, matching
from .errors import DatasetError, GestureBenchError, MissingFeatureError
from .matching import CombineWeights


class Method(str, Enum):
    SC = "sc"
    SCDT = "scdt"
    SCH = "sch"
    HOG = "hog"
    DT = "dt"
    TM = "tm"
    HD = "hd"
    HM = "hm"


# bundle features each method reads ("mask" always exists)
METHOD_FEATURES = {
    Method.SC: ("sc",),
    Method.SCDT: ("sc", "dt_hist"),
    Method.SCH: ("sc", "ohist"),
    Method.HOG: ("ohist",),
    Method.DT: ("dt_hist",),
    Method.TM: (),
    Method.HD: ("contour",),
    Method.HM: ("hu",),
}


def parse_method(name):
    try:
        return Method(name.lower())
    except ValueError:
        valid = ", ".join(m.value for m in Method)
        raise DatasetError(f"unknown method {name!r} (valid: {valid})") from None


def bundle_features_for(methods):
    """Union of bundle features needed by the given methods."""
    needed = set()
    for m in methods:
        needed.update(METHOD_FEATURES[m])
    return needed


def _require(bundle, feature, method):
    value = getattr(bundle, feature)
    if value is None:
        raise MissingFeatureError(feature, method.value)
    return value


def score(probe, entry, method, weights=None):
    """Cost of matching two descriptor bundles with one method; lower is
    more similar and identical bundles score 0."""
    weights = weights or CombineWeights()
    if method == Method.SC:
        return matching.sc_cost(_require(probe, "sc", method),
                                _require(entry, "sc", method))
    if method == Method.SCDT:
        c = matching.sc_cost(_require(probe, "sc", method),
                             _require(entry, "sc", method))
        d = matching.chi_square(_require(probe, "dt_hist", method).bins,
                                _require(entry, "dt_hist", method).bins) / 2.0
        return matching.combined_cost(c, d, weights)
    if method == Method.SCH:
        c = matching.sc_cost(_require(probe, "sc", method),
                             _require(entry, "sc", method))
        d = matching.chi_square(_require(probe, "ohist", method).bins,
                                _require(entry, "ohist", method).bins) / 2.0
        return matching.combined_cost(c, d, weights)
    if method == Method.HOG:
        return matching.chi_square(_require(probe, "ohist", method).bins,
                                   _require(entry, "ohist", method).bins) / 2.0
    if method == Method.DT:
        return matching.chi_square(_require(probe, "dt_hist", method).bins,
                                   _require(entry, "dt_hist", method).bins) / 2.0
    if method == Method.TM:
        return matching.template_ssd(probe.mask, entry.mask)
    if method == Method.HD:
        return matching.hausdorff(_require(probe, "contour", method),
                                  _require(entry, "contour", method))
    if method == Method.HM:
        return matching.hu_distance(_require(probe, "hu", method),
                                    _require(entry, "hu", method))
    raise DatasetError(f"unknown method {method}")


@dataclass
class Gallery:
    """Immutable labeled reference set with exactly g entries per class.

    Feature arrays are packed per method (pack()) so batch scoring crosses
    into the kernels once per probe; pack before sharing across threads.
    """

    entries: list                     # [(label, bundle)]
    g: int
    labels: list                      # sorted distinct class labels
    class_slices: dict                # label -> entry index array
    _packs: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, entries):
        if not entries:
            raise DatasetError("gallery is empty")
        by_label = {}
        for idx, (label, _) in enumerate(entries):
            by_label.setdefault(label, []).append(idx)
        counts = {len(v) for v in by_label.values()}
        if len(counts) != 1:
            raise DatasetError(f"per-class entry counts differ: "
                               f"{ {k: len(v) for k, v in by_label.items()} }")
        return cls(entries=list(entries), g=counts.pop(),
                   labels=sorted(by_label),
                   class_slices={k: np.array(v) for k, v in by_label.items()})

    def rank_arrays(self):
        """Entry permutation grouping classes plus group starts, for the
        vectorized per-class min; labels come out in ascending order."""
        if "_rank" not in self._packs:
            labels = [label for label, _ in self.entries]
            order = np.argsort(labels, kind="stable")
            starts = np.arange(0, len(labels), self.g)
            self._packs["_rank"] = (order, starts)
        return self._packs["_rank"]

    def pack(self, method):
        key = method.value
        if key in self._packs:
            return self._packs[key]
        bundles = [b for _, b in self.entries]
        features = METHOD_FEATURES[method]
        for b in bundles:
            for f in features:
                _require(b, f, method)
        pack = {}
        if "sc" in features:
            pack["sc"] = np.ascontiguousarray(
                np.stack([b.sc.hist for b in bundles]))
        if "dt_hist" in features:
            pack["dt"] = np.ascontiguousarray(
                np.stack([b.dt_hist.bins for b in bundles]))
        if "ohist" in features:
            pack["ohist"] = np.ascontiguousarray(
                np.stack([b.ohist.bins for b in bundles]))
        if "hu" in features:
            pack["hu_log"] = np.stack(
                [matching.hu_log(b.hu) for b in bundles])
        if method == Method.HD:
            pts = [b.contour.points for b in bundles]
            pack["hd_flat"] = np.ascontiguousarray(np.concatenate(pts))
            pack["hd_offsets"] = np.concatenate(
                [[0], np.cumsum([len(p) for p in pts])]).astype(np.int64)
        if method == Method.TM:
            grids = [b.mask.packed for b in bundles]
            widths = {g.shape[1] for g in grids}
            if len(widths) != 1:
                raise DatasetError(f"gallery mask widths differ: {sorted(widths)}")
            pack["tm_flat"] = np.ascontiguousarray(np.concatenate(grids, axis=0))
            pack["tm_heights"] = np.array([g.shape[0] for g in grids],
                                          dtype=np.int64)
        self._packs[key] = pack
        return pack


def score_batch(probe, gallery, method, weights=None):
    """Costs of one probe bundle against every gallery entry, in entry
    order; equals per-pair score() up to float summation order."""
    weights = weights or CombineWeights()
    pack = gallery.pack(method)
    if method in (Method.SC, Method.SCDT, Method.SCH):
        sc = kernels.sc_cost_batch(_require(probe, "sc", method).hist, pack["sc"])
        if method == Method.SC:
            return sc
        if method == Method.SCDT:
            d = kernels.chi2_rows(_require(probe, "dt_hist", method).bins,
                                  pack["dt"]) / 2.0
        else:
            d = kernels.chi2_rows(_require(probe, "ohist", method).bins,
                                  pack["ohist"]) / 2.0
        return weights.alpha * sc + weights.beta * d
    if method == Method.HOG:
        return kernels.chi2_rows(_require(probe, "ohist", method).bins,
                                 pack["ohist"]) / 2.0
    if method == Method.DT:
        return kernels.chi2_rows(_require(probe, "dt_hist", method).bins,
                                 pack["dt"]) / 2.0
    if method == Method.HM:
        probe_log = matching.hu_log(_require(probe, "hu", method))
        return np.abs(pack["hu_log"] - probe_log[None, :]).sum(axis=1)
    if method == Method.HD:
        pts = np.ascontiguousarray(_require(probe, "contour", method).points)
        return kernels.hausdorff_batch(pts, pack["hd_flat"], pack["hd_offsets"])
    if method == Method.TM:
        return kernels.template_cost_batch(probe.mask.packed,
                                           pack["tm_flat"], pack["tm_heights"])
    raise DatasetError(f"unknown method {method}")


@dataclass
class ProbeResult:
    """Ranked candidate classes for one probe; rank is the 1-based position
    of the true label, ties in cost broken by ascending class label."""

    probe_id: str
    true_label: str
    candidates: list    # class labels, most similar first
    costs: list         # per-class best cost, aligned with candidates
    rank: int


@dataclass
class ProbeError:
    """Tagged failure of one probe inside a batch."""

    probe_id: str
    error: str


def classify_one(probe, gallery, method, true_label, probe_id="", weights=None):
    """Rank gallery classes for one probe bundle; per-class cost is the
    minimum over that class's g entries, ties broken by ascending label."""
    if true_label not in gallery.class_slices:
        raise DatasetError(f"probe {probe_id or '?'}: label {true_label!r} "
                           f"not among gallery classes")
    costs = score_batch(probe, gallery, method, weights)
    order, starts = gallery.rank_arrays()
    per_class = np.minimum.reduceat(costs[order], starts)
    by_cost = np.argsort(per_class, kind="stable")  # stable = label ascending
    candidates = [gallery.labels[k] for k in by_cost]
    rank = candidates.index(true_label) + 1
    return ProbeResult(probe_id=probe_id, true_label=true_label,
                       candidates=candidates,
                       costs=per_class[by_cost].tolist(), rank=rank)


@dataclass
class LabeledBundle:
    image_id: str
    label: str
    bundle: object


def classify_batch(items, gallery, method, threads=1, weights=None):
    """Classify LabeledBundle items against a gallery; failures become
    ProbeError entries. Output order and values are independent of the
    thread count."""
    gallery.pack(method)  # shared read-only state built before fan-out
    gallery.rank_arrays()

    def one(item):
        try:
            return classify_one(item.bundle, gallery, method,
                                true_label=item.label,
                                probe_id=item.image_id, weights=weights)
        except GestureBenchError as exc:
            return ProbeError(probe_id=item.image_id, error=str(exc))

    if threads <= 1 or len(items) <= 1:
        return [one(it) for it in items]
    # chunked dispatch keeps pool overhead off the per-probe path
    step = max(1, (len(items) + threads * 4 - 1) // (threads * 4))
    chunks = [items[i:i + step] for i in range(0, len(items), step)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda chunk: [one(it) for it in chunk], chunks)
        return [res for part in parts for res in part]


# ---------------------------------------------------------------------------
# repeated-draw evaluation and CRC reports

@dataclass
class CrcReport:
    """Cumulative response curve: CR(r) = percentage of probes whose rank
    is <= r, averaged over gallery draws."""

    method: Method
    g: int
    repeats: int
    cr_mean: np.ndarray      # per rank 1..C, in percent
    cr_sigma: np.ndarray     # population std dev across repeats
    per_repeat: np.ndarray   # (repeats, C) raw curves

    @property
    def ranks(self):
        return np.arange(1, len(self.cr_mean) + 1)


def draw_galleries(class_counts, g, repeats, seed):
    """Per-repeat gallery index draws for each class, from a seeded
    counter-based generator.

    For g=1 with repeats <= the smallest class count the draws are disjoint
    across repeats (one shuffled pass per class); otherwise each repeat
    draws g indices per class independently without replacement.
    """
    labels = sorted(class_counts)
    rng = np.random.Generator(np.random.Philox(seed))
    draws = []
    if g == 1 and repeats <= min(class_counts.values()):
        perms = {lab: rng.permutation(class_counts[lab]) for lab in labels}
        for r in range(repeats):
            draws.append({lab: np.array([perms[lab][r]]) for lab in labels})
    else:
        for _ in range(repeats):
            draws.append({lab: np.sort(rng.choice(class_counts[lab], size=g,
                                                  replace=False))
                          for lab in labels})
    return draws


def curve_from_ranks(ranks, n_classes):
    """CR(r) for r = 1..n_classes as percentages of probes with rank <= r."""
    ranks = np.asarray(ranks)
    return np.array([100.0 * np.count_nonzero(ranks <= r) / len(ranks)
                     for r in range(1, n_classes + 1)])


def evaluate(dataset, method, g, repeats, seed, threads=1, weights=None):
    """Repeatedly split the dataset into a g-per-class gallery and probe
    set, classify all probes and accumulate the cumulative response curve.

    Deterministic given (dataset order, method, g, repeats, seed); the
    thread count never changes the result.
    """
    if repeats < 1:
        raise DatasetError("repeats must be >= 1")
    by_class = {}
    for idx, item in enumerate(dataset):
        by_class.setdefault(item.label, []).append(idx)
    for label in sorted(by_class):
        if len(by_class[label]) <= g:
            raise DatasetError(
                f"class {label!r} has {len(by_class[label])} images, "
                f"needs more than g={g}")

    class_counts = {lab: len(v) for lab, v in by_class.items()}
    draws = draw_galleries(class_counts, g, repeats, seed)
    n_classes = len(by_class)
    curves = np.empty((repeats, n_classes))
    for r, draw in enumerate(draws):
        gallery_ids = set()
        entries = []
        for label in sorted(by_class):
            for k in draw[label]:
                idx = by_class[label][int(k)]
                entries.append((label, dataset[idx].bundle))
                gallery_ids.add(idx)
        gallery = Gallery.build(entries)
        probes = [it for idx, it in enumerate(dataset) if idx not in gallery_ids]
        results = classify_batch(probes, gallery, method, threads, weights)
        failures = [res for res in results if isinstance(res, ProbeError)]
        if failures:
            raise DatasetError(
                f"{len(failures)} probes failed, first: "
                f"{failures[0].probe_id}: {failures[0].error}")
        curves[r] = curve_from_ranks([res.rank for res in results], n_classes)
    return CrcReport(method=method, g=g, repeats=repeats,
                     cr_mean=curves.mean(axis=0),
                     cr_sigma=curves.std(axis=0, ddof=0),
                     per_repeat=curves)


# ---------------------------------------------------------------------------
# CSV emitters

def write_results_csv(results, path):
    """`probe_id,true_label,rank,top1,top1_cost` for successful probes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe_id", "true_label", "rank", "top1", "top1_cost"])
        for res in results:
            if isinstance(res, ProbeError):
                continue
            writer.writerow([res.probe_id, res.true_label, res.rank,
                             res.candidates[0], f"{res.costs[0]:.12g}"])


def write_crc_csv(reports, path):
    """`method,g,rank,cr_mean,cr_sigma` rows for each report."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "g", "rank", "cr_mean", "cr_sigma"])
        for rep in reports:
            for r, mean, sigma in zip(rep.ranks, rep.cr_mean, rep.cr_sigma):
                writer.writerow([rep.method.value, rep.g, int(r),
                                 f"{mean:.4f}", f"{sigma:.4f}"])
