import numpy as np
import pytest

from gesturebench import classify, descriptors, matching, masks
from gesturebench.classify import (Gallery, LabeledBundle, Method, ProbeError,
                                   classify_batch, classify_one,
                                   curve_from_ranks, evaluate, score)
from gesturebench.errors import DatasetError, MissingFeatureError


@pytest.fixture(scope="module")
def gallery_and_probes(small_bundles):
    gal_items = [it for it in small_bundles if it.image_id.endswith("i000")]
    gallery = Gallery.build([(it.label, it.bundle) for it in gal_items])
    probes = [it for it in small_bundles if not it.image_id.endswith("i000")]
    return gallery, probes


class TestScore:
    @pytest.mark.parametrize("method", list(Method))
    def test_identity_costs_zero(self, small_bundles, method):
        b = small_bundles[0].bundle
        assert score(b, b, method) == 0.0

    def test_scdt_composition(self, small_bundles):
        a = small_bundles[0].bundle
        b = small_bundles[12].bundle
        sc = matching.sc_cost(a.sc, b.sc)
        d = matching.chi_square(a.dt_hist.bins, b.dt_hist.bins) / 2.0
        expect = 0.17 * sc + 1.0 * d
        assert score(a, b, Method.SCDT) == pytest.approx(expect, abs=1e-12)

    def test_sch_composition(self, small_bundles):
        a = small_bundles[0].bundle
        b = small_bundles[12].bundle
        sc = matching.sc_cost(a.sc, b.sc)
        d = matching.chi_square(a.ohist.bins, b.ohist.bins) / 2.0
        assert score(a, b, Method.SCH) == pytest.approx(0.17 * sc + d, abs=1e-12)

    def test_missing_feature(self, small_masks):
        bare = descriptors.build_bundle(small_masks[0].nmask, features=set())
        full = descriptors.build_bundle(small_masks[0].nmask)
        with pytest.raises(MissingFeatureError):
            score(bare, full, Method.SC)

    def test_batch_matches_single(self, gallery_and_probes):
        gallery, probes = gallery_and_probes
        for method in Method:
            batch = classify.score_batch(probes[0].bundle, gallery, method)
            single = [score(probes[0].bundle, b, method)
                      for _, b in gallery.entries]
            assert np.allclose(batch, single, rtol=1e-12, atol=1e-14)


class TestClassifyOne:
    def test_probe_duplicating_gallery_image_is_rank_one(self, gallery_and_probes):
        gallery, _ = gallery_and_probes
        label, bundle = gallery.entries[2]
        for method in Method:
            res = classify_one(bundle, gallery, method, true_label=label)
            assert res.rank == 1
            assert res.candidates[0] == label

    def test_candidates_sorted_by_cost(self, gallery_and_probes):
        gallery, probes = gallery_and_probes
        res = classify_one(probes[0].bundle, gallery, Method.SCDT,
                           true_label=probes[0].label)
        assert res.costs == sorted(res.costs)
        assert sorted(res.candidates) == gallery.labels

    def test_rank_against_resort_oracle(self, gallery_and_probes):
        gallery, probes = gallery_and_probes
        for item in probes[:6]:
            res = classify_one(item.bundle, gallery, Method.HM,
                               true_label=item.label, probe_id=item.image_id)
            # independent re-sort on per-pair scores
            per_class = {}
            for label, b in gallery.entries:
                c = score(item.bundle, b, Method.HM)
                per_class[label] = min(c, per_class.get(label, np.inf))
            order = sorted(per_class, key=lambda k: (per_class[k], k))
            assert res.rank == order.index(item.label) + 1

    def test_unknown_label_rejected(self, gallery_and_probes):
        gallery, probes = gallery_and_probes
        with pytest.raises(DatasetError, match="not among gallery classes"):
            classify_one(probes[0].bundle, gallery, Method.HM,
                         true_label="zz_missing")

    def test_min_collapse_never_worsens(self, small_bundles):
        # adding a worse image of a class cannot worsen that class's cost
        by_label = {}
        for it in small_bundles:
            by_label.setdefault(it.label, []).append(it)
        labels = sorted(by_label)
        g1 = Gallery.build([(lab, by_label[lab][0].bundle) for lab in labels])
        g2 = Gallery.build(
            [(lab, by_label[lab][i].bundle) for lab in labels for i in (0, 1)])
        probe = by_label[labels[0]][3]
        for method in (Method.SCDT, Method.TM, Method.HM):
            c1 = classify.score_batch(probe.bundle, g1, method)
            c2 = classify.score_batch(probe.bundle, g2, method)
            for k, lab in enumerate(labels):
                best2 = c2[g2.class_slices[lab]].min()
                assert best2 <= c1[k] + 1e-12


class TestGallery:
    def test_uneven_class_counts_rejected(self, small_bundles):
        entries = [(it.label, it.bundle) for it in small_bundles[:7]]
        with pytest.raises(DatasetError, match="counts differ"):
            Gallery.build(entries)

    def test_empty_rejected(self):
        with pytest.raises(DatasetError, match="empty"):
            Gallery.build([])

    def test_g_inferred(self, gallery_and_probes):
        gallery, _ = gallery_and_probes
        assert gallery.g == 1
        assert len(gallery.labels) == 6


class TestClassifyBatch:
    def test_empty_batch(self, gallery_and_probes):
        gallery, _ = gallery_and_probes
        assert classify_batch([], gallery, Method.SC) == []

    @pytest.mark.parametrize("threads", [2, 4, 8])
    def test_thread_count_bit_identical(self, gallery_and_probes, threads):
        gallery, probes = gallery_and_probes
        base = classify_batch(probes, gallery, Method.SCDT, threads=1)
        other = classify_batch(probes, gallery, Method.SCDT, threads=threads)
        assert [r.probe_id for r in base] == [r.probe_id for r in other]
        for a, b in zip(base, other):
            assert a.rank == b.rank
            assert a.candidates == b.candidates
            assert a.costs == b.costs  # bit-exact

    def test_failing_probe_tagged_in_order(self, gallery_and_probes, small_masks):
        gallery, probes = gallery_and_probes
        broken = descriptors.build_bundle(small_masks[0].nmask, features=set())
        items = [probes[0],
                 LabeledBundle("broken", probes[1].label, broken),
                 probes[2]]
        out = classify_batch(items, gallery, Method.SC)
        assert len(out) == 3
        assert isinstance(out[0], classify.ProbeResult)
        assert isinstance(out[1], ProbeError)
        assert out[1].probe_id == "broken"
        assert isinstance(out[2], classify.ProbeResult)


class TestCurveFromRanks:
    def test_derived_counting_case(self):
        curve = curve_from_ranks([1, 1, 2], 2)
        assert curve[0] == pytest.approx(100.0 * 2 / 3)
        assert curve[1] == 100.0

    def test_monotone_terminal(self):
        rng = np.random.default_rng(0)
        ranks = rng.integers(1, 7, size=50)
        curve = curve_from_ranks(ranks, 6)
        assert (np.diff(curve) >= 0).all()
        assert curve[-1] == 100.0


class TestEvaluate:
    def test_report_shape_and_determinism(self, small_bundles):
        r1 = evaluate(small_bundles, Method.SCDT, g=1, repeats=3, seed=5)
        r2 = evaluate(small_bundles, Method.SCDT, g=1, repeats=3, seed=5,
                      threads=4)
        assert np.array_equal(r1.cr_mean, r2.cr_mean)
        assert np.array_equal(r1.cr_sigma, r2.cr_sigma)
        assert np.array_equal(r1.per_repeat, r2.per_repeat)
        assert len(r1.cr_mean) == 6
        # the seed steers the draws themselves
        c1 = classify.draw_galleries({"a": 9, "b": 9}, g=1, repeats=3, seed=5)
        c2 = classify.draw_galleries({"a": 9, "b": 9}, g=1, repeats=3, seed=6)
        assert any(int(d1["a"][0]) != int(d2["a"][0]) for d1, d2 in zip(c1, c2))

    def test_curves_monotone_terminal(self, small_bundles):
        rep = evaluate(small_bundles, Method.HM, g=1, repeats=4, seed=2)
        assert (np.diff(rep.cr_mean) >= -1e-9).all()
        assert rep.cr_mean[-1] == 100.0
        assert (rep.per_repeat[:, -1] == 100.0).all()

    def test_single_class_perfect(self, small_bundles):
        one_class = [it for it in small_bundles if it.label == "c00"]
        rep = evaluate(one_class, Method.SC, g=1, repeats=2, seed=0)
        assert rep.cr_mean[0] == 100.0
        assert rep.cr_sigma[0] == 0.0

    def test_disjoint_draws_for_g1(self):
        counts = {"a": 5, "b": 5}
        draws = classify.draw_galleries(counts, g=1, repeats=5, seed=3)
        for label in counts:
            picked = [int(d[label][0]) for d in draws]
            assert len(set(picked)) == 5  # no overlaps across repeats

    def test_27_disjoint_galleries_on_default_scale(self):
        # the g=1 protocol: 27 experiments with no overlaps between the
        # galleries, on a 15-class x 30-image dataset
        counts = {f"c{k:02d}": 30 for k in range(15)}
        draws = classify.draw_galleries(counts, g=1, repeats=27, seed=0)
        assert len(draws) == 27
        for label in counts:
            picked = [int(d[label][0]) for d in draws]
            assert len(set(picked)) == 27

    def test_seeded_draws_without_replacement_for_g3(self):
        counts = {"a": 6, "b": 7}
        draws = classify.draw_galleries(counts, g=3, repeats=4, seed=3)
        again = classify.draw_galleries(counts, g=3, repeats=4, seed=3)
        for d1, d2 in zip(draws, again):
            for label in counts:
                assert np.array_equal(d1[label], d2[label])
                assert len(set(d1[label].tolist())) == 3

    def test_insufficient_images_names_class(self, small_bundles):
        with pytest.raises(DatasetError, match="c00"):
            evaluate(small_bundles, Method.SC, g=5, repeats=2, seed=0)


class TestCsvWriters:
    def test_results_csv(self, gallery_and_probes, tmp_path):
        gallery, probes = gallery_and_probes
        results = classify_batch(probes[:4], gallery, Method.HM)
        out = tmp_path / "results.csv"
        classify.write_results_csv(results, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "probe_id,true_label,rank,top1,top1_cost"
        assert len(lines) == 5

    def test_crc_csv(self, small_bundles, tmp_path):
        rep = evaluate(small_bundles, Method.HM, g=1, repeats=2, seed=0)
        out = tmp_path / "crc.csv"
        classify.write_crc_csv([rep], out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "method,g,rank,cr_mean,cr_sigma"
        assert len(lines) == 1 + 6
        assert lines[1].startswith("hm,1,1,")
