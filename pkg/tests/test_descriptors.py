import numpy as np
import pytest

from gesturebench import descriptors, geometry, masks
from gesturebench.errors import DescriptorError
from gesturebench.geometry import SampledContour
from gesturebench.params import Params
from oracles import brute_hu, random_blob_mask


def nmask(grid):
    return masks.NormalizedMask(mask=masks.BinaryMask(grid))


def sc_of(points):
    pts = np.asarray(points, dtype=np.float64)
    return descriptors.shape_contexts(
        SampledContour(points=pts, source_length=len(pts)))


class TestShapeContexts:
    def test_rows_unit_sum_nonnegative(self, small_bundles):
        hist = small_bundles[0].bundle.sc.hist
        assert (hist >= 0).all()
        assert np.abs(hist.sum(axis=1) - 1.0).max() < 1e-9

    def test_translation_bit_exact(self):
        rng = np.random.default_rng(2)
        # dyadic coordinates + integer shift keep float differences exact
        pts = rng.integers(0, 400, size=(20, 2)).astype(np.float64) / 4.0
        a = sc_of(pts)
        b = sc_of(pts + np.array([173.0, -55.0]))
        assert np.array_equal(a.hist, b.hist)

    def test_scale_by_two_bit_exact(self):
        rng = np.random.default_rng(3)
        pts = rng.random((16, 2)) * 50.0
        a = sc_of(pts)
        b = sc_of(pts * 2.0)
        assert np.array_equal(a.hist, b.hist)

    def test_unit_square_corner_bins(self):
        # 4 points at unit-square corners: per point, two vectors of length
        # 1 and one of length sqrt(2), normalized by the mean distance
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        sc = sc_of(pts)
        params = Params()
        mean = (4 * 1.0 + 2 * np.sqrt(2.0)) / 6.0
        edges = sc.radial_edges

        def radial_bin(r):
            return int(np.clip(np.searchsorted(edges, r / mean, side="right") - 1,
                               0, params.sc_radial_bins - 1))

        def angular_bin(dx, dy):
            theta = np.arctan2(dy, dx) % (2 * np.pi)
            return int(theta / (2 * np.pi / params.sc_angular_bins))

        # hand-binned expectation for corner (0,0): vectors (1,0), (1,1), (0,1)
        expected = np.zeros(60)
        for dx, dy in [(1, 0), (1, 1), (0, 1)]:
            r = np.hypot(dx, dy)
            expected[radial_bin(r) * 12 + angular_bin(dx, dy)] += 1 / 3.0
        assert np.allclose(sc.hist[0], expected)
        # the unit vectors land one radial bin below the diagonal vector
        assert radial_bin(1.0) == 3 and radial_bin(np.sqrt(2.0)) == 4

    def test_degenerate_points(self):
        with pytest.raises(DescriptorError, match="coincide"):
            sc_of(np.ones((6, 2)))

    def test_needs_four_points(self):
        with pytest.raises(DescriptorError, match=">= 4"):
            sc_of(np.array([[0.0, 0], [1, 0], [0, 1]]))


class TestDTHistogram:
    def make_field(self, values, in_domain=None, width=100):
        vals = np.asarray(values, dtype=np.float64).reshape(1, -1)
        pad = np.zeros((1, width - vals.shape[1]))
        row = np.concatenate([vals, pad], axis=1)
        dom = np.zeros_like(row, dtype=bool)
        dom[0, :vals.shape[1]] = True
        if in_domain is not None:
            dom[0, :vals.shape[1]] = in_domain
        return geometry.DistanceField(values=row, in_domain=dom)

    def test_all_zero_distances(self):
        h = descriptors.dt_histogram(self.make_field([0.0, 0.0, 0.0]))
        assert h.bins[0] == 1.0
        assert h.bins[1:].sum() == 0.0

    def test_half_at_quarter_width(self):
        # distances {0, w/4} equally -> mass 0.5 in bin 0 and bin 16
        h = descriptors.dt_histogram(self.make_field([0.0, 25.0]))
        assert h.bins[0] == pytest.approx(0.5)
        assert h.bins[16] == pytest.approx(0.5)

    def test_overflow_clamps_to_last_bin(self):
        h = descriptors.dt_histogram(self.make_field([100.0]))
        assert h.bins[31] == 1.0

    def test_unit_sum(self, small_bundles):
        assert small_bundles[0].bundle.dt_hist.bins.sum() == pytest.approx(1.0, abs=1e-9)

    def test_empty_field(self):
        f = self.make_field([1.0], in_domain=[False])
        with pytest.raises(DescriptorError, match="no in-mask"):
            descriptors.dt_histogram(f)


class TestOrientationHistogram:
    def test_vertical_edge_all_mass_at_zero_degrees(self):
        grid = np.zeros((12, 12), dtype=bool)
        grid[:, 6:] = True
        h = descriptors.orientation_histogram(nmask(grid))
        assert h.bins[0] == pytest.approx(1.0)

    def test_rot90_shifts_by_half_the_bins(self):
        rng = np.random.default_rng(8)
        grid = random_blob_mask(rng, 40)
        h0 = descriptors.orientation_histogram(nmask(grid)).bins
        h1 = descriptors.orientation_histogram(nmask(np.rot90(grid))).bins
        shifted = np.roll(h0, 18)
        assert np.abs(h1 - shifted).sum() < 0.05  # 5% L1, border discretization

    def test_uniform_image_no_gradient(self):
        with pytest.raises(DescriptorError, match="no gradient"):
            descriptors.orientation_histogram(nmask(np.ones((9, 9), dtype=bool)))

    def test_unit_sum(self, small_bundles):
        assert small_bundles[0].bundle.ohist.bins.sum() == pytest.approx(1.0, abs=1e-9)


class TestHuMoments:
    def test_translation_invariance(self):
        rng = np.random.default_rng(17)
        grid = random_blob_mask(rng, 40)
        big = np.zeros((120, 120), dtype=bool)
        big[:40, :40] = grid
        moved = np.zeros((120, 120), dtype=bool)
        moved[53:93, 71:111] = grid
        a = descriptors.hu_moments(nmask(big)).values
        b = descriptors.hu_moments(nmask(moved)).values
        assert np.abs(a - b).max() <= 1e-12

    def test_scale_invariance_square_and_disk(self):
        # 32 px and up: the discretization bias of an s-px square is
        # ~1/(6 s^2) in phi1, so smaller rasters would break the 1e-3 bound
        for shape in ("square", "disk"):
            grids = []
            for size in (32, 64):
                g = np.zeros((size + 8, size + 8), dtype=bool)
                if shape == "square":
                    g[4:4 + size, 4:4 + size] = True
                else:
                    ys, xs = np.mgrid[0:size + 8, 0:size + 8]
                    c = (size + 8) / 2.0
                    g[(xs - c) ** 2 + (ys - c) ** 2 <= (size / 2.0) ** 2] = True
                grids.append(g)
            a = descriptors.hu_moments(nmask(grids[0])).values
            b = descriptors.hu_moments(nmask(grids[1])).values
            rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-7)
            assert rel.max() <= 1e-3

    def test_mirror_flips_phi7_sign(self):
        # clearly chiral blob so phi7 is comfortably nonzero
        grid = np.zeros((60, 60), dtype=bool)
        grid[10:50, 10:20] = True
        grid[40:50, 10:45] = True
        grid[10:22, 20:30] = True
        a = descriptors.hu_moments(nmask(grid)).values
        b = descriptors.hu_moments(nmask(grid[:, ::-1])).values
        assert np.allclose(a[:6], b[:6], rtol=1e-6, atol=1e-12)
        assert abs(a[6]) > 1e-12
        assert b[6] == pytest.approx(-a[6], rel=1e-6)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(29)
        for _ in range(5):
            grid = random_blob_mask(rng, 32)
            ours = descriptors.hu_moments(nmask(grid)).values
            ref = brute_hu(grid)
            assert np.abs(ours - ref).max() <= 1e-10 * np.abs(ref).max() + 1e-16

    def test_phi1_positive(self, small_bundles):
        assert small_bundles[0].bundle.hu.values[0] > 0


class TestBuildBundle:
    def test_all_members_present(self, small_bundles):
        b = small_bundles[0].bundle
        for name in ("contour", "sampled", "sc", "dt_hist", "ohist", "hu"):
            assert getattr(b, name) is not None

    def test_pool_gives_bit_identical_bundle(self, small_masks):
        from concurrent.futures import ThreadPoolExecutor
        nm = small_masks[0].nmask
        serial = descriptors.build_bundle(nm)
        with ThreadPoolExecutor(max_workers=4) as pool:
            threaded = descriptors.build_bundle(nm, pool=pool)
        assert np.array_equal(serial.sc.hist, threaded.sc.hist)
        assert np.array_equal(serial.dt_hist.bins, threaded.dt_hist.bins)
        assert np.array_equal(serial.ohist.bins, threaded.ohist.bins)
        assert np.array_equal(serial.hu.values, threaded.hu.values)

    def test_error_carries_feature_name(self):
        with pytest.raises(DescriptorError) as err:
            descriptors.build_bundle(nmask(np.ones((10, 10), dtype=bool)))
        assert err.value.feature == "orientation_histogram"

    def test_partial_mode_records_failures(self):
        b = descriptors.build_bundle(nmask(np.ones((10, 10), dtype=bool)),
                                     partial=True)
        assert b.ohist is None
        assert "ohist" in b.feature_errors
        assert b.sc is not None

    def test_feature_subset(self, small_masks):
        b = descriptors.build_bundle(small_masks[0].nmask, features={"hu"})
        assert b.hu is not None
        assert b.sc is None and b.contour is None
