"""Backend parity: the compiled extension and the pure-Python fallback must
agree on every kernel."""

import subprocess
import sys

import numpy as np
import pytest

from gesturebench import kernels

BACKENDS = kernels.backends()
HAVE_COMPILED = "compiled" in BACKENDS

pytestmark = pytest.mark.skipif(not HAVE_COMPILED,
                                reason="compiled extension not built")


def both():
    return BACKENDS["python"], BACKENDS["compiled"]


def unit_hists(rng, n=12, k=30):
    h = rng.random((n, k))
    return h / h.sum(axis=1, keepdims=True)


class TestParity:
    def test_chi2(self):
        rng = np.random.default_rng(0)
        py, cy = both()
        for _ in range(50):
            a = rng.random(24)
            b = rng.random(24)
            b[rng.random(24) < 0.3] = 0.0
            a[rng.random(24) < 0.3] = 0.0
            assert py.chi2(a, b) == pytest.approx(cy.chi2(a, b), abs=1e-13)

    def test_chi2_pair_matrix_and_rows(self):
        rng = np.random.default_rng(1)
        py, cy = both()
        a = unit_hists(rng)
        b = unit_hists(rng)
        assert np.allclose(py.chi2_pair_matrix(a, b), cy.chi2_pair_matrix(a, b),
                           atol=1e-13)
        assert np.allclose(py.chi2_rows(a[0], b), cy.chi2_rows(a[0], b),
                           atol=1e-13)

    def test_assignment(self):
        rng = np.random.default_rng(2)
        py, cy = both()
        for _ in range(60):
            n = int(rng.integers(1, 12))
            cost = rng.random((n, n)) * 5
            p_perm, p_total = py.assignment(cost)
            c_perm, c_total = cy.assignment(cost)
            assert np.array_equal(p_perm, c_perm)
            assert p_total == c_total

    def test_sc_cost_batch(self):
        rng = np.random.default_rng(3)
        py, cy = both()
        probe = unit_hists(rng, 8, 20)
        gal = np.stack([unit_hists(rng, 8, 20) for _ in range(5)])
        assert np.allclose(py.sc_cost_batch(probe, gal),
                           cy.sc_cost_batch(probe, gal), atol=1e-13)

    def test_hausdorff(self):
        rng = np.random.default_rng(4)
        py, cy = both()
        for _ in range(30):
            a = rng.random((int(rng.integers(1, 40)), 2)) * 50
            b = rng.random((int(rng.integers(1, 40)), 2)) * 50
            assert py.hausdorff(a, b) == pytest.approx(cy.hausdorff(a, b),
                                                       abs=1e-12)
        flat = np.concatenate([a, b])
        offs = np.array([0, len(a), len(a) + len(b)], dtype=np.int64)
        probe = rng.random((7, 2)) * 50
        assert np.allclose(py.hausdorff_batch(probe, flat, offs),
                           cy.hausdorff_batch(probe, flat, offs), atol=1e-12)

    def test_template_cost(self):
        rng = np.random.default_rng(5)
        py, cy = both()
        for _ in range(30):
            a = (rng.random((int(rng.integers(1, 20)), 9)) < 0.5).astype(np.uint8)
            b = (rng.random((int(rng.integers(1, 20)), 9)) < 0.5).astype(np.uint8)
            assert py.template_cost(a, b) == cy.template_cost(a, b)
        heights = np.array([4, 7, 2], dtype=np.int64)
        flat = (rng.random((13, 9)) < 0.5).astype(np.uint8)
        probe = (rng.random((5, 9)) < 0.5).astype(np.uint8)
        assert np.array_equal(py.template_cost_batch(probe, flat, heights),
                              cy.template_cost_batch(probe, flat, heights))

    def test_edt_sq(self):
        rng = np.random.default_rng(6)
        py, cy = both()
        for _ in range(10):
            h, w = int(rng.integers(3, 40)), int(rng.integers(3, 40))
            far = float(4 * (h * h + w * w) + 16)
            seed = np.full((h, w), far)
            k = int(rng.integers(1, max(2, h * w // 6)))
            idx = rng.choice(h * w, size=k, replace=False)
            seed.ravel()[idx] = 0.0
            assert np.array_equal(py.edt_sq(seed), cy.edt_sq(seed))

    def test_trace_boundary(self):
        from oracles import random_blob_mask
        rng = np.random.default_rng(7)
        py, cy = both()
        for _ in range(25):
            grid = random_blob_mask(rng, 40).astype(np.uint8)
            flat = int(grid.ravel().argmax())
            r0, c0 = divmod(flat, grid.shape[1])
            assert np.array_equal(py.trace_boundary(grid, r0, c0),
                                  cy.trace_boundary(grid, r0, c0))

    def test_largest_component(self):
        from oracles import random_blob_mask
        rng = np.random.default_rng(8)
        py, cy = both()
        for _ in range(25):
            grid = random_blob_mask(rng, 32).astype(np.uint8)
            pc, pr0, pc0 = py.largest_component(grid)
            cc, cr0, cc0 = cy.largest_component(grid)
            assert (pr0, pc0) == (cr0, cc0)
            assert np.array_equal(pc, cc)
        empty = np.zeros((5, 5), dtype=np.uint8)
        assert py.largest_component(empty)[1] == -1
        assert cy.largest_component(empty)[1] == -1

    def test_edt_from_contour(self):
        from oracles import random_blob_mask
        rng = np.random.default_rng(9)
        py, cy = both()
        for _ in range(10):
            grid = random_blob_mask(rng, 30).astype(np.uint8)
            comp, r0, c0 = py.largest_component(grid)
            rc = py.trace_boundary(comp, r0, c0)
            xy = np.stack([rc[:, 1], rc[:, 0]], axis=1).astype(np.float64)
            assert np.array_equal(py.edt_from_contour(grid, xy),
                                  cy.edt_from_contour(grid, xy))

    def test_resample_closed(self):
        rng = np.random.default_rng(10)
        py, cy = both()
        for _ in range(20):
            pts = rng.random((int(rng.integers(3, 50)), 2)) * 40
            assert np.allclose(py.resample_closed(pts, 17),
                               cy.resample_closed(pts, 17), atol=1e-12)

    def test_sc_histograms(self):
        rng = np.random.default_rng(11)
        py, cy = both()
        edges = np.geomspace(0.125, 2.0, 6)
        for _ in range(20):
            pts = rng.random((20, 2)) * 60
            ph, pm = py.sc_histograms(pts, edges, 12)
            ch, cm = cy.sc_histograms(pts, edges, 12)
            assert pm == pytest.approx(cm, abs=1e-12)
            assert np.array_equal(ph, ch)

    def test_sobel_orient_hist(self):
        from oracles import random_blob_mask
        rng = np.random.default_rng(12)
        py, cy = both()
        for _ in range(15):
            grid = random_blob_mask(rng, 36).astype(np.uint8)
            assert np.allclose(py.sobel_orient_hist(grid, 36),
                               cy.sobel_orient_hist(grid, 36), atol=1e-9)

    def test_mask_moment_sums(self):
        from oracles import random_blob_mask
        rng = np.random.default_rng(13)
        py, cy = both()
        for _ in range(15):
            grid = random_blob_mask(rng, 36).astype(np.uint8)
            ps = py.mask_moment_sums(grid)
            cs = cy.mask_moment_sums(grid)
            assert ps[0] == cs[0]
            assert np.allclose(ps[1:], cs[1:], rtol=1e-12, atol=1e-9)

    def test_clamped_hist_counts(self):
        rng = np.random.default_rng(14)
        py, cy = both()
        vals = rng.random((20, 30)) * 60
        dom = (rng.random((20, 30)) < 0.6).astype(np.uint8)
        pb, pn = py.clamped_hist_counts(vals, dom, 1.5625, 32)
        cb, cn = cy.clamped_hist_counts(vals, dom, 1.5625, 32)
        assert pn == cn
        assert np.array_equal(pb, cb)

    def test_compute_features_and_batch(self):
        from oracles import random_blob_mask
        rng = np.random.default_rng(15)
        py, cy = both()
        edges = np.geomspace(0.125, 2.0, 6)
        grids = [random_blob_mask(rng, 40).astype(np.uint8) for _ in range(4)]
        args = (20, edges, 12, 32, 36, True, True, True, True, True, True)
        singles_py = [py.compute_features(g, *args) for g in grids]
        singles_cy = [cy.compute_features(g, *args) for g in grids]
        flat = np.concatenate(grids, axis=0)
        heights = np.array([g.shape[0] for g in grids], dtype=np.int64)
        batch_cy = cy.compute_features_batch(flat, heights, *args)
        batch_py = py.compute_features_batch(flat, heights, *args)
        for sp, sc_, bc, bp in zip(singles_py, singles_cy, batch_cy, batch_py):
            for key in sp:
                for other in (sc_, bc, bp):
                    a, b = sp[key], other[key]
                    if isinstance(a, np.ndarray):
                        assert np.allclose(a, b, rtol=1e-12, atol=1e-12), key
                    elif isinstance(a, tuple):
                        assert np.allclose(a, b, rtol=1e-12, atol=1e-9), key
                    elif isinstance(a, float):
                        assert a == pytest.approx(b, abs=1e-12), key
                    else:
                        assert a == b, key


class TestBackendSelection:
    def test_default_prefers_compiled(self):
        assert kernels.BACKEND == "compiled"

    def test_env_forces_python(self):
        out = subprocess.run(
            [sys.executable, "-c",
             "from gesturebench import kernels; print(kernels.BACKEND)"],
            capture_output=True, text=True,
            env={"PATH": "/usr/bin:/bin", "GESTUREBENCH_BACKEND": "python"})
        assert out.stdout.strip() == "python"

    def test_env_rejects_unknown(self):
        out = subprocess.run(
            [sys.executable, "-c", "import gesturebench.kernels"],
            capture_output=True, text=True,
            env={"PATH": "/usr/bin:/bin", "GESTUREBENCH_BACKEND": "weird"})
        assert out.returncode != 0
        assert "not recognized" in out.stderr
