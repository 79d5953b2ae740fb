import json
import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from mappergw.geometry import PointCloud
from mappergw.mapper import EpsilonGraph, KMeans, MapperGraph, MapperVertex, build_cover, build_mapper
from mappergw.sampling import FilterValues, height_filter
from mappergw.shapes import stick_figure
from mappergw.experiments import (
    SYMMETRIC_PAIRS,
    TORUS_GRID,
    classical_mds,
    decomposition_diagnostic,
    derive_seed,
    loglog_slope,
    parallel_map,
    resolution_schedule,
    run_convergence,
    run_filter_sweep,
    run_torus_grid,
    theoretical_exponent,
)
from mappergw.transport import GWOptions


def circle(n, seed):
    t = np.random.default_rng(seed).uniform(0, 2 * np.pi, n)
    return PointCloud(np.stack([np.cos(t), np.sin(t)], axis=1))


class TestMDS:
    def test_two_points(self):
        X = classical_mds([[0, 3.0], [3.0, 0]])
        assert np.linalg.norm(X[0] - X[1]) == pytest.approx(3.0, abs=1e-12)

    def test_equilateral(self):
        D = 1.0 - np.eye(3)
        X = classical_mds(D)
        np.testing.assert_allclose(squareform(pdist(X)), D, atol=1e-9)

    def test_round_trip_planar_points(self):
        pts = np.random.default_rng(0).normal(size=(12, 2))
        D = squareform(pdist(pts))
        X = classical_mds(D)
        np.testing.assert_allclose(squareform(pdist(X)), D, atol=1e-9)
        np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-9)

    def test_sign_convention(self):
        pts = np.random.default_rng(1).normal(size=(6, 2))
        X = classical_mds(squareform(pdist(pts)))
        for k in range(2):
            col = X[:, k]
            assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0

    def test_errors(self):
        with pytest.raises(ValueError):
            classical_mds([[0.0]], dim=2)
        with pytest.raises(ValueError):
            classical_mds([[0, 1.0], [2.0, 0]])


class TestHelpers:
    def test_table_labels(self):
        assert [lab for lab, _, _ in TORUS_GRID] == list("abcdefghi")
        params = {lab: (p, q) for lab, p, q in TORUS_GRID}
        assert params["a"] == (1 / 12, 1 / 12) and params["f"] == (1 / 6, 1 / 3)
        for x, y in SYMMETRIC_PAIRS:
            assert params[x] == params[y][::-1]

    def test_theoretical_exponent(self):
        assert theoretical_exponent(2, 2, 1.0) == pytest.approx(-1 / 9)
        assert theoretical_exponent(2, 2, 0.5) == pytest.approx(-1 / (3 * 2.5))
        assert theoretical_exponent(2, 1, 1.0) == pytest.approx(-0.5 / 3)

    def test_schedule_is_reproducible(self):
        ns = (250, 500, 1000, 2000, 4000)
        c = 5 / 250 ** (1 / 3)
        assert resolution_schedule(ns, c, 1.0) == [round(c * n ** (1 / 3)) for n in ns]
        assert resolution_schedule(ns, c, 1.0)[0] == 5

    def test_loglog_slope(self):
        ns = np.array([10, 100, 1000])
        slope, intercept = loglog_slope(ns, 3.0 * ns**-0.4)
        assert slope == pytest.approx(-0.4) and intercept == pytest.approx(math.log(3.0))

    def test_parallel_map_keeps_order(self):
        assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]

    def test_derive_seed(self):
        assert derive_seed(42, 1) == derive_seed(42, 1)
        assert len({derive_seed(42, k) for k in range(100)}) == 100


class TestFilterSweep:
    def test_small_sweep(self):
        cloud = stick_figure()
        u, v = [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]
        ts = [0.0, 0.25, 0.5]
        rep = run_filter_sweep(cloud, u, v, ts, r=10)
        assert rep.gw_values[0] <= 1e-6
        slope = float(np.max(np.abs(cloud.points @ (np.array(u) - np.array(v)))))
        np.testing.assert_allclose(rep.sup_norms, np.array(ts) * slope, rtol=1e-12)
        assert rep.config["clusterer"] == KMeans(3).to_dict()
        again = run_filter_sweep(cloud, u, v, ts, r=10, threads=3)
        assert again.to_dict() == rep.to_dict()

    def test_writes_outputs(self, tmp_path):
        rep = run_filter_sweep(stick_figure(), [1.0, 0, 0], [0, 0, 1.0], [0.0, 0.5], r=8)
        rep.write(tmp_path, plots=True)
        assert (tmp_path / "curve.csv").read_text().splitlines()[0] == "t,sup_norm,gw"
        assert json.loads((tmp_path / "report.json").read_text())["kind"] == "filter-sweep"
        assert (tmp_path / "curve.svg").read_text().startswith("<svg")

    @pytest.mark.parametrize("ts", [[0.5, 1.0], [0.0, 0.6, 0.3], [0.0, 1.5]])
    def test_bad_ts(self, ts):
        with pytest.raises(ValueError):
            run_filter_sweep(stick_figure(), [1.0, 0, 0], [0, 0, 1.0], ts)

    def test_non_unit_direction(self):
        with pytest.raises(ValueError, match="unit"):
            run_filter_sweep(stick_figure(), [2.0, 0, 0], [0, 0, 1.0], [0.0])


class TestTorusGrid:
    def test_small_grid(self, tmp_path):
        grid = TORUS_GRID[:3]
        rep = run_torus_grid(grid, n=1000, r=8, clusterer=EpsilonGraph(0.2), seed=3)
        M = rep.gw_matrix
        assert M.shape == (3, 3) and np.array_equal(M, M.T)
        assert np.all(np.diag(M) == 0) and np.all(M >= 0)
        np.testing.assert_allclose(rep.mds_coords.mean(axis=0), 0.0, atol=1e-9)
        rep.write(tmp_path, plots=True)
        assert (tmp_path / "gw_matrix.csv").read_text().splitlines()[0] == ",a,b,c"
        assert (tmp_path / "mds.csv").read_text().splitlines()[0] == "label,x,y"
        assert (tmp_path / "mds.svg").exists()
        again = run_torus_grid(grid, n=1000, r=8, clusterer=EpsilonGraph(0.2), seed=3, threads=4)
        assert again.to_dict() == rep.to_dict()

    def test_needs_enough_points(self):
        with pytest.raises(ValueError):
            run_torus_grid(n=500)


class TestConvergence:
    def test_tiny_study(self, tmp_path):
        rep = run_convergence(ns=(200, 400, 800), trials=3, solver=GWOptions(restarts=1), seed=5)
        assert rep.r_of_n == resolution_schedule((200, 400, 800), 5 / 200 ** (1 / 3), 1.0)
        assert rep.reference["n"] == 3200 and rep.reference["r"] == 4 * max(rep.r_of_n)
        assert len(rep.gw_values) == 3 and all(len(v) == 3 for v in rep.gw_values)
        assert rep.target_exponent == pytest.approx(-1 / 9)
        rep.write(tmp_path, plots=True)
        lines = (tmp_path / "curve.csv").read_text().splitlines()
        assert lines[0] == "n,r,median_gw" and len(lines) == 4

    def test_validation(self):
        with pytest.raises(ValueError):
            run_convergence(ns=(400, 200), trials=3)
        with pytest.raises(ValueError):
            run_convergence(trials=2)
        with pytest.raises(ValueError):
            run_convergence(solver=GWOptions(p=1), p=2)


class TestDecomposition:
    def test_refinement_reduces_error(self):
        cloud, reference = circle(400, 0), circle(4000, 1)
        f = height_filter(cloud, [0.0, 1.0])
        ref_f = height_filter(reference, [0.0, 1.0])
        values = []
        for r in (3, 20):
            m = build_mapper(cloud, None, f, build_cover(f, r, 0.3), EpsilonGraph(0.2))
            diag = decomposition_diagnostic(cloud, f, m, reference, ref_f, band_delta=0.01)
            assert 0 <= diag.A_n <= diag.diameter + 1e-12
            values.append(diag.A_n)
        assert values[1] < values[0]

    def test_single_point(self):
        cloud = PointCloud([[0.3, -0.2]])
        m = MapperGraph(1, (MapperVertex(0, 0, np.array([0])),), (), (np.array([0]),), np.array([0]))
        f = FilterValues([0.3])
        diag = decomposition_diagnostic(cloud, f, m, cloud, f, band_delta=0.1)
        assert diag.A_n == 0.0

    def test_empty_band(self):
        cloud = PointCloud([[0.0], [1.0]])
        f = FilterValues([0.0, 1.0])
        m = build_mapper(cloud, None, f, build_cover(f, 1, 0.3), EpsilonGraph(2.0))
        ref = PointCloud([[0.0]])
        with pytest.raises(ValueError, match="empty reference band"):
            decomposition_diagnostic(cloud, f, m, ref, FilterValues([0.0]), band_delta=0.1)
