import numpy as np
import pytest
from hypothesis import given, strategies as st

from neospread.regions import (RegionGraph, adjacency, build_regions,
                               neighbor_lists, read_region_files,
                               shared_edge_km, similarity, write_region_files)
from conftest import make_grid


class TestSimilarity:
    def test_identical_cells(self):
        assert similarity(500.0, 1500.0, 500.0, 1500.0, 100.0, 100.0) == 1.0

    def test_known_value(self):
        # s = 100/100 + 200/100 = 3 -> 1/4
        assert similarity(500.0, 1500.0, 600.0, 1300.0, 100.0, 100.0) == 0.25

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            similarity(1.0, 1.0, 1.0, 1.0, 0.0, 1.0)

    @given(st.floats(0, 3000), st.floats(0, 9000),
           st.floats(0, 3000), st.floats(0, 9000))
    def test_symmetric_and_bounded(self, na, ga, nb, gb):
        s_ab = similarity(na, ga, nb, gb, 100.0, 300.0)
        s_ba = similarity(nb, gb, na, ga, 100.0, 300.0)
        assert s_ab == s_ba
        assert 0.0 < s_ab <= 1.0


def test_neighbor_lists_counts():
    grid = make_grid(3, 3)
    nbs = neighbor_lists(grid, 4)
    degrees = sorted(len(x) for x in nbs)
    assert degrees == [2, 2, 2, 2, 3, 3, 3, 3, 4]
    nbs8 = neighbor_lists(grid, 8)
    assert max(len(x) for x in nbs8) == 8


def test_homogeneous_grid_coalesces():
    grid = make_grid(8, 8, t=15.0, p=1.0, gdd=2000.0)
    cell_area = float(grid.area[0])
    res = build_regions(grid, a_t=4 * cell_area,
                        npp_scale=10.0, gdd_scale=10.0)
    labels = res.labels
    areas = np.bincount(labels, weights=grid.area)
    # most of the area should end up in clusters well above threshold
    big = areas > 2 * 4 * cell_area
    assert areas[big].sum() / areas.sum() >= 0.7


def test_two_band_grid_splits_at_interface():
    grid = make_grid(6, 6, t=15.0, p=1.0, gdd=2000.0)
    # warm wet south band, cold dry north band
    north = grid.lat >= grid.lat.min() + 3 * grid.cell_deg
    grid.t[north] = 2.0
    grid.p[north] = 0.3
    grid.gdd[north] = 600.0
    cell_area = float(grid.area.mean())
    res = build_regions(grid, a_t=4 * cell_area,
                        npp_scale=20.0, gdd_scale=50.0)
    labels = res.labels
    assert len(np.unique(labels)) == 2
    # region membership exactly follows the climate bands
    assert len(np.unique(labels[north])) == 1
    assert len(np.unique(labels[~north])) == 1
    assert labels[north][0] != labels[~north][0]


def test_build_regions_deterministic():
    rng = np.random.default_rng(7)
    grid = make_grid(10, 10, t=12.0, p=1.0, gdd=1800.0)
    grid.t[:] = 12.0 + rng.normal(0, 2.0, len(grid))
    grid.gdd[:] = np.maximum(grid.t, 0) * 150.0
    a_t = 6 * float(grid.area.mean())
    res1 = build_regions(grid, a_t=a_t)
    res2 = build_regions(grid, a_t=a_t)
    assert np.array_equal(res1.labels, res2.labels)


def test_build_regions_contiguity():
    rng = np.random.default_rng(3)
    grid = make_grid(9, 9, t=12.0, p=1.0, gdd=1800.0)
    grid.t[:] = 12.0 + rng.normal(0, 3.0, len(grid))
    res = build_regions(grid, a_t=5 * float(grid.area.mean()))
    nbs = neighbor_lists(grid, 4)
    for lab in np.unique(res.labels):
        members = set(np.nonzero(res.labels == lab)[0].tolist())
        # BFS from one member must reach all of them
        seen = {min(members)}
        frontier = [min(members)]
        while frontier:
            c = frontier.pop()
            for nb in nbs[c]:
                if nb in members and nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        assert seen == members


def test_shared_edge_lengths():
    grid = make_grid(2, 2, lat0=60.0)
    # east-west neighbours share a meridian edge, independent of latitude
    ew = shared_edge_km(grid, 0, 2)
    assert ew == pytest.approx(55.5975, abs=0.01) or ew == pytest.approx(
        111.195 * grid.cell_deg, abs=0.01)
    # north-south neighbours share a parallel edge scaled by cos(lat)
    ns = shared_edge_km(grid, 0, 1)
    assert ns == pytest.approx(ew * np.cos(np.radians(60.25)), rel=1e-6)


def test_adjacency_lengths_sum():
    grid = make_grid(2, 1)
    labels = np.array([0, 1])
    edges = adjacency(labels, grid)
    assert set(edges) == {(0, 1)}
    assert edges[(0, 1)] == pytest.approx(shared_edge_km(grid, 0, 1))


class TestRegionGraph:
    def test_corridor_shape(self):
        g = RegionGraph.corridor(5, size_km=100.0)
        assert g.n == 5
        assert len(g.edge_i) == 4
        assert np.all(g.areas == 1e4)
        assert np.all(g.edge_w == pytest.approx(100.0 / 100.0 / 100.0))

    def test_random_graph_connected(self):
        rng = np.random.default_rng(0)
        g = RegionGraph.random_graph(50, rng)
        assert g.n == 50
        # the construction always includes the spanning chain 0-1-...-49
        chain = set(zip(range(49), range(1, 50)))
        have = set(zip(g.edge_i.tolist(), g.edge_j.tolist()))
        assert chain <= have

    def test_rejects_self_edges(self):
        with pytest.raises(ValueError):
            RegionGraph(areas=[1.0, 1.0], edge_i=[0], edge_j=[0],
                        edge_length=[1.0])

    def test_from_labels(self):
        grid = make_grid(2, 2)
        labels = np.array([0, 0, 1, 1])
        g = RegionGraph.from_labels(labels, grid)
        assert g.n == 2
        assert g.areas[0] == pytest.approx(grid.area[:2].sum())
        assert list(zip(g.edge_i, g.edge_j)) == [(0, 1)]

    def test_roundtrip_files(self, tmp_path):
        grid = make_grid(3, 3)
        labels = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
        g = RegionGraph.from_labels(labels, grid)
        write_region_files(g, tmp_path / "regions.csv", tmp_path / "edges.csv")
        h = read_region_files(tmp_path / "regions.csv", tmp_path / "edges.csv")
        assert h.n == g.n
        np.testing.assert_allclose(h.areas, g.areas, rtol=1e-6)
        np.testing.assert_array_equal(h.edge_i, g.edge_i)
        np.testing.assert_allclose(h.edge_length, g.edge_length, rtol=1e-6)
        for a, b in zip(h.cell_of_region, g.cell_of_region):
            np.testing.assert_array_equal(a, b)
