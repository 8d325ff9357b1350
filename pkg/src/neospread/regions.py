"""Region building: cellular-automaton clustering of the climate raster and
construction of the region adjacency graph with areas and shared-boundary
lengths.

The clustering starts from one cluster per cell and iteratively lets each
cell adopt the membership of the neighbour with the largest area-weighted
similarity; the weight A/(A+A_T) favours large adjacent clusters, so the
sweep acts as a spatial low-pass filter.  Sub-threshold clusters are merged
into their most similar neighbour afterwards.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .climate import CellGrid, KM_PER_DEG


def similarity(npp_a, gdd_a, npp_b, gdd_b, npp_scale: float, gdd_scale: float):
    """Similarity of two cells in (0, 1]: 1/(1+s) with s the sum of
    normalised absolute property differences."""
    if npp_scale <= 0 or gdd_scale <= 0:
        raise ValueError("similarity scales must be positive")
    s = np.abs(npp_a - npp_b) / npp_scale + np.abs(gdd_a - gdd_b) / gdd_scale
    return 1.0 / (1.0 + s)


def grid_indices(grid: CellGrid) -> tuple[np.ndarray, np.ndarray]:
    """Integer (row, col) indices of each cell on the regular lon/lat grid."""
    col = np.rint((grid.lon - grid.lon.min()) / grid.cell_deg).astype(int)
    row = np.rint((grid.lat - grid.lat.min()) / grid.cell_deg).astype(int)
    return row, col


def neighbor_lists(grid: CellGrid, connectivity: int = 4) -> list[list[int]]:
    """Neighbour cell indices for every cell (4- or 8-connected)."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    row, col = grid_indices(grid)
    index = {(int(r), int(c)): i for i, (r, c) in enumerate(zip(row, col))}
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    out = []
    for r, c in zip(row, col):
        nbs = []
        for dr, dc in offsets:
            j = index.get((int(r) + dr, int(c) + dc))
            if j is not None:
                nbs.append(j)
        out.append(nbs)
    return out


@dataclass
class ClusterResult:
    labels: np.ndarray        # region index per cell, 0..n_regions-1
    converged: bool
    n_iterations: int


def _connected_components(members, neighbors):
    """Split a cell set into 4-connected components (list of lists)."""
    members = set(members)
    seen = set()
    comps = []
    for start in sorted(members):
        if start in seen:
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            c = queue.popleft()
            comp.append(c)
            for nb in neighbors[c]:
                if nb in members and nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        comps.append(comp)
    return comps


def build_regions(grid: CellGrid, a_t: float, *, npp=None,
                  npp_scale: float | None = None, gdd_scale: float | None = None,
                  connectivity: int = 4, max_iter: int = 100) -> ClusterResult:
    """Cluster the raster into regions with target area ``a_t`` (km^2).

    Sweeps run in ascending cell-index order with immediate commit and live
    cluster areas, which makes the result deterministic.  Ties in the
    area-weighted similarity break toward the lowest cluster id.  After the
    sweeps converge (or ``max_iter`` is hit), clusters are split into
    connected components and components below ``a_t`` are attached to the
    adjacent cluster with maximal area-weighted similarity at cluster scale.
    """
    if len(grid) == 0:
        raise ValueError("empty grid")
    if a_t <= 0:
        raise ValueError("target area must be positive")
    if npp is None:
        npp = grid.npp()
    npp = np.asarray(npp, dtype=float)
    gdd = np.asarray(grid.gdd, dtype=float)
    if npp_scale is None:
        npp_scale = float(np.std(npp)) or 1.0
    if gdd_scale is None:
        gdd_scale = float(np.std(gdd)) or 1.0

    neighbors = neighbor_lists(grid, connectivity)
    area = grid.area
    n = len(grid)
    labels = np.arange(n)
    cluster_area = area.astype(float).copy()

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        changed = 0
        for c in range(n):
            if not neighbors[c]:
                continue
            best_label = -1
            best_score = -1.0
            for nb in neighbors[c]:
                lab = labels[nb]
                w = cluster_area[lab] / (cluster_area[lab] + a_t)
                score = w * similarity(npp[c], gdd[c], npp[nb], gdd[nb],
                                       npp_scale, gdd_scale)
                if score > best_score or (score == best_score and lab < best_label):
                    best_score = score
                    best_label = lab
            if best_label >= 0 and best_label != labels[c]:
                cluster_area[labels[c]] -= area[c]
                cluster_area[best_label] += area[c]
                labels[c] = best_label
                changed += 1
        if changed == 0:
            converged = True
            break

    # enforce contiguity: each connected component becomes its own cluster
    comps = []
    for lab in np.unique(labels):
        members = np.nonzero(labels == lab)[0]
        comps.extend(_connected_components(members.tolist(), neighbors))
    comps.sort(key=min)
    labels = np.empty(n, dtype=int)
    for new_lab, comp in enumerate(comps):
        labels[comp] = new_lab

    labels = _merge_small_clusters(labels, area, npp, gdd, neighbors, a_t,
                                   npp_scale, gdd_scale)
    return ClusterResult(labels=labels, converged=converged,
                         n_iterations=iterations)


def _merge_small_clusters(labels, area, npp, gdd, neighbors, a_t,
                          npp_scale, gdd_scale):
    """Attach clusters below the target area to their best adjacent cluster,
    judged by area-weighted similarity of area-weighted cluster means."""
    labels = labels.copy()
    while True:
        labs = np.unique(labels)
        areas = {int(l): float(area[labels == l].sum()) for l in labs}
        small = sorted(l for l, a in areas.items() if a < a_t)
        merged = False
        for lab in small:
            members = np.nonzero(labels == lab)[0]
            adjacent = set()
            for c in members:
                for nb in neighbors[c]:
                    if labels[nb] != lab:
                        adjacent.add(int(labels[nb]))
            if not adjacent:
                continue
            w_l = area[members]
            m_npp = float(np.average(npp[members], weights=w_l))
            m_gdd = float(np.average(gdd[members], weights=w_l))
            best, best_score = -1, -1.0
            for other in sorted(adjacent):
                sel = labels == other
                w_o = area[sel]
                o_npp = float(np.average(npp[sel], weights=w_o))
                o_gdd = float(np.average(gdd[sel], weights=w_o))
                weight = areas[other] / (areas[other] + a_t)
                score = weight * similarity(m_npp, m_gdd, o_npp, o_gdd,
                                            npp_scale, gdd_scale)
                if score > best_score:
                    best, best_score = other, score
            labels[members] = best
            merged = True
            break
        if not merged:
            break
    # relabel to consecutive ids ordered by lowest member cell index
    order = sorted(np.unique(labels), key=lambda l: int(np.nonzero(labels == l)[0][0]))
    remap = {int(old): new for new, old in enumerate(order)}
    return np.array([remap[int(l)] for l in labels])


def shared_edge_km(grid: CellGrid, a: int, b: int) -> float:
    """Length of the shared edge between two grid-adjacent cells (km)."""
    if abs(grid.lon[a] - grid.lon[b]) > 1e-9:       # east-west neighbours
        return KM_PER_DEG * grid.cell_deg           # meridian-aligned edge
    lat_edge = 0.5 * (grid.lat[a] + grid.lat[b])    # north-south neighbours
    return KM_PER_DEG * grid.cell_deg * float(np.cos(np.radians(lat_edge)))


def adjacency(labels, grid: CellGrid, connectivity: int = 4) -> dict:
    """Shared-boundary lengths L_ij (km) between regions, keyed (i, j), i<j."""
    labels = np.asarray(labels)
    lengths: dict[tuple[int, int], float] = {}
    for c, nbs in enumerate(neighbor_lists(grid, 4)):
        for nb in nbs:
            if nb <= c:
                continue
            li, lj = int(labels[c]), int(labels[nb])
            if li == lj:
                continue
            key = (min(li, lj), max(li, lj))
            lengths[key] = lengths.get(key, 0.0) + shared_edge_km(grid, c, nb)
    return lengths


@dataclass
class RegionGraph:
    """Static region geometry consumed by the engine.

    ``edge_i``/``edge_j`` list each undirected adjacency once (i < j);
    ``edge_w`` is the geometric coupling L_ij / sqrt(A_i A_j) in 1/km.
    """

    areas: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_length: np.ndarray
    centroids: np.ndarray = None   # (n, 2) lon/lat; optional for synthetic graphs
    cell_of_region: list = None    # member cell indices per region, optional

    def __post_init__(self):
        self.areas = np.asarray(self.areas, dtype=float)
        self.edge_i = np.asarray(self.edge_i, dtype=int)
        self.edge_j = np.asarray(self.edge_j, dtype=int)
        self.edge_length = np.asarray(self.edge_length, dtype=float)
        if np.any(self.areas <= 0):
            raise ValueError("region areas must be positive")
        if np.any(self.edge_i == self.edge_j):
            raise ValueError("self-edges are not allowed")

    @property
    def n(self) -> int:
        return len(self.areas)

    @property
    def edge_w(self) -> np.ndarray:
        return self.edge_length / np.sqrt(self.areas[self.edge_i] *
                                          self.areas[self.edge_j])

    @classmethod
    def from_labels(cls, labels, grid: CellGrid) -> "RegionGraph":
        labels = np.asarray(labels)
        n = int(labels.max()) + 1
        area_c = grid.area
        areas = np.bincount(labels, weights=area_c, minlength=n)
        cx = np.bincount(labels, weights=area_c * grid.lon, minlength=n) / areas
        cy = np.bincount(labels, weights=area_c * grid.lat, minlength=n) / areas
        edges = adjacency(labels, grid)
        ei = np.array([k[0] for k in sorted(edges)], dtype=int)
        ej = np.array([k[1] for k in sorted(edges)], dtype=int)
        el = np.array([edges[k] for k in sorted(edges)])
        cells = [np.nonzero(labels == l)[0] for l in range(n)]
        return cls(areas=areas, edge_i=ei, edge_j=ej, edge_length=el,
                   centroids=np.column_stack([cx, cy]), cell_of_region=cells)

    @classmethod
    def corridor(cls, n: int, size_km: float = 100.0) -> "RegionGraph":
        """1D chain of n square regions of side ``size_km``, for experiments."""
        areas = np.full(n, size_km ** 2)
        idx = np.arange(n - 1)
        centroids = np.column_stack([np.arange(n) * size_km / KM_PER_DEG,
                                     np.zeros(n)])
        return cls(areas=areas, edge_i=idx, edge_j=idx + 1,
                   edge_length=np.full(n - 1, size_km), centroids=centroids)

    @classmethod
    def random_graph(cls, n: int, rng: np.random.Generator,
                     mean_degree: float = 3.0, size_km: float = 100.0) -> "RegionGraph":
        """Connected random graph with jittered areas, for conservation tests."""
        areas = size_km ** 2 * rng.uniform(0.5, 2.0, size=n)
        edges = {(i - 1, i) for i in range(1, n)}      # spanning chain
        extra = int(n * (mean_degree - 2) / 2)
        while extra > 0:
            i, j = rng.integers(0, n, size=2)
            if i != j and (min(i, j), max(i, j)) not in edges:
                edges.add((int(min(i, j)), int(max(i, j))))
                extra -= 1
        keys = sorted(edges)
        ei = np.array([k[0] for k in keys])
        ej = np.array([k[1] for k in keys])
        lengths = size_km * rng.uniform(0.5, 1.5, size=len(keys))
        return cls(areas=areas, edge_i=ei, edge_j=ej, edge_length=lengths)


def write_region_files(graph: RegionGraph, regions_path, edges_path) -> None:
    """Write the region table and edge list CSVs (stable ordering)."""
    with open(regions_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["id", "area_km2", "centroid_lon", "centroid_lat", "cells"])
        for i in range(graph.n):
            lon, lat = (graph.centroids[i] if graph.centroids is not None
                        else (float("nan"), float("nan")))
            cells = ("" if graph.cell_of_region is None
                     else ";".join(str(c) for c in graph.cell_of_region[i]))
            wr.writerow([i, f"{graph.areas[i]:.6f}", f"{lon:.6f}", f"{lat:.6f}", cells])
    with open(edges_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "j", "length_km"])
        for i, j, l in zip(graph.edge_i, graph.edge_j, graph.edge_length):
            wr.writerow([i, j, f"{l:.6f}"])


def read_region_files(regions_path, edges_path) -> RegionGraph:
    with open(regions_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    areas = np.array([float(r["area_km2"]) for r in rows])
    centroids = np.column_stack([[float(r["centroid_lon"]) for r in rows],
                                 [float(r["centroid_lat"]) for r in rows]])
    cells = []
    for r in rows:
        cells.append(np.array([int(c) for c in r["cells"].split(";")] if r["cells"]
                              else [], dtype=int))
    with open(edges_path, newline="") as fh:
        erows = list(csv.DictReader(fh))
    ei = np.array([int(r["i"]) for r in erows], dtype=int)
    ej = np.array([int(r["j"]) for r in erows], dtype=int)
    el = np.array([float(r["length_km"]) for r in erows])
    return RegionGraph(areas=areas, edge_i=ei, edge_j=ej, edge_length=el,
                       centroids=centroids, cell_of_region=cells)
