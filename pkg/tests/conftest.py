import numpy as np
import pytest

from neospread.climate import CellGrid, Potentials
from neospread.params import ParameterSet, Scenario
from neospread.regions import RegionGraph


@pytest.fixture
def params():
    return ParameterSet()


def make_corridor(n=40, size_km=100.0, pae=2.0, fep=0.9, tli=1.0):
    """Homogeneous 1D chain with uniform suitability."""
    graph = RegionGraph.corridor(n, size_km)
    pot = Potentials(fep=np.full(n, fep), tli=np.full(n, tli),
                     pae=np.full(n, pae))
    return graph, pot


def corridor_scenario(mode, duration=6500.0, dt=5.0, seed_region=0,
                      seed_t=16.0, **kwargs):
    return Scenario(mode=mode, start_year=9500.0, end_year=9500.0 - duration,
                    dt=dt, seed_region=seed_region, seed_t=seed_t, **kwargs)


def make_grid(nx, ny, t=10.0, p=1.0, gdd=2000.0, cell_deg=0.5, lat0=0.0):
    """Synthetic regular raster; scalar climate values are broadcast."""
    lon = np.repeat(np.arange(nx) * cell_deg, ny)
    lat = np.tile(lat0 + np.arange(ny) * cell_deg, nx)
    n = nx * ny
    return CellGrid(lon=lon, lat=lat,
                    t=np.broadcast_to(np.asarray(t, float), (n,)).copy(),
                    p=np.broadcast_to(np.asarray(p, float), (n,)).copy(),
                    gdd=np.broadcast_to(np.asarray(gdd, float), (n,)).copy(),
                    cell_deg=cell_deg)


def onset_years(result):
    """Map region -> onset in years since run start."""
    start = result.scenario.start_year
    return {rec.region: start - rec.onset_bc for rec in result.transitions}
