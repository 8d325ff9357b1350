"""neospread: regional simulator of the Neolithic transition.

Adaptive sociocultural traits evolve on a biogeographic region graph;
agropastoralism spreads by local adoption, cultural diffusion, and demic
diffusion, with an analysis layer for lag-distance and source-attribution
statistics.
"""

from .params import ParameterSet, Scenario
from .climate import (Potentials, miami_npp, temperature_limitation, fep, lae,
                      continental_cae)
from .dynamics import (RegionStates, subsistence_intensity, growth_rate,
                       fitness_gradients, trait_rates, population_rate,
                       is_neolithic)
from .regions import RegionGraph, build_regions, similarity
from .exchange import influence_flux, cultural_diffusion, demic_diffusion, SourceLedger
from .engine import run, step, initialize, EngineError, TransitionRecord
from .analysis import great_circle_km, lag_distance, broaden_timing, focus_histogram

__version__ = "0.1.0"
