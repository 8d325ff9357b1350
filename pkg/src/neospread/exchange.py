"""Influence-driven interregional exchange.

Differences in influence (the product T*P) between adjacent regions drive a
first-order relaxation flux.  Two channels share the same geometry but have
separate coefficients: cultural diffusion moves trait values only, demic
diffusion moves people (mass-conserving) and carries their traits along.
A source ledger decomposes every region's agropastoral growth into demic,
cultural, and local channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import RegionStates
from .params import ParameterSet
from .regions import RegionGraph


def influence_flux(tp_i, tp_j, w, sigma):
    """Directed relaxation rate f_ij (1/a) for the receiver i of pair (i, j).

    f_ij = sigma * w * (<TP>_ij - T_i P_i) with the pairwise mean as the
    spatial average; ``w`` is the geometric factor L_ij / sqrt(A_i A_j).
    Positive when j's influence exceeds i's; antisymmetric by construction.
    """
    return sigma * w * (0.5 * (tp_i + tp_j) - tp_i)


def edge_fluxes(states: RegionStates, graph: RegionGraph, sigma: float) -> np.ndarray:
    """Flux f_ij for every stored edge (i, j); f_ji is its negation."""
    tp = states.T * states.P
    return influence_flux(tp[graph.edge_i], tp[graph.edge_j], graph.edge_w, sigma)


def _receiver_donor(graph: RegionGraph, flux: np.ndarray):
    """Split stored edges into (receiver, donor, positive rate) triples."""
    pos = flux > 0
    neg = flux < 0
    recv = np.concatenate([graph.edge_i[pos], graph.edge_j[neg]])
    donor = np.concatenate([graph.edge_j[pos], graph.edge_i[neg]])
    rate = np.concatenate([flux[pos], -flux[neg]])
    return recv, donor, rate


@dataclass
class CulturalIncrements:
    dT: np.ndarray
    df: np.ndarray
    dQ: np.ndarray   # zero unless the Q-exchange switch is on


def cultural_diffusion(states: RegionStates, graph: RegionGraph,
                       flux: np.ndarray, exchange_q: bool = False) -> CulturalIncrements:
    """Trait rates from information exchange: receivers (positive flux) pull
    toward the donor's trait values; donors are unaffected."""
    recv, donor, rate = _receiver_donor(graph, flux)
    n = states.n

    def pull(x):
        out = np.zeros(n)
        np.add.at(out, recv, rate * (x[donor] - x[recv]))
        return out

    dq = pull(states.Q) if exchange_q else np.zeros(n)
    return CulturalIncrements(dT=pull(states.T), df=pull(states.f), dQ=dq)


@dataclass
class DemicIncrements:
    dP: np.ndarray             # persons/km^2/a, conserves sum(P*A) exactly
    dT: np.ndarray
    dQ: np.ndarray
    df: np.ndarray
    agro_mass_rate: np.ndarray  # persons/a of agropastoralists entering each region


def demic_diffusion(states: RegionStates, graph: RegionGraph, flux: np.ndarray,
                    areas: np.ndarray, dt: float | None = None) -> DemicIncrements:
    """Mass-conserving migration with trait carryover.

    For each receiving pair the absolute migrant rate is M = f_ij P_j A_j
    (persons/a); the receiver gains M/A_i, the donor loses M/A_j, so the
    total population mass is conserved pair by pair.  Receiver traits blend
    toward the donor in proportion to the migrant-to-resident mass ratio,
    so identical traits produce no drift.  An (edge case) empty receiver
    adopts the donor traits directly over the step, which requires ``dt``.
    """
    recv, donor, rate = _receiver_donor(graph, flux)
    n = states.n
    mass = states.P * areas
    migrants = rate * mass[donor]          # persons/a

    dP = np.zeros(n)
    np.add.at(dP, recv, migrants / areas[recv])
    np.add.at(dP, donor, -migrants / areas[donor])

    denom = mass[recv]
    if np.any(denom <= 0):
        if dt is None:
            raise ValueError("dt required when a receiving region is empty")
        incoming = np.zeros(n)
        np.add.at(incoming, recv, migrants)
        denom = np.where(denom > 0, denom, incoming[recv] * dt)
    weight = np.where(denom > 0, migrants / np.where(denom > 0, denom, 1.0), 0.0)

    def blend(x):
        out = np.zeros(n)
        np.add.at(out, recv, weight * (x[donor] - x[recv]))
        return out

    agro = np.zeros(n)
    np.add.at(agro, recv, states.Q[donor] * migrants)
    return DemicIncrements(dP=dP, dT=blend(states.T), dQ=blend(states.Q),
                           df=blend(states.f), agro_mass_rate=agro)


@dataclass
class SourceLedger:
    """Cumulative per-region attribution of agropastoral population mass and
    technology increments to demic, cultural, and local channels."""

    pop_demic: np.ndarray
    pop_cultural: np.ndarray
    pop_local: np.ndarray
    tech_migr: np.ndarray
    tech_exch: np.ndarray
    tech_local: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "SourceLedger":
        return cls(*(np.zeros(n) for _ in range(6)))

    def copy(self) -> "SourceLedger":
        return SourceLedger(*(getattr(self, f.name).copy()
                              for f in self.__dataclass_fields__.values()))

    def pop_shares(self) -> np.ndarray:
        """(n, 3) array of demic/cultural/local shares; rows sum to 1 where
        any mass has been attributed, and are zero otherwise."""
        stacked = np.column_stack([self.pop_demic, self.pop_cultural, self.pop_local])
        total = stacked.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            shares = np.where(total > 0, stacked / total, 0.0)
        return shares

    def immigrant_fraction(self) -> np.ndarray:
        return self.pop_shares()[:, 0]

    def tech_shares(self) -> np.ndarray:
        stacked = np.column_stack([self.tech_migr, self.tech_exch, self.tech_local])
        total = stacked.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, stacked / total, 0.0)


def attribute_sources(ledger: SourceLedger, *, agro_mass_before, agro_mass_after,
                      demic_mass, cultural_mass, tech_migr, tech_exch,
                      tech_local) -> None:
    """Decompose one step's agropastoral mass increase into channels.

    ``demic_mass`` is the migrant agropastoral mass Q_j * M * dt of the step,
    ``cultural_mass`` the increase attributable to culturally exchanged Q.
    The local channel takes the residual; if the exchanged channels exceed
    the realized increase they are rebalanced proportionally so the ledger
    stays nonnegative and closed.
    """
    increase = np.maximum(agro_mass_after - agro_mass_before, 0.0)
    demic = np.maximum(demic_mass, 0.0)
    cultural = np.maximum(cultural_mass, 0.0)
    exchanged = demic + cultural
    over = exchanged > increase
    scale = np.ones_like(exchanged)
    scale[over] = increase[over] / exchanged[over]
    demic = demic * scale
    cultural = cultural * scale
    ledger.pop_demic += demic
    ledger.pop_cultural += cultural
    ledger.pop_local += increase - demic - cultural
    ledger.tech_migr += np.maximum(tech_migr, 0.0)
    ledger.tech_exch += np.maximum(tech_exch, 0.0)
    ledger.tech_local += np.maximum(tech_local, 0.0)
