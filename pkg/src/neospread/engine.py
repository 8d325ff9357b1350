"""Time integration of the coupled region system.

Forward-Euler stepping of the local adaptive dynamics plus the two exchange
channels, with clipping to the state invariants, scenario switches, event
detection (Neolithic onset, 90%-completion), and CSV serialization.  The
integration is deterministic: identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import dynamics, exchange
from .climate import Potentials
from .dynamics import RegionStates, NEOLITHIC_Q
from .exchange import SourceLedger
from .params import ParameterSet, Scenario
from .regions import RegionGraph


class EngineError(RuntimeError):
    """Numerical abort; carries the offending region and a state dump."""

    def __init__(self, message: str, region: int | None = None,
                 state: dict | None = None):
        super().__init__(message)
        self.region = region
        self.state = state or {}


def initialize(graph: RegionGraph, potentials: Potentials,
               params: ParameterSet) -> RegionStates:
    """Initial state: 4% farming share, unit (Mesolithic) technology, and
    n0 established economies, i.e. f = n0/PAE clipped to [0, 1]."""
    n = graph.n
    pae = np.asarray(potentials.pae, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(pae > 0, np.minimum(1.0, params.n0 / np.where(pae > 0, pae, 1.0)), 0.0)
    return RegionStates(P=np.full(n, params.p0), T=np.ones(n),
                        Q=np.full(n, params.q0), f=f)


@dataclass
class StepResult:
    states: RegionStates
    rate_p: np.ndarray
    rate_t: np.ndarray
    rate_q: np.ndarray
    rate_f: np.ndarray


def step(states: RegionStates, graph: RegionGraph, potentials: Potentials,
         params: ParameterSet, dt: float,
         ledger: SourceLedger | None = None) -> StepResult:
    """One explicit Euler step; returns the committed (clipped) state.

    When a ledger is given, the step's agropastoral mass increase is
    attributed to its demic/cultural/local sources.
    """
    P, T, Q, f = states.P, states.T, states.Q, states.f
    fep, tli, pae = potentials.fep, potentials.tli, potentials.pae

    r = dynamics.growth_rate(P, T, Q, f, fep, pae, tli, params)
    grads = dynamics.fitness_gradients(P, T, Q, f, fep, pae, tli, params)
    dT_ad, dQ_ad, df_ad = dynamics.trait_rates(grads, params)
    dP_growth = dynamics.population_rate(P, r)

    flux_c = exchange.edge_fluxes(states, graph, params.sigma_t)
    flux_d = exchange.edge_fluxes(states, graph, params.sigma_p)
    cult = exchange.cultural_diffusion(states, graph, flux_c, params.exchange_q)
    demic = exchange.demic_diffusion(states, graph, flux_d, graph.areas, dt)

    rate_p = dP_growth + demic.dP
    rate_t = dT_ad + cult.dT + demic.dT
    rate_q = dQ_ad + cult.dQ + demic.dQ
    rate_f = df_ad + cult.df + demic.df

    for name, rate in (("P", rate_p), ("T", rate_t), ("Q", rate_q), ("f", rate_f)):
        if not np.all(np.isfinite(rate)):
            bad = int(np.nonzero(~np.isfinite(rate))[0][0])
            raise EngineError(
                f"non-finite {name} rate in region {bad}", region=bad,
                state={"P": P[bad], "T": T[bad], "Q": Q[bad], "f": f[bad]})

    new = RegionStates(P=P + dt * rate_p, T=T + dt * rate_t,
                       Q=Q + dt * rate_q, f=f + dt * rate_f)
    new.clip(params.t_min)

    if ledger is not None:
        areas = graph.areas
        exchange.attribute_sources(
            ledger,
            agro_mass_before=Q * P * areas,
            agro_mass_after=new.Q * new.P * areas,
            demic_mass=demic.agro_mass_rate * dt,
            cultural_mass=np.maximum(cult.dQ, 0.0) * P * areas * dt,
            tech_migr=demic.dT * dt,
            tech_exch=cult.dT * dt,
            tech_local=dT_ad * dt,
        )
    return StepResult(states=new, rate_p=rate_p, rate_t=rate_t,
                      rate_q=rate_q, rate_f=rate_f)


def _check_guard(res: StepResult, states: RegionStates, dt: float,
                 frac: float, p_scale: float) -> None:
    """Reject dt if a rate would move an unbounded variable by more than
    ``frac`` of its scale in one step (checked over the first steps only).

    Only P and T are guarded: the box-constrained traits Q and f are kept
    in range by clipping and legitimately saturate within a few steps when
    a region tips over.
    """
    ranges = {
        "T": (res.rate_t, np.maximum(states.T, 1.0)),
        "P": (res.rate_p, np.maximum(states.P, p_scale)),
    }
    for name, (rate, rng) in ranges.items():
        excess = np.abs(rate) * dt - frac * rng
        if np.any(excess > 0):
            bad = int(np.argmax(excess))
            raise EngineError(
                f"stability guard: |d{name}/dt|*dt exceeds {frac:.0%} of range "
                f"in region {bad}; reduce dt", region=bad,
                state={"rate": float(rate[bad]), "dt": dt})


@dataclass
class TransitionRecord:
    region: int
    onset_bc: float           # sim BC of the Q > 0.5 crossing
    t90_bc: float             # sim BC of 90%-completion
    immigrant_fraction: float
    q_final: float


@dataclass
class RunResult:
    scenario: Scenario
    params: ParameterSet            # effective (mode-adjusted) parameters
    graph: RegionGraph
    snap_years_bc: np.ndarray       # snapshot times
    snap_p: np.ndarray              # (n_snap, n_regions)
    snap_t: np.ndarray
    snap_q: np.ndarray
    snap_f: np.ndarray
    snap_n: np.ndarray              # realized economies f * PAE
    q_series: np.ndarray            # (n_steps+1, n) full-resolution Q
    imm_series: np.ndarray          # (n_steps+1, n) cumulative immigrant share
    step_years: np.ndarray          # years since start for the full series
    transitions: list
    ledger: SourceLedger
    final: RegionStates

    def onset_years_bc(self) -> dict[int, float]:
        return {rec.region: rec.onset_bc for rec in self.transitions}


def detect_transitions(step_years, q_series, imm_series, start_year: float,
                       t90_mode: str = "relative") -> list[TransitionRecord]:
    """Locate Q>0.5 and 90%-completion crossings with linear interpolation."""
    records = []
    n = q_series.shape[1]
    for i in range(n):
        q = q_series[:, i]
        onset = _first_crossing(step_years, q, NEOLITHIC_Q)
        if onset is None:
            continue
        q_final = float(q[-1])
        if t90_mode == "absolute":
            thresh = 0.9
        else:
            # floored at the Neolithic threshold so completion never
            # precedes onset
            thresh = max(0.9 * q_final, NEOLITHIC_Q)
        t90 = _first_crossing(step_years, q, thresh)
        if t90 is None:
            continue
        imm = float(np.interp(t90, step_years, imm_series[:, i]))
        records.append(TransitionRecord(
            region=i, onset_bc=start_year - onset, t90_bc=start_year - t90,
            immigrant_fraction=imm, q_final=q_final))
    return records


def _first_crossing(t, x, threshold) -> float | None:
    above = x > threshold
    if not above.any():
        return None
    k = int(np.argmax(above))
    if k == 0:
        return float(t[0])
    x0, x1 = x[k - 1], x[k]
    return float(t[k - 1] + (t[k] - t[k - 1]) * (threshold - x0) / (x1 - x0))


PotentialSource = Union[Potentials, Callable[[float], Potentials]]


def run(scenario: Scenario, graph: RegionGraph, potentials: PotentialSource,
        params: ParameterSet | None = None,
        initial: RegionStates | None = None) -> RunResult:
    """Integrate a scenario from start to end year.

    ``potentials`` is either a static field set or a callable of the sim BC
    year, re-evaluated every ``scenario.climate_interval`` years.
    """
    p = scenario.effective_params(params or ParameterSet())
    get_pot = potentials if callable(potentials) else (lambda year: potentials)

    pot = get_pot(scenario.start_year)
    states = initial.copy() if initial is not None else initialize(graph, pot, p)
    if scenario.seed_region is not None:
        states.T[scenario.seed_region] = scenario.seed_t

    n_steps = int(round(scenario.duration / scenario.dt))
    dt = scenario.dt
    ledger = SourceLedger.zeros(graph.n)

    step_years = np.arange(n_steps + 1) * dt
    q_series = np.empty((n_steps + 1, graph.n))
    imm_series = np.empty((n_steps + 1, graph.n))
    q_series[0] = states.Q
    imm_series[0] = 0.0

    snap_every = max(1, int(round(scenario.output_interval / dt)))
    climate_every = max(1, int(round(scenario.climate_interval / dt)))
    snaps = {"year": [], "P": [], "T": [], "Q": [], "f": [], "N": []}

    def record_snapshot(t_years):
        snaps["year"].append(scenario.start_year - t_years)
        snaps["P"].append(states.P.copy())
        snaps["T"].append(states.T.copy())
        snaps["Q"].append(states.Q.copy())
        snaps["f"].append(states.f.copy())
        snaps["N"].append(states.f * pot.pae)

    record_snapshot(0.0)
    for k in range(n_steps):
        if k > 0 and k % climate_every == 0:
            pot = get_pot(scenario.start_year - k * dt)
        res = step(states, graph, pot, p, dt, ledger)
        if k < 10 and scenario.guard_fraction > 0:
            _check_guard(res, states, dt, scenario.guard_fraction, p.p0)
        states = res.states
        q_series[k + 1] = states.Q
        imm_series[k + 1] = ledger.immigrant_fraction()
        if (k + 1) % snap_every == 0 or k + 1 == n_steps:
            record_snapshot((k + 1) * dt)

    transitions = detect_transitions(step_years, q_series, imm_series,
                                     scenario.start_year, scenario.t90_mode)
    return RunResult(
        scenario=scenario, params=p, graph=graph,
        snap_years_bc=np.array(snaps["year"]),
        snap_p=np.array(snaps["P"]), snap_t=np.array(snaps["T"]),
        snap_q=np.array(snaps["Q"]), snap_f=np.array(snaps["f"]),
        snap_n=np.array(snaps["N"]),
        q_series=q_series, imm_series=imm_series, step_years=step_years,
        transitions=transitions, ledger=ledger, final=states)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def write_trajectory(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["region", "year_bc", "P", "T", "Q", "f", "N"])
        for k, year in enumerate(result.snap_years_bc):
            for i in range(result.graph.n):
                wr.writerow([i, _fmt(year), _fmt(result.snap_p[k, i]),
                             _fmt(result.snap_t[k, i]), _fmt(result.snap_q[k, i]),
                             _fmt(result.snap_f[k, i]), _fmt(result.snap_n[k, i])])


def write_transitions(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["region", "onset_bc", "t90_bc", "immigrant_fraction",
                     "q_final"])
        for rec in result.transitions:
            wr.writerow([rec.region, _fmt(rec.onset_bc), _fmt(rec.t90_bc),
                         _fmt(rec.immigrant_fraction), _fmt(rec.q_final)])


def write_ledger(result: RunResult, path) -> None:
    """Final cumulative source shares per region (population and technology)."""
    pop = result.ledger.pop_shares()
    tech = result.ledger.tech_shares()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["region", "year_bc", "demic_share", "cultural_share",
                     "local_share", "tech_migr_share", "tech_exch_share",
                     "tech_local_share"])
        year = result.scenario.end_year
        for i in range(result.graph.n):
            wr.writerow([i, _fmt(year)] + [_fmt(v) for v in pop[i]] +
                        [_fmt(v) for v in tech[i]])
