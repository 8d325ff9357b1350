"""Global model parameters and scenario definitions."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace


@dataclass
class ParameterSet:
    """Global parameters of the sociocultural model.

    Rate coefficients are per year; densities are persons per km^2.
    ``sigma_t`` defaults to 100x ``sigma_p`` (information travels about two
    orders of magnitude faster than people).
    """

    mu: float = 0.004          # growth coefficient, 1/a
    rho: float = 0.02          # loss coefficient, 1/a per (persons/km^2)
    gamma: float = 0.06        # environmental-impact coefficient
    omega: float = 0.004       # organisational-overhead coefficient
    t_lit: float = 12.0        # technology scale of loss mitigation
    delta_t: float = 2.0       # flexibility of the technology trait
    delta_q: float = 8.0       # flexibility of the agropastoral share
    delta_f: float = 2.0       # flexibility of the realized-economies fraction
    sigma_p: float = 0.01    # demic exchange coefficient
    sigma_t: float = 1.0      # cultural exchange coefficient
    npp_f: float = 1100.0      # NPP of peak food extraction, g m^-2 a^-1
    npp_n: float = 550.0       # NPP of peak economy diversity, g m^-2 a^-1
    cae_max: float = 8.0       # continental potential of the largest continent
    gdd_ref: float = 1500.0    # growing degree days of full temperature release
    t_min: float = 0.05        # technology floor
    q0: float = 0.04           # initial agropastoral share
    n0: float = 0.25           # initial established agropastoral economies
    p0: float = 0.01           # initial population density, persons/km^2
    exchange_q: bool = False   # whether cultural diffusion also carries Q

    def __post_init__(self):
        for fld in fields(self):
            if fld.type == "float" and getattr(self, fld.name) < 0:
                raise ValueError(f"parameter {fld.name} must be nonnegative")

    def with_overrides(self, **kwargs) -> "ParameterSet":
        return replace(self, **kwargs)


MODES = ("mixed", "demic-only", "cultural-only", "no-exchange")


@dataclass
class Scenario:
    """Run control: mode, time axis (sim BC), step size.

    Time advances toward smaller BC values; ``start_year`` must exceed
    ``end_year`` on the BC axis.
    """

    mode: str = "mixed"
    start_year: float = 9500.0   # sim BC
    end_year: float = 3500.0     # sim BC
    dt: float = 5.0              # years
    output_interval: float = 50.0    # years between trajectory snapshots
    climate_interval: float = 100.0  # years between potential refreshes
    guard_fraction: float = 1.0      # blow-up guard: max |rate|*dt per scale unit
    t90_mode: str = "relative"       # "relative": 0.9*Q_final; "absolute": 0.9
    seed_region: int | None = None   # optional region whose initial T is raised
    seed_t: float = 6.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.start_year > self.end_year:
            raise ValueError("start_year must be later (larger BC) than end_year")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def duration(self) -> float:
        return self.start_year - self.end_year

    def effective_params(self, params: ParameterSet) -> ParameterSet:
        """Apply mode switches and explicit overrides to a parameter set."""
        p = params.with_overrides(**self.overrides) if self.overrides else params
        if self.mode == "demic-only":
            p = p.with_overrides(sigma_t=0.0)
        elif self.mode == "cultural-only":
            p = p.with_overrides(sigma_p=0.0)
        elif self.mode == "no-exchange":
            p = p.with_overrides(sigma_p=0.0, sigma_t=0.0)
        return p
