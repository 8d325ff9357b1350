"""Per-region sociocultural dynamics.

State variables: population density P, technology T, agropastoral share Q,
and the realized fraction f of the potential agropastoral economies
(N = f * PAE).  Traits follow adaptive dynamics: each trait moves up the
gradient of the relative growth rate, scaled by its flexibility.

All functions are stateless and vectorize over regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParameterSet

NEOLITHIC_Q = 0.5


@dataclass
class RegionStates:
    """Dynamic state arrays, one entry per region."""

    P: np.ndarray   # population density, persons/km^2
    T: np.ndarray   # technology
    Q: np.ndarray   # agropastoral share in [0, 1]
    f: np.ndarray   # realized fraction of potential economies in [0, 1]

    def __post_init__(self):
        for name in ("P", "T", "Q", "f"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).copy())

    def copy(self) -> "RegionStates":
        return RegionStates(self.P, self.T, self.Q, self.f)

    def clip(self, t_min: float) -> None:
        np.maximum(self.P, 0.0, out=self.P)
        np.maximum(self.T, t_min, out=self.T)
        np.clip(self.Q, 0.0, 1.0, out=self.Q)
        np.clip(self.f, 0.0, 1.0, out=self.f)

    @property
    def n(self) -> int:
        return len(self.P)


def subsistence_intensity(T, Q, f, pae, tli):
    """SI = (1-Q) sqrt(T) + Q N T TLI with N = f * pae.

    Unity corresponds to a mature-Mesolithic forager society in an affluent
    environment (Q=0, T=1).
    """
    return (1.0 - Q) * np.sqrt(T) + Q * (f * pae) * T * tli


def growth_rate(P, T, Q, f, fep, pae, tli, params: ParameterSet):
    """Relative growth rate r = (dP/dt)/P.

    r = mu (FEP - gamma sqrt(T) P)(1 - omega T) SI - rho P exp(-T/T_lit).
    """
    si = subsistence_intensity(T, Q, f, pae, tli)
    benefit = fep - params.gamma * np.sqrt(T) * P
    overhead = 1.0 - params.omega * T
    loss = params.rho * P * np.exp(-T / params.t_lit)
    return params.mu * benefit * overhead * si - loss


def fitness_gradients(P, T, Q, f, fep, pae, tli, params: ParameterSet):
    """Closed-form partial derivatives of the growth rate w.r.t. T, Q, f."""
    sqrt_t = np.sqrt(T)
    n_econ = f * pae
    si = (1.0 - Q) * sqrt_t + Q * n_econ * T * tli
    benefit = fep - params.gamma * sqrt_t * P
    overhead = 1.0 - params.omega * T
    dsi_dt = (1.0 - Q) / (2.0 * sqrt_t) + Q * n_econ * tli
    dbenefit_dt = -params.gamma * P / (2.0 * sqrt_t)
    dr_dt = params.mu * (dbenefit_dt * overhead * si
                         - params.omega * benefit * si
                         + benefit * overhead * dsi_dt) \
        + params.rho * P * np.exp(-T / params.t_lit) / params.t_lit
    dr_dq = params.mu * benefit * overhead * (n_econ * T * tli - sqrt_t)
    dr_df = params.mu * benefit * overhead * Q * pae * T * tli
    return dr_dt, dr_dq, dr_df


def trait_rates(gradients, params: ParameterSet):
    """Adaptive-dynamics trait rates dX/dt = delta_X * dr/dX."""
    dr_dt, dr_dq, dr_df = gradients
    return (params.delta_t * dr_dt,
            params.delta_q * dr_dq,
            params.delta_f * dr_df)


def population_rate(P, r):
    """dP/dt = r * P."""
    return r * P


def is_neolithic(Q):
    """A region is Neolithic when agropastoral activity exceeds foraging."""
    return np.asarray(Q) > NEOLITHIC_Q
