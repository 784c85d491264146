"""Static first hyperpolarizability by sum over states, and its fundamental limit."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .spectra import ATOMIC_UNITS, SpectralData


@dataclass(frozen=True)
class ResponseReport:
    beta: float
    beta_max: float
    beta_int: float
    num_states_used: int

    def to_dict(self) -> dict:
        return asdict(self)


def beta_sos(s: SpectralData) -> float:
    """Zero-frequency sum-over-states hyperpolarizability.

    ``beta = 3 e^3 sum_{n,m>=1} x_0n xbar_nm x_m0 / (E_n0 E_m0)`` with
    ``xbar_nm = x_nm - delta_nm x_00``.
    """
    e_n0 = s.energies[1:] - s.energies[0]
    t = s.dipole[0, 1:] / e_n0
    xbar = s.dipole_bar()[1:, 1:]
    return float(3.0 * ATOMIC_UNITS.charge**3 * (t @ xbar @ t))


def beta_limit(e10: float, num_electrons: int = 1) -> float:
    """Three-level fundamental limit ``3^(1/4) (e hbar/sqrt m)^3 N^(3/2) / E_10^(7/2)``."""
    if e10 <= 0:
        raise ValueError("e10 must be positive")
    u = ATOMIC_UNITS
    scale = (u.charge * u.hbar / np.sqrt(u.mass)) ** 3
    return float(3.0**0.25 * scale * num_electrons**1.5 / e10**3.5)


def beta_intrinsic(s: SpectralData, num_electrons: int = 1) -> ResponseReport:
    beta = beta_sos(s)
    bmax = beta_limit(s.e10, num_electrons)
    return ResponseReport(beta, bmax, beta / bmax, s.num_states)
