"""Truncated N-state spectral data, sum-rule diagnostics and the shape figure of merit.

All quantities are in atomic units (hbar = m = e = 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidSpectra, NegativeResidual


@dataclass(frozen=True)
class UnitSystem:
    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0


ATOMIC_UNITS = UnitSystem()

# hbar^2 / 2m, the total oscillator strength of a single particle
TRK_STRENGTH = ATOMIC_UNITS.hbar**2 / (2.0 * ATOMIC_UNITS.mass)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Energies and the real symmetric transition dipole matrix of N states.

    Parameters
    ----------
    energies : (N,) array_like
        Strictly ascending eigenenergies.
    dipole : (N, N) array_like
        Position matrix elements ``x_ij``; must be exactly symmetric.
    """

    energies: np.ndarray
    dipole: np.ndarray

    def __post_init__(self):
        energies = np.array(self.energies, dtype=float)
        dipole = np.array(self.dipole, dtype=float)
        if energies.ndim != 1 or energies.size < 2:
            raise InvalidSpectra("need at least 2 energies in a 1-D array")
        n = energies.size
        if dipole.shape != (n, n):
            raise InvalidSpectra(f"dipole must be {n}x{n}, got {dipole.shape}")
        if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(dipole))):
            raise InvalidSpectra("non-finite entries")
        bad = np.argwhere(dipole != dipole.T)
        if bad.size:
            i, j = bad[0]
            raise InvalidSpectra(f"dipole not symmetric at ({i},{j})")
        steps = np.diff(energies)
        if np.any(steps <= 0):
            k = int(np.argmax(steps <= 0)) + 1
            raise InvalidSpectra(f"energies not strictly ascending at index {k}")
        energies.flags.writeable = False
        dipole.flags.writeable = False
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "dipole", dipole)

    @property
    def num_states(self) -> int:
        return self.energies.size

    @property
    def e10(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def x_max(self) -> float:
        """Largest ground-to-first transition moment allowed by the sum rules."""
        return ATOMIC_UNITS.hbar / np.sqrt(2.0 * ATOMIC_UNITS.mass * self.e10)

    def transition_energies(self) -> np.ndarray:
        """Matrix ``E_nl = E_n - E_l``."""
        return self.energies[:, None] - self.energies[None, :]

    def dipole_bar(self) -> np.ndarray:
        """Dipole matrix with the ground-state expectation removed from the diagonal."""
        return self.dipole - self.dipole[0, 0] * np.eye(self.num_states)

    def scale_free(self) -> ScaleFreeSpectra:
        return ScaleFreeSpectra(
            e=self.energies / self.e10, xi=self.dipole / self.x_max, x_max=self.x_max
        )

    def truncate(self, n: int) -> SpectralData:
        return SpectralData(self.energies[:n], self.dipole[:n, :n])

    def to_dict(self) -> dict:
        return {"energies": self.energies.tolist(), "dipole": self.dipole.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> SpectralData:
        try:
            return cls(doc["energies"], doc["dipole"])
        except KeyError as exc:
            raise InvalidSpectra(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpectra):
                raise
            raise InvalidSpectra(f"malformed spectra: {exc}") from None

    def to_json(self) -> str:
        # repr of a float is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> SpectralData:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidSpectra(f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidSpectra("top-level JSON value must be an object")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> SpectralData:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True, eq=False)
class ScaleFreeSpectra:
    """Energies in units of E_10 and dipoles in units of x_max."""

    e: np.ndarray
    xi: np.ndarray
    x_max: float

    def to_spectra(self, e10: float) -> SpectralData:
        return SpectralData(self.e * e10, self.xi * self.x_max)


def rescale(s: SpectralData, lam: float, offset: float = 0.0) -> SpectralData:
    """Width rescaling ``x -> lam x``; energies go to ``E / lam**2``.

    ``offset`` is added to every energy first, which leaves all differences alone.
    """
    return SpectralData((s.energies + offset) / lam**2, s.dipole * lam)


def trk_residual(s: SpectralData) -> np.ndarray:
    """Generalized Thomas-Reiche-Kuhn deviation matrix.

    ``S_pq = sum_n (E_n - (E_p + E_q)/2) x_pn x_nq - (hbar^2/2m) delta_pq``.
    A spectrally complete system gives zero; truncation shows up in the
    high-index rows.
    """
    e = s.energies
    x = s.dipole
    ex = x * e[None, :]  # x_pn E_n
    s_mat = ex @ x - 0.5 * (e[:, None] + e[None, :]) * (x @ x)
    return s_mat - TRK_STRENGTH * np.eye(s.num_states)


def complete_dipole_row(s: SpectralData, target_state: int, tol: float = 1e-12) -> float:
    """Magnitude of ``x_{0,target}`` that saturates the ground-state sum rule.

    Residual strengths within ``tol * hbar^2/2m`` below zero are treated as zero.
    """
    n = s.num_states
    if not 0 < target_state < n:
        raise IndexError(f"target_state must be in 1..{n - 1}")
    e0 = s.energies - s.energies[0]
    mask = np.ones(n, dtype=bool)
    mask[target_state] = False
    mask[0] = False
    residual = TRK_STRENGTH - float(np.sum(e0[mask] * s.dipole[0, mask] ** 2))
    if residual < -tol * TRK_STRENGTH:
        raise NegativeResidual(
            f"ground-state sum rule over-saturated by {-residual:.3e} before state {target_state}"
        )
    return float(np.sqrt(max(residual, 0.0) / e0[target_state]))


def with_completed_row(s: SpectralData, target_state: int) -> SpectralData:
    """Copy of ``s`` with ``x_{0,target}`` set (positive root) from the sum rule."""
    value = complete_dipole_row(s, target_state)
    dipole = s.dipole.copy()
    dipole[0, target_state] = dipole[target_state, 0] = value
    return SpectralData(s.energies, dipole)


def fom(calc: SpectralData, init: SpectralData) -> float:
    """Scale-free sum-of-squares mismatch between two dipole matrices.

    Each matrix is reduced by its own ``x_max``, so width rescaling of either
    argument leaves the value unchanged.
    """
    if calc.num_states != init.num_states:
        raise DimensionMismatch(
            f"state counts differ: {calc.num_states} vs {init.num_states}"
        )
    a = (calc.dipole_bar() / calc.x_max) ** 2
    b = (init.dipole_bar() / init.x_max) ** 2
    return float(np.sum((a - b) ** 2))


def normalized_fom(f: float, n_states: int) -> float:
    return f / n_states**2
