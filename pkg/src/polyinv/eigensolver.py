"""Finite-difference solver for bound states of 1D potentials.

The kinetic term is the second-order central difference with hbar = m = 1 and
Dirichlet walls at the grid ends.  Grid points where the potential is infinite
are removed from the interior, so a clipped potential gets its hard wall at the
first finite point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import eigh_tridiagonal

from .errors import InsufficientGrid, NoConfinement, UnresolvedStates
from .spectra import ATOMIC_UNITS, SpectralData

MAX_WIDTH = 1e6
MAX_POINTS = 400_001
MIN_POINTS = 2_001
# h * k_max on automatically sized grids; relative eigenvalue error ~ (h k)^2 / 12
PHASE_STEP = 0.015
WALL_FACTOR = 200.0


# --------------------------------------------------------------------------- potentials


@dataclass(frozen=True)
class Harmonic:
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * ATOMIC_UNITS.mass * self.omega**2 * x**2

    @property
    def left_wall(self):
        return None


@dataclass(frozen=True)
class ClippedHarmonic:
    """Harmonic well for x > 0, infinite for x <= 0."""

    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, 0.5 * ATOMIC_UNITS.mass * self.omega**2 * x**2, np.inf)

    @property
    def left_wall(self):
        return 0.0


@dataclass(frozen=True)
class HalfPower:
    """``V = x**eta`` for x > 0, infinite for x <= 0."""

    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return np.where(x > 0, np.power(np.where(x > 0, x, 1.0), self.eta), np.inf)

    @property
    def left_wall(self):
        return 0.0


@dataclass(frozen=True, eq=False)
class PolynomialPotential:
    """``V = sum_q a_q (x - c)**q``, infinite outside ``boundaries`` when set."""

    coeffs: np.ndarray
    center: float = 0.0
    boundaries: tuple[float, float] | None = None

    def __post_init__(self):
        coeffs = np.atleast_1d(np.array(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", coeffs)
        if self.boundaries is not None:
            lo, hi = (float(b) for b in self.boundaries)
            if not lo < hi:
                raise ValueError("boundaries must satisfy x_left < x_right")
            object.__setattr__(self, "boundaries", (lo, hi))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            v = npoly.polyval(x - self.center, self.coeffs)
        if self.boundaries is not None:
            lo, hi = self.boundaries
            v = np.where((x < lo) | (x > hi), np.inf, v)
        return v

    def derivative(self) -> PolynomialPotential:
        return PolynomialPotential(npoly.polyder(self.coeffs), self.center)

    def with_boundaries(self, x_left: float, x_right: float) -> PolynomialPotential:
        return PolynomialPotential(self.coeffs, self.center, (x_left, x_right))

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def left_wall(self):
        return None if self.boundaries is None else self.boundaries[0]

    def to_dict(self) -> dict:
        return {
            "coeffs": self.coeffs.tolist(),
            "center": self.center,
            "boundaries": None if self.boundaries is None else list(self.boundaries),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> PolynomialPotential:
        b = doc.get("boundaries")
        return cls(doc["coeffs"], doc.get("center", 0.0), None if b is None else tuple(b))


@dataclass(frozen=True, eq=False)
class TabulatedGrid:
    """Potential given at sample points; linear in between, infinite outside."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ValueError("x and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("tabulated x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = np.interp(x, self.x, self.values)
        return np.where((x < self.x[0]) | (x > self.x[-1]), np.inf, v)

    @property
    def left_wall(self):
        return float(self.x[0])

    @classmethod
    def from_csv(cls, path) -> TabulatedGrid:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        return cls(data[:, 0], data[:, 1])


def evaluate_potential(p, x: float) -> float:
    """Scalar potential value; ``math.inf`` is the infinite sentinel."""
    return float(p(x))


# --------------------------------------------------------------------------- grids and states


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    num_points: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be less than x_max")
        if self.num_points < 64:
            raise ValueError("num_points must be at least 64")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.num_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.num_points)


@dataclass(frozen=True, eq=False)
class EigenSolution:
    grid: GridSpec
    energies: np.ndarray
    wavefunctions: np.ndarray = field(repr=False)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def num_states(self) -> int:
        return self.energies.size

    def to_csv(self, path) -> None:
        write_wavefunctions_csv(self, path)


def _wall_beyond(p, x_edge: float, step: float) -> bool:
    return not np.isfinite(p(x_edge + step))


def solve(p, g: GridSpec, num_states: int, check_walls: bool = True) -> EigenSolution:
    """Lowest ``num_states`` eigenpairs of ``-psi''/2 + V psi = E psi`` on ``g``.

    Raises
    ------
    InsufficientGrid
        Fewer interior points than requested states, or more states than
        ``num_points / 8``.
    UnresolvedStates
        The top state reaches the potential at an artificial grid end.  Ends
        backed by an infinite potential are physical walls and are not checked.
    """
    k = int(num_states)
    if k < 1:
        raise ValueError("num_states must be positive")
    if k > g.num_points // 8:
        raise InsufficientGrid(f"{k} states need at least {8 * k} grid points")
    x = g.x
    h = g.h
    v = np.asarray(p(x), dtype=float)
    v = np.where(np.isnan(v), np.inf, v)
    kinetic = ATOMIC_UNITS.hbar**2 / (2.0 * ATOMIC_UNITS.mass * h * h)
    # points this far above the kinetic scale are walls on this grid; keeping
    # them would inflate the matrix norm and with it the eigenvalue error
    wall = v > WALL_FACTOR * kinetic
    interior = np.arange(1, g.num_points - 1)
    interior = interior[~wall[interior]]
    if interior.size < k:
        raise InsufficientGrid(f"only {interior.size} interior points for {k} states")

    diag = 2.0 * kinetic + v[interior]
    # points separated by an excluded (infinite) point are decoupled
    off = np.where(np.diff(interior) == 1, -kinetic, 0.0)
    energies, vecs = eigh_tridiagonal(
        diag, off, select="i", select_range=(0, k - 1), check_finite=False
    )

    psi = np.zeros((k, g.num_points))
    psi[:, interior] = vecs.T
    psi /= np.sqrt(h * np.sum(psi * psi, axis=1))[:, None]
    # fix the sign: first appreciable lobe from the left is positive
    for row in psi:
        big = np.flatnonzero(np.abs(row) > 1e-3 * np.abs(row).max())
        if row[big[0]] < 0:
            row *= -1.0

    if check_walls:
        edges = []
        if not _wall_beyond(p, g.x_min, -h):
            edges.append(v[interior[0]])
        if not _wall_beyond(p, g.x_max, h):
            edges.append(v[interior[-1]])
        if edges and energies[-1] > min(edges):
            raise UnresolvedStates(
                f"E_{k - 1} = {energies[-1]:.6g} exceeds the potential {min(edges):.6g} "
                "at the grid edge"
            )
    return EigenSolution(g, energies, psi)


def extract_spectra(sol: EigenSolution, num_states: int | None = None) -> SpectralData:
    """Energies and trapezoid-rule dipole matrix of the lowest states."""
    n = sol.num_states if num_states is None else int(num_states)
    if n > sol.num_states:
        raise ValueError(f"asked for {n} states, solution has {sol.num_states}")
    psi = sol.wavefunctions[:n]
    x = sol.x
    # endpoints vanish, so the trapezoid rule is h * sum
    d = sol.grid.h * (psi * x) @ psi.T
    d = 0.5 * (d + d.T)
    return SpectralData(sol.energies[:n].copy(), d)


def momentum_consistency(sol: EigenSolution, s: SpectralData) -> float:
    """Largest gap between grid momentum elements and ``i (m/hbar) E_nl x_nl``.

    Both sides are purely imaginary for real states; compared via their
    imaginary parts.  The grid derivative is the central difference.
    """
    n = s.num_states
    psi = sol.wavefunctions[:n]
    h = sol.grid.h
    dpsi = np.zeros_like(psi)
    dpsi[:, 1:-1] = (psi[:, 2:] - psi[:, :-2]) / (2.0 * h)
    # Im p_nl = -hbar <n|d/dx|l>
    p_grid = -ATOMIC_UNITS.hbar * h * psi @ dpsi.T
    # from [H, x] = -i hbar p / m with E_nl = E_n - E_l
    p_rel = (ATOMIC_UNITS.mass / ATOMIC_UNITS.hbar) * s.transition_energies() * s.dipole
    return float(np.max(np.abs(p_grid - p_rel)))


# --------------------------------------------------------------------------- automatic grids


def _step_for(e_top: float, v_min: float) -> float:
    k_max = math.sqrt(2.0 * ATOMIC_UNITS.mass * max(e_top - v_min, 1e-300)) / ATOMIC_UNITS.hbar
    return PHASE_STEP / k_max


def _num_points(width: float, h: float, num_states: int) -> int:
    n = int(math.ceil(width / h)) + 1
    return int(min(max(n, MIN_POINTS, 8 * num_states + 1), MAX_POINTS))


def _finite_min(p, lo: float, hi: float) -> float:
    v = np.asarray(p(np.linspace(lo, hi, 4097)), dtype=float)
    finite = v[np.isfinite(v)]
    return float(finite.min()) if finite.size else 0.0


def _initial_window(p) -> tuple[float, float]:
    if isinstance(p, (Harmonic, ClippedHarmonic)):
        a = 2.0 / math.sqrt(ATOMIC_UNITS.mass * p.omega)
    elif isinstance(p, HalfPower):
        a = 2.0
    else:
        a = 1.0
    if isinstance(p, PolynomialPotential):
        return p.center - a, p.center + a
    wall = getattr(p, "left_wall", None)
    if wall is not None:
        return wall, wall + a
    return -a, a


def _fixed_grid(p, num_states: int) -> GridSpec | None:
    if isinstance(p, PolynomialPotential) and p.boundaries is not None:
        lo, hi = p.boundaries
    elif isinstance(p, TabulatedGrid):
        lo, hi = float(p.x[0]), float(p.x[-1])
    else:
        return None
    return bounded_grid(p, lo, hi, num_states)


def bounded_grid(p, lo: float, hi: float, num_states: int) -> GridSpec:
    """Grid on a walled interval, resolved for the top requested state."""
    v_min = _finite_min(p, lo, hi)
    g = GridSpec(lo, hi, _num_points(hi - lo, (hi - lo) / 4096, num_states))
    e_top = float(solve(p, g, num_states, check_walls=False).energies[-1])
    return GridSpec(lo, hi, _num_points(hi - lo, _step_for(e_top, v_min), num_states))


def _expand(p, num_states, max_width, accept, what):
    """Double the domain until ``accept(sol, prev_energies, grid)`` holds.

    The grid step is held fixed between doublings so energies from successive
    windows are comparable; it is re-tuned only when the top energy estimate
    moves by more than a factor that would change the step by 25%.
    """
    fixed = _fixed_grid(p, num_states)
    if fixed is not None:
        return fixed
    lo, hi = _initial_window(p)
    symmetric = getattr(p, "left_wall", None) is None or isinstance(p, PolynomialPotential)
    v_min = _finite_min(p, lo, hi)
    # particle-in-a-box estimate for the first window
    e_est = v_min + 0.5 * (math.pi * num_states / (hi - lo)) ** 2
    h = _step_for(e_est, v_min)
    cells = _num_points(hi - lo, h, num_states) - 1
    prev = None
    while True:
        if hi - lo > max_width:
            raise NoConfinement(f"{num_states} states not {what} within width {max_width:g}")
        # doubling the cell count with the width keeps h exactly fixed
        g = GridSpec(lo, hi, min(cells, MAX_POINTS - 1) + 1)
        try:
            sol = solve(p, g, num_states)
        except UnresolvedStates:
            sol = None
        if sol is not None:
            v_min = min(v_min, _finite_min(p, lo, hi))
            h_new = _step_for(float(sol.energies[-1]), v_min)
            if prev is not None and accept(sol, prev, g):
                return g
            if abs(h_new - h) > 0.25 * h:
                h = h_new
                cells = _num_points(hi - lo, h, num_states) - 1
                prev = None
            else:
                prev = sol.energies
        if symmetric:
            mid = 0.5 * (lo + hi)
            half = hi - lo
            lo, hi = mid - half, mid + half
        else:
            hi = lo + 2.0 * (hi - lo)
        cells *= 2


def _open_ends(p, g: GridSpec):
    ends = []
    if not _wall_beyond(p, g.x_min, -g.h):
        ends.append(0)
    if not _wall_beyond(p, g.x_max, g.h):
        ends.append(-1)
    return ends


def auto_grid(
    p,
    num_states: int,
    kappa: float = 10.0,
    max_width: float = MAX_WIDTH,
    rtol: float = 1e-6,
) -> GridSpec:
    """Grid whose open ends sit where ``V >= kappa * E_top``.

    The domain is doubled from a small starting window until the top state is
    clear of the artificial walls, the potential at every open end is at least
    ``kappa`` times the top energy (both measured from the potential minimum),
    and the top energy has changed by less than ``rtol`` relative.  Ends
    backed by an infinite potential count as physical walls.
    """

    def accept(sol, prev, g):
        e_top = float(sol.energies[-1])
        x = g.x
        v = np.asarray(p(x), dtype=float)
        v_min = float(v[np.isfinite(v)].min())
        threshold = v_min + kappa * (e_top - v_min)
        ends_ok = all(v[i] >= threshold for i in _open_ends(p, g))
        return ends_ok and abs(e_top - prev[-1]) <= rtol * abs(e_top)

    return _expand(p, num_states, max_width, accept, f"confined by kappa={kappa}")


def converged_grid(
    p,
    num_states: int,
    rtol: float = 1e-10,
    tail: float = 1e-8,
    max_width: float = MAX_WIDTH,
) -> GridSpec:
    """Grid sized by convergence instead of a potential threshold.

    Doubles the domain until every requested energy moves by less than
    ``rtol`` (relative to the level span) and the top wavefunction one tenth
    of the way in from each open end is below ``tail`` times its peak.  Needed
    for slowly rising potentials such as ``x**0.05``, where a ``kappa * E``
    threshold lies far beyond any usable width.
    """

    def accept(sol, prev, g):
        top = np.abs(sol.wavefunctions[-1])
        m = max(g.num_points // 10, 2)
        at_ends = [top[m] if i == 0 else top[-m - 1] for i in _open_ends(p, g)]
        span = max(float(sol.energies[-1] - sol.energies[0]), 1e-300)
        return (
            float(np.max(np.abs(sol.energies - prev))) <= rtol * span
            and max(at_ends, default=0.0) <= tail * top.max()
        )

    return _expand(p, num_states, max_width, accept, "converged")


GRID_POLICIES = {"kappa": auto_grid, "converged": converged_grid}


# --------------------------------------------------------------------------- file formats


def write_wavefunctions_csv(sol: EigenSolution, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"psi_{n}" for n in range(sol.num_states)])
        for j, xj in enumerate(sol.x):
            w.writerow([f"{xj:.17g}"] + [f"{v:.17g}" for v in sol.wavefunctions[:, j]])


def load_tabulated(path) -> TabulatedGrid:
    return TabulatedGrid.from_csv(path)
