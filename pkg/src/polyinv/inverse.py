"""Polynomial potentials from energies and transition moments.

The matrix Schrodinger equation, with momentum eliminated through
``p_nl = -i (m/hbar) E_nl x_nl`` and the expansion centered at ``c = x_00``,
becomes a linear system ``B a = c`` for the coefficients of
``V(x) = sum_q a_q (x - c)^q``.  Within an N-state space, ``B(q)`` is the q-th
power of the shifted dipole matrix.  Only the ``M = N(N+1)/2`` independent
entries of each symmetric matrix enter, which fixes the number of
coefficients.  The system is singular (its rank is at most N) and is solved
in the least-norm sense through an SVD pseudo-inverse.

A high-degree polynomial is a sensible potential only near the well the
spectra describe, so the result is cut down to a bounded well with Dirichlet
walls before it is used.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .eigensolver import PolynomialPotential, bounded_grid, extract_spectra, solve
from .errors import InsufficientGrid, NoConfinement, NoMinimum, UnresolvedStates, ZeroMatrix
from .response import ResponseReport, beta_intrinsic
from .spectra import ATOMIC_UNITS, SpectralData, fom

log = logging.getLogger(__name__)

DEFAULT_KAPPA = 10.0
SCAN_HALFWIDTH = 50.0  # in units of x_max
SCAN_CELLS = 10_000
MAX_CANDIDATES = 8


def triangular_count(n: int) -> int:
    return n * (n + 1) // 2


def index_pairs(n: int) -> list[tuple[int, int]]:
    """Row order (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), ..."""
    return [(l, k) for k in range(n) for l in range(k + 1)]


def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = index_pairs(n)
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def build_b_matrix(s: SpectralData) -> np.ndarray:
    """``B[(l,n), q] = (Xbar^q)_{ln}`` for ``q = 0 .. M-1``."""
    n = s.num_states
    m = triangular_count(n)
    rows, cols = _pair_indices(n)
    xbar = s.dipole_bar()
    b = np.empty((m, m))
    power = np.eye(n)
    for q in range(m):
        b[:, q] = power[rows, cols]
        power = power @ xbar
    return b


def build_c_vector(s: SpectralData) -> np.ndarray:
    """``C_nl = (m/2hbar^2) sum_i E_li E_in x_li x_in + delta_nl E_n``.

    This is the potential-energy matrix ``H - p^2/2m`` written in terms of
    energies and dipoles only.
    """
    u = ATOMIC_UNITS
    a = s.transition_energies() * s.dipole
    c_mat = (u.mass / (2.0 * u.hbar**2)) * (a @ a) + np.diag(s.energies)
    rows, cols = _pair_indices(s.num_states)
    return c_mat[rows, cols]


@dataclass(frozen=True, eq=False)
class InverseSolution:
    coefficients: np.ndarray
    singular_values: np.ndarray
    effective_rank: int
    residual_norm: float
    cutoff: float
    scale_free_coeffs: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "singular_values": self.singular_values.tolist(),
            "effective_rank": self.effective_rank,
            "residual_norm": self.residual_norm,
            "cutoff": self.cutoff,
            "scale_free_coeffs": None
            if self.scale_free_coeffs is None
            else self.scale_free_coeffs.tolist(),
        }


def default_cutoff(m: int) -> float:
    return m * np.finfo(float).eps


def svd_least_norm(b: np.ndarray, c: np.ndarray, cutoff: float | None = None) -> InverseSolution:
    """Least-norm solution of ``b a = c`` through the SVD pseudo-inverse.

    Singular values at or below ``cutoff * sigma_max`` have their reciprocal
    set to zero.  ``cutoff`` defaults to ``M * eps``.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if cutoff is None:
        cutoff = default_cutoff(max(b.shape))
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    u, sigma, vt = np.linalg.svd(b)
    if sigma.size == 0 or sigma[0] == 0.0:
        raise ZeroMatrix("matrix has no nonzero singular value")
    keep = sigma > cutoff * sigma[0]
    rank = int(np.count_nonzero(keep))
    a = vt[:rank].T @ ((u[:, :rank].T @ c) / sigma[:rank])
    residual = float(np.linalg.norm(b @ a - c))
    return InverseSolution(a, sigma, rank, residual, float(cutoff))


def invert_spectra(
    s: SpectralData, cutoff: float | None = None
) -> tuple[PolynomialPotential, InverseSolution]:
    """Unbounded least-norm polynomial for ``s``, centered at ``x_00``."""
    sol = svd_least_norm(build_b_matrix(s), build_c_vector(s), cutoff)
    q = np.arange(sol.coefficients.size)
    # V/E_10 = sum_q b_q ((x - c)/x_max)^q
    scale_free = sol.coefficients * s.x_max**q / s.e10
    sol = InverseSolution(
        sol.coefficients,
        sol.singular_values,
        sol.effective_rank,
        sol.residual_norm,
        sol.cutoff,
        scale_free,
    )
    return PolynomialPotential(sol.coefficients, float(s.dipole[0, 0])), sol


# --------------------------------------------------------------------------- well domain


@dataclass(frozen=True)
class WellDomain:
    minimum_x: float
    x_left: float
    x_right: float
    boundary_value_ratio: float
    status: str  # "bounded" or "clamped"
    minimum_value: float
    left_kind: str
    right_kind: str
    fom: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _critical_points(p: PolynomialPotential, lo: float, hi: float, cells: int):
    """Local minima and maxima of ``p`` on ``[lo, hi]`` by bracketing ``p'``."""
    dp = p.derivative()
    x = np.linspace(lo, hi, cells + 1)
    with np.errstate(all="ignore"):
        d = np.asarray(dp(x), dtype=float)
    sign = np.sign(d)
    minima, maxima = [], []
    for i in range(cells):
        s0, s1 = sign[i], sign[i + 1]
        if not (np.isfinite(d[i]) and np.isfinite(d[i + 1])):
            continue
        if s0 == 0.0 or s0 == s1:
            continue
        if s1 == 0.0:
            # exact zero at a sample: classify from the next nonzero neighbour
            j = i + 2
            while j <= cells and sign[j] == 0.0:
                j += 1
            if j > cells or sign[j] == s0:
                continue
            root = x[i + 1]
        else:
            root = brentq(lambda t: float(dp(t)), x[i], x[i + 1], xtol=1e-14, rtol=1e-15)
        (minima if s0 < 0 else maxima).append(float(root))
    return np.array(minima), np.array(maxima)


def _walk(p, x_min, v_min, maxima, threshold, edge, direction):
    """Boundary on one side of the minimum at ``x_min``.

    Returns ``(x_boundary, kind)`` with kind ``"threshold"`` when the potential
    reaches ``threshold`` before any barrier, ``"barrier"`` when a lower
    barrier peak comes first, and ``"scan_edge"`` when neither happens inside
    the scan interval.
    """
    side = maxima[maxima > x_min] if direction > 0 else maxima[maxima < x_min]
    if side.size:
        peak = side.min() if direction > 0 else side.max()
        if float(p(peak)) < threshold:
            return float(peak), "barrier"
        stop = peak
    else:
        stop = edge
        if float(p(stop)) < threshold:
            return float(stop), "scan_edge"
    a, b = (x_min, stop) if direction > 0 else (stop, x_min)
    root = brentq(lambda t: float(p(t)) - threshold, a, b, xtol=1e-13, rtol=1e-15)
    return float(root), "threshold"


def _domain_around(p, x_min, maxima, energies, kappa, lo, hi) -> WellDomain:
    v_min = float(p(x_min))
    e_ref = min(v_min, float(energies[0]))
    span = float(energies[-1]) - e_ref
    threshold = e_ref + kappa * span
    xl, kl = _walk(p, x_min, v_min, maxima, threshold, lo, -1)
    xr, kr = _walk(p, x_min, v_min, maxima, threshold, hi, +1)
    ratio = min((float(p(b)) - e_ref) / span for b in (xl, xr))
    status = "bounded" if kl == kr == "threshold" else "clamped"
    return WellDomain(x_min, xl, xr, ratio, status, v_min, kl, kr)


def _lower_wall(p: PolynomialPotential, d: WellDomain) -> float:
    return min(float(p(d.x_left)), float(p(d.x_right)))


def _basin_fom(p: PolynomialPotential, d: WellDomain, target: SpectralData) -> float:
    bounded = p.with_boundaries(d.x_left, d.x_right)
    n = target.num_states
    try:
        g = bounded_grid(bounded, d.x_left, d.x_right, n)
        calc = extract_spectra(solve(bounded, g, n), n)
        return fom(calc, target)
    except (InsufficientGrid, UnresolvedStates, ValueError):
        return math.inf


def find_well_domain(
    p: PolynomialPotential,
    energies,
    kappa: float = DEFAULT_KAPPA,
    target: SpectralData | None = None,
    scan_halfwidth: float | None = None,
    cells: int = SCAN_CELLS,
) -> WellDomain:
    """Locate the well the spectra describe and place walls around it.

    Minima are found by bracketing roots of the derivative over
    ``c +/- 50 x_max`` (``x_max`` from ``E_10``).  From a minimum the walls move
    outward until the potential reaches
    ``e_ref + kappa * (E_top - e_ref)`` with ``e_ref = min(V_min, E_0)``; a
    barrier peak lower than that stops the walk and becomes the wall.

    With several minima, each basin (up to the 8 nearest the center) is
    solved with its walls and scored by the figure of merit against
    ``target``; ties, or no target, fall back to the deepest basin and then to
    the one nearest the center.

    Basins whose lower wall lies below ``E_0`` are discarded.

    Raises
    ------
    NoMinimum
        The polynomial is monotone or a pure barrier over the scan interval,
        or no basin can hold the ground state.
    """
    energies = np.asarray(energies, dtype=float)
    e10 = float(energies[1] - energies[0])
    x_scale = ATOMIC_UNITS.hbar / math.sqrt(2.0 * ATOMIC_UNITS.mass * e10)
    half = (SCAN_HALFWIDTH if scan_halfwidth is None else scan_halfwidth) * x_scale
    lo, hi = p.center - half, p.center + half
    minima, maxima = _critical_points(p, lo, hi, cells)
    if minima.size == 0:
        raise NoMinimum("polynomial has no local minimum in the scan interval")

    order = np.argsort(np.abs(minima - p.center), kind="stable")
    candidates = minima[order[:MAX_CANDIDATES]]
    domains = [_domain_around(p, m, maxima, energies, kappa, lo, hi) for m in candidates]
    # a basin whose lower wall sits below E_0 cannot hold even the ground state
    domains = [d for d in domains if _lower_wall(p, d) >= energies[0]]
    if not domains:
        raise NoMinimum("no basin holds the ground state: every candidate wall lies below E_0")
    if len(domains) == 1 and target is None:
        return domains[0]

    def score(d: WellDomain):
        f = _basin_fom(p, d, target) if target is not None else 0.0
        return (f, d.minimum_value, abs(d.minimum_x - p.center))

    scored = []
    for d in domains:
        key = score(d)
        scored.append((key, WellDomain(**{**d.__dict__, "fom": key[0] if target else None})))
    scored.sort(key=lambda item: item[0])
    return scored[0][1]


# --------------------------------------------------------------------------- roundtrip


@dataclass(frozen=True, eq=False)
class RoundTrip:
    status: str  # "ok", "no_minimum" or "no_confinement"
    fom: float
    potential: PolynomialPotential | None = None
    solution: InverseSolution | None = None
    domain: WellDomain | None = None
    spectra: SpectralData | None = None
    response: ResponseReport | None = None
    message: str = field(default="", repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def roundtrip(
    s_init: SpectralData,
    cutoff: float | None = None,
    kappa: float = DEFAULT_KAPPA,
    beta_states: int | None = None,
) -> RoundTrip:
    """Invert, bound, solve forward and score one spectral data set.

    ``beta_states`` (default: the input state count) sets how many states of
    the bounded reconstruction enter its hyperpolarizability.
    """
    n = s_init.num_states
    raw, sol = invert_spectra(s_init, cutoff)
    try:
        dom = find_well_domain(raw, s_init.energies, kappa, target=s_init)
    except NoMinimum as exc:
        return RoundTrip("no_minimum", math.inf, raw, sol, message=str(exc))
    bounded = raw.with_boundaries(dom.x_left, dom.x_right)
    k = max(n, beta_states or n)
    try:
        g = bounded_grid(bounded, dom.x_left, dom.x_right, k)
        eig = solve(bounded, g, k)
        calc_all = extract_spectra(eig, k)
    except (InsufficientGrid, UnresolvedStates, NoConfinement, ValueError) as exc:
        return RoundTrip("no_confinement", math.inf, bounded, sol, dom, message=str(exc))
    calc = calc_all.truncate(n)
    return RoundTrip(
        "ok",
        fom(calc, s_init),
        bounded,
        sol,
        dom,
        calc,
        beta_intrinsic(calc_all),
    )
