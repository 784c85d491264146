"""Reproducible studies built on the forward and inverse solvers.

Every stochastic pipeline draws from numpy's PCG64 generator seeded through
``SeedSequence``; each sample or trial gets its own spawned child stream, so
results do not depend on the order in which worker threads finish.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .eigensolver import GRID_POLICIES, HalfPower, extract_spectra, solve
from .errors import NegativeResidual
from .inverse import DEFAULT_KAPPA, roundtrip
from .response import beta_intrinsic
from .spectra import SpectralData, complete_dipole_row, normalized_fom

THREADS_ENV = "POLYINV_THREADS"

STATUS_OK = "ok"
STATUS_NEGATIVE_RESIDUAL = "negative_residual"

# x_01 / x_max at the three-level optimum, where X^2 (1 - X^4) is stationary
THREE_LEVEL_X = 3.0**-0.25


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """Map ``fn`` over ``items`` in a thread pool, preserving input order."""
    n = thread_count(threads)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def child_generators(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------
# Analytic reference spectra


def qho_spectra(omega: float, num_states: int) -> SpectralData:
    """Exact harmonic-oscillator spectra, phased so each state's leftmost lobe is positive."""
    n = np.arange(num_states)
    x = np.zeros((num_states, num_states))
    off = -np.sqrt((n[:-1] + 1) / (2.0 * omega))
    x[n[:-1], n[:-1] + 1] = off
    x[n[:-1] + 1, n[:-1]] = off
    return SpectralData((n + 0.5) * omega, x)


def _hermite_coeffs(n: int) -> list[int]:
    prev, cur = [1], [0, 2]
    if n == 0:
        return prev
    for k in range(1, n):
        nxt = [0] * (k + 2)
        for i, v in enumerate(cur):
            nxt[i + 1] += 2 * v
        for i, v in enumerate(prev):
            nxt[i] -= 2 * k * v
        prev, cur = cur, nxt
    return cur


@lru_cache(maxsize=None)
def _cqho_unit_dipole(i: int, j: int) -> float:
    # half-line integral of H_a H_b x exp(-x^2) evaluated exactly in rationals
    a, b = 2 * i + 1, 2 * j + 1
    ha, hb = _hermite_coeffs(a), _hermite_coeffs(b)
    prod = [0] * (len(ha) + len(hb))
    for p, u in enumerate(ha):
        if u:
            for q, v in enumerate(hb):
                prod[p + q + 1] += u * v
    s = Fraction(0)
    for k, c in enumerate(prod):
        if c:
            s += Fraction(c * math.factorial((k - 1) // 2), 2)
    norm = Fraction(2 ** (a + b) * math.factorial(a) * math.factorial(b))
    value = math.sqrt(float(4 * s * s / norm) / math.pi)
    # Hermite phase has sign (-1)^i near the wall; flip to leftmost-lobe-positive
    return math.copysign(value, s) * (-1) ** (i + j)


def cqho_spectra(omega: float, num_states: int) -> SpectralData:
    """Exact clipped-oscillator spectra (odd oscillator states on the half line)."""
    x = np.array([[_cqho_unit_dipole(i, j) for j in range(num_states)] for i in range(num_states)])
    return SpectralData((2.0 * np.arange(num_states) + 1.5) * omega, x / np.sqrt(omega))


FAMILIES: dict[str, Callable[[float, int], SpectralData]] = {
    "qho": qho_spectra,
    "cqho": cqho_spectra,
}


def three_level_limit_spectra(e20: float = 1e3) -> SpectralData:
    """Three-state spectra at the hyperpolarizability limit (``E_20`` large).

    All sum rules through the (0,2) element hold exactly; ``beta_int`` tends
    to one as ``e20`` grows.
    """
    e = np.array([0.0, 1.0, e20])
    x01 = THREE_LEVEL_X * math.sqrt(0.5)
    x02 = math.sqrt((0.5 - x01**2) / e20)
    x12 = -math.sqrt((0.5 + x01**2) / (e20 - 1.0))
    x11 = -(2.0 * e20 - 1.0) * x02 * x12 / x01
    x22 = (e20 - 2.0) * x01 * x12 / (e20 * x02)
    x = np.array([[0.0, x01, x02], [x01, x11, x12], [x02, x12, x22]])
    return SpectralData(e, x)


# ---------------------------------------------------------------------------
# Records and configuration


@dataclass(frozen=True)
class ScanConfig:
    seed: int = 0
    num_samples: int = 75
    omega_log10_range: tuple[float, float] = (-1.0, 2.0)
    num_states: int = 6
    svd_cutoff: float | None = None
    kappa: float = DEFAULT_KAPPA
    beta_states: int = 15
    threads: int | None = None

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be at least 1")
        lo, hi = self.omega_log10_range
        if not lo < hi:
            raise ValueError("omega_log10_range must satisfy lo < hi")
        if self.num_states < 2:
            raise ValueError("num_states must be at least 2")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    def omegas(self) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        lo, hi = self.omega_log10_range
        return 10.0 ** rng.uniform(lo, hi, self.num_samples)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_log10_range"] = list(self.omega_log10_range)
        return d


@dataclass(frozen=True)
class ScanRecord:
    """Outcome of one sample; ``beta_int`` is set only for status ``ok``."""

    sample: int
    omega: float
    num_states: int
    fom: float
    fom_norm: float
    beta_int: float | None
    status: str
    target_beta_int: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _record(sample: int, omega: float, s: SpectralData, cfg: ScanConfig, **kw) -> ScanRecord:
    rt = roundtrip(s, cfg.svd_cutoff, cfg.kappa, cfg.beta_states)
    n = s.num_states
    beta = rt.response.beta_int if rt.ok else None
    extra = {"roundtrip": rt}
    return ScanRecord(sample, omega, n, rt.fom, normalized_fom(rt.fom, n), beta, rt.status, extra=extra, **kw)


def best_record(records: Iterable[ScanRecord]) -> ScanRecord | None:
    """Lowest-FOM successful record (first one on ties)."""
    ok = [r for r in records if r.ok]
    return min(ok, key=lambda r: r.fom) if ok else None


# ---------------------------------------------------------------------------
# Scale scan and state-count convergence


def omega_scan(family: str, cfg: ScanConfig) -> tuple[list[ScanRecord], ScanRecord | None]:
    """Roundtrip analytic spectra at ``cfg.num_samples`` random scales.

    Returns the records in sample order and the lowest-FOM successful record.
    """
    make = FAMILIES[family]
    omegas = cfg.omegas()

    def run(i: int) -> ScanRecord:
        w = float(omegas[i])
        return _record(i, w, make(w, cfg.num_states), cfg)

    records = ordered_map(run, range(cfg.num_samples), cfg.threads)
    return records, best_record(records)


def cqho_convergence(n_min: int, n_max: int, cfg: ScanConfig) -> list[ScanRecord]:
    """Best-FOM clipped-oscillator reconstruction for each state count.

    Every state count sees the same scale samples. The returned record for a
    given N is its lowest-FOM successful sample, or the first sample when none
    succeeded.
    """
    if not 3 <= n_min < n_max <= 12:
        raise ValueError("require 3 <= n_min < n_max <= 12")
    out = []
    for n in range(n_min, n_max + 1):
        sub = ScanConfig(
            cfg.seed, cfg.num_samples, cfg.omega_log10_range, n, cfg.svd_cutoff, cfg.kappa, cfg.beta_states, cfg.threads
        )
        records, best = omega_scan("cqho", sub)
        out.append(best if best is not None else records[0])
    return out


# ---------------------------------------------------------------------------
# Large-hyperpolarizability search

ENERGY_PATTERNS = ("ThreeLevelLike", "NearDegeneratePair")


@dataclass(frozen=True)
class SearchTargetSpec:
    """Recipe for randomized over-limit target spectra.

    ``gap`` spaces the intermediate levels above ``E_1`` and ``e_top`` places
    the highest level, both in units of ``E_10``.
    """

    num_states: int = 6
    epsilon_dipole: float = 0.1
    energy_pattern: str = "ThreeLevelLike"
    seed: int = 0
    e_top: float = 10.0
    gap: float = 0.05

    def __post_init__(self):
        if self.epsilon_dipole <= 0:
            raise ValueError("epsilon_dipole must be positive")
        if self.energy_pattern not in ENERGY_PATTERNS:
            raise ValueError(f"energy_pattern must be one of {ENERGY_PATTERNS}")
        if self.num_states < 4:
            raise ValueError("num_states must be at least 4")
        if self.e_top <= 1.0 + self.gap * (self.num_states - 2):
            raise ValueError("e_top must lie above the intermediate levels")

    def to_dict(self) -> dict:
        return asdict(self)


def synthesize_target(spec: SearchTargetSpec, rng: np.random.Generator | None = None) -> SpectralData:
    """Randomized spectra dominated by the ground, first (or first two) and top states.

    The couplings that carry the hyperpolarizability are fixed by sum rules:
    ``x_{0,N-1}`` by the ground-state rule, ``x_{1,N-1}`` by the (1,1) rule,
    ``x_11`` by the (0,1) rule and ``x_{N-1,N-1}`` by the (0,N-1) rule.
    Everything else is a small uniform draw in ``[-eps, eps]``.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    n, eps, top = spec.num_states, spec.epsilon_dipole, spec.num_states - 1
    pair = spec.energy_pattern == "NearDegeneratePair"

    e = np.empty(n)
    e[0], e[1] = 0.0, 1.0
    jitter = 1.0 + 0.1 * rng.random(n)
    for i in range(2, top):
        e[i] = e[i - 1] + spec.gap * jitter[i]
    e[top] = spec.e_top

    x = rng.uniform(-eps, eps, (n, n))
    x = np.triu(x) + np.triu(x, 1).T
    x[0, 0] = 0.0
    strong = [1, 2] if pair else [1]
    x0_strong = THREE_LEVEL_X * math.sqrt(0.5)
    if pair:
        share = 0.5 + 0.1 * (rng.random() - 0.5)
        x[0, 1] = x[1, 0] = x0_strong * math.sqrt(share)
        x[0, 2] = x[2, 0] = x0_strong * math.sqrt((1.0 - share) / e[2])
    else:
        x[0, 1] = x[1, 0] = x0_strong

    x[0, top] = x[top, 0] = complete_dipole_row(SpectralData(e, x), top)

    # (1,1) rule; the negative root makes the target's hyperpolarizability positive
    res = 0.5 - sum((e[k] - e[1]) * x[1, k] ** 2 for k in range(n) if k != top)
    if res < 0:
        raise NegativeResidual(f"(1,1) sum rule over-saturated by {-res:.3g}")
    x[1, top] = x[top, 1] = -math.sqrt(res / (e[top] - e[1]))

    # (0,p) rules fix the diagonal of the strongly coupled states
    for p in strong + [top]:
        rest = sum((e[k] - 0.5 * (e[0] + e[p])) * x[0, k] * x[k, p] for k in range(1, n) if k != p)
        x[p, p] = x[0, 0] - 2.0 * rest / ((e[p] - e[0]) * x[0, p])
    return SpectralData(e, x)


def large_beta_search(
    spec: SearchTargetSpec, trials: int = 200, cfg: ScanConfig | None = None, keep: int = 5
) -> list[ScanRecord]:
    """Invert ``trials`` synthesized targets and rank reconstructions by ``beta_int``.

    Successful records come first in descending ``beta_int`` (ties by trial
    index), followed by failures in trial order. The ``keep`` best records
    retain their reconstructed potential in ``extra``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cfg = cfg or ScanConfig(seed=spec.seed, num_states=spec.num_states)
    gens = child_generators(spec.seed, trials)

    def run(i: int) -> ScanRecord:
        try:
            target = synthesize_target(spec, gens[i])
        except NegativeResidual as exc:
            return ScanRecord(i, 1.0, spec.num_states, math.inf, math.inf, None, STATUS_NEGATIVE_RESIDUAL, extra={"message": str(exc)})
        t_beta = beta_intrinsic(target).beta_int
        return _record(i, 1.0, target, cfg, target_beta_int=t_beta)

    records = ordered_map(run, range(trials), cfg.threads)
    ok = sorted((r for r in records if r.ok), key=lambda r: (-r.beta_int, r.sample))
    failed = [r for r in records if not r.ok]
    ranked = ok + failed
    for r in ranked[keep:]:
        r.extra.pop("roundtrip", None)
    return ranked


# ---------------------------------------------------------------------------
# Half-power family


def power_scan(
    etas: Iterable[float], grid_policy: str = "converged", num_states: int = 10, threads: int | None = None
) -> list[tuple[float, float]]:
    """``beta_int`` of ``V = x^eta`` (half line) for each exponent.

    NoConfinement propagates for exponents too small to bound within the
    domain cap of the chosen grid policy.
    """
    etas = [float(v) for v in etas]
    if any(v <= 0 for v in etas):
        raise ValueError("all exponents must be positive")
    make_grid = GRID_POLICIES[grid_policy]

    def run(eta: float) -> tuple[float, float]:
        p = HalfPower(eta)
        g = make_grid(p, num_states)
        s = extract_spectra(solve(p, g, num_states), num_states)
        return eta, beta_intrinsic(s).beta_int

    return ordered_map(run, etas, threads)
