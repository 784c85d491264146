"""Command-line front end.

Exit codes: 0 success, 1 input or configuration error, 2 forward-solver
failure, 3 inversion produced no well.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io as pio
from .eigensolver import (
    GRID_POLICIES,
    ClippedHarmonic,
    GridSpec,
    HalfPower,
    Harmonic,
    PolynomialPotential,
    TabulatedGrid,
    extract_spectra,
    momentum_consistency,
    solve,
)
from .errors import InsufficientGrid, NoConfinement, PolyInvError, UnresolvedStates
from .inverse import DEFAULT_KAPPA, default_cutoff, roundtrip, triangular_count
from .pipelines import (
    ENERGY_PATTERNS,
    ScanConfig,
    SearchTargetSpec,
    best_record,
    cqho_convergence,
    large_beta_search,
    omega_scan,
    power_scan,
)
from .spectra import SpectralData

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_NO_WELL = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; keep exit status 2 for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt9(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def _table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[_fmt9(v) for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None


def _eta_grid(text: str) -> list[float]:
    """``lo:hi:n`` log-spaced exponents, or a comma-separated list."""
    parts = text.split(":")
    try:
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if lo <= 0 or hi <= lo or n < 1:
                raise ValueError
            return np.geomspace(lo, hi, n).tolist() if n > 1 else [lo]
        vals = _floats(text)
        if not vals:
            raise ValueError
        return vals
    except (ValueError, argparse.ArgumentTypeError):
        raise argparse.ArgumentTypeError(f"expected lo:hi:n or a list of exponents, got {text!r}") from None


# --------------------------------------------------------------------------- config files

# dotted config key -> scan option destination
CONFIG_KEYS = {
    "run.kind": "kind",
    "run.seed": "seed",
    "run.threads": "threads",
    "run.out": "out",
    "model.states": "states",
    "model.kappa": "kappa",
    "model.cutoff": "cutoff",
    "model.beta_states": "beta_states",
    "omega.family": "family",
    "omega.samples": "samples",
    "omega.range": "omega_range",
    "cqho.nmin": "nmin",
    "cqho.nmax": "nmax",
    "power.eta": "eta",
    "power.grid_policy": "grid_policy",
    "power.states": "power_states",
    "search.levels": "levels",
    "search.trials": "trials",
    "search.epsilon": "epsilon",
    "search.pattern": "pattern",
    "search.e_top": "e_top",
    "search.gap": "gap",
}


def read_config(path) -> dict[str, str]:
    """Parse a flat ``section.key = value`` file into scan option defaults.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for num, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{num}: expected key = value")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{num}: unknown key {key!r}")
        out[CONFIG_KEYS[key]] = value
    return out


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="polyinv", description="Polynomial potentials from spectra, and back.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a 1D potential and write its spectra", formatter_class=fmt)
    s.add_argument("--potential", choices=["qho", "cqho", "halfpower", "poly", "tabulated"], required=True, help="potential family")
    s.add_argument("--omega", type=float, default=1.0, help="oscillator frequency for qho/cqho")
    s.add_argument("--eta", type=float, default=2.0, help="exponent for halfpower")
    s.add_argument("--coeffs", type=_floats, default=None, help="poly coefficients a_0,a_1,... in powers of (x - center)")
    s.add_argument("--center", type=float, default=0.0, help="poly expansion center")
    s.add_argument("--bounds", type=_pair, default=None, help="poly hard walls lo:hi")
    s.add_argument("--file", type=Path, default=None, help="two-column x,V CSV for tabulated")
    s.add_argument("--states", type=int, default=6, help="number of states K")
    s.add_argument("--grid-policy", choices=sorted(GRID_POLICIES), default="kappa", help="automatic grid policy")
    s.add_argument("--kappa", type=float, default=DEFAULT_KAPPA, help="boundary threshold factor for the kappa policy")
    s.add_argument("--x-min", type=float, default=None, help="explicit grid start (with --x-max and --points)")
    s.add_argument("--x-max", type=float, default=None, help="explicit grid end")
    s.add_argument("--points", type=int, default=None, help="explicit grid point count")
    s.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    v = sub.add_parser("invert", help="reconstruct a polynomial potential from spectra", formatter_class=fmt)
    v.add_argument("--input", type=Path, required=True, help="spectra JSON with energies and dipole")
    v.add_argument("--cutoff", type=float, default=None, help="relative singular-value cutoff (default: M * machine epsilon)")
    v.add_argument("--kappa", type=float, default=DEFAULT_KAPPA, help="well boundary threshold factor")
    v.add_argument("--beta-states", type=int, default=None, help="states of the reconstruction used for beta (default: input count)")
    v.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    c = sub.add_parser(
        "scan",
        help="run a reproducible study",
        formatter_class=fmt,
        description="Options may also come from --config (flat 'section.key = value' lines); flags win.",
    )
    c.add_argument("--config", type=Path, default=None, help="config file")
    c.add_argument("--kind", choices=["omega", "cqho", "power", "search"], default="omega", help="study to run")
    c.add_argument("--seed", type=int, default=0, help="root seed")
    c.add_argument("--threads", type=int, default=None, help="worker threads (default: $POLYINV_THREADS or CPU count)")
    c.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    c.add_argument("--states", type=int, default=6, help="states N for the omega scan")
    c.add_argument("--kappa", type=float, default=DEFAULT_KAPPA, help="well boundary threshold factor")
    c.add_argument("--cutoff", type=float, default=None, help="relative singular-value cutoff (default: M * machine epsilon)")
    c.add_argument("--beta-states", type=int, default=15, help="states of each reconstruction used for beta")
    c.add_argument("--family", choices=["qho", "cqho"], default="qho", help="omega scan family")
    c.add_argument("--samples", type=int, default=75, help="random scale samples per scan")
    c.add_argument("--omega-range", type=_pair, default=(-1.0, 2.0), help="log10 omega range lo:hi")
    c.add_argument("--nmin", type=int, default=3, help="smallest state count for the cqho study")
    c.add_argument("--nmax", type=int, default=10, help="largest state count for the cqho study")
    c.add_argument("--eta", type=_eta_grid, default="0.05:30:40", help="power exponents lo:hi:n (log spaced) or a list")
    c.add_argument("--grid-policy", choices=sorted(GRID_POLICIES), default="converged", help="grid policy for the power study")
    c.add_argument("--power-states", type=int, default=10, help="states used for beta in the power study")
    c.add_argument("--levels", type=int, default=6, help="levels in each search target")
    c.add_argument("--trials", type=int, default=200, help="search trials")
    c.add_argument("--epsilon", type=float, default=0.1, help="scale of the small random dipoles in search targets")
    c.add_argument("--pattern", choices=list(ENERGY_PATTERNS), default="ThreeLevelLike", help="search target level pattern")
    c.add_argument("--e-top", type=float, default=10.0, help="highest search level in units of E_10")
    c.add_argument("--gap", type=float, default=0.05, help="intermediate level spacing in units of E_10")
    return p


# --------------------------------------------------------------------------- commands


def _potential(a):
    if a.potential == "qho":
        return Harmonic(a.omega), {"omega": a.omega}
    if a.potential == "cqho":
        return ClippedHarmonic(a.omega), {"omega": a.omega}
    if a.potential == "halfpower":
        meta = {"eta": a.eta}
        if a.eta == 2.0:
            # x^2 on the half line is the clipped oscillator with omega = sqrt(2)
            meta["equivalent_cqho_omega"] = math.sqrt(2.0)
        return HalfPower(a.eta), meta
    if a.potential == "poly":
        if not a.coeffs:
            raise ConfigError("--coeffs is required for poly")
        return PolynomialPotential(a.coeffs, a.center, a.bounds), {"coeffs": a.coeffs, "center": a.center}
    if a.file is None:
        raise ConfigError("--file is required for tabulated")
    try:
        return TabulatedGrid.from_csv(a.file), {"file": str(a.file)}
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load {a.file}: {exc}") from None


def cmd_solve(a) -> int:
    pot, meta = _potential(a)
    if a.states < 1:
        raise ConfigError("--states must be at least 1")
    explicit = [a.x_min, a.x_max, a.points]
    if any(v is not None for v in explicit):
        if any(v is None for v in explicit):
            raise ConfigError("--x-min, --x-max and --points must be given together")
        grid = GridSpec(a.x_min, a.x_max, a.points)
    elif a.grid_policy == "kappa":
        grid = GRID_POLICIES["kappa"](pot, a.states, kappa=a.kappa)
    else:
        grid = GRID_POLICIES[a.grid_policy](pot, a.states)
    sol = solve(pot, grid, a.states)
    s = extract_spectra(sol)
    omega_eq = meta.get("equivalent_cqho_omega")
    if omega_eq is not None:
        meta["energies_over_omega"] = (s.energies / omega_eq).tolist()
    a.out.mkdir(parents=True, exist_ok=True)
    pio.write_json_atomic(a.out / "spectra.json", s.to_dict())
    pio.write_wavefunctions(a.out / "wavefunctions.csv", sol)
    pio.write_json_atomic(
        a.out / "summary.json",
        {
            "potential": a.potential,
            "parameters": meta,
            "grid": {"x_min": grid.x_min, "x_max": grid.x_max, "num_points": grid.num_points},
            "energies": s.energies,
            "momentum_consistency": momentum_consistency(sol, s),
        },
    )
    header, rows = ["n", "E_n", "x_0n"], [[n, s.energies[n], s.dipole[0, n]] for n in range(s.num_states)]
    if omega_eq is not None:
        header.append("E_n/omega")
        for r, v in zip(rows, meta["energies_over_omega"]):
            r.append(v)
    print(_table(header, rows))
    if omega_eq is not None:
        print(f"note: eta=2 is the clipped oscillator with omega = sqrt(2) = {omega_eq:.9g}")
    return EXIT_OK


def cmd_invert(a) -> int:
    try:
        s = SpectralData.load(a.input)
    except OSError as exc:
        raise ConfigError(f"cannot read {a.input}: {exc.strerror}") from None
    n = s.num_states
    cutoff = a.cutoff if a.cutoff is not None else default_cutoff(triangular_count(n))
    rt = roundtrip(s, cutoff, a.kappa, a.beta_states)
    doc = {
        "status": rt.status,
        "num_states": n,
        "cutoff": cutoff,
        "kappa": a.kappa,
        "potential": rt.potential.to_dict(),
        "solution": rt.solution.to_dict(),
        "domain": None if rt.domain is None else rt.domain.to_dict(),
        "fom": rt.fom,
        "beta": None if rt.response is None else rt.response.to_dict(),
        "message": rt.message,
    }
    a.out.mkdir(parents=True, exist_ok=True)
    pio.write_json_atomic(a.out / "inversion.json", doc)
    if rt.domain is not None:
        x = np.linspace(rt.domain.x_left, rt.domain.x_right, 1001)
        pio.write_potential_csv(a.out / "potential.csv", rt.potential, x)
    if rt.spectra is not None:
        pio.write_json_atomic(a.out / "spectra.json", rt.spectra.to_dict())
    rows = [["status", rt.status], ["fom", rt.fom]]
    if rt.domain is not None:
        rows += [["x_left", rt.domain.x_left], ["x_right", rt.domain.x_right]]
    if rt.response is not None:
        rows.append(["beta_int", rt.response.beta_int])
    print(_table(["field", "value"], rows))
    if rt.status == "no_minimum":
        print(f"no well: {rt.message}", file=sys.stderr)
        return EXIT_NO_WELL
    if rt.status != "ok":
        print(f"forward solve failed: {rt.message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _scan_config(a, num_states: int) -> ScanConfig:
    return ScanConfig(a.seed, a.samples, tuple(a.omega_range), num_states, a.cutoff, a.kappa, a.beta_states, a.threads)


def _best_dict(r):
    return None if r is None else r.to_dict()


def cmd_scan(a) -> int:
    t0 = time.perf_counter()
    out = a.out
    csv_path = out / f"{a.kind}_scan.csv"
    if a.kind == "power":
        curve = power_scan(a.eta, a.grid_policy, a.power_states, a.threads)
        best = max(curve, key=lambda c: c[1])
        pio.write_power_csv(csv_path, curve)
        config = {"eta": a.eta, "grid_policy": a.grid_policy, "num_states": a.power_states}
        best_doc = {"eta": best[0], "beta_int": best[1]}
        print(_table(["eta", "beta_int"], [list(best)]))
    elif a.kind == "omega":
        cfg = _scan_config(a, a.states)
        records, best = omega_scan(a.family, cfg)
        pio.write_records_csv(csv_path, "omega", records)
        config = {"family": a.family, **cfg.to_dict()}
        best_doc = _best_dict(best)
        _print_records([best] if best else [])
    elif a.kind == "cqho":
        cfg = _scan_config(a, a.nmin)
        records = cqho_convergence(a.nmin, a.nmax, cfg)
        pio.write_records_csv(csv_path, "cqho", records)
        config = {"nmin": a.nmin, "nmax": a.nmax, **cfg.to_dict()}
        best_doc = [r.to_dict() for r in records]
        _print_records(records)
    else:
        spec = SearchTargetSpec(a.levels, a.epsilon, a.pattern, a.seed, a.e_top, a.gap)
        cfg = _scan_config(a, a.levels)
        records = large_beta_search(spec, a.trials, cfg)
        pio.write_records_csv(csv_path, "search", records)
        config = {"trials": a.trials, "target": spec.to_dict(), **cfg.to_dict()}
        ok = [r for r in records if r.ok]
        best_doc = _best_dict(ok[0] if ok else None)
        if ok:
            pio.write_json_atomic(out / "search_best_potential.json", ok[0].extra["roundtrip"].potential.to_dict())
        _print_records(ok[:1])
    timings = {"wall_seconds": time.perf_counter() - t0}
    pio.write_json_atomic(out / f"{a.kind}_summary.json", pio.summary_document(a.kind, config, a.seed, best_doc, timings))
    return EXIT_OK


def _print_records(records) -> None:
    print(
        _table(
            ["N", "sample", "omega", "fom", "fom_norm", "beta_int", "status"],
            [[r.num_states, r.sample, r.omega, r.fom, r.fom_norm, r.beta_int, r.status] for r in records],
        )
    )


COMMANDS = {"solve": cmd_solve, "invert": cmd_invert, "scan": cmd_scan}


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.command == "scan" and args.config is not None:
        # config values become defaults so explicit flags still win
        scan = parser._subparsers._group_actions[0].choices["scan"]
        scan.set_defaults(**read_config(args.config))
        args = parser.parse_args(argv)
        for action in scan._actions:
            # argparse does not check choices on defaults
            value = getattr(args, action.dest, None)
            if action.choices is not None and value is not None and value not in action.choices:
                raise ConfigError(f"invalid value {value!r} for {action.dest}")
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InsufficientGrid, UnresolvedStates, NoConfinement) as exc:
        print(f"forward solve failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PolyInvError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
