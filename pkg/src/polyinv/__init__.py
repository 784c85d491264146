"""Reconstruct polynomial potentials from truncated quantum spectra and score them."""

from .eigensolver import (
    ClippedHarmonic,
    EigenSolution,
    GridSpec,
    HalfPower,
    Harmonic,
    PolynomialPotential,
    TabulatedGrid,
    auto_grid,
    bounded_grid,
    converged_grid,
    extract_spectra,
    solve,
)
from .errors import (
    DimensionMismatch,
    InsufficientGrid,
    InvalidSpectra,
    NegativeResidual,
    NoConfinement,
    NoMinimum,
    PolyInvError,
    UnresolvedStates,
    ZeroMatrix,
)
from .inverse import InverseSolution, RoundTrip, WellDomain, find_well_domain, invert_spectra, roundtrip, svd_least_norm
from .pipelines import (
    ScanConfig,
    ScanRecord,
    SearchTargetSpec,
    cqho_convergence,
    cqho_spectra,
    large_beta_search,
    omega_scan,
    power_scan,
    qho_spectra,
    synthesize_target,
    three_level_limit_spectra,
)
from .response import ResponseReport, beta_intrinsic, beta_limit, beta_sos
from .spectra import (
    SpectralData,
    complete_dipole_row,
    fom,
    normalized_fom,
    rescale,
    trk_residual,
)

__version__ = "0.1.0"
