"""Renormalised stochastic quantisation dynamics on the torus, with generator-identity
and Hermite-chaos diagnostics, a lattice Gibbs oracle and an exact regime calculator."""

from .hermite import HermitePoly, hermite_all, hermite_coeffs, hermite_eval, hermite_shift
from .torus import (
    Field,
    SpectralField,
    TestFunction,
    TorusGrid,
    besov_norm,
    from_spectral,
    load_field,
    pairing,
    save_field,
    to_spectral,
)
from .noise import NoiseSpec, RenormConstant, noise_pairing, sample_gff, sigma2_renorm
from .dynamics import (
    BlowUpError,
    Chain,
    Nonlocal,
    NonlinearitySpec,
    TrajectoryConfig,
    markov_crosscheck,
    ou_step,
    remainder_step,
    solve,
    solve_direct,
    solve_dpd,
    wick_powers,
)
from .diagnostics import (
    ChaosStatistic,
    CovarianceOperator,
    StationarityRecord,
    empirical_covariance,
    gaussianity_report,
    generator_value,
    nongauss_statistics,
    stationarity_residuals,
    top_chaos_functional,
)
from .oracle import GibbsAction, log_density, mala_chain, moment_compare
from .regimes import RegimeReport, regime_report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_") and name not in (
    "hermite", "torus", "noise", "dynamics", "diagnostics", "oracle", "regimes", "stats")]
