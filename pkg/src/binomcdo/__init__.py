"""Certified stop-loss bounds for binomial approximation of default counts, with tranche pricing."""
from .bounds import BoundReport, ReportOptions, compile_report, fit_alpha_n, fit_moment_matching
from .cdo import TrancheSpec, tranche_expected_loss_bracketed, tranche_expected_loss_exact, z_from_zstar
from .dependence import (
    ExplicitJoint,
    Independent,
    LatentOneDependent,
    PortfolioModel,
    enumerate_terms,
    exact_loss_pmf,
    latent_model,
    sample_terms,
)
from .pmf import BinomialParams, IntegerPMF, binomial_pmf, call_expectation, poisson_binomial_pmf
from .stoploss import stoploss_distance, stoploss_distance_exact

__version__ = "0.1.0"

__all__ = [
    "BinomialParams",
    "BoundReport",
    "ExplicitJoint",
    "Independent",
    "IntegerPMF",
    "LatentOneDependent",
    "PortfolioModel",
    "ReportOptions",
    "TrancheSpec",
    "binomial_pmf",
    "call_expectation",
    "compile_report",
    "enumerate_terms",
    "exact_loss_pmf",
    "fit_alpha_n",
    "fit_moment_matching",
    "latent_model",
    "poisson_binomial_pmf",
    "sample_terms",
    "stoploss_distance",
    "stoploss_distance_exact",
    "tranche_expected_loss_bracketed",
    "tranche_expected_loss_exact",
    "z_from_zstar",
]
