"""Tranche expected loss ``E[(L(T) - z*)^+]`` from the default-count law.

With ``n`` names and recovery ``R`` the percentage loss is
``L(T) = (1 - R) W_n / n``, so

    E[(L(T) - z*)^+] = (1 - R) / n * E[(W_n - z)^+],   z = n z* / (1 - R).

The horizon ``T`` only enters through the default indicators and is kept as
an opaque label.
"""
from __future__ import annotations

from dataclasses import dataclass

from .bounds import BoundReport
from .dependence import PortfolioModel, exact_loss_pmf
from .pmf import IntegerPMF, binomial_pmf, call_expectation


class PricingError(ValueError):
    pass


@dataclass(frozen=True)
class TrancheSpec:
    recovery: float
    z_star: float
    label: str = ""
    horizon: str = ""

    def __post_init__(self):
        if not 0.0 <= self.recovery < 1.0:
            raise PricingError(f"recovery must lie in [0, 1), got {self.recovery!r}")
        if self.z_star < 0:
            raise PricingError("z_star must be non-negative")


@dataclass(frozen=True)
class TrancheBracket:
    approx: float
    half_width: float
    certified: bool
    bound_name: str
    z: float

    @property
    def low(self) -> float:
        return self.approx - self.half_width

    @property
    def high(self) -> float:
        return self.approx + self.half_width

    def contains(self, value: float, slack: float = 1e-12) -> bool:
        return self.low - slack <= value <= self.high + slack


def z_from_zstar(spec: TrancheSpec, n: int) -> float:
    if spec.recovery >= 1.0:
        raise PricingError("recovery must be below 1")
    return n * spec.z_star / (1.0 - spec.recovery)


def tranche_expected_loss_exact(model: PortfolioModel, spec: TrancheSpec, loss_pmf: IntegerPMF | None = None) -> float:
    """Exact tranche loss; pass ``loss_pmf`` to reuse an already computed law of ``W_n``."""
    pmf = exact_loss_pmf(model) if loss_pmf is None else loss_pmf
    z = z_from_zstar(spec, model.n)
    return (1.0 - spec.recovery) / model.n * call_expectation(pmf, z)


def tranche_expected_loss_bracketed(spec: TrancheSpec, report: BoundReport) -> TrancheBracket:
    """Binomial approximation of the tranche loss with a stop-loss error bracket.

    The half-width is the best bound of ``report`` rescaled by ``(1 - R) / n``;
    Monte Carlo bounds enter at their estimate plus four standard errors and
    the bracket is then flagged as not certified.
    """
    best = report.best
    if best is None:
        raise PricingError("report has no applicable binomial bound")
    n = report.n
    scale = (1.0 - spec.recovery) / n
    z = z_from_zstar(spec, n)
    approx = scale * call_expectation(binomial_pmf(best.params), z)
    return TrancheBracket(approx, scale * best.upper, best.certified, best.name, z)
