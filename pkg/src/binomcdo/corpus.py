"""Built-in portfolios: the block default-probability table and the verification corpus."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import bound_corollary1, bound_corollary2, bound_poisson_existing, fit_alpha_n, fit_moment_matching
from .dependence import PortfolioModel, latent_model

# obligors 1-20 default with 0.06, 21-40 with 0.07, ..., 81-100 with 0.10
BLOCK_PROBS = ((20, 0.06), (20, 0.07), (20, 0.08), (20, 0.09), (20, 0.10))
REFERENCE_SIZES = tuple(range(10, 101, 10))


def block_probs(n: int = 100) -> np.ndarray:
    full = np.concatenate([np.full(c, p) for c, p in BLOCK_PROBS])
    if not 1 <= n <= full.size:
        raise ValueError(f"the built-in table covers 1..{full.size} obligors")
    return full[:n].copy()


@dataclass(frozen=True)
class ReferenceRow:
    n: int
    poisson: float
    alpha_n: float
    moments: float


def reference_row(n: int) -> ReferenceRow:
    ps = block_probs(n)
    mean = math.fsum(ps)
    var = math.fsum(ps * (1.0 - ps))
    return ReferenceRow(
        n,
        bound_poisson_existing(ps),
        bound_corollary1(ps, fit_alpha_n(ps)),
        bound_corollary2(ps, fit_moment_matching(mean, var)),
    )


def reference_rows(sizes=REFERENCE_SIZES) -> list[ReferenceRow]:
    return [reference_row(n) for n in sizes]


@dataclass(frozen=True)
class CorpusModel:
    name: str
    model: PortfolioModel

    @property
    def independent(self) -> bool:
        return self.model.is_independent


def independent_corpus() -> list[CorpusModel]:
    out = [CorpusModel(f"blocks-n{n}", PortfolioModel(block_probs(n))) for n in REFERENCE_SIZES]
    for n, p in ((5, 0.05), (20, 0.1), (50, 0.3)):
        out.append(CorpusModel(f"equal-n{n}-p{p}", PortfolioModel(np.full(n, p))))
    rng = np.random.default_rng(7)
    for n in (7, 15, 25, 40, 60, 100):
        out.append(CorpusModel(f"random-n{n}", PortfolioModel(np.round(rng.uniform(0.01, 0.25, n), 4))))
    return out


def dependent_corpus(sizes=(4, 6, 8)) -> list[CorpusModel]:
    out = []
    rng = np.random.default_rng(11)
    for n in sizes:
        ps = np.round(rng.uniform(0.02, 0.2, n), 4)
        for link in ("sum", "contrast"):
            for theta in (0.1, 0.3, 0.5):
                out.append(CorpusModel(f"latent-{link}-n{n}-t{theta}", latent_model(ps, theta, link=link)))
    return out


def default_corpus(level: str = "quick") -> list[CorpusModel]:
    sizes = (4, 6, 8) if level == "quick" else (4, 6, 8, 10, 12)
    return independent_corpus() + dependent_corpus(sizes)
