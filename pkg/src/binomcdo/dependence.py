"""Locally dependent Bernoulli portfolios and the expectations the bounds consume.

For each obligor ``i`` the bounds only ever look at four integer statistics:
``X_i``, ``X_{A_i}`` (defaults inside ``A_i``), ``X_{B_i}`` and
``W_i* = W_n - X_{B_i}``.  :class:`DependentTerms` keeps their joint law per
``i`` as a small table ``P[x, a, b, w]``; the remaining sums follow as
``W_n = w + b`` and ``W_i = w + b - a``.  Exact enumeration and Monte Carlo
both produce the same structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .pmf import IntegerPMF, dtv_shift, poisson_binomial_pmf

MAX_ENUM_N = 22
MAX_LATENT_CELLS = 2**27
MIN_STRATUM = 50
SAMPLE_BLOCK = 1 << 16


class ModelSizeError(ValueError):
    """The model is too large to enumerate; use :func:`sample_terms`."""


# -- laws ------------------------------------------------------------------


@dataclass(frozen=True)
class Independent:
    pass


@dataclass(frozen=True)
class ExplicitJoint:
    """Joint table over ``{0,1}^n``; bit ``i`` of the index is ``X_i``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)


@dataclass(frozen=True)
class LatentOneDependent:
    """``X_i = 1{theta S_i + (1 - theta) V_i > t_i}`` over a chain of latents.

    ``U_1..U_{n+1}`` are uniform on the ``atoms`` midpoints ``(a + 1/2) / atoms``
    and ``V_i`` are private continuous uniforms.  ``S_i`` is
    ``(U_i + U_{i+1}) / 2`` for the ``"sum"`` link (neighbours positively
    correlated) or ``(U_i + 1 - U_{i+1}) / 2`` for ``"contrast"`` (negatively
    correlated).  Indicators two or more apart share no latent variable, so
    ``A_i`` has radius 1 and ``B_i`` radius 2.
    """

    theta: float
    atoms: int = 32
    link: str = "sum"

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.atoms < 1:
            raise ValueError("atoms must be positive")
        if self.link not in ("sum", "contrast"):
            raise ValueError(f"unknown link {self.link!r}")


@dataclass(frozen=True)
class SamplerOnly:
    """``sampler(rng, size)`` returns a ``(size, n)`` 0/1 array."""

    sampler: Callable[[np.random.Generator, int], np.ndarray]


Law = Independent | ExplicitJoint | LatentOneDependent | SamplerOnly


# -- portfolio -------------------------------------------------------------


@dataclass(frozen=True)
class PortfolioModel:
    p_list: np.ndarray
    law: Law = field(default_factory=Independent)
    neighborhoods: tuple | None = None  # ((A_0, B_0), ...) zero-based

    def __post_init__(self):
        ps = np.asarray(self.p_list, dtype=float)
        if ps.ndim != 1 or ps.size == 0:
            raise ValueError("p_list must be a non-empty sequence")
        if np.any((ps <= 0) | (ps >= 1)):
            raise ValueError("default probabilities must lie in (0, 1)")
        ps.setflags(write=False)
        object.__setattr__(self, "p_list", ps)
        n = ps.size
        nb = self.neighborhoods
        if nb is None:
            nb = default_neighborhoods(n, self.law)
        nb = tuple((tuple(sorted(set(a))), tuple(sorted(set(b)))) for a, b in nb)
        if len(nb) != n:
            raise ValueError("need one (A_i, B_i) pair per obligor")
        for i, (a, b) in enumerate(nb):
            if i not in a or not set(a) <= set(b) or not set(b) <= set(range(n)):
                raise ValueError(f"neighbourhoods of obligor {i} violate i in A_i <= B_i")
        if isinstance(self.law, Independent) and any(a != (i,) or b != (i,) for i, (a, b) in enumerate(nb)):
            raise ValueError("independent law requires A_i = B_i = {i}")
        object.__setattr__(self, "neighborhoods", nb)
        if isinstance(self.law, ExplicitJoint):
            t = self.law.table
            if t.shape != (1 << n,):
                raise ValueError(f"explicit joint table must have 2^{n} entries")
            if np.any(t < 0) or abs(math.fsum(t) - 1.0) > 1e-12:
                raise ValueError("explicit joint table is not a probability table")
            marg = _bits(n).T.astype(float) @ t
            if np.max(np.abs(marg - ps)) > 1e-9:
                raise ValueError("explicit joint marginals disagree with p_list")

    @property
    def n(self) -> int:
        return self.p_list.size

    @property
    def is_independent(self) -> bool:
        return isinstance(self.law, Independent)

    @cached_property
    def thresholds(self) -> np.ndarray:
        """Calibrated ``t_i`` for the latent law."""
        if not isinstance(self.law, LatentOneDependent):
            raise TypeError("thresholds only exist for the latent law")
        cache: dict[float, float] = {}
        out = np.empty(self.n)
        for i, p in enumerate(self.p_list):
            if p not in cache:
                cache[p] = _calibrate_threshold(self.law, float(p))
            out[i] = cache[p]
        return out

    def enumerable(self, limit: int = MAX_ENUM_N) -> bool:
        if self.is_independent:
            return True
        if isinstance(self.law, SamplerOnly):
            return False
        if self.n > limit:
            return False
        if isinstance(self.law, LatentOneDependent):
            return (1 << self.n) * self.law.atoms <= MAX_LATENT_CELLS
        return True


def default_neighborhoods(n: int, law: Law) -> tuple:
    if isinstance(law, Independent):
        return tuple(((i,), (i,)) for i in range(n))
    if isinstance(law, LatentOneDependent):
        return tuple(
            (tuple(range(max(0, i - 1), min(n, i + 2))), tuple(range(max(0, i - 2), min(n, i + 3))))
            for i in range(n)
        )
    full = tuple(range(n))
    return tuple((full, full) for _ in range(n))


def _latent_atoms(law: LatentOneDependent) -> np.ndarray:
    return (np.arange(law.atoms) + 0.5) / law.atoms


def _latent_prob(law: LatentOneDependent, t: float) -> np.ndarray:
    """``P(X_i = 1 | U_i = u_a, U_{i+1} = u_b)`` as a ``(atoms, atoms)`` matrix."""
    u = _latent_atoms(law)
    nxt = u if law.link == "sum" else 1.0 - u
    s = 0.5 * (u[:, None] + nxt[None, :])
    return np.clip(1.0 - (t - law.theta * s) / (1.0 - law.theta), 0.0, 1.0)


def _calibrate_threshold(law: LatentOneDependent, p: float) -> float:
    return brentq(lambda t: _latent_prob(law, t).mean() - p, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


# -- exact joint -----------------------------------------------------------


def _bits(n: int) -> np.ndarray:
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def joint_table(model: PortfolioModel, limit: int = MAX_ENUM_N) -> np.ndarray:
    """Probability of every outcome in ``{0,1}^n`` (bit ``i`` is ``X_i``)."""
    n = model.n
    if not model.enumerable(limit) or n > limit:
        raise ModelSizeError(
            f"model with n={n} is too large to enumerate (limit {limit}); use sample_terms"
        )
    law = model.law
    if isinstance(law, ExplicitJoint):
        return np.array(law.table)
    if isinstance(law, Independent):
        bits = _bits(n).astype(float)
        ps = model.p_list
        return np.prod(np.where(bits == 1, ps, 1.0 - ps), axis=1)
    # forward pass over the latent chain: rows are outcome prefixes, columns the
    # atom of the latent variable shared with the next indicator
    g = law.atoms
    fwd = np.full((1, g), 1.0 / g)
    for t in model.thresholds:
        one = _latent_prob(law, t) / g
        zero = (1.0 / g) - one
        fwd = np.concatenate([fwd @ zero, fwd @ one], axis=0)
    probs = fwd.sum(axis=1)
    return probs / math.fsum(probs)


def exact_loss_pmf(model: PortfolioModel, limit: int = MAX_ENUM_N) -> IntegerPMF:
    """Exact law of ``W_n``."""
    if model.is_independent:
        return poisson_binomial_pmf(model.p_list)
    probs = joint_table(model, limit)
    counts = _bits(model.n).sum(axis=1)
    return IntegerPMF(np.bincount(counts, weights=probs, minlength=model.n + 1))


# -- terms -----------------------------------------------------------------


@dataclass(frozen=True)
class DependentTerms:
    """Per-obligor joint laws of ``(X_i, X_{A_i}, X_{B_i}, W_i*)``.

    ``tables[i][x, a, b, w]`` holds probabilities (exact mode) or sample
    frequencies (Monte Carlo mode, with ``n_samples`` set).
    """

    n: int
    neighborhoods: tuple
    marginals: np.ndarray
    tables: tuple
    loss_pmf: IntegerPMF
    mode: str = "exact"
    n_samples: int | None = None
    independent: bool = False
    flagged: set = field(default_factory=set, compare=False)

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def grids(self, i: int):
        t = self.tables[i]
        x, a, b, w = np.meshgrid(*(np.arange(s) for s in t.shape), indexing="ij", sparse=True)
        return x, a, b, w

    def expect(self, i: int, fn) -> tuple[float, float]:
        """``E fn(X_i, X_{A_i}, X_{B_i}, W_i*)`` and its standard error."""
        t = self.tables[i]
        vals = np.broadcast_to(fn(*self.grids(i)), t.shape)
        mean = float(np.sum(t * vals))
        if self.exact:
            return mean, 0.0
        second = float(np.sum(t * vals * vals))
        return mean, math.sqrt(max(second - mean * mean, 0.0) / self.n_samples)

    def cell_probs(self, i: int) -> np.ndarray:
        """``P(X_i = x, X_{A_i} = a, X_{B_i} = b)``."""
        return self.tables[i].sum(axis=3)

    def conditional_d(self, i: int, given: str) -> np.ndarray:
        """``D(W_i* | given) = 2 d_TV`` broadcast over the ``(x, a, b)`` grid.

        ``given`` names the conditioning statistics among ``x``, ``a``, ``b``.
        Monte Carlo strata with fewer than ``MIN_STRATUM`` samples get the
        universal bound 2 and are recorded in ``flagged``.
        """
        t = self.tables[i]
        drop = tuple(ax for ax, name in enumerate("xab") if name not in given)
        cond = t.sum(axis=drop, keepdims=True) if drop else t
        mass = cond.sum(axis=3)
        out = np.zeros(mass.shape)
        for idx in zip(*np.nonzero(mass > 0)):
            m = mass[idx]
            if not self.exact and m * self.n_samples < MIN_STRATUM:
                out[idx] = 2.0
                self.flagged.add((i, given, tuple(int(v) for v in idx)))
                continue
            law = cond[idx] / m
            out[idx] = 2.0 * dtv_shift(IntegerPMF(law / math.fsum(law)))
        return np.broadcast_to(out, t.shape[:3])

    def summary(self, p: float) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """Per-obligor expectations (values, standard errors) at approximand ``p``."""
        q = 1.0 - p
        fields = {
            "E[X_i]": lambda x, a, b, w: x + 0.0 * w,
            "E[(X_i+p)q^W_i]": lambda x, a, b, w: (x + p) * q ** (w + b - a),
            "E[X_i q^W_n]": lambda x, a, b, w: x * q ** (w + b),
            "E[X_i X_A_i]": lambda x, a, b, w: x * a + 0.0 * w,
            "E[q^W_n]": lambda x, a, b, w: q ** (w + b) + 0.0 * x,
            "E[q^W_i*]": lambda x, a, b, w: q**w + 0.0 * x,
            "E[q^W_i]": lambda x, a, b, w: q ** (w + b - a) + 0.0 * x,
        }
        out = {}
        for name, fn in fields.items():
            pairs = [self.expect(i, fn) for i in range(self.n)]
            out[name] = (np.array([v for v, _ in pairs]), np.array([s for _, s in pairs]))
        return out

    def independence_defect(self, i: int) -> float:
        """Largest deviation from ``X_i ⟂ W_i`` and ``X_{A_i} ⟂ W_i*`` in the table."""
        t = self.tables[i]
        nx, na, nb, nw = t.shape
        # X_{A_i} against W_i*
        aw = t.sum(axis=(0, 2))
        dev = np.abs(aw - np.outer(aw.sum(axis=1), aw.sum(axis=0))).max()
        # X_i against W_i = w + b - a
        xw = np.zeros((nx, nw + nb))
        x, a, b, w = self.grids(i)
        wi = np.broadcast_to(w + b - a + 0 * x, t.shape)
        xi = np.broadcast_to(x + 0 * w, t.shape)
        np.add.at(xw, (xi.ravel(), np.clip(wi.ravel(), 0, None)), t.ravel())
        dev2 = np.abs(xw - np.outer(xw.sum(axis=1), xw.sum(axis=0))).max()
        return float(max(dev, dev2))


def _tables_from_outcomes(model: PortfolioModel, bits: np.ndarray, weights: np.ndarray) -> tuple:
    n = model.n
    bits16 = bits.astype(np.int16)
    total = bits16.sum(axis=1)
    tables = []
    for i, (a_set, b_set) in enumerate(model.neighborhoods):
        xa = bits16[:, list(a_set)].sum(axis=1)
        xb = bits16[:, list(b_set)].sum(axis=1)
        w = total - xb
        shape = (2, len(a_set) + 1, len(b_set) + 1, n + 1)
        flat = np.ravel_multi_index((bits16[:, i], xa, xb, w), shape)
        tables.append(np.bincount(flat, weights=weights, minlength=int(np.prod(shape))).reshape(shape))
    return tuple(tables)


def _independent_tables(model: PortfolioModel) -> tuple:
    n, ps = model.n, model.p_list
    tables = []
    for i in range(n):
        rest = poisson_binomial_pmf(np.delete(ps, i)).probs
        t = np.zeros((2, 2, 2, n + 1))
        t[0, 0, 0, : rest.size] = (1.0 - ps[i]) * rest
        t[1, 1, 1, : rest.size] = ps[i] * rest
        tables.append(t)
    return tuple(tables)


def enumerate_terms(model: PortfolioModel, limit: int = MAX_ENUM_N) -> DependentTerms:
    if model.is_independent:
        return DependentTerms(
            n=model.n,
            neighborhoods=model.neighborhoods,
            marginals=model.p_list,
            tables=_independent_tables(model),
            loss_pmf=poisson_binomial_pmf(model.p_list),
            independent=True,
        )
    probs = joint_table(model, limit)
    bits = _bits(model.n)
    tables = _tables_from_outcomes(model, bits, probs)
    marginals = np.array([t[1].sum() for t in tables])
    loss = IntegerPMF(np.bincount(bits.sum(axis=1), weights=probs, minlength=model.n + 1))
    return DependentTerms(
        n=model.n,
        neighborhoods=model.neighborhoods,
        marginals=marginals,
        tables=tables,
        loss_pmf=loss,
    )


# -- Monte Carlo -----------------------------------------------------------


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for sample block ``block`` (Philox keyed by seed and block)."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) | (int(block) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def draw(model: PortfolioModel, rng: np.random.Generator, size: int) -> np.ndarray:
    n, law = model.n, model.law
    if isinstance(law, Independent):
        return (rng.random((size, n)) < model.p_list).astype(np.uint8)
    if isinstance(law, LatentOneDependent):
        u = (rng.integers(law.atoms, size=(size, n + 1)) + 0.5) / law.atoms
        v = rng.random((size, n))
        nxt = u[:, 1:] if law.link == "sum" else 1.0 - u[:, 1:]
        score = law.theta * 0.5 * (u[:, :-1] + nxt) + (1.0 - law.theta) * v
        return (score > model.thresholds).astype(np.uint8)
    if isinstance(law, ExplicitJoint):
        codes = rng.choice(law.table.size, size=size, p=law.table)
        return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    out = np.asarray(law.sampler(rng, size), dtype=np.uint8)
    if out.shape != (size, n):
        raise ValueError(f"sampler returned shape {out.shape}, expected {(size, n)}")
    return out


def sample_terms(model: PortfolioModel, n_samples: int, seed: int) -> DependentTerms:
    """Monte Carlo version of :func:`enumerate_terms`, deterministic given ``seed``.

    Samples are drawn in fixed blocks, each from its own Philox stream, and
    reduced as integer counts, so the result does not depend on how blocks
    are scheduled.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    n = model.n
    tables = None
    loss_counts = np.zeros(n + 1)
    for block, start in enumerate(range(0, n_samples, SAMPLE_BLOCK)):
        size = min(SAMPLE_BLOCK, n_samples - start)
        bits = draw(model, block_rng(seed, block), size)
        part = _tables_from_outcomes(model, bits, np.ones(size))
        tables = part if tables is None else tuple(t + s for t, s in zip(tables, part))
        loss_counts += np.bincount(bits.sum(axis=1), minlength=n + 1)
    freq = tuple(t / n_samples for t in tables)
    marginals = np.array([t[1].sum() for t in freq])
    return DependentTerms(
        n=n,
        neighborhoods=model.neighborhoods,
        marginals=marginals,
        tables=freq,
        loss_pmf=IntegerPMF.from_weights(loss_counts),
        mode="monte-carlo",
        n_samples=n_samples,
        independent=model.is_independent,
    )


def latent_model(p_list: Sequence[float], theta: float, atoms: int = 32, link: str = "sum") -> PortfolioModel:
    return PortfolioModel(np.asarray(p_list, dtype=float), LatentOneDependent(theta, atoms, link))
