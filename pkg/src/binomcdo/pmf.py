"""Finite probability mass functions on consecutive non-negative integers.

Everything exact in the package is expressed as an :class:`IntegerPMF`:
the loss count of a portfolio, the binomial approximand and the (truncated)
Poisson comparison law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

NORM_TOL = 1e-12


@dataclass(frozen=True)
class IntegerPMF:
    """Mass ``probs[k]`` at integer ``k`` for ``k = 0..len(probs) - 1``.

    ``tail_mass`` is the probability dropped by a truncation (zero for exact
    laws) and ``renorm`` the factor the raw masses were divided by.
    """

    probs: np.ndarray
    tail_mass: float = 0.0
    renorm: float = 1.0

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("pmf needs a non-empty 1-d array")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("pmf entries must be finite and non-negative")
        total = math.fsum(arr)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"pmf sums to {total!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @classmethod
    def point_mass(cls, k: int) -> IntegerPMF:
        probs = np.zeros(k + 1)
        probs[k] = 1.0
        return cls(probs)

    @classmethod
    def from_weights(cls, weights) -> IntegerPMF:
        """Normalise non-negative weights (counts, unnormalised masses)."""
        w = np.asarray(weights, dtype=float)
        total = math.fsum(w)
        return cls(w / total, renorm=total)

    @property
    def max_support(self) -> int:
        nz = np.flatnonzero(self.probs)
        return int(nz[-1]) if nz.size else 0

    def __len__(self):
        return self.probs.size

    def mean(self) -> float:
        return mean_variance(self)[0]


@dataclass(frozen=True)
class BinomialParams:
    """Binomial approximand ``B(alpha, p)`` plus the moment-fit remainder ``delta``."""

    alpha: int
    p: float
    delta: float = 0.0
    q: float = field(init=False)

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError(f"alpha must be a positive integer, got {self.alpha!r}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta!r}")
        object.__setattr__(self, "alpha", int(self.alpha))
        object.__setattr__(self, "q", 1.0 - self.p)

    @property
    def log_q(self) -> float:
        return math.log1p(-self.p)


def binomial_pmf(params: BinomialParams) -> IntegerPMF:
    """Binomial masses from log-gamma, renormalised only if the raw sum drifts."""
    a, p = params.alpha, params.p
    k = np.arange(a + 1)
    logc = gammaln(a + 1) - gammaln(k + 1) - gammaln(a - k + 1)
    raw = np.exp(logc + k * math.log(p) + (a - k) * math.log1p(-p))
    total = math.fsum(raw)
    if abs(total - 1.0) > NORM_TOL:
        return IntegerPMF(raw / total, renorm=total)
    return IntegerPMF(raw)


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def poisson_binomial_pmf(p_list) -> IntegerPMF:
    """Law of a sum of independent Bernoulli(p_i) by direct convolution.

    Each update adds two products per cell; the rounding error of that
    addition is carried in a separate compensation array.
    """
    ps = np.asarray(p_list, dtype=float)
    if ps.size == 0:
        return IntegerPMF.point_mass(0)
    if np.any((ps <= 0) | (ps >= 1)):
        raise ValueError("Bernoulli probabilities must lie in (0, 1)")
    n = ps.size
    hi = np.zeros(n + 1)
    lo = np.zeros(n + 1)
    hi[0] = 1.0
    for m, p in enumerate(ps, start=1):
        q = 1.0 - p
        stay_hi, stay_lo = hi[:m] * q, lo[:m] * q
        move_hi, move_lo = hi[:m] * p, lo[:m] * p
        s, err = _two_sum(stay_hi[1:], move_hi[:-1])
        new_hi = np.empty(m + 1)
        new_lo = np.empty(m + 1)
        new_hi[0], new_lo[0] = stay_hi[0], stay_lo[0]
        new_hi[m], new_lo[m] = move_hi[m - 1], move_lo[m - 1]
        new_hi[1:m] = s
        new_lo[1:m] = err + stay_lo[1:] + move_lo[:-1]
        hi, lo = new_hi, new_lo
    out = np.maximum(hi + lo, 0.0)
    total = math.fsum(out)
    if abs(total - 1.0) > NORM_TOL:
        return IntegerPMF(out / total, renorm=total)
    return IntegerPMF(out)


def poisson_pmf_truncated(lam: float, tail_eps: float = 1e-15) -> IntegerPMF:
    """Poisson(lam) cut where the omitted upper tail drops below ``tail_eps``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not 0 < tail_eps < 1:
        raise ValueError("tail_eps must lie in (0, 1)")
    from scipy.stats import poisson

    m = int(poisson.isf(tail_eps, lam)) + 1
    while poisson.sf(m, lam) >= tail_eps:
        m += 1
    k = np.arange(m + 1)
    raw = np.exp(k * math.log(lam) - lam - gammaln(k + 1))
    tail = float(poisson.sf(m, lam))
    total = math.fsum(raw)
    return IntegerPMF(raw / total, tail_mass=tail, renorm=total)


def call_expectation(pmf: IntegerPMF, z: float) -> float:
    """``E(X - z)^+``, accumulated from the top of the support downward."""
    probs = pmf.probs
    k = np.arange(probs.size, dtype=float)
    if z <= 0:
        return math.fsum(k * probs) - z
    terms = np.maximum(k - z, 0.0) * probs
    return math.fsum(terms[::-1])


def call_curve(pmf: IntegerPMF, length: int | None = None) -> np.ndarray:
    """``E(X - k)^+`` for integers ``k = 0..length-1``.

    Uses ``C(k) = C(k+1) + P(X > k)`` run downward from ``C(m) = 0``.
    """
    probs = pmf.probs
    m = probs.size - 1
    length = m + 1 if length is None else length
    out = np.zeros(max(length, m + 1))
    # survival[k] = P(X > k), summed from the top
    survival = np.concatenate([np.cumsum(probs[::-1])[::-1][1:], [0.0]])
    out[:m] = np.cumsum(survival[:m][::-1])[::-1]
    return out[:length]


def dtv_shift(pmf: IntegerPMF) -> float:
    """Total variation distance between Z and Z + 1."""
    probs = pmf.probs
    ext = np.concatenate([probs, [0.0]])
    prev = np.concatenate([[0.0], probs])
    return min(1.0, 0.5 * math.fsum(np.abs(ext - prev)))


def mean_variance(pmf: IntegerPMF) -> tuple[float, float]:
    probs = pmf.probs
    k = np.arange(probs.size, dtype=float)
    mu = math.fsum(k * probs)
    var = math.fsum((k - mu) ** 2 * probs)
    return mu, var
