"""Stein equation for a binomial target under the call (stop-loss) test functions.

For ``B = B(alpha, p)`` the operator is

    A g(k) = (alpha - k) p / q * g(k + 1) - k g(k),

and ``g_z`` solves ``A g_z(k) = (k - z)^+ - E(B - z)^+`` with ``g_z(0) = 0``.
With ``pi_j = P(B = j)`` and ``d_j = (j - z)^+ - E(B - z)^+`` the solution is

    g_z(k) = -1/(k pi_k) * sum_{j >= k} pi_j d_j = 1/(k pi_k) * sum_{j < k} pi_j d_j.

``d_j`` is non-decreasing in ``j``, so the lower sum has only negative terms
up to the first ``j0`` with ``d_{j0} >= 0`` and the upper sum only
non-negative terms beyond it.  Each ``g_z(k)`` is taken from whichever side
is free of cancellation, with the ratios ``pi_j / pi_k`` accumulated one
factor at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .pmf import BinomialParams, binomial_pmf, call_expectation

# Leading constant of the non-uniform bound on |Delta g_z|; module level so the
# verification harness can be mutation-tested against it.
LEMMA_FACTOR = 2.0


class SteinDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SteinContext:
    params: BinomialParams
    z: float

    def __post_init__(self):
        if self.z < 0:
            raise SteinDomainError("z must be non-negative")

    @cached_property
    def call_ref(self) -> float:
        return call_expectation(binomial_pmf(self.params), self.z)

    @cached_property
    def values(self) -> np.ndarray:
        """``g_z(0..alpha+1)``; the last entry is the zero extension."""
        g = solution_matrix(self.params, [self.z], call_refs=[self.call_ref])[0]
        g.setflags(write=False)
        return g


def _call_refs(params: BinomialParams, zs: np.ndarray) -> np.ndarray:
    pmf = binomial_pmf(params)
    return np.array([call_expectation(pmf, z) for z in zs])


def solution_matrix(params: BinomialParams, zs, call_refs=None) -> np.ndarray:
    """Rows ``g_z(0..alpha+1)`` for each ``z`` in ``zs`` (all ``z >= 0``)."""
    a, p, q = params.alpha, params.p, params.q
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    if np.any(zs < 0):
        raise SteinDomainError("z must be non-negative")
    refs = _call_refs(params, zs) if call_refs is None else np.asarray(call_refs, float)
    j = np.arange(a + 1, dtype=float)
    d = np.maximum(j[None, :] - zs[:, None], 0.0) - refs[:, None]
    nz = zs.size

    # up_ratio[j] = pi_{j+1} / pi_j ; down_ratio[j] = pi_{j-1} / pi_j
    up_ratio = (a - j) / (j + 1) * (p / q)
    down_ratio = np.zeros(a + 1)
    down_ratio[1:] = j[1:] * q / ((a - j[1:] + 1) * p)

    # upper[k] = sum_{j>=k} (pi_j / pi_k) d_j, run downward from k = alpha
    upper = np.zeros((nz, a + 1))
    upper[:, a] = d[:, a]
    for k in range(a - 1, -1, -1):
        upper[:, k] = d[:, k] + up_ratio[k] * upper[:, k + 1]
    # lower[k] = sum_{j<k} (pi_j / pi_k) d_j, run upward from k = 1
    lower = np.zeros((nz, a + 1))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, a + 1):
            lower[:, k] = down_ratio[k] * (lower[:, k - 1] + d[:, k - 1])

    nonneg = d >= 0
    j0 = np.where(nonneg.any(axis=1), nonneg.argmax(axis=1), a + 1)
    kk = np.arange(a + 1)
    use_lower = kk[None, :] <= j0[:, None]
    g = np.zeros((nz, a + 2))
    with np.errstate(over="ignore", invalid="ignore"):
        inner = np.where(use_lower, lower, -upper)
    g[:, 1 : a + 1] = inner[:, 1:] / kk[1:]
    return g


def stein_solution(ctx: SteinContext, k: int) -> float:
    a = ctx.params.alpha
    if not 0 <= k <= a:
        raise SteinDomainError(f"k={k} outside [0, {a}]")
    return float(ctx.values[k])


def stein_solution_direct(ctx: SteinContext, k: int) -> float:
    """The upper-sum form evaluated term by term (reference path for tests)."""
    a, p, q, z = ctx.params.alpha, ctx.params.p, ctx.params.q, ctx.z
    if not 0 <= k <= a:
        raise SteinDomainError(f"k={k} outside [0, {a}]")
    if k == 0:
        return 0.0
    coef = 1.0 / k
    terms = []
    for j in range(k, a + 1):
        terms.append(coef * (max(j - z, 0.0) - ctx.call_ref))
        coef *= (a - j) / (j + 1) * (p / q)
    return -math.fsum(terms)


def stein_operator(ctx: SteinContext, g: Callable[[int], float], k: int) -> float:
    a, p, q = ctx.params.alpha, ctx.params.p, ctx.params.q
    if not 0 <= k <= a:
        raise SteinDomainError(f"k={k} outside [0, {a}]")
    lead = (a - k) * p / q
    return (lead * g(k + 1) if lead else 0.0) - k * g(k)


def delta_g(ctx: SteinContext, k: int) -> float:
    """``g_z(k+1) - g_z(k)``; at ``k = alpha`` the zero extension gives ``-g_z(alpha)``."""
    a = ctx.params.alpha
    if not 0 <= k <= a:
        raise SteinDomainError(f"k={k} outside [0, {a}]")
    return float(ctx.values[k + 1] - ctx.values[k])


def delta2_g(ctx: SteinContext, k: int) -> float:
    a = ctx.params.alpha
    if not 0 <= k <= a - 1:
        raise SteinDomainError(f"k={k} outside [0, {a - 1}]")
    return delta_g(ctx, k + 1) - delta_g(ctx, k)


def lemma1_bound(params: BinomialParams, k: int) -> float:
    a, q = params.alpha, params.q
    if not 0 <= k <= a:
        raise SteinDomainError(f"k={k} outside [0, {a}]")
    if k == 0:
        return LEMMA_FACTOR * q ** (1 - a) - q
    return LEMMA_FACTOR * q ** (k - a)


def lemma2_bound(params: BinomialParams, k: int, z: float) -> float:
    """Non-uniform bound for ``z > 1``; ties ``k == z`` use the ``k >= z`` case."""
    a, p, q = params.alpha, params.p, params.q
    if z <= 1:
        raise SteinDomainError("the large-z bound needs z > 1")
    if not 1 <= k <= a:
        raise SteinDomainError(f"k={k} outside [1, {a}] (k = 0 is not covered)")
    if k >= z:
        return 2.0 * (1.0 + (q ** (k - a) - 1.0) / (q * z))
    if k >= 2:
        return 3.0 * (q ** (k - a) - 1.0) / (p * z)
    return 2.0 * (a - 1) * p * q ** (1 - a) / z


def uniform_bound(params: BinomialParams) -> float:
    return 2.0 * params.q ** (1 - params.alpha)


def best_delta_bound(params: BinomialParams, k: int, z: float) -> float:
    cands = [lemma1_bound(params, k), uniform_bound(params)]
    if z > 1 and k >= 1:
        cands.append(lemma2_bound(params, k, z))
    return min(cands)


def g_bound(params: BinomialParams, k: int) -> float:
    """``|g_z(k)| <= 2 q^(k - alpha)`` for every ``z >= 0``."""
    if not 0 <= k <= params.alpha:
        raise SteinDomainError(f"k={k} outside [0, {params.alpha}]")
    return 2.0 * params.q ** (k - params.alpha)


def stein_residuals(params: BinomialParams, zs) -> tuple[np.ndarray, np.ndarray]:
    """Per-``z`` Stein-equation residual (max over ``k < alpha``) and ``E[A g_z(B)]``."""
    a, p, q = params.alpha, params.p, params.q
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    refs = _call_refs(params, zs)
    g = solution_matrix(params, zs, call_refs=refs)
    k = np.arange(a + 1, dtype=float)
    op = ((a - k) * p / q)[None, :] * g[:, 1:] - k[None, :] * g[:, :-1]
    target = np.maximum(k[None, :] - zs[:, None], 0.0) - refs[:, None]
    resid = np.abs(op - target)[:, :a].max(axis=1) if a else np.zeros(zs.size)
    pi = binomial_pmf(params).probs
    mean_op = np.array([math.fsum(row * pi) for row in op])
    return resid, mean_op


def delta_matrix(params: BinomialParams, zs) -> np.ndarray:
    """``|Delta g_z(k)|`` for ``k = 0..alpha`` (rows follow ``zs``)."""
    g = solution_matrix(params, zs)
    return np.abs(np.diff(g, axis=1))
