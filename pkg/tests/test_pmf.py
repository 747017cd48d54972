import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom, poisson

from binomcdo.pmf import (
    BinomialParams,
    IntegerPMF,
    binomial_pmf,
    call_curve,
    call_expectation,
    dtv_shift,
    mean_variance,
    poisson_binomial_pmf,
    poisson_pmf_truncated,
)


def brute_poisson_binomial(ps):
    out = np.zeros(len(ps) + 1)
    for xs in itertools.product((0, 1), repeat=len(ps)):
        w = 1.0
        for x, p in zip(xs, ps):
            w *= p if x else 1 - p
        out[sum(xs)] += w
    return out


def test_integer_pmf_validation():
    with pytest.raises(ValueError):
        IntegerPMF(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        IntegerPMF(np.array([1.1, -0.1]))
    pmf = IntegerPMF(np.array([0.25, 0.75]))
    with pytest.raises(ValueError):
        pmf.probs[0] = 1.0


def test_point_mass_and_weights():
    pm = IntegerPMF.point_mass(3)
    assert pm.max_support == 3 and pm.mean() == 3
    w = IntegerPMF.from_weights([1, 3])
    assert np.allclose(w.probs, [0.25, 0.75])


@pytest.mark.parametrize("alpha,p", [(1, 0.3), (10, 0.06), (50, 0.5), (400, 0.01), (3000, 0.9)])
def test_binomial_matches_scipy(alpha, p):
    pmf = binomial_pmf(BinomialParams(alpha, p))
    ref = binom.pmf(np.arange(alpha + 1), alpha, p)
    assert np.allclose(pmf.probs, ref, rtol=1e-10, atol=1e-300)
    assert abs(math.fsum(pmf.probs) - 1) <= 1e-12


def test_binomial_params_validation():
    with pytest.raises(ValueError):
        BinomialParams(0, 0.5)
    with pytest.raises(ValueError):
        BinomialParams(3, 1.0)
    with pytest.raises(ValueError):
        BinomialParams(3, 0.5, 1.0)
    assert BinomialParams(4, 0.25).q == 0.75


@pytest.mark.parametrize("ps", [[0.1], [0.06] * 7, [0.01, 0.5, 0.99, 0.3, 0.2, 0.7, 0.05, 0.4, 0.15]])
def test_poisson_binomial_against_enumeration(ps):
    assert np.allclose(poisson_binomial_pmf(ps).probs, brute_poisson_binomial(ps), atol=1e-15)


def test_poisson_binomial_empty_and_equal_p():
    assert poisson_binomial_pmf([]).probs.tolist() == [1.0]
    ps = [0.07] * 40
    assert np.allclose(poisson_binomial_pmf(ps).probs, binomial_pmf(BinomialParams(40, 0.07)).probs, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.001, 0.999), min_size=1, max_size=60))
def test_poisson_binomial_moments(ps):
    pmf = poisson_binomial_pmf(ps)
    m, v = mean_variance(pmf)
    ps = np.array(ps)
    assert abs(math.fsum(pmf.probs) - 1) <= 1e-12
    assert abs(m - ps.sum()) <= 1e-10 * max(1, ps.sum())
    assert abs(v - (ps * (1 - ps)).sum()) <= 1e-9 * max(1, ps.sum())


def test_poisson_truncation():
    pmf = poisson_pmf_truncated(3.0, 1e-15)
    assert pmf.tail_mass <= 1e-15
    k = np.arange(len(pmf))
    assert np.allclose(pmf.probs, poisson.pmf(k, 3.0) / poisson.cdf(k[-1], 3.0), rtol=1e-12)


def test_call_expectation_basic_cases():
    pmf = binomial_pmf(BinomialParams(10, 0.3))
    assert call_expectation(pmf, 0) == pytest.approx(3.0, abs=1e-14)
    assert call_expectation(pmf, -2.5) == pytest.approx(5.5, abs=1e-14)
    assert call_expectation(pmf, 10) == 0.0
    assert call_expectation(pmf, 11.5) == 0.0
    # E(X - 9.5)^+ = 0.5 P(X = 10)
    assert call_expectation(pmf, 9.5) == pytest.approx(0.5 * 0.3**10, rel=1e-12)


def test_call_monotone_convex_and_below_mean():
    params = BinomialParams(25, 0.2)
    pmf = binomial_pmf(params)
    zs = np.linspace(0, 27, 541)
    c = np.array([call_expectation(pmf, z) for z in zs])
    assert np.all(np.diff(c) <= 1e-15)
    assert np.all(np.diff(c, 2) >= -1e-12)
    assert np.all(c <= params.alpha * params.p + 1e-12)


def test_call_curve_matches_pointwise():
    pmf = poisson_binomial_pmf([0.1, 0.4, 0.2, 0.9])
    curve = call_curve(pmf, 7)
    assert np.allclose(curve, [call_expectation(pmf, k) for k in range(7)], atol=1e-15)


def test_dtv_shift():
    assert dtv_shift(IntegerPMF.point_mass(2)) == pytest.approx(1.0)
    # uniform on {0..3}: d_TV(U, U+1) = 1/4
    assert dtv_shift(IntegerPMF.from_weights([1, 1, 1, 1])) == pytest.approx(0.25)
