import itertools
import math

import numpy as np
import pytest

from binomcdo.dependence import (
    ExplicitJoint,
    Independent,
    LatentOneDependent,
    ModelSizeError,
    PortfolioModel,
    SamplerOnly,
    block_rng,
    draw,
    enumerate_terms,
    exact_loss_pmf,
    joint_table,
    latent_model,
    sample_terms,
)
from binomcdo.pmf import poisson_binomial_pmf


def brute_latent_table(model):
    """Joint law by summing over every latent atom configuration."""
    law, n = model.law, model.n
    u = (np.arange(law.atoms) + 0.5) / law.atoms
    out = np.zeros(1 << n)
    for us in itertools.product(range(law.atoms), repeat=n + 1):
        ups = [0.0] * n
        for i in range(n):
            a, b = u[us[i]], u[us[i + 1]]
            s = 0.5 * (a + (b if law.link == "sum" else 1 - b))
            ups[i] = min(max(1 - (model.thresholds[i] - law.theta * s) / (1 - law.theta), 0.0), 1.0)
        for code in range(1 << n):
            w = 1.0
            for i in range(n):
                w *= ups[i] if (code >> i) & 1 else 1 - ups[i]
            out[code] += w
    return out / law.atoms ** (n + 1)


@pytest.mark.parametrize("link", ["sum", "contrast"])
def test_latent_enumeration_matches_brute_force(link):
    model = latent_model([0.1, 0.3, 0.2], 0.6, atoms=4, link=link)
    assert np.allclose(joint_table(model), brute_latent_table(model), atol=1e-14)


@pytest.mark.parametrize("link", ["sum", "contrast"])
def test_latent_marginals_and_local_dependence(link):
    ps = [0.05, 0.12, 0.08, 0.2, 0.1, 0.15]
    model = latent_model(ps, 0.5, link=link)
    table = joint_table(model)
    codes = np.arange(table.size)
    bit = [(codes >> i) & 1 for i in range(len(ps))]
    for i, p in enumerate(ps):
        assert table[bit[i] == 1].sum() == pytest.approx(p, abs=1e-12)
    # indicators two apart share no latent variable
    for i in range(len(ps) - 2):
        both = table[(bit[i] == 1) & (bit[i + 2] == 1)].sum()
        assert both == pytest.approx(ps[i] * ps[i + 2], abs=1e-12)
    # neighbours are correlated with the sign set by the link
    cov = table[(bit[0] == 1) & (bit[1] == 1)].sum() - ps[0] * ps[1]
    assert cov > 1e-6 if link == "sum" else cov < -1e-6
    terms = enumerate_terms(model)
    assert max(terms.independence_defect(i) for i in range(len(ps))) < 1e-12


def test_independent_terms_agree_with_explicit_product():
    ps = np.array([0.1, 0.25, 0.05, 0.4])
    ind = PortfolioModel(ps)
    table = joint_table(ind)
    full = tuple(range(4))
    explicit = PortfolioModel(ps, ExplicitJoint(table), tuple(((i,), (i,)) for i in range(4)))
    a, b = enumerate_terms(ind), enumerate_terms(explicit)
    for i in range(4):
        assert np.allclose(a.tables[i], b.tables[i], atol=1e-15)
    assert np.allclose(a.loss_pmf.probs, b.loss_pmf.probs, atol=1e-15)
    # explicit laws default to the full neighbourhood
    assert PortfolioModel(ps, ExplicitJoint(table)).neighborhoods[0] == (full, full)


def test_exact_loss_pmf_independent_is_poisson_binomial():
    ps = [0.06] * 5 + [0.09] * 5
    assert np.allclose(exact_loss_pmf(PortfolioModel(ps)).probs, poisson_binomial_pmf(ps).probs)


def test_model_validation():
    with pytest.raises(ValueError):
        PortfolioModel([0.0, 0.5])
    with pytest.raises(ValueError):
        PortfolioModel([0.5, 0.5], Independent(), (((0, 1), (0, 1)), ((1,), (1,))))
    with pytest.raises(ValueError):
        PortfolioModel([0.5, 0.5], ExplicitJoint(np.array([0.5, 0.5, 0.0, 0.0])))
    with pytest.raises(ValueError):
        PortfolioModel([0.5, 0.5], LatentOneDependent(0.3), (((1,), (1,)), ((1,), (1,))))
    with pytest.raises(ValueError):
        LatentOneDependent(1.0)


def test_size_limits():
    big = latent_model([0.1] * 30, 0.3)
    assert not big.enumerable()
    with pytest.raises(ModelSizeError):
        joint_table(big)
    sampler = PortfolioModel([0.5, 0.5], SamplerOnly(lambda rng, size: rng.integers(0, 2, (size, 2))))
    assert not sampler.enumerable()
    assert PortfolioModel([0.1] * 200).enumerable()


def test_block_streams_are_reproducible_and_distinct():
    a = block_rng(5, 0).random(4)
    assert np.array_equal(a, block_rng(5, 0).random(4))
    assert not np.array_equal(a, block_rng(5, 1).random(4))
    assert not np.array_equal(a, block_rng(6, 0).random(4))


def test_sample_terms_deterministic_and_close():
    model = latent_model([0.1, 0.2, 0.15, 0.1, 0.05], 0.4, link="contrast")
    s1 = sample_terms(model, 100_000, seed=9)
    s2 = sample_terms(model, 100_000, seed=9)
    assert all(np.array_equal(a, b) for a, b in zip(s1.tables, s2.tables))
    ex = enumerate_terms(model)
    assert np.abs(s1.loss_pmf.probs[: len(ex.loss_pmf)] - ex.loss_pmf.probs).max() < 0.01
    with pytest.raises(ValueError):
        sample_terms(model, 10, seed=1)


def test_draw_shapes_and_frequencies():
    model = PortfolioModel([0.2, 0.7], ExplicitJoint(np.array([0.1, 0.2, 0.7, 0.0])))
    bits = draw(model, block_rng(1, 0), 50_000)
    assert bits.shape == (50_000, 2)
    assert bits.mean(axis=0) == pytest.approx([0.2, 0.7], abs=0.01)


def test_conditional_d_flags_thin_strata():
    model = latent_model([0.02, 0.03, 0.02, 0.03], 0.3)
    mc = sample_terms(model, 2000, seed=3)
    d = mc.conditional_d(0, "xab")
    assert d.shape == mc.tables[0].shape[:3]
    assert mc.flagged
    ex = enumerate_terms(model)
    assert not ex.flagged and np.all(ex.conditional_d(0, "xab") <= 2.0)


def test_expect_standard_error():
    model = PortfolioModel([0.3])
    mc = sample_terms(model, 40_000, seed=2)
    mean, se = mc.expect(0, lambda x, a, b, w: x + 0.0 * w)
    assert se == pytest.approx(math.sqrt(mean * (1 - mean) / 40_000), rel=1e-9)
    assert abs(mean - 0.3) < 4 * se
