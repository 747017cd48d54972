"""Stop-loss error bounds for binomial approximation of a default count.

Two approximands are fitted:

* ``fit_alpha_n``: ``alpha = n`` and ``p`` the average default probability;
* ``fit_moment_matching``: mean and variance matched, ``alpha`` floored and
  the fractional remainder kept as ``delta``.

The dependent bounds read their ingredients from :class:`DependentTerms`;
the independent corollaries and the Poisson comparison bound are closed
forms in the default probabilities.

Two reading notes on the published formulas:

* the factor written ``q^{B_i} - q`` is evaluated as ``|q^{X_{B_i}} - q|``;
  ``B_i`` is an index set and the term enters as the magnitude of a
  second-difference sum;
* likewise ``q^{W_n} - q^{W_i* + 1}`` in the alternative second-order bound
  is taken in absolute value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .dependence import (
    DependentTerms,
    PortfolioModel,
    enumerate_terms,
    sample_terms,
)
from .pmf import BinomialParams, binomial_pmf, mean_variance, poisson_pmf_truncated
from .stoploss import stoploss_distance

SNAP_TOL = 1e-9

LOCAL_FIRST = "local_first_order"
INDEPENDENT_FIRST = "independent_first_order"
LOCAL_SECOND = "local_second_order"
INDEPENDENT_SECOND = "independent_second_order"
LOCAL_FIRST_FREE_P = "local_first_order_free_p"
LOCAL_SECOND_ALT = "local_second_order_alt"
POISSON_COMPARISON = "poisson_comparison"

BOUND_NAMES = (LOCAL_FIRST, INDEPENDENT_FIRST, LOCAL_SECOND, INDEPENDENT_SECOND, LOCAL_FIRST_FREE_P, LOCAL_SECOND_ALT, POISSON_COMPARISON)


class FitError(ValueError):
    pass


class ApplicabilityError(ValueError):
    pass


def snapped_floor(x: float) -> int:
    r = round(x)
    if abs(x - r) < SNAP_TOL:
        return int(r)
    return math.floor(x)


def _remainder(x: float, alpha: int) -> float:
    """Fractional part left by :func:`snapped_floor`; exactly 0 after a snap."""
    if abs(x - alpha) < SNAP_TOL:
        return 0.0
    return min(max(x - alpha, 0.0), math.nextafter(1.0, 0.0))


# -- fits ------------------------------------------------------------------


def fit_alpha_n(p_list) -> BinomialParams:
    ps = np.asarray(p_list, dtype=float)
    p = math.fsum(ps) / ps.size
    if not 0.0 < p < 1.0:
        raise FitError(f"average default probability {p!r} is degenerate")
    return BinomialParams(ps.size, p, 0.0)


def fit_moment_matching(mean: float, var: float) -> BinomialParams:
    if mean <= 0:
        raise FitError("E(W) = 0: nothing to approximate")
    if mean <= var:
        raise FitError(f"overdispersed loss (E W = {mean:.6g} <= Var W = {var:.6g}); no binomial fit")
    gap = mean - var
    x = mean * mean / gap
    alpha = snapped_floor(x)
    if alpha < 1:
        raise FitError("moment fit gives alpha < 1")
    delta = _remainder(x, alpha)
    return BinomialParams(alpha, gap / mean, delta)


def loss_moments(terms: DependentTerms) -> tuple[float, float]:
    """``(E W_n, Var W_n)``; closed form when the indicators are independent."""
    if terms.independent and terms.exact:
        ps = terms.marginals
        return math.fsum(ps), math.fsum(ps * (1.0 - ps))
    return mean_variance(terms.loss_pmf)


def _inv_q_power(p: float, power: float) -> float:
    """``q^(-power)`` through logs."""
    return math.exp(-power * math.log1p(-p))


# -- closed forms ----------------------------------------------------------


def bound_corollary1(p_list, params: BinomialParams) -> float:
    ps = np.asarray(p_list, dtype=float)
    p = params.p
    logs = np.log1p(-p * ps)
    loo = np.exp(math.fsum(logs) - logs)  # prod over j != i
    return 2.0 * _inv_q_power(p, ps.size) * math.fsum(np.abs(p - ps) * ps * loo)


def smoothing_factor(p_list) -> float:
    """Upper bound on ``2 d_TV(W, W + 1)`` for an independent Bernoulli sum."""
    ps = np.asarray(p_list, dtype=float)
    qs = 1.0 - ps
    gam = np.minimum(0.5, 1.0 - 0.5 * (qs + np.abs(qs - ps)))
    return math.sqrt(2.0 / math.pi) / math.sqrt(0.25 + math.fsum(gam) - gam.max())


def bound_corollary2(p_list, params: BinomialParams) -> float:
    ps = np.asarray(p_list, dtype=float)
    p, delta = params.p, params.delta
    first = smoothing_factor(ps) * math.fsum(np.abs(p - ps) * ps**2)
    second = delta * p * math.exp(math.fsum(np.log1p(-p * ps)))
    return 2.0 * _inv_q_power(p, params.alpha) * (first + second)


def bound_poisson_existing(p_list) -> float:
    ps = np.asarray(p_list, dtype=float)
    lam = math.fsum(ps)
    return (2.0 * math.exp(lam) - 1.0) * math.fsum(ps**2)


# -- bounds from local terms -----------------------------------------------


def _sum_expect(terms: DependentTerms, make_fn) -> tuple[float, float]:
    vals, ses = [], []
    for i in range(terms.n):
        v, s = terms.expect(i, make_fn(i))
        vals.append(v)
        ses.append(s)
    # standard errors are added, not pooled: a conservative envelope for the sum
    return math.fsum(vals), math.fsum(ses)


def first_order_sum(terms: DependentTerms, p: float, delta: float = 0.0) -> tuple[float, float]:
    """``sum_i E[(X_i + p_i) q^{W_i}] - E[(p_i + q X_i - delta p^2) q^{W_n}]`` and its SE.

    Each summand equals ``p_i E q^{W_i}(1 - q^{X_{A_i}}) + p E X_i q^{W_n}
    + E X_i q^{W_i}(1 - q^{X_{A_i}})`` (plus the ``delta`` term), hence is
    non-negative; note the ``p_i`` beside ``X_i``.
    """
    q = 1.0 - p
    pis = terms.marginals

    def make(i):
        pi = pis[i]
        return lambda x, a, b, w: (x + pi) * q ** (w + b - a) - (pi + q * x - delta * p * p) * q ** (w + b)

    return _sum_expect(terms, make)


def bound_theorem1(terms: DependentTerms, params: BinomialParams) -> tuple[float, float]:
    """Returns ``(value, standard_error)``; the SE is zero for exact terms."""
    if params.alpha != terms.n:
        raise ApplicabilityError("the local first-order bound uses the alpha = n fit")
    s, se = first_order_sum(terms, params.p)
    scale = 2.0 / params.p * _inv_q_power(params.p, terms.n)
    return max(s, 0.0) * scale, se * scale


def bound_remark_ww6(terms: DependentTerms, p_chosen: float) -> tuple[float, float, BinomialParams]:
    if not 0.0 < p_chosen < 1.0:
        raise FitError("p_chosen must lie in (0, 1)")
    x = math.fsum(terms.marginals) / p_chosen
    alpha = snapped_floor(x)
    if alpha < 1:
        raise FitError("alpha = floor(sum p_i / p) is zero")
    delta = _remainder(x, alpha)
    params = BinomialParams(alpha, p_chosen, delta)
    s, se = first_order_sum(terms, p_chosen, delta)
    scale = 2.0 / p_chosen * _inv_q_power(p_chosen, alpha)
    return max(s, 0.0) * scale, se * scale, params


def _c_coeffs(terms: DependentTerms, q: float) -> np.ndarray:
    """``E X_i E X_{A_i} - E(X_i X_{A_i}) + q E X_i`` per obligor."""
    out = []
    for i in range(terms.n):
        cells = terms.cell_probs(i)
        a = np.arange(cells.shape[1])[None, :, None]
        x = np.arange(2)[:, None, None]
        ea = float(np.sum(cells * a))
        exa = float(np.sum(cells * x * a))
        pi = terms.marginals[i]
        out.append(pi * ea - exa + q * pi)
    return np.array(out)


def bound_theorem2(terms: DependentTerms, params: BinomialParams) -> tuple[float, float]:
    p, q, alpha, delta = params.p, params.q, params.alpha, params.delta
    cs = np.abs(_c_coeffs(terms, q))
    total, se_total = [], []
    for i in range(terms.n):
        pi = terms.marginals[i]
        d_ab = terms.conditional_d(i, "ab")[..., None]
        d_xab = terms.conditional_d(i, "xab")[..., None]
        d_b = terms.conditional_d(i, "b")[..., None]

        def fn(x, a, b, w, i=i, pi=pi):
            spread = p * a + q**b - q ** (b - a)
            qb = np.abs(q**b - q)
            return (
                pi * spread * d_ab
                + x * spread * d_xab
                + p * x * qb * d_b
                + (p / q) * cs[i] * qb * d_b
            )

        v, s = terms.expect(i, fn)
        total.append(v)
        se_total.append(s)
    eqwn, se_q = terms.expect(0, lambda x, a, b, w: q ** (w + b))
    tail = delta * p**3 / q
    scale = 2.0 / (p * p) * _inv_q_power(p, alpha)
    value = max(math.fsum(total) + tail * eqwn, 0.0) * scale
    se = (math.fsum(se_total) + tail * se_q) * scale
    return value, se


def bound_remark_eq12(terms: DependentTerms, params: BinomialParams) -> tuple[float, float]:
    p, q, alpha, delta = params.p, params.q, params.alpha, params.delta
    cs = np.abs(_c_coeffs(terms, q))
    pis = terms.marginals

    def make(i):
        pi, ci = pis[i], cs[i]

        def fn(x, a, b, w):
            wn, wi = w + b, w + b - a
            gap = np.abs(q**wn - q ** (w + 1))
            return (
                (x + pi) * (p * a * q**w + q**wn - q**wi)
                + p * x * gap
                + (p / q) * ci * gap
            )

        return fn

    s, se = _sum_expect(terms, make)
    eqwn, se_q = terms.expect(0, lambda x, a, b, w: q ** (w + b))
    tail = delta * p**3 / 2.0
    scale = 4.0 / (p * p) * _inv_q_power(p, alpha)
    return max(s + tail * eqwn, 0.0) * scale, (se + tail * se_q) * scale


# -- report ----------------------------------------------------------------


@dataclass(frozen=True)
class BoundEntry:
    name: str
    value: float | None
    applicable: bool
    mode: str  # "exact" | "monte-carlo" | "closed-form"
    params: BinomialParams | None = None
    se: float = 0.0
    exact_dsl: float | None = None
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.applicable and self.mode != "monte-carlo"

    @property
    def upper(self) -> float | None:
        """Value widened by four standard errors for Monte Carlo entries."""
        if self.value is None:
            return None
        return self.value + 4.0 * self.se


@dataclass(frozen=True)
class ReportOptions:
    seed: int = 20240101
    n_samples: int = 200_000
    enum_limit: int = 22
    p_chosen: float | None = None
    tail_eps: float = 1e-15
    force_monte_carlo: bool = False


@dataclass(frozen=True)
class BoundReport:
    n: int
    entries: tuple
    poisson_lambda: float
    terms_mode: str
    best: BoundEntry | None
    fit_alpha_n: BinomialParams | None
    fit_moments: BinomialParams | None
    loss_mean: float
    loss_var: float
    errors: tuple = field(default_factory=tuple)

    @property
    def fitted(self) -> BinomialParams | None:
        return self.best.params if self.best else None

    @property
    def exact_dsl(self) -> float | None:
        return self.best.exact_dsl if self.best else None

    def entry(self, name: str) -> BoundEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def poisson_dsl(terms: DependentTerms, lam: float, tail_eps: float) -> float:
    """Stop-loss distance to Poisson(lam), widened for the truncated tail."""
    pmf = poisson_pmf_truncated(lam, tail_eps)
    m = len(pmf) - 1
    tau = pmf.tail_mass
    widen = tau * m / (1.0 - tau) + lam * float(poisson.sf(m - 1, lam))
    return stoploss_distance(terms.loss_pmf, pmf) + widen


def model_terms(model: PortfolioModel, options: ReportOptions) -> DependentTerms:
    if not options.force_monte_carlo and model.enumerable(options.enum_limit):
        return enumerate_terms(model, options.enum_limit)
    return sample_terms(model, options.n_samples, options.seed)


def compile_report(model: PortfolioModel, options: ReportOptions | None = None, terms: DependentTerms | None = None) -> BoundReport:
    options = options or ReportOptions()
    if terms is None:
        terms = model_terms(model, options)
    mode = terms.mode
    errors: list[str] = []
    entries: list[BoundEntry] = []
    ps = terms.marginals
    mean, var = loss_moments(terms)

    def dsl(params):
        if not terms.exact:
            return None
        return stoploss_distance(terms.loss_pmf, binomial_pmf(params))

    def attempt(name, entry_mode, fn):
        try:
            entries.append(fn())
        except (FitError, ApplicabilityError, ValueError) as exc:
            errors.append(f"{name}: {exc}")
            entries.append(BoundEntry(name, None, False, entry_mode, note=str(exc)))

    fit_n = fit_m = None
    try:
        fit_n = fit_alpha_n(ps)
    except FitError as exc:
        errors.append(f"fit_alpha_n: {exc}")
    try:
        fit_m = fit_moment_matching(mean, var)
    except FitError as exc:
        errors.append(f"fit_moment_matching: {exc}")

    def need(params, what):
        if params is None:
            raise FitError(f"{what} fit unavailable")
        return params

    def t1():
        params = need(fit_n, "alpha = n")
        v, se = bound_theorem1(terms, params)
        return BoundEntry(LOCAL_FIRST, v, True, mode, params, se, dsl(params))

    def c1():
        params = need(fit_n, "alpha = n")
        if not terms.independent:
            raise ApplicabilityError("the first-order closed form needs independent obligors")
        return BoundEntry(INDEPENDENT_FIRST, bound_corollary1(ps, params), True, "closed-form", params, 0.0, dsl(params))

    def t2():
        params = need(fit_m, "moment")
        v, se = bound_theorem2(terms, params)
        return BoundEntry(LOCAL_SECOND, v, True, mode, params, se, dsl(params))

    def c2():
        params = need(fit_m, "moment")
        if not terms.independent:
            raise ApplicabilityError("the second-order closed form needs independent obligors")
        return BoundEntry(INDEPENDENT_SECOND, bound_corollary2(ps, params), True, "closed-form", params, 0.0, dsl(params))

    def free_p():
        p_chosen = options.p_chosen
        if p_chosen is None:
            p_chosen = need(fit_m, "moment").p
        v, se, params = bound_remark_ww6(terms, p_chosen)
        return BoundEntry(LOCAL_FIRST_FREE_P, v, True, mode, params, se, dsl(params))

    def second_alt():
        params = need(fit_m, "moment")
        v, se = bound_remark_eq12(terms, params)
        return BoundEntry(LOCAL_SECOND_ALT, v, True, mode, params, se, dsl(params))

    def poisson_cmp():
        if not terms.independent:
            raise ApplicabilityError("the Poisson comparison bound is stated for independent obligors")
        lam = math.fsum(ps)
        exact = poisson_dsl(terms, lam, options.tail_eps) if terms.exact else None
        return BoundEntry(POISSON_COMPARISON, bound_poisson_existing(ps), True, "closed-form", None, 0.0, exact,
                          note="approximand is Poisson(lambda), not binomial")

    for name, entry_mode, fn in (
        (LOCAL_FIRST, mode, t1),
        (INDEPENDENT_FIRST, "closed-form", c1),
        (LOCAL_SECOND, mode, t2),
        (INDEPENDENT_SECOND, "closed-form", c2),
        (LOCAL_FIRST_FREE_P, mode, free_p),
        (LOCAL_SECOND_ALT, mode, second_alt),
        (POISSON_COMPARISON, "closed-form", poisson_cmp),
    ):
        attempt(name, entry_mode, fn)

    # the best entry must come with a binomial approximand for pricing
    usable = [e for e in entries if e.applicable and e.params is not None]
    certified = [e for e in usable if e.certified]
    pool = certified or usable
    best = min(pool, key=lambda e: e.upper) if pool else None
    return BoundReport(
        n=terms.n,
        entries=tuple(entries),
        poisson_lambda=math.fsum(ps),
        terms_mode=mode,
        best=best,
        fit_alpha_n=fit_n,
        fit_moments=fit_m,
        loss_mean=mean,
        loss_var=var,
        errors=tuple(errors),
    )

