import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsf.config import Config
from gsf.ring import (
    GenNum,
    NotInvertibleError,
    exponent_estimate,
    get_context,
    infinitely_close,
    is_finite,
    is_infinitesimal,
    is_invertible,
    is_moderate,
    is_negligible,
    is_strictly_positive,
    leq,
    lt_fermat,
    lt_sharp,
    sharp_norm,
    valuation,
)


def num(ctx, text):
    return GenNum.of(ctx, text)


# arithmetic


def test_sum_of_eps(ctx):
    x = num(ctx, "eps") + num(ctx, "eps")
    np.testing.assert_allclose(x.samples, 2 * ctx.eps, rtol=1e-14)
    # the median ratio is 1 + log 2 / log eps on the tail, within the estimator slack of 1
    est = exponent_estimate(x)
    assert est.stable and abs(est.value - 1.0) <= ctx.config.slack


def test_min_picks_smaller_representative(ctx):
    x = num(ctx, "eps").min(num(ctx, "2*eps"))
    np.testing.assert_allclose(x.samples, ctx.eps, rtol=1e-14)


def test_quotient_is_moderate(ctx):
    x = num(ctx, "eps") / num(ctx, "eps^2")
    np.testing.assert_allclose(x.samples, 1 / ctx.eps, rtol=1e-14)
    assert is_moderate(x).is_true


def test_division_by_negligible_raises(ctx):
    with pytest.raises(NotInvertibleError):
        num(ctx, "1") / num(ctx, "0")


def test_verdict_has_no_truth_value(ctx):
    with pytest.raises(TypeError):
        bool(is_moderate(num(ctx, "eps")))


# exponent estimates


def test_exponent_of_square(ctx):
    est = exponent_estimate(num(ctx, "eps^2"))
    assert est.stable and est.value == pytest.approx(2.0, abs=1e-12)


def test_exponent_of_constant(ctx):
    est = exponent_estimate(num(ctx, "5"))
    assert est.stable and -0.1 < est.value <= 0.0


def test_oscillating_net_is_indeterminate(ctx):
    # sin(1/eps) at eps = 2^-k: some tail sample changes sign, so the order is undecidable
    x = num(ctx, "eps*sin(1/eps)")
    assert exponent_estimate(x).verdict.is_indeterminate


# moderateness / negligibility / positivity


def test_moderate_examples(ctx, exp_ctx):
    v = is_moderate(num(ctx, "eps^-3"))
    assert v.is_true and v.witness == 3
    assert is_moderate(num(ctx, "exp(1/eps)")).is_false
    v = is_moderate(num(exp_ctx, "exp(1/eps)"))
    assert v.is_true and v.witness == 1


def test_negligible_examples(ctx):
    assert is_negligible(num(ctx, "0")).is_true
    m = ctx.config.m_max
    assert is_negligible(GenNum(ctx, np.ones(ctx.size), (m + 2) * ctx.log_eps)).is_true
    v = is_negligible(num(ctx, "eps"))
    assert v.is_false and v.witness == 2


def test_positive_examples(ctx):
    v = is_strictly_positive(num(ctx, "eps"))
    assert v.is_true and v.witness == 2
    assert is_strictly_positive(num(ctx, "0")).is_false
    # 1 + sin(1/eps) nearly vanishes at some tail points
    v = is_strictly_positive(num(ctx, "eps*(1+sin(1/eps))/2"))
    assert not v.is_true


def test_order_relations(ctx):
    assert leq(num(ctx, "eps"), num(ctx, "2*eps")).is_true
    v = lt_sharp(num(ctx, "eps^2"), num(ctx, "eps"))
    assert v.is_true
    assert infinitely_close(num(ctx, "eps"), num(ctx, "0")).is_true
    assert lt_fermat(num(ctx, "eps^2"), num(ctx, "eps")).is_false


def test_archimedean_checks(ctx):
    assert is_infinitesimal(num(ctx, "eps^0.5")).is_true
    assert is_infinitesimal(num(ctx, "3")).is_false
    assert is_finite(num(ctx, "2+eps")).is_true
    assert is_finite(num(ctx, "1/eps")).is_false


def test_valuation_and_norm(ctx):
    assert valuation(num(ctx, "eps^2")) == pytest.approx(2.0, abs=1e-12)
    assert sharp_norm(num(ctx, "eps^2")) == pytest.approx(math.exp(-2), rel=1e-12)
    assert valuation(num(ctx, "0")) == math.inf and sharp_norm(num(ctx, "0")) == 0.0
    assert sharp_norm(num(ctx, "1/eps")) == pytest.approx(math.e, rel=1e-12)


def test_valuation_needs_eps_gauge(exp_ctx):
    with pytest.raises(ValueError):
        valuation(num(exp_ctx, "eps"))


def test_mixed_zero_tail_is_not_a_crash(ctx):
    # zeros mixed with moderate samples: undecidable, not an exception
    vals = np.where(np.arange(ctx.size) % 2 == 0, 0.0, ctx.eps)
    assert is_negligible(GenNum.from_values(ctx, vals)).is_indeterminate


def test_gauge_mismatch(ctx, exp_ctx):
    with pytest.raises(ValueError):
        num(ctx, "eps") + num(exp_ctx, "eps")


# properties

exponents = st.floats(-4, 6, allow_nan=False).map(lambda a: round(a, 2))
coefs = st.floats(0.1, 10.0) | st.floats(-10.0, -0.1)


def power(ctx, c, a):
    return GenNum.from_values(ctx, c * ctx.eps ** a)


@given(c1=coefs, a1=exponents, c2=coefs, a2=exponents, c3=coefs, a3=exponents)
def test_ring_axioms(ctx, c1, a1, c2, a2, c3, a3):
    x, y, z = power(ctx, c1, a1), power(ctx, c2, a2), power(ctx, c3, a3)
    for lhs, rhs in [((x + y) + z, x + (y + z)), (x * (y * z), (x * y) * z), (x * (y + z), x * y + x * z),
                     (x + y, y + x), (x * y, y * x)]:
        scale = np.max(np.abs(np.stack([(x * y).samples, (x * z).samples, x.samples, y.samples, z.samples,
                                        (x * y * z).samples])), axis=0)
        assert np.all(np.abs(lhs.samples - rhs.samples) <= 1e-12 * scale)


@given(c=coefs, a=exponents)
def test_positive_implies_invertible_and_positive_tail(ctx, c, a):
    # strict positivity gives a moderate reciprocal
    x = power(ctx, c, a)
    v = is_strictly_positive(x)
    assert v.is_true == (c > 0)
    if v.is_true:
        assert is_moderate(1 / x).is_true
        assert np.all(x.tail_samples > 0)
        assert is_invertible(x).is_true


@given(c=coefs, a=exponents, m=st.integers(1, 3))
def test_leq_antisymmetry(ctx, c, a, m):
    x = power(ctx, c, a)
    y = x + GenNum.from_values(ctx, np.exp(-m / ctx.eps))
    assert leq(x, y).is_true and leq(y, x).is_true
    assert is_negligible(x - y).is_true


@given(c=coefs, a=exponents, b=exponents)
def test_product_exponent_adds(ctx, c, a, b):
    x = power(ctx, c, a) * power(ctx, 1.0, b)
    assert exponent_estimate(x).value == pytest.approx(a + b, abs=0.1)


@given(c=coefs, a=exponents, d=coefs, b=exponents)
def test_fermat_implies_sharp(ctx, c, a, d, b):
    x, y = power(ctx, c, a), power(ctx, d, b)
    if lt_fermat(x, y).is_true:
        assert lt_sharp(x, y).is_true


def test_exp_gauge_positivity(exp_ctx):
    # with rho = exp(-1/eps) every power of eps is moderate and not negligible
    assert is_strictly_positive(num(exp_ctx, "eps^5")).is_true
    assert is_negligible(num(exp_ctx, "exp(-2/eps)")).is_false
    assert get_context(Config(gauge="exp")).gauge.name == "exp"
