import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsf import expr as E
from gsf.embedding import (
    DistSpecError,
    MollifierNet,
    build_mollifier,
    derivative_commutation_check,
    derivative_growth,
    embed,
    group_actions,
    max_residual,
    pairing_limit,
    parse_dist,
    scale_action,
)
from gsf.special import gauss_legendre

PHI = "bump(x, -1, 1) * (1 + x)"
SUPPORT = (-1.0, 1.0)
# <T, phi> for phi = exp(-1/(1-x^2)) (1+x), from mpmath at 40 digits
PHI_0 = 0.36787944117144232  # phi(0) = 1/e
MINUS_DPHI_0 = -0.36787944117144232  # -phi'(0)
INT_0_INF = 0.29624466147200074  # int_0^1 phi


def mp_moment(m, k):
    """int_{-1}^{1} x^k psi(x) dx with mpmath, independent of the package quadrature."""
    with mpmath.workdps(30):
        p = [mpmath.mpf(float(c)) for c in m.coef]
        f = lambda x: mpmath.polyval(p[::-1], x) * mpmath.exp(-1 / (1 - x * x)) * x ** k
        return float(mpmath.quad(f, [-1, 0, 1]))


def test_order_zero_is_normalized_bump():
    m = build_mollifier(0)
    assert len(m.coef) == 1
    assert m.l1_norm == pytest.approx(1.0, abs=1e-12)
    assert mp_moment(m, 0) == pytest.approx(1.0, abs=1e-12)


def test_order_two_moments_against_mpmath():
    m = build_mollifier(2)
    assert abs(mp_moment(m, 0) - 1) <= 1e-10
    assert abs(mp_moment(m, 1)) <= 1e-10
    assert abs(mp_moment(m, 2)) <= 1e-10
    assert max_residual(m) <= 1e-10


@pytest.mark.parametrize("j", [1, 3, 6])
def test_half_mass_on_the_left(j):
    m = build_mollifier(j, d=0.5)
    # odd coefficients vanish by symmetry, so int_{-1}^0 psi = 1/2 on its own
    assert all(abs(c) < 1e-12 for c in m.coef[1::2])
    x, w = gauss_legendre(200, -1.0, 0.0)
    assert float(np.sum(w * m.value(0, x))) == pytest.approx(0.5, abs=1e-10)


def test_psi0_constraint():
    m = build_mollifier(4, d=0.5, psi0=True)
    assert m.value(0, np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("j", [0, 2, 5, 10])
def test_polynomial_reproduction(j):
    m = build_mollifier(j)
    x, w = gauss_legendre(400)
    psi = m.value(0, x)
    for deg in range(j + 1):
        p = np.polynomial.Polynomial(np.arange(1, deg + 2) * (-1.0) ** np.arange(deg + 1))
        for y in (-1.5, 0.0, 0.7):
            assert float(np.sum(w * psi * p(y - x))) == pytest.approx(p(y), abs=1e-8 * max(1, abs(p(y))))


def test_group_actions():
    phi = E.parse("exp(-x^2) * (1 + x)")
    same = scale_action(1.0, phi)
    xs = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(same.evaluate({"x": xs}), phi.evaluate({"x": xs}))
    x, w = gauss_legendre(400, -20, 20)
    for r in (0.3, 2.0):
        total = float(np.sum(w * scale_action(r, phi).evaluate({"x": x})))
        assert total == pytest.approx(float(np.sum(w * phi.evaluate({"x": x}))), abs=1e-12)
    pts = np.linspace(-3, 3, 64)
    _, _, lhs, rhs = group_actions(0.7, 0.4, phi)
    np.testing.assert_allclose(lhs.evaluate({"x": pts}), rhs.evaluate({"x": pts}), rtol=1e-14, atol=1e-14)


def test_delta_at_zero_is_b(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    d = embed(parse_dist("delta@0"), net, ctx=ctx)
    np.testing.assert_allclose(d.values(np.zeros((ctx.size, 1)))[:, 0], 1 / ctx.eps, rtol=1e-12)


def test_heaviside_half_at_zero(ctx):
    H = embed(parse_dist("H@0"), MollifierNet.from_config(ctx.config, d=0.5), ctx=ctx)
    np.testing.assert_allclose(H.values(np.zeros((ctx.size, 1)))[:, 0], 0.5, atol=1e-10)


def test_regular_constant(ctx):
    f = embed(parse_dist("regular(1)"), ctx=ctx)
    vals = f.values(np.zeros((ctx.size, 1)))[:, 0]
    np.testing.assert_allclose(vals, 1.0, atol=1e-10)


@pytest.mark.parametrize("dist,exact", [("delta@0", PHI_0), ("delta'@0", MINUS_DPHI_0), ("H@0", INT_0_INF)])
def test_pairing_limits(ctx, dist, exact):
    rep = pairing_limit(parse_dist(dist), PHI, SUPPORT, ctx=ctx)
    assert rep.exact == pytest.approx(exact, abs=1e-15)
    assert rep.monotone
    assert rep.final_error <= 1e-6
    assert len(rep.rows) == ctx.size


def test_delta_pairing_rate(ctx):
    # a fixed order keeps the error above the floor long enough to fit a slope
    net = MollifierNet.from_config(ctx.config, fixed_order=2)
    rep = pairing_limit(parse_dist("delta@0"), "exp(-x^2)", (-3.0, 3.0), net, ctx=ctx)
    assert rep.rate is not None and rep.rate >= 2.0


def test_commutation(ctx):
    rep = derivative_commutation_check(parse_dist("H@0"), 1, ctx=ctx)
    assert rep.exact and rep.max_abs_diff == 0.0
    rep = derivative_commutation_check(parse_dist("delta@0"), 1, ctx=ctx)
    assert rep.exact and rep.max_abs_diff == 0.0
    rep = derivative_commutation_check(parse_dist("regular(x)"), 1, ctx=ctx, points=[-0.5, 0.0, 0.5])
    assert rep.ok


def test_derivative_growth(ctx):
    growth = derivative_growth(MollifierNet.from_config(ctx.config), ctx=ctx)
    for k, p in growth.items():
        assert p == pytest.approx(k + 1, abs=1e-6)


def test_bad_distribution():
    with pytest.raises(DistSpecError):
        parse_dist("gamma@0")


@given(a=st.floats(-0.5, 0.5), c=st.floats(-2, 2))
def test_pairing_linear_in_distribution(ctx, a, c):
    T = parse_dist(f"{c!r}*delta@{a!r}" if c != 0 else f"delta@{a!r}")
    rep = pairing_limit(T, "exp(-x^2)", (-3.0, 3.0), ctx=ctx)
    expect = (c if c != 0 else 1.0) * math.exp(-a * a)
    assert rep.exact == pytest.approx(expect, rel=1e-12, abs=1e-14)
    assert rep.final_error <= 1e-6
