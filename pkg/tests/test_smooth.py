import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsf.embedding import MollifierNet, embed, parse_dist
from gsf.points import GenMatrix, GenPoint
from gsf.ring import GenNum, exponent_estimate, is_finite, is_negligible, sharp_norm
from gsf.sets import Box
from gsf.smooth import (
    GSF,
    DomainError,
    ModerateError,
    compose,
    differentiate,
    gsf_eval,
    incremental_ratio_check,
    jacobian,
    lipschitz_probe,
    op_norm,
)


def test_eval_square(ctx):
    f = GSF.parse("x^2", ctx=ctx)
    res = gsf_eval(f, GenPoint.of(ctx, "eps"))
    np.testing.assert_allclose(res.value.samples[:, 0], ctx.eps ** 2, rtol=1e-15)
    assert res.certificate.verdict.is_true


def test_delta_at_zero_is_b(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    d = embed(parse_dist("delta@0"), net, ctx=ctx)
    val = d.values(np.zeros((ctx.size, 1)))[:, 0]
    np.testing.assert_allclose(val, 1 / ctx.eps, rtol=1e-12)
    assert is_finite(GenNum.from_values(ctx, val)).is_false


def test_eval_rejects_non_moderate(ctx):
    f = GSF.parse("exp(x/eps)", ctx=ctx)
    with pytest.raises(ModerateError):
        gsf_eval(f, GenPoint.of(ctx, "1"))


def test_eval_outside_domain(ctx):
    f = GSF.parse("x", ctx=ctx, domain=Box([0.0], [1.0]))
    with pytest.raises(DomainError):
        gsf_eval(f, GenPoint.of(ctx, "2"))


def test_third_power_second_derivative(ctx):
    f = differentiate(GSF.parse("x^3", ctx=ctx), (2,))
    np.testing.assert_allclose(f(GenPoint.of(ctx, "eps")).samples[:, 0], 6 * ctx.eps, rtol=1e-14)


def test_heaviside_derivative_is_b(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    H = embed(parse_dist("H@0"), net, ctx=ctx)
    dH = differentiate(H, (1,)).values(np.zeros((ctx.size, 1)))[:, 0]
    np.testing.assert_allclose(dH, 1 / ctx.eps, rtol=1e-12)


def test_sine_over_eps_has_infinite_slope(ctx):
    f = GSF.parse("sin(x/eps)", ctx=ctx)
    d = jacobian(f, GenPoint.of(ctx, "0")).entry(0, 0)
    assert is_finite(d).is_false
    assert exponent_estimate(d).value == pytest.approx(-1.0, abs=1e-12)


def test_incremental_ratio(ctx):
    rep = incremental_ratio_check(GSF.parse("x^2", ctx=ctx), "0.3", "1", ["eps", "eps^2", "0.5"])
    assert rep.ok and all(r["verdict"].is_true for r in rep.rows)
    rep = incremental_ratio_check(GSF.parse("x", ctx=ctx), "1", "1", ["eps"])
    # only rounding of (1 + eps) - 1 remains
    assert rep.rows[0]["verdict"].is_true
    assert max(rep.rows[0]["residual_tail"]) <= 1e-15


def test_incremental_ratio_for_delta(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    d = embed(parse_dist("delta@0"), net, ctx=ctx)
    rep = incremental_ratio_check(d, "0", "1", ["eps^2"])
    assert rep.rows[0]["verdict"].is_true


def test_compose_delta_delta_at_real_point(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True, fixed_order=0)
    d = embed(parse_dist("delta@0"), net, ctx=ctx)
    dd = compose(d, d)
    val = dd.values(np.full((ctx.size, 1), 0.3))[:, 0]
    np.testing.assert_allclose(val, 1 / ctx.eps, rtol=1e-12)


def test_compose_identity(ctx):
    f = GSF.parse("x1; x2", ctx=ctx)
    g = compose(f, f)
    m = jacobian(g, GenPoint.of(ctx, [0.2, -0.4]))
    np.testing.assert_array_equal(m.samples, np.broadcast_to(np.eye(2), m.samples.shape))


def test_operator_norm_of_diag(ctx):
    a = GenMatrix.diag(ctx, [GenNum.of(ctx, "eps"), GenNum.of(ctx, "1")])
    np.testing.assert_allclose(op_norm(a).samples, 1.0)


def test_lipschitz_probes(ctx):
    for kind in ("sharp", "fermat"):
        r = lipschitz_probe(GSF.parse("2*x", ctx=ctx), "0.4", kind)
        assert r.verdict.is_true
        np.testing.assert_allclose(r.constant.samples, 2.0, rtol=1e-9)
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    d = embed(parse_dist("delta@0"), net, ctx=ctx)
    assert lipschitz_probe(d, "0", "fermat").verdict.is_false
    r = lipschitz_probe(GSF.parse("sin(x)", ctx=ctx), "0", "fermat")
    assert r.verdict.is_true and np.all(r.constant.samples <= 1.0 + 1e-12)


# properties


@given(a=st.floats(-2, 2), b=st.floats(-2, 2), x=st.floats(-1.5, 1.5))
def test_chain_rule(ctx, a, b, x):
    f = GSF.parse(f"sin({a!r}*x) + x^3", ctx=ctx)
    g = GSF.parse(f"exp({b!r}*x) + eps*x", ctx=ctx)
    fg = compose(f, g)
    p = GenPoint.of(ctx, repr(x))
    lhs = jacobian(fg, p).samples[:, 0, 0]
    rhs = jacobian(f, g(p)).samples[:, 0, 0] * jacobian(g, p).samples[:, 0, 0]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@given(x=st.floats(-1.0, 1.0), c=st.floats(0.5, 3.0))
def test_derivative_against_central_difference(ctx, x, c):
    f = GSF.parse(f"atan({c!r}*x) + x^2*cos(x)", ctx=ctx)
    h = 1e-5
    pts = np.array([[x - h], [x + h]])
    vals = f.values(np.broadcast_to(pts[None], (ctx.size, 2, 1)))[:, :, 0]
    fd = (vals[:, 1] - vals[:, 0]) / (2 * h)
    exact = jacobian(f, GenPoint.of(ctx, repr(x))).samples[:, 0, 0]
    np.testing.assert_allclose(fd, exact, rtol=1e-7, atol=1e-8)


@given(x=st.floats(-1.0, 1.0), k=st.integers(1, 4))
def test_taylor_residual_negligible(ctx, x, k):
    f = GSF.parse("exp(x)*sin(2*x) + x^4", ctx=ctx)
    rep = incremental_ratio_check(f, repr(x), "1", [f"eps^{k}"])
    assert rep.rows[0]["verdict"].is_true


def test_sharp_norm_of_increment(ctx):
    assert sharp_norm(GenNum.of(ctx, "eps^3")) == pytest.approx(np.exp(-3))
    assert is_negligible(GenNum.of(ctx, "0")).is_true
