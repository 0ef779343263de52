import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsf.embedding import MollifierNet, embed, parse_dist
from gsf.local_inverse import (
    CertificateError,
    adjugate,
    afj_differentiability_check,
    fermat_ift_certificate,
    hadamard_constant,
    inverse_jacobian,
    is_nondegenerate,
    local_inverse_eval,
    sharp_ift_certificate,
)
from gsf.points import GenMatrix, GenPoint
from gsf.ring import GenNum, exponent_estimate, is_infinitesimal
from gsf.smooth import GSF

# roots of t + t^3 = y, mpmath findroot at 40 digits
ROOT_CUBIC_0_1 = 0.099028852405457314
ROOT_CUBIC_0_09 = 0.089288161229914711


def test_nondegenerate(ctx):
    assert is_nondegenerate(GenMatrix.identity(ctx, 2)).is_true
    v = is_nondegenerate(GenMatrix.diag(ctx, [GenNum.of(ctx, "eps"), GenNum.of(ctx, "1")]))
    assert v.is_true and v.witness == 2
    assert is_nondegenerate(GenMatrix.diag(ctx, [GenNum.of(ctx, "0"), GenNum.of(ctx, "1")])).is_false


def test_hadamard_constant():
    assert hadamard_constant(1) == 1.0
    assert hadamard_constant(2) == 2.0
    m = np.random.default_rng(0).normal(size=(50, 3, 3))
    bound = hadamard_constant(3) * np.linalg.norm(m, 2, axis=(1, 2)) ** 3
    assert np.all(np.abs(np.linalg.det(m)) <= bound)


def test_certificate_for_scaled_identity(ctx):
    cert = sharp_ift_certificate(GSF.parse("eps*x", ctx=ctx), 0.0)
    np.testing.assert_allclose(cert.a.samples, 1 / ctx.eps, rtol=1e-12)
    est = exponent_estimate(cert.image_radius)
    assert est.value > 0 and is_infinitesimal(cert.image_radius).is_true


def test_certificate_for_identity(ctx):
    cert = sharp_ift_certificate(GSF.parse("x", ctx=ctx), 0.0)
    np.testing.assert_allclose(cert.a.samples, 1.0)
    np.testing.assert_allclose(cert.b.samples, 0.5)
    np.testing.assert_allclose(cert.c.samples, 2.0)
    np.testing.assert_allclose(cert.r.samples, 1.0)


def test_certificate_for_heaviside(ctx):
    H = embed(parse_dist("H@0"), MollifierNet.from_config(ctx.config, d=0.5, psi0=True), ctx=ctx)
    cert = sharp_ift_certificate(H, 0.0)
    assert exponent_estimate(cert.r).value > 0
    assert is_infinitesimal(cert.r).is_true


def test_fermat_certificate(ctx):
    cert = fermat_ift_certificate(GSF.parse("2*x", ctx=ctx), 0.0)
    assert cert.r_real == pytest.approx(1.0)
    assert cert.s_real == pytest.approx(0.5)
    with pytest.raises(CertificateError, match="not finite"):
        fermat_ift_certificate(GSF.parse("eps*x", ctx=ctx), 0.0)


def test_fermat_certificate_cubic(ctx):
    f = GSF.parse("x + x^3", ctx=ctx)
    cert = fermat_ift_certificate(f, 0.0)
    np.testing.assert_allclose(cert.a.samples, 1.0)
    assert 0 < cert.s_real < 1
    y = 0.9 * cert.s_real
    res = local_inverse_eval(cert, y)
    x = res.value.samples[:, 0]
    np.testing.assert_allclose(x + x ** 3, y, rtol=1e-14)


def test_inverse_values(ctx):
    cert = sharp_ift_certificate(GSF.parse("eps*x", ctx=ctx), 0.0)
    res = local_inverse_eval(cert, GenPoint.of(ctx, "eps^2/4"))
    np.testing.assert_allclose(res.value.samples[:, 0], ctx.eps / 4, rtol=1e-14)
    assert res.verdict.is_true
    cert = sharp_ift_certificate(GSF.parse("x", ctx=ctx), 0.0)
    res = local_inverse_eval(cert, 0.3)
    assert np.all(res.value.samples == 0.3)


@pytest.mark.parametrize("y,root", [(0.1, ROOT_CUBIC_0_1), (0.09, ROOT_CUBIC_0_09)])
def test_cubic_inverse_matches_oracle(ctx, y, root):
    cert = sharp_ift_certificate(GSF.parse("x + x^3", ctx=ctx), 0.1)
    res = local_inverse_eval(cert, y)
    assert np.max(np.abs(res.value.samples[:, 0] - root)) <= 1e-12


def test_outside_image_ball_raises(ctx):
    cert = sharp_ift_certificate(GSF.parse("eps*x", ctx=ctx), 0.0)
    with pytest.raises(CertificateError):
        local_inverse_eval(cert, 0.5)


def test_inverse_jacobian(ctx):
    cert = sharp_ift_certificate(GSF.parse("x", ctx=ctx), 0.0)
    np.testing.assert_allclose(inverse_jacobian(cert, 0.2).samples[:, 0, 0], 1.0)
    cert = sharp_ift_certificate(GSF.parse("eps*x", ctx=ctx), 0.0)
    np.testing.assert_allclose(inverse_jacobian(cert, GenPoint.of(ctx, "eps^3")).samples[:, 0, 0], 1 / ctx.eps,
                               rtol=1e-12)
    cert = sharp_ift_certificate(GSF.parse("x + x^3", ctx=ctx), 0.0)
    np.testing.assert_allclose(inverse_jacobian(cert, 0.0).samples[:, 0, 0], 1.0)


def test_two_dimensional_inverse(ctx):
    f = GSF.parse("x1 + x2^2/2; x2 - x1^3/3", ctx=ctx)
    cert = sharp_ift_certificate(f, [0.1, 0.2])
    y = f.values(np.broadcast_to(np.array([[0.12, 0.19]]), (ctx.size, 1, 2)))[:, 0, :]
    res = local_inverse_eval(cert, GenPoint(ctx, y))
    np.testing.assert_allclose(res.value.samples, np.broadcast_to([0.12, 0.19], (ctx.size, 2)), atol=1e-13)
    dg = inverse_jacobian(cert, GenPoint(ctx, y), res)
    prod = dg.samples @ f.jacobian_values(res.value.samples)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(2), prod.shape), atol=1e-12)


def test_degenerate_point_rejected(ctx):
    with pytest.raises(CertificateError, match="not invertible"):
        sharp_ift_certificate(GSF.parse("x^3", ctx=ctx), 0.0)


def test_adjugate_matches_inverse():
    m = np.random.default_rng(1).normal(size=(10, 3, 3))
    adj = adjugate(m)
    np.testing.assert_allclose(adj / np.linalg.det(m)[:, None, None], np.linalg.inv(m), rtol=1e-10, atol=1e-12)


def test_afj_square_and_linear(ctx):
    rep = afj_differentiability_check(GSF.parse("x^2", ctx=ctx), 0.0)
    for row in rep.rows:
        assert row["quotient"] == pytest.approx(math.exp(-row["k"]), rel=1e-12)
    rep = afj_differentiability_check(GSF.parse("3*x + 1", ctx=ctx), 0.0)
    assert all(row["quotient"] == 0.0 for row in rep.rows)


def test_afj_delta_decreases(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    rep = afj_differentiability_check(embed(parse_dist("delta@0"), net, ctx=ctx), 0.0)
    q = [row["quotient"] for row in rep.rows]
    assert rep.decreasing and all(a > b for a, b in zip(q, q[1:]))
    # the quotient behaves like e^(q - k) with q fitted from the b-scale
    assert 2.5 < rep.q < 4.0


# properties


@given(x0=st.floats(-1.0, 1.0), t=st.floats(-0.9, 0.9))
def test_round_trip_cubic(ctx, x0, t):
    f = GSF.parse("x + x^3", ctx=ctx)
    cert = sharp_ift_certificate(f, x0)
    y = cert.y0.samples[:, 0] + t * cert.image_radius.samples
    res = local_inverse_eval(cert, GenPoint(ctx, y[:, None]))
    assert res.verdict.is_true
    x = res.value.samples[:, 0]
    assert np.all(np.abs(x - x0) <= cert.r.samples * (1 + 1e-12))
    np.testing.assert_allclose(x + x ** 3, y, rtol=1e-13, atol=1e-15)


@given(t=st.floats(-0.9, 0.9), k=st.integers(0, 2))
def test_round_trip_fast_sine(ctx, t, k):
    f = GSF.parse("sin(x/eps)", ctx=ctx)
    cert = sharp_ift_certificate(f, 0.0)
    y = t * cert.image_radius.samples * ctx.eps ** k
    res = local_inverse_eval(cert, GenPoint(ctx, y[:, None]))
    np.testing.assert_allclose(res.value.samples[:, 0], ctx.eps * np.arcsin(y), rtol=1e-12, atol=1e-300)
    dg = inverse_jacobian(cert, GenPoint(ctx, y[:, None]), res).samples[:, 0, 0]
    np.testing.assert_allclose(dg * np.cos(res.value.samples[:, 0] / ctx.eps) / ctx.eps, 1.0, rtol=1e-10)
