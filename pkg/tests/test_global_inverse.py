import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsf.global_inverse import (
    GlobalInverseError,
    build_monotone_net_1d,
    global_1d_invert,
    global_inverse_eval,
    hadamard_certificate,
    hadamard_levy_certificate,
    uniform_positivity_exponent,
)
from gsf.points import GenPoint
from gsf.sets import Box
from gsf.smooth import GSF

# mpmath findroot at 40 digits
ROOT_SINE_PI = 3.1415926535897932  # t + sin(t)/2 = pi
ROOT_SINE_M7_5 = -7.1265557381893444  # t + sin(t)/2 = -7.5
ROOT_CUBIC_2 = 1.0  # t + t^3 = 2
ROOT_CUBIC_M3 = -1.2134116627622296  # t + t^3 = -3


def test_positivity_exponent(ctx):
    assert uniform_positivity_exponent(GSF.parse("1 + 0*x", ctx=ctx), constant=True) == 1
    assert uniform_positivity_exponent(GSF.parse("x^2 + eps", ctx=ctx), A=Box([-1.0], [1.0])) == 2


def test_monotone_net_agrees_and_increases(ctx):
    f = GSF.parse("x + exp(-x^2)", ctx=ctx)
    fbar, info = build_monotone_net_1d(f)
    n = int(info["n_tail"])
    xs = np.linspace(-(n - 1), n - 1, 41)
    pts = np.broadcast_to(xs[None, :, None], (ctx.size, len(xs), 1))
    t = ctx.tail
    np.testing.assert_allclose(fbar.values(pts)[t], f.values(pts)[t], atol=1e-9)
    wide = np.linspace(-3 * n, 3 * n, 241)
    d = fbar.jacobian_values(np.broadcast_to(wide[None, :, None], (ctx.size, len(wide), 1)))
    assert np.all(d[t] > 0)


def test_monotone_net_keeps_steep_function(ctx):
    f = GSF.parse("2*x + sin(x)", ctx=ctx)
    fbar, _ = build_monotone_net_1d(f)
    xs = np.linspace(-5, 5, 21)
    pts = np.broadcast_to(xs[None, :, None], (ctx.size, len(xs), 1))
    np.testing.assert_allclose(fbar.values(pts)[ctx.tail], f.values(pts)[ctx.tail], atol=1e-9)


@pytest.mark.parametrize("y,root", [(np.pi, ROOT_SINE_PI), (-7.5, ROOT_SINE_M7_5)])
def test_1d_inverse_matches_oracle(ctx, y, root):
    cert = global_1d_invert(GSF.parse("x + sin(x)/2", ctx=ctx), 0.5)
    res = global_inverse_eval(cert, y)
    assert np.max(np.abs(res.value.samples[:, 0] - root)) <= 1e-12
    assert res.bound_ok and res.verdict.is_true
    assert all(v.is_true for _, v in res.derivatives)


def test_1d_linear_exact(ctx):
    cert = global_1d_invert(GSF.parse("2*x", ctx=ctx), 2.0)
    assert cert.surjective
    res = global_inverse_eval(cert, 3.0)
    assert np.all(res.value.samples == 1.5)


def test_1d_without_uniform_slope(ctx):
    cert = global_1d_invert(GSF.parse("eps*x", ctx=ctx), 0.0)
    assert not cert.surjective
    res = global_inverse_eval(cert, GenPoint.of(ctx, "3*eps"))
    np.testing.assert_allclose(res.value.samples[:, 0], 3.0, rtol=1e-12)


def test_1d_rejects_small_slope(ctx):
    with pytest.raises(GlobalInverseError):
        global_1d_invert(GSF.parse("x + sin(x)/2", ctx=ctx), 0.9)


def test_hadamard_identity_table(ctx):
    cert = hadamard_certificate(GSF.parse("x1; x2", ctx=ctx), radius_schedule=[1.0, 10.0, 200.0])
    for row in cert.table:
        assert row["inf_norm"] == pytest.approx(row["R"], rel=1e-12)


def test_hadamard_cubic_table_grows_like_cube(ctx):
    cert = hadamard_certificate(GSF.parse("x1 + x1^3; x2 + x2^3", ctx=ctx))
    big = [row for row in cert.table if row["R"] >= 4]
    for row in big:
        # min over the sphere of |(t + t^3, s + s^3)| is attained on the diagonal, about R^3 / 2^(3/2)
        assert row["inf_norm"] >= 0.3 * row["R"] ** 3


def test_hadamard_rejects_arctan(ctx):
    with pytest.raises(GlobalInverseError, match="properness"):
        hadamard_certificate(GSF.parse("atan(x1); atan(x2)", ctx=ctx))


def test_hadamard_levy_constants(ctx):
    cert = hadamard_levy_certificate(GSF.parse("x1/2; x2/2", ctx=ctx), ("constant", 2.0))
    assert cert.surjective
    cert = hadamard_levy_certificate(GSF.parse("x1 + sin(x1)/2; x2 + sin(x2)/2", ctx=ctx))
    assert cert.C == pytest.approx(2.0, rel=1e-3)
    with pytest.raises(GlobalInverseError):
        hadamard_levy_certificate(GSF.parse("x1^3; x2^3", ctx=ctx))


def test_nd_inverse_matches_oracle(ctx):
    f = GSF.parse("x1 + x1^3; x2 + x2^3", ctx=ctx)
    for cert in (hadamard_certificate(f), hadamard_levy_certificate(f)):
        res = global_inverse_eval(cert, [2.0, -3.0])
        assert np.max(np.abs(res.value.samples - [ROOT_CUBIC_2, ROOT_CUBIC_M3])) <= 1e-12


def test_identity_and_shift(ctx):
    cert = hadamard_levy_certificate(GSF.parse("x1; x2", ctx=ctx))
    res = global_inverse_eval(cert, [0.3, -4.0])
    np.testing.assert_array_equal(res.value.samples, np.broadcast_to([0.3, -4.0], (ctx.size, 2)))
    cert = global_1d_invert(GSF.parse("2*x + eps", ctx=ctx), 2.0)
    res = global_inverse_eval(cert, 1.0)
    np.testing.assert_allclose(res.value.samples[:, 0], (1.0 - ctx.eps) / 2, rtol=1e-15)


@given(y=st.floats(-50, 50))
def test_1d_round_trip(ctx, y):
    f = GSF.parse("x + sin(x)/2", ctx=ctx)
    cert = global_1d_invert(f, 0.5)
    res = global_inverse_eval(cert, y)
    x = res.value.samples[:, 0]
    np.testing.assert_allclose(x + np.sin(x) / 2, y, rtol=1e-14, atol=1e-14)
    # growth bound |g(y)| <= (|y| + C) / r
    assert res.bound_ok


@given(y1=st.floats(-20, 20), y2=st.floats(-20, 20))
def test_nd_round_trip(ctx, y1, y2):
    f = GSF.parse("x1 + x1^3 + x2/4; x2 + x2^3", ctx=ctx)
    cert = hadamard_certificate(f)
    res = global_inverse_eval(cert, [y1, y2])
    vals = f.values(res.value.samples[:, None, :])[:, 0, :]
    np.testing.assert_allclose(vals, np.broadcast_to([y1, y2], vals.shape), rtol=1e-12, atol=1e-12)
