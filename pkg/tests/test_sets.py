import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsf.points import GenPoint
from gsf.ring import GenNum
from gsf.sets import (
    Ball,
    Box,
    HalfLine,
    Union,
    ball_membership,
    eps_inclusion,
    internal_membership,
    is_sharply_bounded,
    parse_set,
    strongly_internal_membership,
)


def pt(ctx, text):
    return GenPoint.of(ctx, text)


def test_ball_membership(ctx):
    assert ball_membership(pt(ctx, "0.3"), [0.3], "eps").is_true
    assert ball_membership(pt(ctx, "eps"), [0.0], "eps^2", "sharp").is_false
    assert ball_membership(pt(ctx, "eps"), [0.0], 0.5, "fermat").is_true


def test_internal_membership(ctx):
    unit = Box([0.0], [1.0])
    assert internal_membership(pt(ctx, "eps"), unit).is_true
    v = internal_membership(pt(ctx, "1 + eps"), unit)
    assert v.is_false and v.witness == 2
    m = ctx.config.m_max
    assert internal_membership(pt(ctx, f"1 + eps^{m + 2}"), unit).is_true
    assert internal_membership(pt(ctx, "0"), Ball([0.0], "eps")).is_true


def test_strongly_internal_membership(ctx):
    v = strongly_internal_membership(pt(ctx, "0"), Box([-1.0], [1.0], closed=False))
    assert v.is_true and v.witness == 1
    assert strongly_internal_membership(pt(ctx, "eps/2"), Box([0.0], ["eps"], closed=False)).is_true
    assert strongly_internal_membership(pt(ctx, "0"), Box([0.0], [1.0], closed=False)).is_false


def test_sharply_bounded(ctx):
    v = is_sharply_bounded(Ball([0.0], "1/eps"), ctx)
    assert v.is_true
    np.testing.assert_allclose(v.witness.samples, 2 / ctx.eps, rtol=1e-9)
    assert is_sharply_bounded(HalfLine(0.0), ctx).is_false


def test_eps_inclusion(ctx):
    assert eps_inclusion(Box(["-1+eps"], ["1-eps"]), Box([-1.0], [1.0], closed=False), ctx).is_true
    assert eps_inclusion(Box([0.0], ["1+eps"]), Box([0.0], [1.0], closed=False), ctx).is_false


def test_parse_set_literals(ctx):
    assert isinstance(parse_set("box(0, 1)"), Box)
    assert isinstance(parse_set("ball(0, eps^2)"), Ball)
    u = parse_set("union(box(-2,-1), ball(3, eps))")
    assert isinstance(u, Union) and len(u.parts) == 2
    with pytest.raises(ValueError):
        parse_set("cube(0, 1)")


def test_halfline_distances_broadcast(ctx):
    # regression: the endpoint must broadcast per eps, not across probe points
    h = HalfLine("eps", 1)
    x = np.broadcast_to(np.array([0.0, 1.0, 2.0])[None, :, None], (ctx.size, 3, 1))
    d = h.dist(ctx, x)
    assert d.shape == (ctx.size, 3)
    np.testing.assert_allclose(d[:, 0], ctx.eps)
    np.testing.assert_allclose(h.dist_complement(ctx, x)[:, 2], 2 - ctx.eps)


def test_union_membership(ctx):
    u = Union(Box([-2.0], [-1.0]), Box([1.0], [2.0]))
    assert internal_membership(pt(ctx, "1.5"), u).is_true
    assert internal_membership(pt(ctx, "0"), u).is_false


# properties

offsets = st.floats(-0.9, 0.9)


@given(x0=offsets, m=st.integers(1, 3), sign=st.sampled_from([-1.0, 1.0]))
def test_duality_and_negligible_perturbation(ctx, x0, m, sign):
    a = Box([-1.0], [1.0], closed=False)
    x = pt(ctx, repr(x0))
    strong = strongly_internal_membership(x, a)
    if strong.is_true:
        assert internal_membership(x, a).is_true
    y = GenPoint(ctx, x.samples + sign * np.exp(-m / ctx.eps)[:, None])
    assert strongly_internal_membership(y, a).label == strong.label


@given(c=st.floats(-2, 2), r=st.floats(0.1, 2), x0=st.floats(-4, 4), k=st.integers(0, 2))
def test_closure_insensitivity(ctx, c, r, x0, k):
    x = GenPoint(ctx, (x0 + ctx.eps ** k * 0.5)[:, None])
    for s in (Box([c - r], [c + r], closed=False), Ball([c], r)):
        assert internal_membership(x, s).label == internal_membership(x, s.closure()).label


@given(d=st.floats(0.0, 3.0), r=st.floats(0.05, 1.0))
def test_fermat_ball_inside_sharp_ball(ctx, d, r):
    x = pt(ctx, repr(d))
    if ball_membership(x, [0.0], r, "fermat").is_true:
        assert ball_membership(x, [0.0], r, "sharp").is_true


def test_point_from_gennum(ctx):
    g = GenNum.of(ctx, "eps")
    np.testing.assert_allclose(GenPoint.of(ctx, g).samples[:, 0], ctx.eps)
