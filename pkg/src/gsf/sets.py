"""Set nets with exact distance oracles, and the membership tests built on them.

Membership in internal and strongly internal sets reduces to the distance of
a point to the set (resp. to its complement), which for boxes, balls,
half-lines and finite unions is available in closed form.
"""

from __future__ import annotations

import ast

import numpy as np

from gsf import expr as E
from gsf import probes
from gsf.points import GenPoint
from gsf.ring import (
    Context,
    GenNum,
    Verdict,
    false,
    indeterminate,
    is_moderate,
    is_negligible,
    is_strictly_positive,
    lt_fermat,
    lt_sharp,
    true,
)


def _eps_values(ctx, items):
    """Evaluate a list of eps-expressions on the grid -> (G, len(items))."""
    cols = []
    for it in items:
        ex = E.as_expr(it)
        cols.append(np.broadcast_to(np.asarray(ex.evaluate({E.EPS: ctx.eps}), dtype=float), (ctx.size,)))
    return np.stack(cols, axis=1)


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


class SetNet:
    """A net of sets A_eps in R^n, all methods vectorised over the grid.

    Points are arrays of shape (G, ..., n); results drop the last axis.
    """

    dim = 1
    label = "set"
    unbounded = False  # structurally unbounded shapes skip the sampled radius search

    def dist(self, ctx, x):
        raise NotImplementedError

    def dist_complement(self, ctx, x):
        raise NotImplementedError

    def contains(self, ctx, x):
        raise NotImplementedError

    def sample(self, ctx, count):
        """Deterministic points of A_eps, shape (G, count', n)."""
        raise NotImplementedError

    def closure(self):
        return self

    def signed_distance(self, ctx, x):
        """d(x, A^c) inside, -d(x, A) outside."""
        inside = self.dist_complement(ctx, x)
        return np.where(inside > 0, inside, -self.dist(ctx, x))

    def __repr__(self):
        return self.label


class Box(SetNet):
    def __init__(self, lo, hi, closed=True):
        self.lo_expr = _listify(lo)
        self.hi_expr = _listify(hi)
        if len(self.lo_expr) != len(self.hi_expr):
            raise ValueError("box bounds must have equal length")
        self.dim = len(self.lo_expr)
        self.closed = closed
        br = "[]" if closed else "()"
        self.label = f"box{br[0]}{self.lo_expr}, {self.hi_expr}{br[1]}"

    def bounds(self, ctx):
        lo, hi = _eps_values(ctx, self.lo_expr), _eps_values(ctx, self.hi_expr)
        if np.any(hi <= lo):
            raise ValueError(f"{self.label}: empty or degenerate on the grid")
        return lo, hi

    def _bshape(self, ctx, x):
        lo, hi = self.bounds(ctx)
        extra = x.ndim - 2
        shape = (ctx.size,) + (1,) * extra + (self.dim,)
        return lo.reshape(shape), hi.reshape(shape)

    def dist(self, ctx, x):
        lo, hi = self._bshape(ctx, x)
        gap = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        return np.linalg.norm(gap, axis=-1)

    def dist_complement(self, ctx, x):
        lo, hi = self._bshape(ctx, x)
        depth = np.minimum(x - lo, hi - x).min(axis=-1)
        return np.maximum(depth, 0.0)

    def contains(self, ctx, x):
        lo, hi = self._bshape(ctx, x)
        if self.closed:
            return np.all((x >= lo) & (x <= hi), axis=-1)
        return np.all((x > lo) & (x < hi), axis=-1)

    def sample(self, ctx, count):
        lo, hi = self.bounds(ctx)
        if self.dim == 1:
            u = np.linspace(0.0, 1.0, count)[:, None]
        else:
            u = np.vstack([probes._halton(count - 2, self.dim), np.zeros(self.dim), np.ones(self.dim)])
        if not self.closed:
            u = u[np.all((u > 0) & (u < 1), axis=1)]
        return lo[:, None, :] + (hi - lo)[:, None, :] * u[None, :, :]

    def closure(self):
        return Box(self.lo_expr, self.hi_expr, closed=True)


class Ball(SetNet):
    def __init__(self, center, radius, closed=False):
        self.c_expr = _listify(center)
        self.r_expr = radius
        self.dim = len(self.c_expr)
        self.closed = closed
        self.label = f"{'closed ' if closed else ''}ball({self.c_expr}, {radius})"

    def parts(self, ctx):
        c = _eps_values(ctx, self.c_expr)
        r = _eps_values(ctx, [self.r_expr])[:, 0]
        if np.any(r <= 0):
            raise ValueError(f"{self.label}: radius must be positive on the grid")
        return c, r

    def _offset(self, ctx, x):
        c, r = self.parts(ctx)
        extra = x.ndim - 2
        c = c.reshape((ctx.size,) + (1,) * extra + (self.dim,))
        r = r.reshape((ctx.size,) + (1,) * extra)
        return np.linalg.norm(x - c, axis=-1), r

    def dist(self, ctx, x):
        d, r = self._offset(ctx, x)
        return np.maximum(d - r, 0.0)

    def dist_complement(self, ctx, x):
        d, r = self._offset(ctx, x)
        return np.maximum(r - d, 0.0)

    def contains(self, ctx, x):
        d, r = self._offset(ctx, x)
        return d <= r if self.closed else d < r

    def sample(self, ctx, count):
        c, r = self.parts(ctx)
        u = probes.unit_ball(self.dim, count)
        if not self.closed:
            u = u * (1.0 - 1e-12)
        return c[:, None, :] + r[:, None, None] * u[None, :, :]

    def closure(self):
        return Ball(self.c_expr, self.r_expr, closed=True)


class HalfLine(SetNet):
    """{x >= a} (direction +1) or {x <= a} (direction -1) in R."""

    unbounded = True

    def __init__(self, a, direction=1, closed=True):
        self.a_expr = a
        self.direction = 1 if direction > 0 else -1
        self.closed = closed
        self.label = f"halfline({a}, {'+' if self.direction > 0 else '-'})"

    def _signed(self, ctx, x):
        a = _eps_values(ctx, [self.a_expr])[:, 0]
        a = a.reshape((ctx.size,) + (1,) * (x.ndim - 2))
        return self.direction * (x[..., 0] - a)

    def dist(self, ctx, x):
        return np.maximum(-self._signed(ctx, x), 0.0)

    def dist_complement(self, ctx, x):
        return np.maximum(self._signed(ctx, x), 0.0)

    def contains(self, ctx, x):
        s = self._signed(ctx, x)
        return s >= 0 if self.closed else s > 0

    def sample(self, ctx, count):
        a = _eps_values(ctx, [self.a_expr])[:, 0]
        # unbounded: sample a geometric sweep away from the endpoint
        steps = np.concatenate([[0.0], np.geomspace(1e-3, 1e6, count - 1)])
        return (a[:, None] + self.direction * steps[None, :])[..., None]

    def closure(self):
        return HalfLine(self.a_expr, self.direction, closed=True)


class Whole(SetNet):
    """R^n; the complement is empty, so its distance is +inf."""

    unbounded = True

    def __init__(self, dim=1):
        self.dim = dim
        self.label = f"R^{dim}"

    def dist(self, ctx, x):
        return np.zeros(x.shape[:-1])

    def dist_complement(self, ctx, x):
        return np.full(x.shape[:-1], np.inf)

    def contains(self, ctx, x):
        return np.ones(x.shape[:-1], dtype=bool)

    def sample(self, ctx, count):
        pts = probes.unit_ball(self.dim, count) * 1e6
        return np.broadcast_to(pts, (ctx.size,) + pts.shape)


class Union(SetNet):
    def __init__(self, *parts):
        if not parts:
            raise ValueError("union of no sets")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ValueError("union parts must share the dimension")
        self.parts = parts
        self.dim = dims.pop()
        self.unbounded = any(p.unbounded for p in parts)
        self.label = "union(" + ", ".join(p.label for p in parts) + ")"

    def dist(self, ctx, x):
        return np.min([p.dist(ctx, x) for p in self.parts], axis=0)

    def dist_complement(self, ctx, x):
        # exact for disjoint parts, a lower bound when parts overlap
        return np.max([p.dist_complement(ctx, x) for p in self.parts], axis=0)

    def contains(self, ctx, x):
        return np.any([p.contains(ctx, x) for p in self.parts], axis=0)

    def sample(self, ctx, count):
        per = max(2, count // len(self.parts))
        return np.concatenate([p.sample(ctx, per) for p in self.parts], axis=1)

    def closure(self):
        return Union(*(p.closure() for p in self.parts))


class RegionSet(SetNet):
    """User-supplied signed distance ``fn(eps, x)`` (positive inside)."""

    def __init__(self, fn, dim=1, label="region", sampler=None):
        self.fn = fn
        self.dim = dim
        self.label = label
        self.sampler = sampler

    def _sd(self, ctx, x):
        e = ctx.eps.reshape((ctx.size,) + (1,) * (x.ndim - 2))
        return np.asarray(self.fn(e, x), dtype=float)

    def dist(self, ctx, x):
        return np.maximum(-self._sd(ctx, x), 0.0)

    def dist_complement(self, ctx, x):
        return np.maximum(self._sd(ctx, x), 0.0)

    def contains(self, ctx, x):
        return self._sd(ctx, x) > 0

    def sample(self, ctx, count):
        if self.sampler is None:
            raise NotImplementedError("region has no sampler")
        return self.sampler(ctx, count)


# literal parser: box(a,b), open_box(a,b), ball(c,r), cball(c,r),
# halfline(a, dir), whole(n), union(...); bounds are eps-expressions


def _arg_text(node):
    if isinstance(node, (ast.List, ast.Tuple)):
        return [ast.unparse(e) for e in node.elts]
    return ast.unparse(node)


def _build(node):
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ValueError(f"expected a set constructor, got {ast.unparse(node)!r}")
    name = node.func.id
    if name == "union":
        return Union(*(_build(a) for a in node.args))
    args = [_arg_text(a) for a in node.args]
    if name in ("box", "open_box"):
        if len(args) != 2:
            raise ValueError(f"{name} takes two bounds")
        return Box(args[0], args[1], closed=name == "box")
    if name in ("ball", "cball"):
        if len(args) != 2:
            raise ValueError(f"{name} takes a center and a radius")
        return Ball(args[0], args[1], closed=name == "cball")
    if name == "halfline":
        direction = float(args[1]) if len(args) > 1 else 1.0
        return HalfLine(args[0], direction)
    if name == "whole":
        return Whole(int(args[0]) if args else 1)
    raise ValueError(f"unknown set constructor {name!r}")


def parse_set(text) -> SetNet:
    tree = ast.parse(text.replace("^", "**"), mode="eval")
    return _build(tree.body)


# membership tests


def _as_point(ctx, x):
    return GenPoint.of(ctx, x)


def _grid_points(x: GenPoint):
    return x.samples


def ball_membership(x, c, r, kind="sharp") -> Verdict:
    """|x - c| < r in the sharp (r generalized) or Fermat (r real) sense."""
    ctx = x.ctx
    d = (x - _as_point(ctx, c)).norm()
    if kind == "sharp":
        return lt_sharp(d, GenNum.of(ctx, r))
    if kind == "fermat":
        rr = float(r)
        if rr <= 0:
            raise ValueError("Fermat radius must be a positive real")
        return lt_fermat(d, ctx.const(rr))
    raise ValueError(f"unknown ball kind {kind!r}")


def internal_membership(x: GenPoint, a: SetNet):
    """x in [A_eps]: the distance from x_eps to A_eps is negligible."""
    d = GenNum.from_values(x.ctx, a.dist(x.ctx, _grid_points(x)))
    return is_negligible(d)


def strongly_internal_membership(x: GenPoint, a: SetNet):
    """x in <A_eps>: the distance to the complement is invertible (witness q)."""
    ctx = x.ctx
    dc = a.dist_complement(ctx, _grid_points(x))
    tail = dc[ctx.tail]
    if np.all(np.isinf(tail)):
        return true(0, "complement is empty")
    if np.any(np.isinf(tail)):
        return indeterminate("unbounded distance to the complement on part of the tail")
    d = GenNum.from_values(ctx, dc)
    mod = is_moderate(d)
    if not mod.is_true:
        return indeterminate("distance to the complement is not moderate: " + mod.diagnostics)
    return is_strictly_positive(d)


def is_sharply_bounded(a: SetNet, ctx: Context, count=None):
    """Find a moderate radius r with sampled |x| < r on the tail (witness: r)."""
    if a.unbounded:
        return false("unbounded", f"{a.label} is unbounded for every eps")
    count = count or ctx.config.probes * a.dim
    pts = a.sample(ctx, count)
    sup = np.max(np.linalg.norm(pts, axis=-1), axis=1)
    if not np.all(np.isfinite(sup)):
        return false("unbounded", "sampled points escape to infinity")
    r = GenNum.from_values(ctx, 2.0 * np.maximum(sup, 0.5 * ctx.config.machine_floor), label="2*sup|x|")
    mod = is_moderate(r)
    if mod.is_false:
        return false(mod.witness, "sup |x| is not moderate: " + mod.diagnostics)
    if mod.is_indeterminate:
        return indeterminate(mod.diagnostics)
    return true(r, f"sampled sup|x| < r with r = 2 sup|x| = O(rho^-{mod.witness}); {pts.shape[1]} samples per eps")


def eps_inclusion(b: SetNet, omega: SetNet, ctx: Context, count=None):
    """Sampled check that B_eps lies inside Omega_eps for every tail eps."""
    bounded = is_sharply_bounded(b, ctx)
    if not bounded.is_true:
        return indeterminate("inner set is not certified sharply bounded: " + bounded.diagnostics)
    count = count or ctx.config.probes * b.dim
    pts = b.sample(ctx, count)
    inside = omega.contains(ctx, pts)
    tail = inside[ctx.tail]
    if np.all(tail):
        return true(pts.shape[1], f"all {pts.shape[1]} sampled points per tail eps lie inside (sampled, not proven)")
    gi, pi = np.argwhere(~tail)[0]
    e = float(ctx.eps[ctx.tail][gi])
    p = pts[ctx.tail][gi, pi].tolist()
    return false({"eps": e, "point": p}, f"sampled point {p} of B_eps escapes Omega_eps at eps={e:.6g}")
