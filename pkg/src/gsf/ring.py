"""Generalized numbers over a gauge, sampled on a finite epsilon grid.

A generalized number is stored as a representative net sampled on the grid in
(sign, log|x|) form, so nets like exp(-1/eps) that underflow doubles stay
exact.  Asymptotic statements ("for eps small") are decided on the last
``tail_window`` grid points and come back as three-valued verdicts.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import lru_cache, singledispatch
from typing import Any

import numpy as np

from gsf import expr as E
from gsf.config import Config

_TOL = 1e-9  # rounding guard when turning exponent ratios into integers


class GaugeMismatch(ValueError):
    pass


class NotModerateError(ArithmeticError):
    def __init__(self, verdict, what="result"):
        super().__init__(f"{what} is not moderate: {verdict.diagnostics}")
        self.verdict = verdict


class NotInvertibleError(ZeroDivisionError):
    def __init__(self, verdict):
        super().__init__(f"divisor is not invertible ({verdict.label}): {verdict.diagnostics}")
        self.verdict = verdict


# verdicts


@dataclass(frozen=True)
class Verdict:
    """Three-valued answer; ``value`` is True, False or None (indeterminate)."""

    value: bool | None
    witness: Any = None
    diagnostics: str = ""

    def __post_init__(self):
        if self.value is not None and self.witness is None:
            raise ValueError("decided verdicts need a witness")

    def __bool__(self):
        raise TypeError("use .is_true / .is_false / .is_indeterminate on a Verdict")

    @property
    def is_true(self):
        return self.value is True

    @property
    def is_false(self):
        return self.value is False

    @property
    def is_indeterminate(self):
        return self.value is None

    @property
    def label(self):
        return {True: "true", False: "false", None: "indeterminate"}[self.value]

    def as_dict(self):
        return {"verdict": self.label, "witness": self.witness, "diagnostics": self.diagnostics}

    def __repr__(self):
        return f"Verdict({self.label}, witness={self.witness!r}, {self.diagnostics!r})"


def true(witness, diagnostics=""):
    return Verdict(True, witness, diagnostics)


def false(witness, diagnostics=""):
    return Verdict(False, witness, diagnostics)


def indeterminate(diagnostics):
    return Verdict(None, None, diagnostics)


def all_of(verdicts, witness="all"):
    """Conjunction: False wins, then Indeterminate, then True."""
    verdicts = list(verdicts)
    for v in verdicts:
        if v.is_false:
            return v
    for v in verdicts:
        if v.is_indeterminate:
            return v
    return true(witness, f"{len(verdicts)} checks true")


# gauges and grids


@dataclass(frozen=True)
class Gauge:
    name: str
    net: Callable = field(compare=False)
    log_net: Callable = field(compare=False)

    def validate(self, eps):
        log_rho = np.asarray(self.log_net(eps), dtype=float)
        if not np.all(np.isfinite(log_rho)):
            raise ValueError(f"gauge {self.name}: log rho is not finite on the grid")
        if np.any(np.diff(log_rho) > 0):
            raise ValueError(f"gauge {self.name}: rho must be nonincreasing as eps decreases")
        if not log_rho[-1] < min(log_rho[0], 0.0):
            raise ValueError(f"gauge {self.name}: rho does not tend to 0 on the grid tail")
        return log_rho


EPS_GAUGE = Gauge("eps", lambda e: np.asarray(e, dtype=float), lambda e: np.log(e))
EXP_GAUGE = Gauge("exp", lambda e: np.exp(-1.0 / np.asarray(e)), lambda e: -1.0 / np.asarray(e))
_GAUGES = {"eps": EPS_GAUGE, "exp": EXP_GAUGE}


def make_gauge(spec):
    """A built-in gauge name (``eps``, ``exp``) or a positive eps-expression."""
    if isinstance(spec, Gauge):
        return spec
    if spec in _GAUGES:
        return _GAUGES[spec]
    ex = E.as_expr(spec)

    def log_net(e):
        s, la = signlog_eval(ex, np.asarray(e, dtype=float))
        if np.any(s <= 0):
            raise ValueError(f"gauge {spec!r} is not positive on the grid")
        return la

    return Gauge(str(spec), lambda e: np.exp(log_net(e)), log_net)


@dataclass(frozen=True)
class EpsGrid:
    points: tuple
    tail_window: int

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(p) >= 0):
            raise ValueError("grid must be strictly decreasing")
        if p[0] > 1.0 or p[-1] <= 0.0:
            raise ValueError("grid points must lie in (0, 1]")
        if not 1 <= self.tail_window <= len(p):
            raise ValueError("tail_window must be between 1 and the grid length")

    @classmethod
    def dyadic(cls, kmin, kmax, tail_window):
        return cls(tuple(2.0 ** -k for k in range(kmin, kmax + 1)), tail_window)

    @property
    def array(self):
        return np.asarray(self.points, dtype=float)

    def __len__(self):
        return len(self.points)


class Context:
    """Gauge + grid + thresholds shared by every number built from it."""

    def __init__(self, config: Config | None = None, gauge=None):
        self.config = config or Config()
        self.gauge = make_gauge(gauge if gauge is not None else self.config.gauge)
        self.grid = EpsGrid.dyadic(self.config.kmin, self.config.kmax, self.config.tail_window)
        self.eps = self.grid.array
        self.eps.setflags(write=False)
        self.log_rho = self.gauge.validate(self.eps)
        self.log_rho.setflags(write=False)
        self.log_eps = np.log(self.eps)
        self.size = len(self.eps)
        self.tail = slice(self.size - self.grid.tail_window, self.size)

    def same_as(self, other):
        return self is other or (
            self.gauge.name == other.gauge.name and self.grid == other.grid and self.config == other.config
        )

    def num(self, value, label=None):
        return GenNum.of(self, value, label)

    def const(self, c):
        return GenNum.from_values(self, np.full(self.size, float(c)), label=repr(float(c)))

    def rho_power(self, a):
        """rho^a built in log form."""
        return GenNum(self, np.ones(self.size), a * self.log_rho, label=f"rho^{a}")

    def __repr__(self):
        c = self.config
        return f"Context(gauge={self.gauge.name}, grid=2^-{c.kmin}..2^-{c.kmax}, tail={c.tail_window})"


@lru_cache(maxsize=32)
def get_context(config: Config | None = None) -> Context:
    return Context(config or Config())


# sign-log arithmetic on arrays


def sl_from_float(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sign(v), np.log(np.abs(v))


def sl_to_float(s, la):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(s == 0, 0.0, s * np.exp(la))


def sl_add(a, b):
    sa, la = a
    sb, lb = b
    sa, la, sb, lb = np.broadcast_arrays(sa, la, sb, lb)
    a_big = (sb == 0) | ((sa != 0) & (la >= lb))
    s_hi = np.where(a_big, sa, sb)
    l_hi = np.where(a_big, la, lb)
    s_lo = np.where(a_big, sb, sa)
    l_lo = np.where(a_big, lb, la)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        ratio = np.where(s_lo == 0, 0.0, np.exp(l_lo - l_hi))
        same = s_hi * s_lo >= 0
        mag = np.where(same, np.log1p(ratio), np.log1p(-np.minimum(ratio, 1.0)))
        out_l = l_hi + mag
    out_s = np.where(np.isneginf(out_l) | (s_hi == 0), 0.0, s_hi)
    out_l = np.where(out_s == 0, -np.inf, out_l)
    return out_s, out_l


def sl_neg(a):
    return -a[0], a[1]


def sl_mul(a, b):
    s = a[0] * b[0]
    with np.errstate(invalid="ignore"):
        la = np.where(s == 0, -np.inf, a[1] + b[1])
    return s, la


def sl_div(a, b):
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(b[0] == 0, np.nan, a[0] * b[0])
        la = np.where(a[0] == 0, -np.inf, a[1] - b[1])
    return s, la


def sl_pow(a, p):
    s, la = a
    with np.errstate(invalid="ignore", over="ignore"):
        out_l = np.where(s == 0, -np.inf if p > 0 else np.inf, p * la)
        if float(p).is_integer():
            out_s = np.where(s < 0, (-1.0) ** int(p), np.abs(s))
        else:
            out_s = np.where(s < 0, np.nan, np.abs(s))
        if p < 0:
            out_s = np.where(s == 0, np.nan, out_s)
    return out_s, out_l


@singledispatch
def _sl(node, eps, cache):
    # nodes without a log-domain rule fall back to double evaluation
    return sl_from_float(node.evaluate({E.EPS: eps}))


def _child(node, i, eps, cache):
    c = node._key[i]
    key = id(c)
    if key not in cache:
        cache[key] = _sl(c, eps, cache)
    return cache[key]


@_sl.register
def _(node: E.Const, eps, cache):
    s, la = sl_from_float(node.value)
    return np.full(eps.shape, s), np.full(eps.shape, la)


@_sl.register
def _(node: E.Var, eps, cache):
    if node.name != E.EPS:
        raise KeyError(f"variable {node.name!r} not bound in a generalized number")
    return np.ones(eps.shape), np.log(eps)


@_sl.register
def _(node: E.Add, eps, cache):
    return sl_add(_child(node, 0, eps, cache), _child(node, 1, eps, cache))


@_sl.register
def _(node: E.Neg, eps, cache):
    return sl_neg(_child(node, 0, eps, cache))


@_sl.register
def _(node: E.Mul, eps, cache):
    return sl_mul(_child(node, 0, eps, cache), _child(node, 1, eps, cache))


@_sl.register
def _(node: E.Div, eps, cache):
    return sl_div(_child(node, 0, eps, cache), _child(node, 1, eps, cache))


@_sl.register
def _(node: E.Pow, eps, cache):
    return sl_pow(_child(node, 0, eps, cache), node._key[1].value)


@_sl.register
def _(node: E.Exp, eps, cache):
    arg = sl_to_float(*_child(node, 0, eps, cache))
    s = np.where(np.isneginf(arg), 0.0, 1.0)
    return s, np.where(s == 0, -np.inf, arg)


@_sl.register
def _(node: E.Log, eps, cache):
    s, la = _child(node, 0, eps, cache)
    return sl_from_float(np.where(s > 0, la, np.nan))


def _linear_unary(fn):
    def rule(node, eps, cache):
        return sl_from_float(fn(sl_to_float(*_child(node, 0, eps, cache))))

    return rule


_sl.register(E.Sin)(_linear_unary(np.sin))
_sl.register(E.Cos)(_linear_unary(np.cos))
_sl.register(E.Atan)(_linear_unary(np.arctan))


def signlog_eval(ex, eps):
    """Evaluate an eps-expression in (sign, log|value|) form."""
    eps = np.asarray(eps, dtype=float)
    s, la = _sl(E.as_expr(ex), eps, {})
    return np.broadcast_to(s, eps.shape).astype(float), np.broadcast_to(la, eps.shape).astype(float)


# generalized numbers


class GenNum:
    """A generalized number: a representative net sampled on the context grid."""

    __slots__ = ("ctx", "label", "logabs", "net", "sign")

    def __init__(self, ctx: Context, sign, logabs, net=None, label=None):
        sign = np.asarray(sign, dtype=float).reshape(ctx.size).copy()
        logabs = np.asarray(logabs, dtype=float).reshape(ctx.size).copy()
        logabs[sign == 0] = -np.inf
        sign.setflags(write=False)
        logabs.setflags(write=False)
        self.ctx = ctx
        self.sign = sign
        self.logabs = logabs
        self.net = net
        self.label = label

    # constructors

    @classmethod
    def from_values(cls, ctx, values, net=None, label=None):
        v = np.asarray(values, dtype=float)
        v = np.where(np.abs(v) < ctx.config.zero_threshold, 0.0, v)
        s, la = sl_from_float(v)
        return cls(ctx, s, la, net, label)

    @classmethod
    def from_net(cls, ctx, fn, label=None):
        return cls.from_values(ctx, fn(ctx.eps), net=fn, label=label)

    @classmethod
    def from_expr(cls, ctx, ex, label=None):
        ex = E.as_expr(ex)
        extra = set(ex.free_vars()) - {E.EPS}
        if extra:
            raise ValueError(f"a generalized number may only depend on eps, got {sorted(extra)}")
        s, la = signlog_eval(ex, ctx.eps)
        if np.any(np.isnan(s)) or np.any(np.isnan(la)):
            raise ValueError(f"{ex} is undefined on the grid")
        return cls(ctx, s, la, net=lambda e: ex.evaluate({E.EPS: np.asarray(e, dtype=float)}),
                   label=label or str(ex))

    @classmethod
    def of(cls, ctx, value, label=None):
        if isinstance(value, GenNum):
            _check(ctx, value.ctx)
            return value
        if isinstance(value, (E.Expr, str)):
            return cls.from_expr(ctx, value, label)
        if callable(value):
            return cls.from_net(ctx, value, label)
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return ctx.const(float(arr))
        return cls.from_values(ctx, arr, label=label)

    # views

    @property
    def samples(self):
        return sl_to_float(self.sign, self.logabs)

    @property
    def log_samples(self):
        return self.sign, self.logabs

    @property
    def tail_samples(self):
        return self.samples[self.ctx.tail]

    def __repr__(self):
        name = self.label or "net"
        return f"GenNum({name}, tail={self.tail_samples[-3:]})"

    # arithmetic

    def _coerce(self, other):
        return GenNum.of(self.ctx, other)

    def __add__(self, other):
        return ring_ops(self, self._coerce(other), "+")

    __radd__ = __add__

    def __sub__(self, other):
        return ring_ops(self, self._coerce(other), "-")

    def __rsub__(self, other):
        return ring_ops(self._coerce(other), self, "-")

    def __mul__(self, other):
        return ring_ops(self, self._coerce(other), "*")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ring_ops(self, self._coerce(other), "/")

    def __rtruediv__(self, other):
        return ring_ops(self._coerce(other), self, "/")

    def __neg__(self):
        return GenNum(self.ctx, -self.sign, self.logabs, _lift1(self.net, np.negative), _lbl("-", self))

    def __abs__(self):
        return ring_ops(self, self, "abs")

    def __pow__(self, p):
        p = float(p)
        s, la = sl_pow(self.log_samples, p)
        if np.any(np.isnan(s)):
            raise ValueError("power undefined on some grid sample")
        return GenNum(self.ctx, s, la, _lift1(self.net, lambda v: np.power(v, p)), f"({self.label})^{p:g}")

    def positive_part(self):
        s = np.where(self.sign > 0, 1.0, 0.0)
        return GenNum(self.ctx, s, self.logabs, _lift1(self.net, lambda v: np.maximum(v, 0.0)))

    def min(self, other):
        return ring_ops(self, self._coerce(other), "min")

    def max(self, other):
        return ring_ops(self, self._coerce(other), "max")

    # decisions, as methods for convenience

    def exponent(self):
        return exponent_estimate(self)

    def is_moderate(self):
        return is_moderate(self)

    def is_negligible(self):
        return is_negligible(self)

    def is_strictly_positive(self):
        return is_strictly_positive(self)


def _lbl(op, *xs):
    names = [x.label or "x" for x in xs]
    return f"{op}({', '.join(names)})"


def _lift1(net, fn):
    if net is None:
        return None
    return lambda e: fn(net(e))


def _lift2(a, b, fn):
    if a is None or b is None:
        return None
    return lambda e: fn(a(e), b(e))


def _check(ca, cb):
    if not ca.same_as(cb):
        raise GaugeMismatch(f"{ca!r} vs {cb!r}")


def _greater(x, y):
    """Elementwise x > y from sign-log samples."""
    sx, lx, sy, ly = x.sign, x.logabs, y.sign, y.logabs
    same = sx == sy
    return (sx > sy) | (same & (sx > 0) & (lx > ly)) | (same & (sx < 0) & (lx < ly))


_NP_OPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "min": np.minimum,
    "max": np.maximum,
}


def ring_ops(x: GenNum, y: GenNum, op: str) -> GenNum:
    """Pointwise ring operation on representatives, moderateness re-verified.

    ``op`` is one of ``+ - * / min max abs`` (``abs`` ignores ``y``).
    """
    _check(x.ctx, y.ctx)
    ctx = x.ctx
    if op == "+":
        s, la = sl_add(x.log_samples, y.log_samples)
    elif op == "-":
        s, la = sl_add(x.log_samples, sl_neg(y.log_samples))
    elif op == "*":
        s, la = sl_mul(x.log_samples, y.log_samples)
    elif op == "/":
        v = is_strictly_positive(abs(y))
        if not v.is_true:
            raise NotInvertibleError(v)
        s, la = sl_div(x.log_samples, y.log_samples)
    elif op in ("min", "max"):
        gt = _greater(x, y)
        pick_x = ~gt if op == "min" else gt
        s = np.where(pick_x, x.sign, y.sign)
        la = np.where(pick_x, x.logabs, y.logabs)
    elif op == "abs":
        return GenNum(ctx, np.abs(x.sign), x.logabs, _lift1(x.net, np.abs), _lbl("abs", x))
    else:
        raise ValueError(f"unknown ring operation {op!r}")
    out = GenNum(ctx, s, la, _lift2(x.net, y.net, _NP_OPS[op]), _lbl(op, x, y))
    mod = is_moderate(out)
    if mod.is_false:
        raise NotModerateError(mod)
    return out


# exponent estimation


@dataclass(frozen=True)
class Estimate:
    """Order of a net against the gauge on the tail window."""

    value: float  # median of log|x| / log rho; +inf for an all-zero tail
    stable: bool
    verdict: Verdict
    ratios: tuple = ()
    spread: float = 0.0
    fit_residual: float = 0.0

    def __float__(self):
        return float(self.value)


def _fit(y, x):
    """Least-squares line y ~ a + s x; returns (slope, max abs residual)."""
    if len(y) < 2 or np.ptp(x) == 0:
        return 0.0, 0.0
    poly = np.polynomial.Polynomial.fit(x, y, 1)
    coef = poly.convert().coef
    slope = float(coef[1]) if len(coef) > 1 else 0.0
    return slope, float(np.max(np.abs(y - poly(x))))


def _tail_pattern(x):
    """Reason string if the tail has mixed zeros or sign changes, else None."""
    s = x.sign[x.ctx.tail]
    nz = s != 0
    if np.any(np.isnan(s)):
        return "undefined samples in tail"
    if nz.any() and not nz.all():
        return "zeros in tail"
    if nz.all() and np.any(s != s[0]):
        return "sign change in tail (a zero crossing lies between grid points)"
    return None


def _ratios(x, log_scale):
    t = x.ctx.tail
    la = x.logabs[t]
    with np.errstate(invalid="ignore"):
        return np.where(x.sign[t] == 0, np.inf, la / log_scale[t])


def _stability(x, log_scale):
    """(stable, spread, fit residual) of log|x| against a log scale on the tail."""
    cfg = x.ctx.config
    r = _ratios(x, log_scale)
    finite = np.isfinite(r)
    if not finite.all():
        return False, math.inf, math.inf
    med = float(np.median(r))
    spread = float(np.max(np.abs(r - med)))
    t = x.ctx.tail
    _, resid = _fit(x.logabs[t], log_scale[t])
    return spread <= cfg.slack or resid <= cfg.fit_tol, spread, resid


def exponent_estimate(x: GenNum) -> Estimate:
    ctx = x.ctx
    t = ctx.tail
    if np.all(x.sign[t] == 0):
        return Estimate(math.inf, True, true(math.inf, "all tail samples are exactly zero"))
    reason = _tail_pattern(x)
    r = _ratios(x, ctx.log_rho)
    if reason is not None:
        finite = r[np.isfinite(r)]
        med = float(np.median(finite)) if finite.size else math.nan
        return Estimate(med, False, indeterminate(reason), tuple(r))
    stable, spread, resid = _stability(x, ctx.log_rho)
    med = float(np.median(r))
    diag = f"median ratio {med:.6g}, spread {spread:.3g}, fit residual {resid:.3g}"
    v = true(med, diag) if stable else indeterminate("unstable exponent: " + diag)
    return Estimate(med, stable, v, tuple(r), spread, resid)


# decisions against the gauge


def is_moderate(x: GenNum) -> Verdict:
    """|x_eps| <= rho^-N for some N <= n_max on the tail (witness: smallest N)."""
    n_max = x.ctx.config.n_max
    if np.any(np.isnan(x.logabs[x.ctx.tail])) or np.any(np.isnan(x.sign[x.ctx.tail])):
        return indeterminate("undefined samples in tail")
    r = _ratios(x, x.ctx.log_rho)
    lo = float(np.min(r))
    if lo >= -n_max:
        n = max(0, math.ceil(-lo - _TOL)) if np.isfinite(lo) else 0
        return true(n, f"|x| <= rho^-{n} on the tail")
    if float(np.max(r)) < -n_max:
        return false(n_max, f"|x| exceeds rho^-{n_max:g} on the whole tail (min ratio {lo:.4g})")
    return indeterminate(f"tail straddles rho^-{n_max:g}")


def is_negligible(x: GenNum) -> Verdict:
    """|x_eps| <= rho^m for every tested m <= m_max (False witness: smallest failing m)."""
    m_max = x.ctx.config.m_max
    t = x.ctx.tail
    if np.all(x.sign[t] == 0):
        return true(m_max, "tail is exactly zero")
    r = _ratios(x, x.ctx.log_rho)
    if np.any(np.isnan(r)):
        return indeterminate("undefined samples in tail")
    if float(np.min(r)) >= m_max:
        return true(m_max, f"|x| <= rho^{m_max} on the tail")
    hi = float(np.max(r))
    if not np.isfinite(hi):
        return indeterminate("zeros mixed with samples above rho^m_max in the tail")
    m = max(0, math.floor(hi + _TOL) + 1)
    if m <= m_max:
        return false(m, f"|x| > rho^{m} on the whole tail")
    return indeterminate(f"tail straddles rho^{m_max}")


def is_strictly_positive(x: GenNum) -> Verdict:
    """x_eps > rho^m on the tail for some m <= m_max (witness: smallest m)."""
    m_max = x.ctx.config.m_max
    t = x.ctx.tail
    neg = is_negligible(x)
    if neg.is_true:
        return false("negligible", "x is negligible")
    s = x.sign[t]
    if np.any(np.isnan(s)):
        return indeterminate("undefined samples in tail")
    bad = np.flatnonzero(s <= 0)
    if bad.size:
        e = float(x.ctx.eps[t][bad[0]])
        return false(e, f"x_eps <= 0 at eps={e:.6g} in the tail")
    stable, spread, resid = _stability(x, x.ctx.log_rho)
    if not stable:
        return indeterminate(f"positive on the tail but exponent unstable (spread {spread:.3g}, fit {resid:.3g})")
    m = max(0, math.floor(float(np.max(_ratios(x, x.ctx.log_rho))) + _TOL) + 1)
    if m > m_max:
        return indeterminate(f"positive but below rho^{m_max} on the tail")
    return true(m, f"x > rho^{m} on the tail")


def is_invertible(x: GenNum) -> Verdict:
    return is_strictly_positive(abs(x))


def leq(x: GenNum, y: GenNum) -> Verdict:
    """x <= y up to a negligible net."""
    _check(x.ctx, y.ctx)
    d = GenNum(x.ctx, *sl_add(x.log_samples, sl_neg(y.log_samples))).positive_part()
    v = is_negligible(d)
    return Verdict(v.value, v.witness, "(x - y)^+ " + (v.diagnostics or ""))


def lt_sharp(x: GenNum, y: GenNum) -> Verdict:
    """x < y in the sharp order: y - x is strictly positive (invertible)."""
    _check(x.ctx, y.ctx)
    return is_strictly_positive(GenNum(x.ctx, *sl_add(y.log_samples, sl_neg(x.log_samples))))


# Archimedean questions (finite / infinitesimal) are measured against powers
# of eps rather than the gauge: "tends to 0" does not depend on rho.


def eps_slope(x: GenNum):
    """(slope of log|x| against log eps on the tail, stable flag)."""
    ctx = x.ctx
    t = ctx.tail
    slope, _ = _fit(x.logabs[t], ctx.log_eps[t])
    stable, _, _ = _stability(x, ctx.log_eps)
    return slope, stable


def is_infinitesimal(x: GenNum) -> Verdict:
    ctx = x.ctx
    t = ctx.tail
    slack = ctx.config.slack
    if np.all(x.sign[t] == 0):
        return true(0.0, "tail is exactly zero")
    if np.any(x.sign[t] == 0):
        return indeterminate("zeros in tail")
    slope, stable = eps_slope(x)
    if slope >= slack:
        return true(slope, f"|x| decays like eps^{slope:.3g}")
    if stable:
        r = float(np.min(np.abs(x.tail_samples)))
        return false(r, f"|x| stays above {r:.6g} on the tail (eps-slope {slope:.3g})")
    return indeterminate(f"unstable decay (eps-slope {slope:.3g})")


def is_finite(x: GenNum) -> Verdict:
    """|x| <= C for a real C on the tail (witness: C)."""
    ctx = x.ctx
    t = ctx.tail
    if np.all(x.sign[t] == 0):
        return true(0.0, "tail is exactly zero")
    live = x.sign[t] != 0
    slope, _ = _fit(x.logabs[t][live], ctx.log_eps[t][live])
    stable, _, _ = _stability(x, ctx.log_eps) if live.all() else (False, 0, 0)
    if slope >= -ctx.config.slack:
        c = float(np.max(np.abs(x.tail_samples)))
        return true(c, f"|x| <= {c:.6g} on the tail (eps-slope {slope:.3g})")
    if stable:
        return false(slope, f"|x| grows like eps^{slope:.3g}")
    return indeterminate(f"unstable growth (eps-slope {slope:.3g})")


def infinitely_close(x: GenNum, y: GenNum) -> Verdict:
    _check(x.ctx, y.ctx)
    return is_infinitesimal(GenNum(x.ctx, *sl_add(x.log_samples, sl_neg(y.log_samples))))


def lt_fermat(x: GenNum, y: GenNum) -> Verdict:
    """y - x >= r for some real r > 0 on the tail (witness: r)."""
    _check(x.ctx, y.ctx)
    ctx = x.ctx
    d = GenNum(ctx, *sl_add(y.log_samples, sl_neg(x.log_samples)))
    s = d.sign[ctx.tail]
    bad = np.flatnonzero(s <= 0)
    if bad.size:
        e = float(ctx.eps[ctx.tail][bad[0]])
        return false(e, f"y - x <= 0 at eps={e:.6g}")
    inf = is_infinitesimal(d)
    if inf.is_true:
        return false(inf.witness, "y - x is infinitesimal: " + inf.diagnostics)
    if inf.is_false:
        r = float(np.min(d.tail_samples))
        return true(r, f"y - x >= {r:.6g} on the tail")
    return indeterminate(inf.diagnostics)


# valuation and sharp norm


def _require_eps_gauge(x):
    if x.ctx.gauge.name != "eps":
        raise ValueError("valuation and sharp norm are defined for the gauge rho = eps only")


def valuation(x: GenNum) -> float:
    _require_eps_gauge(x)
    return float(exponent_estimate(x).value)


def sharp_norm(x: GenNum) -> float:
    v = valuation(x)
    if v == math.inf:
        return 0.0
    return math.exp(-v)
