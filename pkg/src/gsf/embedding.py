"""Mollifier nets with vanishing moments and the embedding of distributions.

A mollifier is psi = p(x) chi(x) with chi the unit bump, the polynomial p
chosen by solving a small moment system.  The net psi_eps uses more vanishing
moments as eps shrinks, and distributions T are embedded as the smooth nets
x -> (T * psi^b_eps)(x) with psi^b(x) = b psi(b x).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cache

import mpmath
import numpy as np
from numpy.polynomial import Polynomial

from gsf import expr as E
from gsf.config import Config
from gsf.ring import Context, get_context
from gsf.smooth import GSF
from gsf.special import chi_derivative, chi_derivative_mp, cumulative, gauss_legendre

CHI0 = math.exp(-1.0)  # chi(0)
COND_LIMIT = 1e12


class IllConditionedError(ValueError):
    pass


def _chi_integrals(powers, nodes, a=-1.0, b=1.0):
    """int_a^b x^p chi(x) dx for each p in ``powers``."""
    x, w = gauss_legendre(nodes, a, b)
    cx = chi_derivative(0, x) * w
    return np.array([float(np.sum(cx * x ** p)) for p in powers])


@dataclass(frozen=True)
class Mollifier1D:
    """psi = p(x) chi(x) on [-1, 1] with ``order`` vanishing moments."""

    order: int
    coef: tuple  # monomial coefficients of p, low degree first
    d: float | None
    psi0: bool
    condition: float
    residuals: dict = field(compare=False, hash=False)
    l1_norm: float = 1.0

    @property
    def poly(self):
        return Polynomial(self.coef)

    @property
    def mass(self):
        return 1.0 + self.residuals["mass"]

    def value(self, k, u):
        """k-th derivative of psi (k >= 0) or its cumulative integral (k = -1)."""
        u = np.asarray(u, dtype=float)
        if k < 0:
            return cumulative(lambda t: self.value(0, t), u, total=self.mass)
        p = self.poly
        out = np.zeros(u.shape)
        for i in range(k + 1):
            out = out + math.comb(k, i) * p.deriv(k - i)(u) * chi_derivative(i, u)
        return out

    def mp_value(self, k, u):
        u = mpmath.mpf(u)
        if k < 0:
            if u <= -1:
                return mpmath.mpf(0)
            if u >= 1:
                return mpmath.quad(lambda t: self.mp_value(0, t), [-1, 0, 1])
            return mpmath.quad(lambda t: self.mp_value(0, t), [-1, u])
        if abs(u) >= 1:
            return mpmath.mpf(0)
        p = self.poly
        total = mpmath.mpf(0)
        for i in range(k + 1):
            c = p.deriv(k - i).coef
            pv = mpmath.polyval([mpmath.mpf(float(v)) for v in c[::-1]], u)
            total += math.comb(k, i) * pv * chi_derivative_mp(i, u)
        return total

    def certificate(self):
        return {
            "order": self.order,
            "d": self.d,
            "psi0": self.psi0,
            "condition": self.condition,
            "l1_norm": self.l1_norm,
            "residuals": dict(self.residuals),
        }


def _solve(rows, rhs):
    m = np.array(rows, dtype=float)
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"moment system condition {cond:.3g} exceeds {COND_LIMIT:g}; use a smaller order")
    return np.linalg.solve(m, np.array(rhs, dtype=float)), cond


def _l1(p, nodes):
    roots = [r.real for r in p.roots() if abs(r.imag) < 1e-12 and -1 < r.real < 1]
    cuts = [-1.0] + sorted(roots) + [1.0]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        x, w = gauss_legendre(nodes, a, b)
        total += float(np.sum(w * np.abs(p(x) * chi_derivative(0, x))))
    return total


@cache
def build_mollifier(j, d=None, psi0=False, nodes=200, oracle_nodes=400, j_max=None):
    """Solve the moment system for order ``j``.

    Constraints split by parity: the even part of p carries int psi = 1, the
    even moments and psi(0) = 1; the odd part carries the odd moments and the
    boundary split int_{-1}^0 psi = d (shifted by the even part's 1/2).
    """
    j = int(j)
    if j < 0:
        raise ValueError("moment order must be nonnegative")
    if j_max is not None and j > j_max:
        raise ValueError(f"order {j} exceeds j_max={j_max}")
    if d is not None and not 0.0 < d < 1.0:
        raise ValueError("boundary split d must lie in (0, 1)")
    even_alpha = [a for a in range(0, j + 1, 2)]
    odd_alpha = [a for a in range(1, j + 1, 2)]
    ne = len(even_alpha) + (1 if psi0 else 0)
    moments = _chi_integrals(range(2 * (j + 3) + 2), nodes)
    rows, rhs = [], []
    for a in even_alpha:
        rows.append([moments[a + 2 * i] for i in range(ne)])
        rhs.append(1.0 if a == 0 else 0.0)
    if psi0:
        rows.append([CHI0 if i == 0 else 0.0 for i in range(ne)])
        rhs.append(1.0)
    c_even, cond = _solve(rows, rhs)
    coef = np.zeros(2 * max(ne, 1) + 2 * len(odd_alpha) + 2)
    coef[0:2 * ne:2] = c_even
    use_d = d is not None and abs(d - 0.5) > 0.0
    if use_d:
        no = len(odd_alpha) + 1
        half = _chi_integrals(range(2 * no + 2), nodes, -1.0, 0.0)
        rows = [[moments[a + 2 * i + 1] for i in range(no)] for a in odd_alpha]
        rows.append([half[2 * i + 1] for i in range(no)])
        c_odd, cond_o = _solve(rows, [0.0] * len(odd_alpha) + [d - 0.5])
        coef[1:2 * no:2] = c_odd
        cond = max(cond, cond_o)
    coef = np.trim_zeros(coef, "b")
    if coef.size == 0:
        coef = np.zeros(1)
    p = Polynomial(coef)
    # certificates against an independent quadrature at the oracle node count
    x, w = gauss_legendre(oracle_nodes)
    psi = p(x) * chi_derivative(0, x)
    res = {"mass": float(np.sum(w * psi)) - 1.0}
    for a in range(1, j + 1):
        res[f"moment_{a}"] = float(np.sum(w * psi * x ** a))
    if d is not None:
        xh, wh = gauss_legendre(oracle_nodes, -1.0, 0.0)
        res["d"] = float(np.sum(wh * p(xh) * chi_derivative(0, xh))) - d
    if psi0:
        res["psi0"] = float(p(0.0) * CHI0) - 1.0
    return Mollifier1D(j, tuple(float(c) for c in coef), d, psi0, cond, res, _l1(p, oracle_nodes // 4))


def max_residual(m: Mollifier1D):
    return max(abs(v) for v in m.residuals.values())


# the eps-dependent net


def j_schedule(eps, j_max):
    """Moment order at eps: floor(log2(1/eps)) capped at j_max."""
    eps = np.asarray(eps, dtype=float)
    return np.clip(np.floor(-np.log2(eps) + 1e-9), 0, j_max).astype(int)


class MollifierNet:
    """psi_eps with the moment order following ``j_schedule``; a Kernel for expressions."""

    eps_dependent = True

    def __init__(self, j_max=10, d=None, psi0=False, nodes=200, oracle_nodes=400, fixed_order=None):
        self.j_max = int(j_max)
        self.d = d
        self.psi0 = bool(psi0)
        self.nodes = nodes
        self.oracle_nodes = oracle_nodes
        self.fixed_order = fixed_order
        self.key = ("psi", self.j_max, d, self.psi0, fixed_order)

    @classmethod
    def from_config(cls, config: Config, d=None, psi0=False, fixed_order=None):
        return cls(config.j_max, d, psi0, config.quad_nodes, config.oracle_nodes, fixed_order)

    def order_at(self, eps):
        if self.fixed_order is not None:
            return np.full(np.shape(eps), self.fixed_order, dtype=int)
        return j_schedule(eps, self.j_max)

    def mollifier(self, j):
        return build_mollifier(int(j), self.d, self.psi0, self.nodes, self.oracle_nodes)

    def value(self, order, u, eps):
        if eps is None:
            raise ValueError("the mollifier net needs eps in the environment")
        u, eps = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(eps, dtype=float))
        js = self.order_at(eps)
        out = np.zeros(u.shape)
        for j in np.unique(js):
            mask = js == j
            out[mask] = self.mollifier(j).value(order, u[mask])
        return out

    def mp_value(self, order, u, eps):
        j = int(self.order_at(np.asarray(float(eps))))
        return self.mollifier(j).mp_value(order, u)

    def certificates(self, eps):
        return {int(j): self.mollifier(j).certificate() for j in np.unique(self.order_at(eps))}

    def l1_report(self, eps, eta):
        """Per-eps L1 norm with the flag int|psi| > 1 + eta (monitored, not enforced)."""
        rows = []
        for e, j in zip(np.asarray(eps, dtype=float), self.order_at(eps)):
            l1 = self.mollifier(j).l1_norm
            rows.append({"eps": float(e), "j": int(j), "l1_norm": l1, "flagged": bool(l1 > 1.0 + eta)})
        return rows


# group actions on expressions in one or more variables


def scale_action(r, phi, variables=("x",)):
    """r (.) phi : x -> r^-n phi(x / r)."""
    r = E.as_expr(r)
    n = len(variables)
    mapping = {v: E.Var(v) / r for v in variables}
    return phi.subs(mapping) / r ** n


def translate_action(a, phi, variables=("x",)):
    """a (+) phi : y -> phi(y - a)."""
    a = [E.as_expr(v) for v in (a if isinstance(a, (list, tuple)) else [a])]
    mapping = {v: E.Var(v) - ai for v, ai in zip(variables, a)}
    return phi.subs(mapping)


def group_actions(r, a, phi, variables=("x",)):
    """Return (r (.) phi, a (+) phi, r (.) (a (+) phi), (r a) (+) (r (.) phi))."""
    phi = E.as_expr(phi)
    r_e = E.as_expr(r)
    a_list = a if isinstance(a, (list, tuple)) else [a]
    ra = [r_e * E.as_expr(v) for v in a_list]
    return (
        scale_action(r, phi, variables),
        translate_action(a, phi, variables),
        scale_action(r, translate_action(a, phi, variables), variables),
        translate_action(ra, scale_action(r, phi, variables), variables),
    )


# distribution specs


@dataclass(frozen=True)
class Term:
    kind: str  # delta | heaviside | regular
    coef: float = 1.0
    at: tuple = (0.0,)
    order: int = 0  # derivative order for delta
    expr: object = None  # regular part
    tag: str = "compact"


class DistSpecError(ValueError):
    pass


@dataclass(frozen=True)
class DistSpec:
    terms: tuple

    def derivative(self, k=1):
        out = []
        for t in self.terms:
            if t.kind == "delta":
                out.append(Term("delta", t.coef, t.at, t.order + k))
            elif t.kind == "heaviside":
                if k >= 1:
                    out.append(Term("delta", t.coef, t.at, k - 1))
                else:
                    out.append(t)
            else:
                ex = t.expr
                for _ in range(k):
                    ex = ex.diff("x")
                out.append(Term("regular", t.coef, t.at, 0, ex, t.tag))
        return DistSpec(tuple(out))

    @property
    def dim(self):
        return len(self.terms[0].at) if self.terms else 1

    def __str__(self):
        parts = []
        for t in self.terms:
            c = "" if t.coef == 1 else f"{t.coef:g}*"
            at = ",".join(f"{v:g}" for v in t.at)
            if t.kind == "delta":
                parts.append(f"{c}delta{chr(39) * t.order if t.order <= 3 else f'^({t.order})'}@{at}")
            elif t.kind == "heaviside":
                parts.append(f"{c}H@{at}")
            else:
                parts.append(f"{c}regular({t.expr})")
        return " + ".join(parts)


_TERM = re.compile(
    r"^\s*(?:(?P<coef>[-+]?[0-9.eE+-]+)\s*\*)?\s*"
    r"(?:(?P<kind>delta|H|heaviside)(?P<primes>'*)(?:\^\((?P<k>\d+)\))?\s*@\s*(?P<at>.+?)"
    r"|regular\((?P<expr>.+)\))\s*$"
)


def _split_top(text):
    parts, depth, cur = [], 0, []
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        prev = text[i - 1] if i else ""
        if ch == "+" and depth == 0 and prev not in "eE@*" and i > 0:
            parts.append("".join(cur))
            cur = []
            continue
        cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p.strip()]


def parse_dist(text) -> DistSpec:
    """Parse e.g. ``delta@0``, ``delta'@0.5``, ``delta^(3)@0``, ``H@0``,
    ``regular(x^2)``, ``delta@(0,0)`` and sums of such terms with ``+``."""
    terms = []
    for part in _split_top(text):
        m = _TERM.match(part)
        if not m:
            raise DistSpecError(f"cannot parse distribution term {part!r}")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        if m.group("expr"):
            terms.append(Term("regular", coef, (0.0,), 0, E.parse(m.group("expr")), "compact"))
            continue
        at_text = m.group("at").strip().strip("()[]")
        at = tuple(float(v) for v in at_text.split(","))
        kind = "delta" if m.group("kind") == "delta" else "heaviside"
        order = len(m.group("primes")) + (int(m.group("k")) if m.group("k") else 0)
        if kind == "heaviside" and order:
            kind, order = "delta", order - 1
        terms.append(Term(kind, coef, at, order))
    if not terms:
        raise DistSpecError("empty distribution")
    dims = {len(t.at) for t in terms if t.kind != "regular"}
    if len(dims) > 1:
        raise DistSpecError("terms live in different dimensions")
    return DistSpec(tuple(terms))


# the embedding


def _b_expr(b):
    return E.as_expr(b if b is not None else "eps^-1")


def embed_expr(T: DistSpec, net: MollifierNet, b=None, variables=None):
    """Expression of x -> (T * psi^b_eps)(x)."""
    b = _b_expr(b)
    n = T.dim
    variables = tuple(variables) if variables else (("x",) if n == 1 else tuple(f"x{i + 1}" for i in range(n)))
    total = E.ZERO
    for t in T.terms:
        if t.kind == "delta":
            if n == 1:
                u = b * (E.Var(variables[0]) - t.at[0])
                term = b ** (t.order + 1) * E.Kernel(t.order, u, net)
            else:
                if t.order:
                    raise DistSpecError("derivatives of delta are supported in one dimension only")
                # tensor product scaled into the box [-1/sqrt n, 1/sqrt n]^n
                s = math.sqrt(n)
                term = E.ONE
                for v, a in zip(variables, t.at):
                    term = term * (s * b) * E.Kernel(0, s * b * (E.Var(v) - a), net)
        elif t.kind == "heaviside":
            if n != 1:
                raise DistSpecError("Heaviside is supported in one dimension only")
            term = E.Kernel(-1, b * (E.Var(variables[0]) - t.at[0]), net)
        else:
            if n != 1:
                raise DistSpecError("regular parts are supported in one dimension only")
            f = t.expr.subs({"x": E.Var(variables[0])}) if variables[0] != "x" else t.expr
            term = E.Smoothing(f, variables[0], net, b, nodes=net.nodes)
        total = total + (t.coef * term if t.coef != 1 else term)
    return total, variables


def embed(T: DistSpec, net: MollifierNet | None = None, b=None, ctx: Context | None = None) -> GSF:
    ctx = ctx or get_context()
    net = net or MollifierNet.from_config(ctx.config)
    ex, variables = embed_expr(T, net, b)
    return GSF([ex], variables, ctx=ctx, points="csp", label=f"iota({T})")


# pairing with test functions


@dataclass
class PairingReport:
    dist: str
    exact: float
    rows: list  # (eps, value, abs_error)
    rate: float | None
    monotone: bool
    final_error: float

    def as_dict(self):
        return {
            "dist": self.dist,
            "exact": self.exact,
            "rate": self.rate,
            "monotone": self.monotone,
            "final_error": self.final_error,
            "table": [{"eps": e, "value": v, "abs_error": a} for e, v, a in self.rows],
        }


def _mp_expr_fn(ex, var="x"):
    return lambda x: ex.mp_evaluate({var: x})


def exact_pairing(T: DistSpec, phi, support):
    """<T, phi> from the definition: (-1)^k phi^(k)(a), int_a^inf phi, int f phi."""
    phi = E.as_expr(phi)
    lo, hi = support
    total = mpmath.mpf(0)
    for t in T.terms:
        a = t.at[0]
        if t.kind == "delta":
            dk = phi
            for _ in range(t.order):
                dk = dk.diff("x")
            total += t.coef * (-1) ** t.order * dk.mp_evaluate({"x": mpmath.mpf(a)})
        elif t.kind == "heaviside":
            start = max(a, lo)
            if start < hi:
                total += t.coef * mpmath.quad(_mp_expr_fn(phi), [start, hi])
        else:
            g = t.expr
            total += t.coef * mpmath.quad(lambda x: g.mp_evaluate({"x": x}) * phi.mp_evaluate({"x": x}), [lo, hi])
    return total


def pairing_value(T: DistSpec, net: MollifierNet, b, phi, support, eps, nodes=400):
    """int iota(T)_eps phi at one eps, in double precision.

    Delta terms substitute u = b (x - a) and move the k derivatives from psi
    onto phi (exact, psi vanishes to all orders at +-1):
    int b^(k+1) psi^(k)(b(x - a)) phi(x) dx = (-1)^k int psi(u) phi^(k)(a + u/b) du.
    The direct form loses about 1e-16 * b^k to cancellation.
    """
    phi = E.as_expr(phi)
    b = _b_expr(b)
    lo, hi = support
    e = np.asarray(float(eps))
    bv = float(b.evaluate({E.EPS: e}))
    u, w = gauss_legendre(nodes)
    total = 0.0
    for t in T.terms:
        a = t.at[0]
        if t.kind == "delta":
            dk = phi
            for _ in range(t.order):
                dk = dk.diff("x")
            vals = net.value(0, u, e) * np.broadcast_to(dk.evaluate({"x": a + u / bv, E.EPS: e}), u.shape)
            total += t.coef * (-1) ** t.order * float(np.sum(w * vals))
        elif t.kind == "heaviside":
            # iota(H) = Psi(b (x - a)) is the constant mass beyond a + 1/b
            part = 0.0
            left, right = max(lo, a - 1 / bv), min(hi, a + 1 / bv)
            if left < right:
                x, wx = gauss_legendre(nodes, left, right)
                part += float(np.sum(wx * net.value(-1, bv * (x - a), e) * phi.evaluate({"x": x, E.EPS: e})))
            start = max(lo, a + 1 / bv)
            if start < hi:
                x, wx = gauss_legendre(nodes, start, hi)
                mass = float(net.value(-1, np.array([1.0]), e)[0])
                part += mass * float(np.sum(wx * phi.evaluate({"x": x, E.EPS: e})))
            total += t.coef * part
        else:
            x, wx = gauss_legendre(nodes, lo, hi)
            sm = E.Smoothing(t.expr, "x", net, b, nodes=net.nodes)
            vals = np.broadcast_to(sm.evaluate({"x": x, E.EPS: e}), x.shape) * phi.evaluate({"x": x, E.EPS: e})
            total += t.coef * float(np.sum(wx * vals))
    return total


def pairing_value_direct(T: DistSpec, net: MollifierNet, b, phi, eps, dps=30):
    """Cross-check for delta terms: integrate b^k psi^(k)(u) phi(a + u/b) as is, in mpmath."""
    phi = E.as_expr(phi)
    b = _b_expr(b)
    with mpmath.workdps(dps):
        e = mpmath.mpf(float(eps))
        bv = b.mp_evaluate({E.EPS: e})
        total = mpmath.mpf(0)
        for t in T.terms:
            if t.kind != "delta":
                raise DistSpecError("direct pairing covers delta terms only")
            a = mpmath.mpf(t.at[0])
            k = t.order

            def integrand(u, k=k, a=a):
                return net.mp_value(k, u, e) * phi.mp_evaluate({"x": a + u / bv, E.EPS: e})

            total += t.coef * bv ** k * mpmath.quad(integrand, [-1, 0, 1])
        return float(total)


def pairing_limit(T: DistSpec, phi, support, net: MollifierNet | None = None, b=None,
                  ctx: Context | None = None, floor=1e-14) -> PairingReport:
    """Tabulate int iota(T)_eps phi over the grid against the exact pairing.

    ``monotone`` allows increases up to ``floor`` (double-precision noise of
    the mollifier coefficients).
    """
    ctx = ctx or get_context()
    net = net or MollifierNet.from_config(ctx.config)
    with mpmath.workdps(30):
        exact = float(exact_pairing(T, phi, support))
    rows = []
    for e in ctx.eps:
        v = pairing_value(T, net, b, phi, support, float(e))
        rows.append((float(e), v, abs(v - exact)))
    errs = np.array([r[2] for r in rows])
    tail = errs[ctx.tail]
    scale = floor * (1.0 + abs(exact))
    monotone = bool(np.all(np.diff(tail) <= scale))
    bvals = np.asarray(_b_expr(b).evaluate({E.EPS: ctx.eps}), dtype=float) * np.ones(ctx.size)
    keep = errs > scale
    rate = None
    if keep.sum() >= 3:
        slope = np.polyfit(np.log(bvals[keep]), np.log(errs[keep]), 1)[0]
        rate = float(-slope)
    return PairingReport(str(T), exact, rows, rate, monotone, float(errs[-1]))


# derivative commutation


@dataclass
class CommutationReport:
    dist: str
    alpha: int
    max_abs_diff: float
    exact: bool
    tolerance: float

    @property
    def ok(self):
        return self.max_abs_diff <= self.tolerance

    def as_dict(self):
        return {"dist": self.dist, "alpha": self.alpha, "max_abs_diff": self.max_abs_diff,
                "exact": self.exact, "tolerance": self.tolerance, "ok": self.ok}


def derivative_commutation_check(T: DistSpec, alpha=1, net: MollifierNet | None = None, b=None,
                                 ctx: Context | None = None, points=None) -> CommutationReport:
    """Compare d^alpha(iota T) with iota(d^alpha T) at probe points on every grid eps."""
    ctx = ctx or get_context()
    net = net or MollifierNet.from_config(ctx.config)
    lhs, variables = embed_expr(T, net, b)
    for _ in range(alpha):
        lhs = lhs.diff(variables[0])
    rhs, _ = embed_expr(T.derivative(alpha), net, b)
    b_vals = np.asarray(_b_expr(b).evaluate({E.EPS: ctx.eps}), dtype=float) * np.ones(ctx.size)
    if points is None:
        # probes spread over the support scale 1/b around each singular point
        centers = [t.at[0] for t in T.terms if t.kind != "regular"] or [0.0]
        offs = np.linspace(-1.5, 1.5, 65)
        xs = np.stack([np.concatenate([c + offs / bv for c in centers]) for bv in b_vals])
        singular = True
    else:
        xs = np.broadcast_to(np.asarray(points, dtype=float), (ctx.size, len(points)))
        singular = False
    env = {variables[0]: xs, E.EPS: ctx.eps[:, None]}
    l_vals = np.broadcast_to(lhs.evaluate(env), xs.shape)
    r_vals = np.broadcast_to(rhs.evaluate(env), xs.shape)
    diff = float(np.max(np.abs(l_vals - r_vals)))
    only_singular = all(t.kind != "regular" for t in T.terms)
    tol = 0.0 if only_singular else 1e-8
    return CommutationReport(str(T), alpha, diff, only_singular and singular, tol)


# growth of derivative sups against b


def derivative_growth(net: MollifierNet, b=None, ctx: Context | None = None, max_order=3, samples=801):
    """Fitted p with sup|d^k psi^b_eps| ~ b^p over the tail, for k = 0..max_order."""
    ctx = ctx or get_context()
    bv = np.asarray(_b_expr(b).evaluate({E.EPS: ctx.eps}), dtype=float) * np.ones(ctx.size)
    u = np.linspace(-1, 1, samples)
    out = {}
    t = ctx.tail
    for k in range(max_order + 1):
        sups = np.array([np.max(np.abs(net.value(k, u, e))) for e in ctx.eps]) * bv ** (k + 1)
        out[k] = float(np.polyfit(np.log(bv[t]), np.log(sups[t]), 1)[0])
    return out
