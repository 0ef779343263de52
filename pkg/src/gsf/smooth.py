"""Generalized smooth functions: eps-parametric expressions on a domain net.

Evaluation at a generalized point returns the sampled value together with a
certificate that every partial derivative up to the configured order is
moderate there, which is what makes the net a generalized smooth function at
that point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from gsf import expr as E
from gsf import probes
from gsf.points import GenMatrix, GenPoint
from gsf.ring import (
    Context,
    GenNum,
    Verdict,
    all_of,
    exponent_estimate,
    get_context,
    indeterminate,
    is_finite,
    is_moderate,
    is_negligible,
    true,
)
from gsf.sets import SetNet, Whole, internal_membership, strongly_internal_membership
from gsf.special import gauss_legendre


class DomainError(ValueError):
    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class ModerateError(ArithmeticError):
    def __init__(self, alpha, component, verdict):
        super().__init__(f"derivative alpha={alpha} of component {component} is not moderate: {verdict.diagnostics}")
        self.alpha = alpha
        self.component = component
        self.verdict = verdict


def floor_residual(values, scale, floor):
    """Zero out residuals within ``floor`` of the computation's magnitude.

    Doubles cannot resolve differences below about 1e-16 relative, so a
    residual under ``floor * scale`` is numerically zero.  Returns the floored
    array and the number of samples that were floored.
    """
    values = np.asarray(values, dtype=float)
    scale = np.maximum(np.asarray(scale, dtype=float), np.finfo(float).tiny)
    hit = np.abs(values) <= floor * scale
    return np.where(hit, 0.0, values), int(np.count_nonzero(hit & (values != 0)))


def _names(n, variables):
    if variables is not None:
        return tuple(variables)
    return ("x",) if n == 1 else tuple(f"x{i + 1}" for i in range(n))


class GSF:
    """A net of smooth maps R^n -> R^d given by expressions in ``variables`` and eps.

    ``points`` marks which generalized points the map is meant for: ``sharp``
    (sharply open domain), ``fermat`` or ``csp`` (compactly supported points).
    """

    def __init__(self, components, variables=None, domain: SetNet | None = None, ctx: Context | None = None,
                 points="sharp", codomain=None, order=None, label=None):
        if isinstance(components, (str, E.Expr)):
            components = [components]
        self.components = tuple(E.as_expr(c) for c in components)
        free = set()
        for c in self.components:
            free |= set(c.free_vars())
        free.discard(E.EPS)
        if variables is None:
            variables = sorted(free) if len(free) > 1 else None
            n = max(1, len(free))
        else:
            n = len(variables)
        self.variables = _names(n, variables)
        extra = free - set(self.variables)
        if extra:
            raise ValueError(f"unbound variables {sorted(extra)}")
        self.n = len(self.variables)
        self.d = len(self.components)
        self.domain = domain or Whole(self.n)
        if self.domain.dim != self.n:
            raise ValueError("domain dimension does not match the number of variables")
        self.ctx = ctx or get_context()
        self.points = points
        self.codomain = codomain or f"R^{self.d}"
        self.order = self.ctx.config.cert_order if order is None else order
        self.label = label or ", ".join(str(c) for c in self.components)
        self._dcache = {}

    @classmethod
    def parse(cls, text, variables=None, **kw):
        parts = [p for p in text.split(";") if p.strip()]
        return cls([E.parse(p) for p in parts], variables, **kw)

    def __repr__(self):
        return f"GSF({self.label})"

    def with_components(self, components, label=None):
        return GSF(components, self.variables, self.domain, self.ctx, self.points, self.codomain, self.order, label)

    # expressions

    def derivative_expr(self, alpha, component=0):
        key = (tuple(alpha), component)
        if key not in self._dcache:
            self._dcache[key] = E.derivative(self.components[component], alpha, self.variables)
        return self._dcache[key]

    def gradient_exprs(self):
        return [[self.components[i].diff(v) for v in self.variables] for i in range(self.d)]

    # sampled evaluation; x has shape (G, ..., n)

    def env(self, x):
        x = np.asarray(x, dtype=float)
        env = {v: x[..., i] for i, v in enumerate(self.variables)}
        env[E.EPS] = self.ctx.eps.reshape((self.ctx.size,) + (1,) * (x.ndim - 2))
        return env

    def eval_exprs(self, exprs, x):
        x = np.asarray(x, dtype=float)
        env = self.env(x)
        out = [np.broadcast_to(np.asarray(e.evaluate(env), dtype=float), x.shape[:-1]) for e in exprs]
        return np.stack(out, axis=-1)

    def values(self, x):
        return self.eval_exprs(self.components, x)

    def jacobian_values(self, x):
        """Shape (G, ..., d, n)."""
        flat = [e for row in self.gradient_exprs() for e in row]
        vals = self.eval_exprs(flat, x)
        return vals.reshape(vals.shape[:-1] + (self.d, self.n))

    def __call__(self, x: GenPoint) -> GenPoint:
        return GenPoint(self.ctx, self.values(x.samples))


@dataclass
class EvalCertificate:
    """Moderateness verdicts of all partial derivatives up to ``order`` at a point."""

    domain: Verdict
    entries: list = field(default_factory=list)  # (alpha, component, verdict, exponent)

    @property
    def verdict(self):
        return all_of([self.domain] + [e[2] for e in self.entries], witness=len(self.entries))

    def as_dict(self):
        return {
            "domain": self.domain.as_dict(),
            "derivatives": [
                {"alpha": list(a), "component": c, **v.as_dict(), "exponent": x} for a, c, v, x in self.entries
            ],
        }


@dataclass
class EvalResult:
    value: GenPoint
    certificate: EvalCertificate


def domain_verdict(f: GSF, x: GenPoint) -> Verdict:
    """Strong membership if possible, else plain internal membership."""
    strong = strongly_internal_membership(x, f.domain)
    if strong.is_true:
        return strong
    weak = internal_membership(x, f.domain)
    if weak.is_false:
        return weak
    return weak if weak.is_true else strong


def gsf_eval(f: GSF, x: GenPoint, order=None) -> EvalResult:
    """[f_eps(x_eps)] with a moderateness certificate of derivatives up to ``order``."""
    x = GenPoint.of(f.ctx, x)
    dom = domain_verdict(f, x)
    if dom.is_false:
        raise DomainError(f"point is not in the domain {f.domain.label}: {dom.diagnostics}", dom)
    order = f.order if order is None else order
    cert = EvalCertificate(dom)
    for k in range(order + 1):
        for alpha in E.multi_indices(f.n, k) if k else [(0,) * f.n]:
            for i in range(f.d):
                with np.errstate(all="ignore"):
                    vals = f.eval_exprs([f.derivative_expr(alpha, i)], x.samples)[:, 0]
                if np.any(np.isnan(vals[f.ctx.tail])):
                    v = indeterminate("derivative undefined at some tail sample")
                    cert.entries.append((alpha, i, v, None))
                    continue
                num = GenNum.from_values(f.ctx, vals)
                v = is_moderate(num)
                cert.entries.append((alpha, i, v, _exp_value(num)))
                if v.is_false:
                    raise ModerateError(alpha, i, v)
    return EvalResult(f(x), cert)


def _exp_value(num):
    est = exponent_estimate(num)
    return est.value if np.isfinite(est.value) or est.value == np.inf else None


def differentiate(f: GSF, alpha) -> GSF:
    alpha = tuple(alpha)
    return f.with_components([f.derivative_expr(alpha, i) for i in range(f.d)], label=f"d^{alpha}({f.label})")


def jacobian(f: GSF, x: GenPoint) -> GenMatrix:
    x = GenPoint.of(f.ctx, x)
    return GenMatrix(f.ctx, f.jacobian_values(x.samples))


def directional_derivative(f: GSF, x: GenPoint, v: GenPoint) -> GenPoint:
    x = GenPoint.of(f.ctx, x)
    v = GenPoint.of(f.ctx, v)
    dom = domain_verdict(f, x)
    if dom.is_false:
        raise DomainError(f"point is not in the domain {f.domain.label}", dom)
    return jacobian(f, x) @ v


# incremental ratios


@dataclass
class RatioReport:
    rows: list  # dicts with h label, residual tail, verdict
    radius: str

    @property
    def ok(self):
        return not any(r["verdict"].is_false for r in self.rows)


def _second_directional(f, pts, v):
    """D^2 f(pts)[v, v] for points (G, m, n), v (G, n) -> (G, m, d)."""
    out = 0.0
    for i in range(f.n):
        for j in range(f.n):
            alpha = [0] * f.n
            alpha[i] += 1
            alpha[j] += 1
            vals = f.eval_exprs([f.derivative_expr(tuple(alpha), c) for c in range(f.d)], pts)
            out = out + vals * (v[:, None, i] * v[:, None, j])[..., None]
    return out


def taylor_ratio(f: GSF, x: GenPoint, v: GenPoint, h: GenNum, nodes=32):
    """r(x, h) = Df(x) v + h int_0^1 (1 - t) D^2 f(x + t h v)[v, v] dt, per eps."""
    t, w = gauss_legendre(nodes, 0.0, 1.0)
    xs, vs, hs = x.samples, v.samples, h.samples
    first = np.einsum("gdn,gn->gd", f.jacobian_values(xs), vs)
    pts = xs[:, None, :] + (t[None, :, None] * hs[:, None, None]) * vs[:, None, :]
    second = _second_directional(f, pts, vs)
    rem = np.einsum("gmd,m->gd", second, w * (1.0 - t))
    return first + hs[:, None] * rem


def incremental_ratio_check(f: GSF, x, v, h_set) -> RatioReport:
    """Residuals of f(x + h v) = f(x) + h r(x, h) for each h, with negligibility verdicts."""
    ctx = f.ctx
    x = GenPoint.of(ctx, x)
    v = GenPoint.of(ctx, v)
    rows = []
    for h in h_set:
        h = GenNum.of(ctx, h)
        xh = x + v * h
        if domain_verdict(f, xh).is_false:
            raise DomainError(f"x + h v leaves the domain for h={h.label}")
        fx, fxh = f.values(x.samples), f.values(xh.samples)
        r = taylor_ratio(f, x, v, h)
        hr = h.samples[:, None] * r
        res = np.linalg.norm(fxh - fx - hr, axis=1)
        scale = np.max(np.abs(np.stack([fx, fxh, hr])), axis=(0, 2))
        floored, hits = floor_residual(res, scale, ctx.config.machine_floor)
        verdict = is_negligible(GenNum.from_values(ctx, floored))
        note = f"; {hits} samples at the machine floor" if hits else ""
        rows.append({
            "h": h.label,
            "residual_tail": res[ctx.tail].tolist(),
            "verdict": Verdict(verdict.value, verdict.witness, verdict.diagnostics + note),
        })
    return RatioReport(rows, "h taken from the supplied set")


# composition and norms


def _range_probe(g: GSF, count):
    ctx = g.ctx
    if g.domain.unbounded:
        pts = probes.unit_ball(g.n, count) * 10.0
        return np.broadcast_to(pts, (ctx.size,) + pts.shape)
    return g.domain.sample(ctx, count)


def compose(f: GSF, g: GSF) -> GSF:
    """f o g at expression level; the range of g is probed against f's domain."""
    if g.d != f.n:
        raise ValueError(f"cannot compose: g has {g.d} outputs, f takes {f.n} inputs")
    if not isinstance(f.domain, Whole):
        pts = _range_probe(g, g.ctx.config.probes * g.n)
        vals = g.values(pts)
        inside = f.domain.contains(f.ctx, vals)[f.ctx.tail]
        if not np.all(inside):
            raise DomainError(f"range of {g.label} leaves the domain {f.domain.label} on probe points")
    mapping = dict(zip(f.variables, g.components))
    comps = [c.subs(mapping) for c in f.components]
    return GSF(comps, g.variables, g.domain, g.ctx, g.points, f.codomain, max(f.order, g.order),
               label=f"({f.label}) o ({g.label})")


def op_norm(a: GenMatrix) -> GenNum:
    return a.op_norm()


# Lipschitz probes


@dataclass
class LipschitzResult:
    verdict: Verdict
    constant: GenNum
    radius: object
    kind: str

    def as_dict(self):
        return {"kind": self.kind, **self.verdict.as_dict(), "L_tail": self.constant.tail_samples.tolist()}


@lru_cache(maxsize=16)
def _lipschitz_offsets(n, count):
    dirs = probes.unit_sphere(n, max(2, count // 8))
    shells = 2.0 ** -np.arange(0, 54, 2)
    radial = (shells[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    return np.vstack([probes.unit_ball(n, count), radial])


def lipschitz_probe(f: GSF, x, kind="sharp", radius=None) -> LipschitzResult:
    """Sampled sup |f(y) - f(z)| / |y - z| over a small ball around x.

    Sharp kind uses the infinitesimal radius rho (or ``radius``) and asks for a
    moderate constant; Fermat kind uses a real radius (default 0.1) and also
    asks the constant to be finite.
    """
    ctx = f.ctx
    x = GenPoint.of(ctx, x)
    if kind == "sharp":
        r = GenNum.of(ctx, radius) if radius is not None else ctx.rho_power(1)
        rs = r.samples
    elif kind == "fermat":
        r = float(radius) if radius is not None else 0.1
        rs = np.full(ctx.size, r)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    off = _lipschitz_offsets(f.n, ctx.config.probes * f.n)
    pts = x.samples[:, None, :] + rs[:, None, None] * off[None, :, :]
    vals = f.values(pts)
    # pairs: the center against everything, plus consecutive probe pairs
    dx = np.linalg.norm(pts[:, 1:, :] - pts[:, :1, :], axis=-1)
    df = np.linalg.norm(vals[:, 1:, :] - vals[:, :1, :], axis=-1)
    dx2 = np.linalg.norm(np.diff(pts, axis=1), axis=-1)
    df2 = np.linalg.norm(np.diff(vals, axis=1), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.concatenate([np.where(dx > 0, df / dx, 0.0), np.where(dx2 > 0, df2 / dx2, 0.0)], axis=1)
    big = np.max(np.nan_to_num(q, nan=0.0), axis=1)
    L = GenNum.from_values(ctx, big, label="L")
    mod = is_moderate(L)
    if kind == "sharp" or not mod.is_true:
        verdict = mod if not mod.is_true else true(float(L.tail_samples[-1]), f"moderate L, {mod.diagnostics}")
    else:
        fin = is_finite(L)
        verdict = fin if not fin.is_true else true(fin.witness, "finite L: " + fin.diagnostics)
    return LipschitzResult(verdict, L, radius if radius is not None else ("rho" if kind == "sharp" else 0.1), kind)

