"""Certified local inversion of generalized smooth functions.

The sharp certificate fixes a = |Df(x0)^-1|, b = 1/(2a) (so ab = 1/2 and the
inverse derivative bound is c = 2a), then shrinks a radius r per eps until
|Df(x0) - Df(x)| < b on probe points of B_2r(x0).  The map is then a
diffeomorphism of B_r(x0) onto a set containing B_{r/c}(f(x0)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gsf import probes
from gsf.points import GenMatrix, GenPoint
from gsf.ring import (
    GenNum,
    Verdict,
    exponent_estimate,
    false,
    is_finite,
    is_negligible,
    is_strictly_positive,
    lt_sharp,
    sharp_norm,
    true,
    valuation,
)
from gsf.sets import ball_membership
from gsf.smooth import GSF, domain_verdict, floor_residual, lipschitz_probe
from gsf.special import gauss_legendre


class CertificateError(RuntimeError):
    def __init__(self, message, verdict=None, detail=None):
        super().__init__(message)
        self.verdict = verdict
        self.detail = detail


class NewtonError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


def hadamard_constant(n):
    """C with |det M| <= C |M|^n for n x n matrices (operator 2-norm)."""
    return float(n) ** (n / 2.0)


def is_nondegenerate(a: GenMatrix) -> Verdict:
    """det A invertible, which is equivalent to A being invertible."""
    if a.shape[0] != a.shape[1]:
        raise ValueError("nondegeneracy needs a square matrix")
    return is_strictly_positive(abs(a.det()))


@dataclass
class LocalCert:
    f: GSF
    x0: GenPoint
    y0: GenPoint
    a: GenNum
    b: GenNum
    r: GenNum
    c: GenNum
    kind: str = "sharp"
    r_real: float | None = None
    s_real: float | None = None
    checks: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)

    @property
    def image_radius(self) -> GenNum:
        """r / c, the radius of the ball around y0 covered by the inverse."""
        return self.r / self.c

    def summary(self):
        def num(x):
            est = exponent_estimate(x)
            return {"expression": power_law_text(x), "exponent": est.value, "stable": est.stable,
                    "tail": x.tail_samples.tolist()}

        out = {
            "kind": self.kind,
            "x0_tail": self.x0.samples[self.x0.ctx.tail].tolist(),
            "a": num(self.a),
            "b": num(self.b),
            "r": num(self.r),
            "c": num(self.c),
            "image_radius": num(self.image_radius),
            "checks": {k: v.as_dict() for k, v in self.checks.items()},
            "evidence": self.evidence,
        }
        if self.kind == "fermat":
            out["r_real"] = self.r_real
            out["s_real"] = self.s_real
        return out


def power_law_text(x: GenNum):
    """Least-squares fit C*rho^a of a positive net on the tail, as text."""
    t = x.ctx.tail
    la = x.logabs[t]
    if not np.all(np.isfinite(la)):
        return None
    a, logc = np.polynomial.polynomial.polyfit(x.ctx.log_rho[t], la, 1)[::-1]
    sign = "-" if np.all(x.sign[t] < 0) else ""
    return f"{sign}{math.exp(logc):.6g}*rho^{a:.6g}"


def _derivative_deviation(f, j0, x0s, radius, unit):
    """max over probes of |Df(x0) - Df(x)|_2 per eps, probes in B_radius(x0)."""
    pts = x0s[:, None, :] + radius[:, None, None] * unit[None, :, :]
    jac = f.jacobian_values(pts)
    dev = np.linalg.norm(jac - j0[:, None, :, :], ord=2, axis=(-2, -1))
    worst = np.argmax(dev, axis=1)
    return dev.max(axis=1), pts[np.arange(len(worst)), worst]


def _radius_search(f, j0, x0s, bound, r0, budget, unit, refine=6):
    """Halve a per-eps radius until the deviation on B_2r(x0) is below ``bound``.

    After halving, ``refine`` log-scale bisection steps between the passing r and
    the failing 2r remove the power-of-two quantization (r never decreases).
    """
    size = x0s.shape[0]

    def passes(r):
        dev, pts = _derivative_deviation(f, j0, x0s, 2 * r, unit)
        inside = f.domain.contains(f.ctx, x0s[:, None, :] + 2 * r[:, None, None] * unit[None, :, :]).all(axis=1)
        return (dev < bound) & inside, dev, pts

    r = np.full(size, float(r0))
    done = np.zeros(size, dtype=bool)
    worst_pt = np.zeros_like(x0s)
    for _ in range(budget):
        ok, dev, pts = passes(r)
        worst_pt = np.where((done | ok)[:, None], worst_pt, pts)
        done |= ok
        if done.all():
            break
        r = np.where(done, r, r / 2)
    if not done.all():
        return r, done, dev, worst_pt
    lo, hi = r.copy(), np.where(r < r0, 2 * r, r)
    for _ in range(refine if np.any(hi > lo) else 0):
        mid = np.sqrt(lo * hi)
        ok, _, _ = passes(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    _, dev, _ = passes(lo)
    return lo, done, dev, worst_pt


def _jacobian_at(f, x):
    return f.jacobian_values(x.samples)


def sharp_ift_certificate(f: GSF, x0, r0=None, budget=None) -> LocalCert:
    ctx = f.ctx
    cfg = ctx.config
    x0 = GenPoint.of(ctx, x0)
    if f.d != f.n:
        raise CertificateError("local inversion needs as many equations as unknowns")
    dom = domain_verdict(f, x0)
    if dom.is_false:
        raise CertificateError(f"x0 is not in the domain {f.domain.label}", dom)
    j0 = _jacobian_at(f, x0)
    jm = GenMatrix(ctx, j0)
    nondeg = is_nondegenerate(jm)
    if not nondeg.is_true:
        raise CertificateError(f"Df(x0) is not invertible ({nondeg.label}): {nondeg.diagnostics}", nondeg)
    inv = np.linalg.inv(j0)
    a_vals = np.linalg.norm(inv, ord=2, axis=(1, 2))
    n = f.n
    # |M| >= (|det M| / C)^(1/n) for M = Df(x0)^-1
    det_inv = np.abs(np.linalg.det(inv))
    hadamard_ok = bool(np.all(a_vals * (1 + 1e-12) >= (det_inv / hadamard_constant(n)) ** (1.0 / n)))
    a = GenNum.from_values(ctx, a_vals, label="|Df(x0)^-1|")
    b = GenNum.from_values(ctx, 0.5 / a_vals, label="b")
    c = GenNum.from_values(ctx, 2.0 * a_vals, label="c")
    unit = probes.unit_ball(n, cfg.probes * n)
    r_vals, done, dev, worst = _radius_search(
        f, j0, x0.samples, 0.5 / a_vals, r0 if r0 is not None else cfg.initial_radius,
        budget or cfg.halving_budget, unit)
    if not done.all():
        i = int(np.flatnonzero(~done)[0])
        raise CertificateError(
            f"radius search exhausted {budget or cfg.halving_budget} halvings at eps={ctx.eps[i]:.6g}",
            detail={"eps": float(ctx.eps[i]), "probe": worst[i].tolist(), "deviation": float(dev[i]),
                    "bound": float(0.5 / a_vals[i])})
    r = GenNum.from_values(ctx, r_vals, label="r")
    ab = GenNum.from_values(ctx, a_vals * (0.5 / a_vals))
    checks = {
        "domain": dom,
        "nondegenerate": nondeg,
        "a_positive": is_strictly_positive(a),
        "b_positive": is_strictly_positive(b),
        "r_positive": is_strictly_positive(r),
        "c_positive": is_strictly_positive(c),
        "ab_lt_1": lt_sharp(ab, ctx.const(1.0)),
        "hadamard": true(hadamard_constant(n), "norm vs determinant bound holds")
        if hadamard_ok else false(hadamard_constant(n), "norm vs determinant bound violated"),
    }
    bad = [k for k, v in checks.items() if not v.is_true]
    if bad:
        raise CertificateError(f"certificate checks not all true: {bad}", checks[bad[0]])
    evidence = {
        "probes_per_eps": int(unit.shape[0]),
        "sampled": True,
        "max_deviation_over_b_tail": (dev / (0.5 / a_vals))[ctx.tail].tolist(),
    }
    return LocalCert(f, x0, f(x0), a, b, r, c, "sharp", checks=checks, evidence=evidence)


def fermat_ift_certificate(f: GSF, x0, k=None, r0=None, budget=None) -> LocalCert:
    """Certificate with real radii: needs |Df(x0)^-1| finite (<= k if given)."""
    ctx = f.ctx
    cfg = ctx.config
    sharp = sharp_ift_certificate(f, x0, r0, budget)
    fin = is_finite(sharp.a)
    if not fin.is_true:
        raise CertificateError(
            "|Df(x0)^-1| is not finite, so no real neighbourhood works "
            "(as for f(x) = r x with infinitesimal r): " + fin.diagnostics, fin)
    if k is not None and np.any(sharp.a.tail_samples > k):
        raise CertificateError(f"|Df(x0)^-1| exceeds k={k} on the tail", false(k, "a > k"))
    grad = GSF([e for row in f.gradient_exprs() for e in row], f.variables, f.domain, ctx)
    lip = lipschitz_probe(grad, sharp.x0, "fermat")
    if not lip.verdict.is_true:
        raise CertificateError("Df is not Fermat-continuous at x0 on probes: " + lip.verdict.diagnostics, lip.verdict)
    # one real radius for the whole tail
    x0s = sharp.x0.samples
    j0 = _jacobian_at(f, sharp.x0)
    a_vals = sharp.a.samples
    unit = probes.unit_ball(f.n, cfg.probes * f.n)
    r = float(r0 if r0 is not None else cfg.initial_radius)
    t = ctx.tail
    for _ in range(budget or cfg.halving_budget):
        dev, _ = _derivative_deviation(f, j0[t], x0s[t], np.full(x0s[t].shape[0], 2 * r), unit)
        pts = x0s[:, None, :] + 2 * r * unit[None, :, :]
        inside = f.domain.contains(ctx, pts)[t].all()
        if inside and np.all(dev < 0.5 / a_vals[t]):
            break
        r /= 2
    else:
        raise CertificateError("no real radius found within the halving budget")
    s = 0.5 * float(np.min(r / (2.0 * a_vals[t])))
    checks = dict(sharp.checks)
    checks["a_finite"] = fin
    checks["fermat_continuity"] = lip.verdict
    return LocalCert(f, sharp.x0, sharp.y0, sharp.a, sharp.b, ctx.const(r), sharp.c, "fermat", r, s, checks,
                     {**sharp.evidence, "real_radius_probes": int(unit.shape[0])})


# evaluation of the inverse


@dataclass
class InverseResult:
    value: GenPoint
    residual: GenNum
    verdict: Verdict
    iterations: np.ndarray
    floored: int = 0


def newton_solve(f: GSF, y_s, x_start, center, radius, cfg, log_tol=None):
    """Damped, projected Newton per eps for f(x) = y; arrays are (G, n).

    Stops at |f(x) - y| <= max(rho^q_tol, floor * scale) or when no step improves.
    """
    x = np.array(x_start, dtype=float)
    size = x.shape[0]
    tol_abs = np.exp(log_tol) if log_tol is not None else np.zeros(size)
    iters = np.zeros(size, dtype=int)
    res = np.linalg.norm(f.values(x) - y_s, axis=1)
    best = res.copy()
    since = np.zeros(size, dtype=int)
    trace = []
    active = np.ones(size, dtype=bool)
    for it in range(cfg.newton_max_iter):
        fx = f.values(x)
        scale = np.maximum(np.linalg.norm(y_s, axis=1), np.linalg.norm(fx, axis=1))
        res = np.linalg.norm(fx - y_s, axis=1)
        active &= ~((res <= tol_abs) | (res <= cfg.newton_floor * np.maximum(scale, 1e-300)))
        trace.append(res.copy())
        if not active.any():
            break
        jac = f.jacobian_values(x)
        with np.errstate(all="ignore"):
            step = np.linalg.solve(jac, (fx - y_s)[..., None])[..., 0]
        step = np.where(np.isfinite(step), step, 0.0)
        lam = np.ones(size)
        new = x.copy()
        for _ in range(40):
            cand = x - lam[:, None] * step
            off = cand - center
            dist = np.linalg.norm(off, axis=1)
            over = dist > radius
            cand = np.where(over[:, None], center + off * (radius * (1 - 1e-15) / np.where(over, dist, 1.0))[:, None],
                            cand)
            cres = np.linalg.norm(f.values(cand) - y_s, axis=1)
            better = cres < res
            new = np.where((active & better)[:, None], cand, new)
            need = active & ~better & (lam > 1e-12)
            if not need.any():
                break
            lam = np.where(need, lam / 2, lam)
        moved = np.any(new != x, axis=1)
        x = np.where(active[:, None], new, x)
        iters += active
        newres = np.linalg.norm(f.values(x) - y_s, axis=1)
        improved = newres < best
        best = np.minimum(best, newres)
        since = np.where(improved, 0, since + 1)
        # no admissible step left: the residual is at the precision limit
        active &= moved
        stuck = active & (since >= 10)
        if stuck.any():
            raise NewtonError("Newton stagnated (no residual decrease over 10 steps)",
                              [r.tolist() for r in trace[-10:]])
    return _polish(f, x, y_s, center, radius), iters


def _polish(f, x, y_s, center, radius, steps=2):
    """Plain Newton steps past the stopping tolerance, kept where the residual does not grow."""
    res = np.linalg.norm(f.values(x) - y_s, axis=1)
    for _ in range(steps):
        with np.errstate(all="ignore"):
            step = np.linalg.solve(f.jacobian_values(x), (f.values(x) - y_s)[..., None])[..., 0]
        cand = x - np.where(np.isfinite(step), step, 0.0)
        inside = np.linalg.norm(cand - center, axis=1) <= radius
        cres = np.linalg.norm(f.values(cand) - y_s, axis=1)
        keep = inside & (cres <= res)
        x = np.where(keep[:, None], cand, x)
        res = np.where(keep, cres, res)
    return x


def local_inverse_eval(cert: LocalCert, y) -> InverseResult:
    f = cert.f
    ctx = f.ctx
    cfg = ctx.config
    y = GenPoint.of(ctx, y)
    if cert.kind == "fermat":
        member = ball_membership(y, cert.y0, cert.s_real, "fermat")
    else:
        member = ball_membership(y, cert.y0, cert.image_radius, "sharp")
    if member.is_false:
        raise CertificateError("y is outside the certified image ball: " + member.diagnostics, member)
    radius = cert.r.samples if cert.kind == "sharp" else np.full(ctx.size, cert.r_real)
    x, iters = newton_solve(f, y.samples, cert.x0.samples, cert.x0.samples, radius, cfg,
                            log_tol=cfg.q_tol * ctx.log_rho)
    fx = f.values(x)
    res = np.linalg.norm(fx - y.samples, axis=1)
    scale = np.maximum(np.linalg.norm(fx, axis=1), np.linalg.norm(y.samples, axis=1))
    floored, hits = floor_residual(res, scale, cfg.machine_floor)
    resid = GenNum.from_values(ctx, floored, label="|f(x) - y|")
    v = is_negligible(resid)
    if hits:
        v = Verdict(v.value, v.witness, v.diagnostics + f"; {hits} samples at the machine floor")
    return InverseResult(GenPoint(ctx, x), GenNum.from_values(ctx, res), v, iters, hits)


def adjugate(m):
    """Adjugate of a stack of square matrices (..., n, n)."""
    m = np.asarray(m, dtype=float)
    n = m.shape[-1]
    if n == 1:
        return np.ones_like(m)
    adj = np.empty_like(m)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(m, i, axis=-2), j, axis=-1)
            adj[..., j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def inverse_jacobian(cert: LocalCert, y, inverse: InverseResult | None = None) -> GenMatrix:
    """D(f^-1)(y) by the cofactor formula, with the determinant lower bound checked."""
    f = cert.f
    ctx = f.ctx
    inverse = inverse or local_inverse_eval(cert, y)
    jac = f.jacobian_values(inverse.value.samples)
    det = np.linalg.det(jac)
    n = f.n
    lower = 1.0 / (hadamard_constant(n) * cert.c.samples ** n)
    viol = np.abs(det) < lower * (1 - 1e-12)
    if viol.any():
        i = int(np.flatnonzero(viol)[0])
        raise CertificateError(
            f"|det Df| = {abs(det[i]):.6g} below the certified bound {lower[i]:.6g} at eps={ctx.eps[i]:.6g}",
            detail={"eps": float(ctx.eps[i])})
    return GenMatrix(ctx, adjugate(jac) / det[:, None, None])


# compatibility with the sharp-norm differential calculus


@dataclass
class AFJReport:
    rows: list  # k, quotient, numerator valuation, increment valuation
    q: float
    decreasing: bool
    final: float
    target: float

    @property
    def ok(self):
        return self.decreasing and self.final <= self.target * (1 + 1e-9)

    def as_dict(self):
        return {"rows": self.rows, "q": self.q, "decreasing": self.decreasing, "final": self.final,
                "target": self.target, "ok": self.ok}


def afj_differentiability_check(f: GSF, x0, ks=range(1, 9), target=math.exp(-8), nodes=32) -> AFJReport:
    """Quotient |f(x) - f(x0) - Df(x0)(x - x0)|_e / |x - x0|_e along x_k = x0 + eps^k e_1.

    The numerator uses the integral Taylor remainder h^2 int_0^1 (1-t) D^2 f(x0 + t h)[e,e] dt,
    which avoids subtracting nearly equal values.
    """
    ctx = f.ctx
    if ctx.gauge.name != "eps":
        raise ValueError("the sharp-norm check needs the gauge rho = eps")
    x0 = GenPoint.of(ctx, x0)
    t, w = gauss_legendre(nodes, 0.0, 1.0)
    e1 = np.zeros(f.n)
    e1[0] = 1.0
    alpha = (2,) + (0,) * (f.n - 1)
    second = [f.derivative_expr(alpha, i) for i in range(f.d)]
    rows = []
    slack = ctx.config.slack
    for k in ks:
        h = ctx.eps ** k
        pts = x0.samples[:, None, :] + (t[None, :, None] * h[:, None, None]) * e1
        vals = f.eval_exprs(second, pts)
        num_vec = (h ** 2)[:, None] * np.einsum("gmd,m->gd", vals, w * (1 - t))
        num = GenNum.from_values(ctx, np.linalg.norm(num_vec, axis=1))
        hn = GenNum.from_values(ctx, h)
        v_num, v_h = valuation(num), valuation(hn)
        q = sharp_norm(num) / sharp_norm(hn)
        rows.append({"k": k, "quotient": q, "v_numerator": v_num, "v_increment": v_h})
    quot = np.array([r["quotient"] for r in rows])
    decreasing = bool(np.all(np.diff(quot) <= slack * np.maximum(quot[:-1], 1e-300)))
    finite = [2 * r["v_increment"] - r["v_numerator"] for r in rows if np.isfinite(r["v_numerator"])]
    q_fit = float(max(finite)) if finite else -math.inf
    return AFJReport(rows, q_fit, decreasing, float(quot[-1]), target)
