"""Global inversion: uniform-slope 1D inversion, Hadamard and Hadamard-Levy certificates.

All sup/inf conditions over R^n are checked on deterministic probe families
(balls and spheres of radius 2^j); certificates record that they are sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gsf import expr as E
from gsf import probes
from gsf.local_inverse import NewtonError, adjugate, is_nondegenerate
from gsf.points import GenMatrix, GenPoint
from gsf.ring import (
    GenNum,
    Verdict,
    false,
    is_moderate,
    is_negligible,
    is_strictly_positive,
    leq,
    true,
)
from gsf.sets import Box, SetNet
from gsf.smooth import GSF, floor_residual
from gsf.special import cutoff


class GlobalInverseError(RuntimeError):
    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


def _norm_map(values):
    return np.linalg.norm(values, axis=-1)


def uniform_positivity_exponent(f: GSF, b_map=None, A: SetNet | None = None, count=257, constant=None) -> int:
    """Smallest integer q <= m_max with min_{x in A_eps} b(f_eps(x)) > rho_eps^q on the tail.

    ``constant`` marks A as a fixed compact set, in which case plain positivity
    at every sampled eps is asserted too.
    """
    ctx = f.ctx
    cfg = ctx.config
    b_map = b_map or _norm_map
    A = A or Box([-1.0] * f.n, [1.0] * f.n)
    pts = A.sample(ctx, count)
    with np.errstate(all="ignore"):
        vals = np.asarray(b_map(f.values(pts)), dtype=float)
    # pointwise hypothesis on the probe points of [A_eps]
    for j in range(0, pts.shape[1], max(1, pts.shape[1] // 16)):
        v = is_strictly_positive(GenNum.from_values(ctx, vals[:, j]))
        if not v.is_true:
            raise GlobalInverseError(
                f"b(f(x)) > 0 fails ({v.label}) at probe {pts[-1, j].tolist()}: {v.diagnostics}",
                {"probe": pts[-1, j].tolist(), "verdict": v.as_dict()})
    if constant is None:
        constant = all(not isinstance(e, E.Expr) or E.EPS not in e.free_vars()
                       for e in getattr(A, "lo_expr", []) + getattr(A, "hi_expr", [])) and isinstance(A, Box)
    low = vals.min(axis=1)
    if constant and np.any(low <= 0):
        i = int(np.argmax(low <= 0))
        raise GlobalInverseError(f"b(f) vanishes on the compact set at eps={ctx.eps[i]:.6g}")
    t = ctx.tail
    with np.errstate(divide="ignore"):
        log_low = np.log(low[t])
    for q in range(cfg.m_max + 1):
        if np.all(log_low > q * ctx.log_rho[t]):
            return q
    raise GlobalInverseError(f"no q <= {cfg.m_max} bounds b(f) from below: positivity not uniform at tested scale")


# 1D inversion under a uniform slope bound


def default_n_schedule(cap):
    def n_of(eps):
        eps = np.asarray(eps, dtype=float)
        return np.minimum(np.ceil(np.log2(1.0 / eps) - 1e-9), cap)
    return n_of


def build_monotone_net_1d(f: GSF, n_schedule=None, probes_per_unit=64):
    """Replace f_eps outside [-n_eps, n_eps] so every f_eps becomes a diffeomorphism of R.

    f_bar(x) = f(0) + int_0^x (f'(t) phi_n(t) + s (1 - phi_n(t))) dt with s the sign of f'.
    Returns (f_bar, info).
    """
    if f.n != 1 or f.d != 1:
        raise ValueError("the monotone modification is one-dimensional")
    ctx = f.ctx
    cfg = ctx.config
    n_of = n_schedule or default_n_schedule(cfg.monotone_n_cap)
    n_eps = np.asarray(n_of(ctx.eps), dtype=float)
    if np.any(n_eps < 1):
        raise ValueError("the schedule must give n >= 1")
    var = f.variables[0]
    fp = f.derivative_expr((1,), 0)
    nmax = float(n_eps.max())
    u = np.linspace(-1.0, 1.0, int(2 * nmax * probes_per_unit) + 1)
    pts = (n_eps[:, None] * u[None, :])[..., None]
    with np.errstate(all="ignore"):
        d1 = f.eval_exprs([fp], pts)[..., 0]
    sgn = np.sign(d1)
    if np.any(sgn == 0) or np.any(sgn != sgn[:, :1]):
        i = int(np.flatnonzero(np.any(sgn != sgn[:, :1], axis=1) | np.any(sgn == 0, axis=1))[0])
        raise GlobalInverseError(f"f' changes sign or vanishes inside [-n, n] at eps={ctx.eps[i]:.6g}",
                                 {"eps": float(ctx.eps[i]), "n": float(n_eps[i])})
    signs = sgn[:, 0]
    if np.any(signs != signs[-1]):
        raise GlobalInverseError("the sign of f' differs between grid points")
    s = float(signs[-1])
    qs = {}
    fp_gsf = f.with_components([fp])
    for n in sorted(set(n_eps.tolist())):
        qs[int(n)] = uniform_positivity_exponent(fp_gsf, lambda v: np.abs(v[..., 0]), Box([-n], [n]))
    t = E.Var("t")
    n_param = E.Param("n_eps", n_of)
    phi = cutoff(t, n_param)
    integrand = E.add(E.mul(fp.subs({var: t}), phi), E.mul(E.Const(s), E.add(E.ONE, E.neg(phi))))
    f0 = f.components[0].subs({var: E.Const(0.0)})
    fbar = E.add(f0, E.Integral(integrand, "t", E.Var(var)))
    out = f.with_components([fbar], label=f"monotone({f.label})")
    return out, {"sign": s, "q_by_n": qs, "n_tail": float(n_eps[ctx.tail][-1])}


@dataclass
class GlobalCert:
    kind: str
    f: GSF
    solver_f: GSF
    r: float | None = None
    C: float | None = None
    beta: tuple | None = None
    table: list = field(default_factory=list)
    surjective: bool = False
    checks: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)

    def summary(self):
        return {
            "kind": self.kind,
            "r": self.r,
            "C": self.C,
            "beta": list(self.beta) if self.beta else None,
            "surjective_onto_csp": self.surjective,
            "table": self.table,
            "checks": {k: v.as_dict() for k, v in self.checks.items()},
            "evidence": self.evidence,
        }


def _exhaustion(levels, per_unit=64):
    """1D probes of [-2^j, 2^j] for j = 0..levels, a compact exhaustion of R."""
    pts = [np.linspace(-2.0 ** j, 2.0 ** j, 2 * per_unit + 1) for j in range(levels + 1)]
    return np.unique(np.concatenate(pts))


def global_1d_invert(f: GSF, r: float) -> GlobalCert:
    ctx = f.ctx
    cfg = ctx.config
    if f.n != 1 or f.d != 1:
        raise ValueError("global_1d_invert needs a scalar function of one variable")
    r = float(r)
    if r < 0:
        raise ValueError("r must be >= 0")
    xs = _exhaustion(cfg.hadamard_levels)
    fp = f.derivative_expr((1,), 0)
    with np.errstate(all="ignore"):
        d1 = np.abs(f.eval_exprs([fp], np.broadcast_to(xs[None, :, None], (ctx.size, len(xs), 1)))[..., 0])
    rn = ctx.const(r) if r > 0 else None
    for j, x in enumerate(xs):
        dv = GenNum.from_values(ctx, d1[:, j])
        v = is_strictly_positive(dv)
        if v.is_true and rn is not None:
            v = leq(rn, dv)
        if not v.is_true:
            raise GlobalInverseError(
                f"|f'(x)| > {r} fails at probe x={x:.6g} ({v.label}): {v.diagnostics}", {"x": float(x)})
    checks = {"derivative_bound": true(r, f"|f'| >= {r} and invertible on {len(xs)} probes of [-2^{cfg.hadamard_levels}, 2^{cfg.hadamard_levels}]")}
    f0 = np.abs(f.values(np.zeros((ctx.size, 1, 1)))[:, 0, 0])
    # eq:C wants a real C > 0 with |f_eps(0)| <= C
    C = float(np.max(f0)) if np.all(np.isfinite(f0)) else math.inf
    C = C if C > 0 else 1.0
    if r > 0:
        # |f'| >= r everywhere makes f_eps itself a diffeomorphism of R
        solver = f
        info = {"sign": float(np.sign(f.eval_exprs([fp], np.zeros((ctx.size, 1, 1)))[-1, 0, 0]))}
    else:
        solver, info = build_monotone_net_1d(f)
    return GlobalCert("oneD", f, solver, r=r, C=C, surjective=r > 0 and math.isfinite(C), checks=checks,
                      evidence={"probes": len(xs), "sampled": True, **info})


def _monotone_solve(g: GSF, y, lo, hi, increasing, max_iter=200):
    """Safeguarded Newton on a bracket [lo, hi] per eps for increasing/decreasing g."""
    sgn = 1.0 if increasing else -1.0
    dexpr = g.derivative_expr((1,), 0)
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = g.values(x[:, None, None])[:, 0, 0] - y
        dfx = g.eval_exprs([dexpr], x[:, None, None])[:, 0, 0]
        pos = sgn * fx > 0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        with np.errstate(all="ignore"):
            nx = x - fx / dfx
        bad = ~np.isfinite(nx) | (nx <= lo) | (nx >= hi)
        nx = np.where(bad, 0.5 * (lo + hi), nx)
        done = (fx == 0) | (np.abs(nx - x) <= 4e-16 * np.maximum(np.abs(x), 1e-300)) | (hi - lo <= 0)
        x = np.where(done, x, nx)
        if done.all():
            break
    return x


def _bracket(g: GSF, y, increasing, start=1.0, limit=1e12):
    ctx = g.ctx
    sgn = 1.0 if increasing else -1.0
    w = np.full(ctx.size, float(start))
    for _ in range(200):
        lo_v = g.values(-w[:, None, None])[:, 0, 0]
        hi_v = g.values(w[:, None, None])[:, 0, 0]
        ok = (sgn * (lo_v - y) <= 0) & (sgn * (hi_v - y) >= 0)
        if ok.all():
            return -w, w
        if np.any(w > limit):
            raise GlobalInverseError("no bracket found for y within |x| <= 1e12")
        w = np.where(ok, w, 2 * w)
    raise GlobalInverseError("bracket search did not terminate")


# Hadamard


def _shell_probes(n, radius, count):
    if n == 1:
        return np.array([[radius], [-radius]])
    return radius * probes.unit_sphere(n, count)


def _ball_probes(n, radius, count):
    return radius * probes.unit_ball(n, count)


def _global_probe_points(n, levels, count):
    return np.vstack([_ball_probes(n, 2.0 ** j, count) for j in range(levels + 1)])


def _det_checks(f: GSF, levels, count):
    """Per-eps det Df != 0 on probes plus nondegeneracy at generalized probe points."""
    ctx = f.ctx
    pts = _global_probe_points(f.n, levels, count)
    jac = f.jacobian_values(np.broadcast_to(pts[None], (ctx.size,) + pts.shape))
    det = np.linalg.det(jac)
    if np.any(det == 0) or not np.all(np.isfinite(det)):
        i, j = np.argwhere((det == 0) | ~np.isfinite(det))[0]
        raise GlobalInverseError(f"det Df vanishes at eps={ctx.eps[i]:.6g}, x={pts[j].tolist()}",
                                 {"eps": float(ctx.eps[i]), "x": pts[j].tolist()})
    sample_points = [pts[0], pts[len(pts) // 3], pts[-1]]
    gen_points = [GenPoint(ctx, np.broadcast_to(p, (ctx.size, f.n)).copy()) for p in sample_points]
    # a few eps-dependent compactly supported points
    u = probes.unit_sphere(f.n, 4)[0]
    gen_points.append(GenPoint(ctx, ctx.eps[:, None] * u[None, :]))
    gen_points.append(GenPoint(ctx, (1 + np.sin(1.0 / ctx.eps))[:, None] * u[None, :]))
    verdicts = []
    for p in gen_points:
        v = is_nondegenerate(GenMatrix(ctx, f.jacobian_values(p.samples)))
        verdicts.append(v)
        if not v.is_true:
            raise GlobalInverseError(f"Df is not invertible at a generalized probe point ({v.label}): "
                                     f"{v.diagnostics}", {"point_tail": p.samples[-1].tolist()})
    detv = GenNum.from_values(ctx, np.abs(det).min(axis=1))
    return det, true(len(pts), f"det Df != 0 on {len(pts)} probes per eps, Df invertible at "
                                f"{len(gen_points)} generalized points"), detv


def _plateau(values, rel=1e-3):
    """First index after which the table stops growing (relative increments below ``rel``)."""
    for j in range(1, len(values)):
        if values[j] - values[j - 1] <= rel * max(abs(values[j - 1]), 1e-300):
            return j - 1
    return None


def hadamard_certificate(f: GSF, radius_schedule=None, bound=None) -> GlobalCert:
    ctx = f.ctx
    cfg = ctx.config
    if f.n != f.d:
        raise ValueError("Hadamard's theorem needs f: R^n -> R^n")
    radii = list(radius_schedule) if radius_schedule is not None else [2.0 ** j for j in range(cfg.hadamard_levels + 1)]
    M = float(bound if bound is not None else cfg.hadamard_bound)
    count = cfg.probes * f.n
    _, det_verdict, detv = _det_checks(f, int(round(math.log2(max(radii)))), count)
    table = []
    for R in radii:
        pts = _shell_probes(f.n, R, count)
        vals = np.linalg.norm(f.values(np.broadcast_to(pts[None], (ctx.size,) + pts.shape)), axis=-1)
        # inf over eps <= eps' with eps' the largest grid point, then inf over the sphere
        table.append({"R": R, "inf_norm": float(vals.min())})
    values = [row["inf_norm"] for row in table]
    reached = [row["R"] for row in table if row["inf_norm"] >= M]
    checks = {"det": det_verdict}
    if not reached:
        j = _plateau(values)
        where = table[j]["R"] if j is not None else table[-1]["R"]
        raise GlobalInverseError(
            f"properness table stays below M={M:g} (plateau from R={where:g}, last value {values[-1]:.6g})",
            {"table": table, "plateau_radius": where})
    growth_from = next((i for i in range(len(values)) if all(
        values[k + 1] > values[k] for k in range(i, len(values) - 1))), None)
    checks["proper"] = true(reached[0], f"inf |f| >= {M:g} once |x| >= {reached[0]:g}")
    checks["increasing"] = true(table[growth_from]["R"], "table strictly increasing from this radius") \
        if growth_from is not None else false(0, "table never strictly increasing")
    if not checks["increasing"].is_true:
        raise GlobalInverseError("properness table is not eventually increasing", {"table": table})
    q_det = int(np.ceil(max(0.0, float(np.max(np.log(detv.tail_samples) / ctx.log_rho[ctx.tail]))) + 1e-9)) \
        if np.all(detv.tail_samples > 0) else None
    return GlobalCert("hadamard", f, f, table=table, surjective=True, checks=checks,
                      evidence={"sampled": True, "probes_per_radius": count, "det_exponent": q_det,
                                "bound": M})


def hadamard_levy_certificate(f: GSF, beta=None) -> GlobalCert:
    """beta: ("constant", C), ("affine", a, b) or None to measure a constant C on probes."""
    ctx = f.ctx
    cfg = ctx.config
    if f.n != f.d:
        raise ValueError("Hadamard-Levy needs f: R^n -> R^n")
    count = cfg.probes * f.n
    _, det_verdict, _ = _det_checks(f, cfg.hadamard_levels, count)
    pts = _global_probe_points(f.n, cfg.hadamard_levels, count)
    jac = f.jacobian_values(np.broadcast_to(pts[None], (ctx.size,) + pts.shape))
    inv_norm = np.linalg.norm(np.linalg.inv(jac), ord=2, axis=(-2, -1))
    measured = float(inv_norm.max())
    if beta is None:
        beta = ("constant", measured)
    kind = beta[0]
    if kind == "constant":
        C = float(beta[1])
        allowed = np.full(inv_norm.shape, C)
    elif kind == "affine":
        a, b = (np.asarray(GenNum.of(ctx, v).samples)[:, None] for v in beta[1:3])
        if np.any(a <= 0) or np.any(b < 0):
            raise ValueError("affine beta needs a > 0 and b >= 0")
        allowed = a + b * np.linalg.norm(pts, axis=-1)[None, :]
        C = None
    else:
        raise ValueError(f"unknown beta family {kind!r}")
    viol = inv_norm > allowed * (1 + 1e-12)
    if viol.any():
        i, j = np.argwhere(viol)[0]
        raise GlobalInverseError(
            f"|Df^-1| = {inv_norm[i, j]:.6g} exceeds beta = {allowed[i, j]:.6g} at eps={ctx.eps[i]:.6g}, "
            f"x={pts[j].tolist()}", {"eps": float(ctx.eps[i]), "x": pts[j].tolist()})
    f0 = np.linalg.norm(f.values(np.zeros((ctx.size, 1, f.n)))[:, 0, :], axis=-1)
    checks = {"det": det_verdict, "beta_bound": true(measured, f"max |Df^-1| on probes = {measured:.6g}")}
    return GlobalCert("hadamard_levy", f, f, C=C, beta=tuple(beta), surjective=kind == "constant", checks=checks,
                      evidence={"sampled": True, "probes": len(pts), "measured_C": measured,
                                "f0_max": float(f0.max())})


# evaluation


@dataclass
class GlobalInverseResult:
    value: GenPoint
    residual: GenNum
    verdict: Verdict
    bound: np.ndarray | None = None
    bound_ok: bool | None = None
    derivatives: list = field(default_factory=list)  # (order, verdict)
    steps: int = 0


def _newton_correct(f, x, target, tol, iters=30):
    """Damped Newton per eps towards f(x) = target; returns (x, converged mask)."""
    for _ in range(iters):
        fx = f.values(x) - target
        res = np.linalg.norm(fx, axis=1)
        scale = np.maximum(np.linalg.norm(target, axis=1), 1.0)
        ok = res <= tol * scale
        if ok.all():
            return x, ok
        jac = f.jacobian_values(x)
        with np.errstate(all="ignore"):
            step = np.linalg.solve(jac, fx[..., None])[..., 0]
        if not np.all(np.isfinite(step)):
            return x, ok
        lam = np.ones(len(x))
        new = x - step
        for _ in range(30):
            nres = np.linalg.norm(f.values(new) - target, axis=1)
            worse = (nres > res) & ~ok
            if not worse.any():
                break
            lam = np.where(worse, lam / 2, lam)
            new = x - lam[:, None] * step
        x = np.where(ok[:, None], x, new)
    fx = f.values(x) - target
    return x, np.linalg.norm(fx, axis=1) <= tol * np.maximum(np.linalg.norm(target, axis=1), 1.0)


def homotopy_solve(f: GSF, y, steps=16, max_steps=1024, tol=1e-9):
    """Follow f(x(t)) = (1 - t) f(0) + t y from x(0) = 0, halving the step on failure."""
    ctx = f.ctx
    x = np.zeros((ctx.size, f.n))
    f0 = f.values(x)
    t = 0.0
    dt = 1.0 / steps
    trace = []
    taken = 0
    while t < 1.0:
        t1 = min(1.0, t + dt)
        target = (1 - t1) * f0 + t1 * y
        nx, ok = _newton_correct(f, x.copy(), target, tol)
        if ok.all():
            x, t = nx, t1
            taken += 1
            trace.append(t)
            continue
        dt /= 2
        if dt < 1.0 / max_steps:
            raise NewtonError(f"continuation failed at t={t:.6g} after halving to {max_steps} steps", trace)
    # polish at t = 1
    x, _ = _newton_correct(f, x, y, 1e-16, iters=8)
    return x, taken


def _inverse_derivatives_1d(f: GSF, x, order):
    """g^(k)(y) from f's derivatives at x = g(y) via the inverse-function chain rule."""
    ds = [f.eval_exprs([f.derivative_expr((k,), 0)], x[:, None, :])[:, 0, 0] for k in range(1, order + 1)]
    f1 = ds[0]
    out = [1.0 / f1]
    if order >= 2:
        out.append(-ds[1] / f1 ** 3)
    if order >= 3:
        out.append((3 * ds[1] ** 2 - f1 * ds[2]) / f1 ** 5)
    return out


def global_inverse_eval(cert: GlobalCert, y, order=None) -> GlobalInverseResult:
    f = cert.f
    ctx = f.ctx
    cfg = ctx.config
    y = GenPoint.of(ctx, y)
    ys = y.samples
    ynorm = np.linalg.norm(ys, axis=1)
    bound = None
    if cert.kind == "oneD":
        g = cert.solver_f
        inc = cert.evidence.get("sign", 1.0) > 0
        if cert.r and cert.r > 0:
            B = (ynorm + cert.C) / cert.r
            w = B * (1 + 1e-9) + 1e-300
            bound = B
            lo, hi = -w, w
        else:
            lo, hi = _bracket(g, ys[:, 0], inc)
        x = _monotone_solve(g, ys[:, 0], lo, hi, inc)[:, None]
        steps = 0
    else:
        x, steps = homotopy_solve(f, ys, cfg.homotopy_steps, cfg.homotopy_max_steps)
        if cert.kind == "hadamard":
            mx = float(ynorm.max())
            hit = [row["R"] for row in cert.table if row["inf_norm"] > mx]
            bound = np.full(ctx.size, hit[0]) if hit else None
        elif cert.C is not None:
            f0 = f.values(np.zeros((ctx.size, 1, f.n)))[:, 0, :]
            bound = cert.C * np.linalg.norm(ys - f0, axis=1)
    fx = f.values(x)
    res = np.linalg.norm(fx - ys, axis=1)
    scale = np.maximum(np.linalg.norm(fx, axis=1), ynorm)
    floored, hits = floor_residual(res, scale, cfg.machine_floor)
    v = is_negligible(GenNum.from_values(ctx, floored))
    if hits:
        v = Verdict(v.value, v.witness, v.diagnostics + f"; {hits} samples at the machine floor")
    bound_ok = None
    if bound is not None:
        bound_ok = bool(np.all(np.linalg.norm(x, axis=1) <= bound * (1 + 1e-12) + 1e-300))
    derivs = []
    order = cfg.cert_order if order is None else order
    if f.n == 1 and order:
        for k, vals in enumerate(_inverse_derivatives_1d(f, x, min(order, 3)), start=1):
            derivs.append((k, is_moderate(GenNum.from_values(ctx, vals))))
    elif order:
        jac = f.jacobian_values(x)
        inv = adjugate(jac) / np.linalg.det(jac)[:, None, None]
        derivs.append((1, is_moderate(GenNum.from_values(ctx, np.linalg.norm(inv, ord=2, axis=(1, 2))))))
    return GlobalInverseResult(GenPoint(ctx, x), GenNum.from_values(ctx, res), v, bound, bound_ok, derivs, steps)
