"""The seven acceptance criteria as runnable checks.

Each check returns a Criterion with a pass flag, the measured quantities and
its runtime against the stated budget.  The test suite and ``gsf selftest``
both run these.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import elementwise

from gsf.config import Config
from gsf.embedding import (
    MollifierNet,
    build_mollifier,
    derivative_commutation_check,
    embed,
    max_residual,
    pairing_limit,
    parse_dist,
)
from gsf.global_inverse import (
    GlobalInverseError,
    global_1d_invert,
    global_inverse_eval,
    hadamard_certificate,
    hadamard_levy_certificate,
)
from gsf.local_inverse import (
    afj_differentiability_check,
    inverse_jacobian,
    local_inverse_eval,
    sharp_ift_certificate,
)
from gsf.points import GenPoint
from gsf.ring import (
    Context,
    GenNum,
    get_context,
    is_moderate,
    is_negligible,
    is_strictly_positive,
    leq,
)
from gsf.showcase import run_example
from gsf.smooth import GSF
from gsf.special import gauss_legendre


@dataclass
class Criterion:
    cid: str
    name: str
    passed: bool
    seconds: float = 0.0
    budget: float = math.inf
    detail: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.passed and self.seconds <= self.budget

    def line(self):
        return f"AC{self.cid} {'PASS' if self.ok else 'FAIL'} {self.name} ({self.seconds:.1f}s / {self.budget:g}s)"


def _timed(cid, name, budget):
    def wrap(fn):
        def run(ctx=None):
            ctx = ctx or get_context()
            t0 = time.perf_counter()
            passed, detail = fn(ctx)
            return Criterion(cid, name, bool(passed), time.perf_counter() - t0, budget, detail)
        run.cid = cid
        return run
    return wrap


# 1. ring and verdicts


def ring_corpus(ctx: Context):
    """(label, net values or GenNum, truth) with truth = (moderate, negligible, strictly positive).

    A None label is skipped (positivity of a non-moderate net).
    """
    e = ctx.eps
    out = []
    for a in (-3, -2, -1, -0.5, 0, 0.5, 1, 1.5, 2, 3, 5, 8, 12):
        for c in (1.0, 2.5, -1.0, -0.3, 1e-3, -7.0, 100.0):
            out.append((f"{c:g}*eps^{a:g}", c * e ** a, (True, False, c > 0)))
    for c in np.linspace(-5, 5, 21):
        out.append((f"{c:g}", np.full(ctx.size, c), (True, c == 0, c > 0)))
    for a, b_, c in [(0, 1, 1.0), (0, 1, -1.0), (1, 2, -1.0), (1, 2, 1.0), (-1, 0, -3.0), (2, 3, 5.0),
                     (0, 2, -0.5), (-2, -1, 1.0), (3, 4, -2.0), (1, 1.5, 1.0)]:
        for s in (1.0, -1.0):
            v = s * (e ** a + c * e ** b_)
            out.append((f"{s:g}*(eps^{a}+{c:g}eps^{b_})", v, (True, False, s > 0)))
    for a in (-3, -2, -1, 0, 1, 2, 3, 4, 5):
        out.append((f"eps^{a}(2+sin(1/eps))", e ** a * (2 + np.sin(1 / e)), (True, False, True)))
        out.append((f"-eps^{a}(2+cos(1/eps))", -e ** a * (2 + np.cos(1 / e)), (True, False, False)))
        out.append((f"eps^{a}(1.5+sin(log eps))", e ** a * (1.5 + np.sin(np.log(e))), (True, False, True)))
    for a in (-1, 0, 1, 2, 3):
        for c in (1.0, -1.0):
            out.append((f"{c:g}*eps^{a}*log(1/eps)", c * e ** a * np.log(1 / e), (True, False, c > 0)))
    for a in (0, 1, 3):
        out.append((f"eps^{a}*(-1)^k", e ** a * (-1.0) ** np.arange(ctx.size), (True, False, False)))
    for m in (1, 2, 3):
        for c in (1.0, -1.0, 4.0):
            out.append((f"{c:g}*exp(-{m}/eps)", c * np.exp(-m / e), (True, True, False)))
            out.append((f"{c:g}*exp(-{m}/eps^0.5)", c * np.exp(-m / np.sqrt(e)), (True, True, False)))
    out.append(("0", np.zeros(ctx.size), (True, True, False)))
    for m in (1, 2):
        for c in (1.0, -1.0):
            # built in log form, exp(m/eps) overflows doubles
            big = GenNum(ctx, np.full(ctx.size, np.sign(c)), m / e + np.log(abs(c)))
            out.append((f"{c:g}*exp({m}/eps)", big, (False, False, None)))
    # high powers underflow doubles, so they are built in log form
    for a in (-20, -15, 15, 20, 25):
        for c in (1.0, -1.0):
            out.append((f"{c:g}*eps^{a}", GenNum(ctx, np.full(ctx.size, c), a * np.log(e)), (True, False, c > 0)))
    return out


@_timed("1", "ring/verdict suite", 10.0)
def ac1_ring(ctx):
    corpus = ring_corpus(ctx)
    wrong, no_reciprocal, antisym, undecided = [], [], [], 0
    checks = 0
    for label, vals, truth in corpus:
        x = vals if isinstance(vals, GenNum) else GenNum.from_values(ctx, vals)
        for name, v, t in (("moderate", is_moderate(x), truth[0]),
                           ("negligible", is_negligible(x), truth[1]),
                           ("positive", is_strictly_positive(x), truth[2])):
            if t is None:
                continue
            checks += 1
            if v.is_indeterminate:
                undecided += 1
            elif v.is_true != t:
                wrong.append((label, name, v.label))
        pos = is_strictly_positive(x)
        if pos.is_true:
            inv = is_moderate(1 / x)
            if not inv.is_true or np.any(x.tail_samples <= 0):
                no_reciprocal.append(label)
    # antisymmetry on pairs (and the pairs x, x + negligible)
    nums = [GenNum.from_values(ctx, v) for _, v, t in corpus if t[0] and not isinstance(v, GenNum)][:60]
    tiny = GenNum.from_values(ctx, np.exp(-1 / ctx.eps))
    pairs = [(a, b) for a in nums[:25] for b in nums[:25]] + [(a, a + tiny) for a in nums]
    both = 0
    for a, b in pairs:
        if leq(a, b).is_true and leq(b, a).is_true:
            both += 1
            if is_negligible(a - b).is_false:
                antisym.append(str(a))
    ok = len(corpus) >= 200 and not wrong and not no_reciprocal and not antisym
    return ok, {"nets": len(corpus), "verdicts": checks, "false_positives": wrong, "undecided": undecided,
                "reciprocal_violations": no_reciprocal, "antisymmetric_pairs": both, "antisymmetry_violations": antisym}


# 2. mollifiers


@_timed("2", "mollifier suite", 30.0)
def ac2_mollifier(ctx):
    rows = []
    ok = True
    x, w = gauss_legendre(ctx.config.oracle_nodes)
    pts = np.linspace(-2.0, 2.0, 9)
    rng = np.random.default_rng(7)
    for j in range(11):
        for d, psi0 in ((None, False), (0.5, True), (0.3, False)):
            m = build_mollifier(j, d, psi0)
            res = max_residual(m)
            d_res = abs(m.residuals.get("d", 0.0))
            psi = m.poly(x) * _chi(x)
            worst = 0.0
            for deg in range(j + 1):
                p = np.polynomial.Polynomial(rng.normal(size=deg + 1))
                # (p * psi)(y) = int psi(t) p(y - t) dt
                conv = np.array([np.sum(w * psi * p(y - x)) for y in pts])
                worst = max(worst, float(np.max(np.abs(conv - p(pts)) / np.maximum(1.0, np.abs(p(pts))))))
            good = res <= 1e-10 and d_res <= 1e-10 and worst <= 1e-8
            ok &= good
            rows.append({"j": j, "d": d, "psi0": psi0, "max_residual": res, "d_residual": d_res,
                         "reproduction_error": worst, "condition": m.condition, "ok": good})
    return ok, {"rows": rows}


def _chi(x):
    from gsf.special import chi_derivative
    return chi_derivative(0, x)


# 3. embedding


@_timed("3", "embedding suite", 60.0)
def ac3_embedding(ctx):
    net = MollifierNet.from_config(ctx.config)
    phi = "bump(x, -0.7, 0.9) * (1 + x)"
    out = {}
    ok = True
    for dist in ("delta@0", "delta'@0", "H@0"):
        rep = pairing_limit(parse_dist(dist), phi, (-0.7, 0.9), net, ctx=ctx)
        good = rep.monotone and rep.final_error <= 1e-6
        ok &= good
        out[dist] = {"exact": rep.exact, "final_error": rep.final_error, "monotone": rep.monotone, "ok": good}
    comm = derivative_commutation_check(parse_dist("H@0"), 1, net, ctx=ctx)
    out["commutation"] = comm.as_dict()
    ok &= comm.ok and comm.exact
    H = embed(parse_dist("H@0"), MollifierNet.from_config(ctx.config, d=0.5), ctx=ctx)
    h0 = H.values(np.zeros((ctx.size, 1)))[:, 0]
    err = float(np.max(np.abs(h0 - 0.5)))
    out["H0_error"] = err
    ok &= err <= 1e-10
    return ok, out


# 4. local inverse


def _bisect(fn, lo, hi, *args):
    res = elementwise.find_root(fn, (lo, hi), args=args, tolerances={"xrtol": 4e-16, "xatol": 1e-300})
    return res.x


@_timed("4", "local inverse suite", 60.0)
def ac4_local(ctx):
    e = ctx.eps
    ones = np.ones(ctx.size)
    cases = [
        # label, f, x0, targets (as eps-arrays), oracle(y)
        ("r x", "eps*x", 0.0, [0.25 * e ** 2, -0.1 * e ** 2, e ** 3],
         lambda y: y / e),
        ("identity", "x", 0.0, [0.1 * ones, -0.2 * ones, e],
         lambda y: y),
        ("x + x^3", "x + x^3", 0.1, [0.1 * ones, 0.09 * ones, 0.11 * ones],
         lambda y: _bisect(lambda t, yy: t + t ** 3 - yy, np.full(ctx.size, -1.0), np.full(ctx.size, 1.0), y)),
        ("sin(x/r)", "sin(x/eps)", 0.0, [0.01 * ones, -0.1 * ones, e],
         lambda y: e * np.arcsin(y)),
    ]
    rows = []
    ok = True
    for label, text, x0, targets, oracle in cases:
        f = GSF.parse(text, ctx=ctx)
        cert = sharp_ift_certificate(f, x0)
        for y in targets:
            yp = GenPoint(ctx, y[:, None])
            inv = local_inverse_eval(cert, yp)
            ref = oracle(y)
            err = float(np.max(np.abs(inv.value.samples[:, 0] - ref)))
            dg = inverse_jacobian(cert, yp, inv)
            jac = f.jacobian_values(inv.value.samples)
            ident = float(np.max(np.abs(dg.samples @ jac - np.eye(1))))
            good = inv.verdict.is_true and err <= 1e-12 and ident <= 1e-10
            ok &= good
            rows.append({"f": label, "y_tail": float(y[-1]), "residual": inv.verdict.label, "oracle_error": err,
                         "inverse_jacobian_error": ident, "ok": good})
    return ok, {"rows": rows, "detlow": "checked in every inverse_jacobian call"}


# 5. examples


@_timed("5", "example block", 60.0)
def ac5_examples(ctx):
    out = {}
    for i in range(1, 7):
        rep = run_example(i, ctx)
        out[i] = {"passed": rep.passed,
                  "failed_items": [it["name"] for it in rep.items if it.get("passed") is False]}
    return all(v["passed"] for v in out.values()), out


# 6. global inverse


@_timed("6", "global suite", 90.0)
def ac6_global(ctx):
    out = {}
    f = GSF.parse("x + sin(x)/2", ctx=ctx)
    cert = global_1d_invert(f, 0.5)
    ok = cert.surjective
    worst, bound_ok = 0.0, True
    for yv in (np.pi, -7.5, 0.3, 40.0):
        res = global_inverse_eval(cert, yv)
        ref = _bisect(lambda t, yy: t + np.sin(t) / 2 - yy, np.full(ctx.size, -200.0), np.full(ctx.size, 200.0),
                      np.full(ctx.size, yv))
        worst = max(worst, float(np.max(np.abs(res.value.samples[:, 0] - ref))))
        bound_ok &= bool(res.bound_ok) and res.verdict.is_true
    # compactly supported but eps-dependent target
    res = global_inverse_eval(cert, GenPoint(ctx, (1 + np.sin(1 / ctx.eps))[:, None]))
    bound_ok &= bool(res.bound_ok) and res.verdict.is_true
    out["oneD"] = {"oracle_error": worst, "eqC_bound_holds": bound_ok}
    ok &= worst <= 1e-12 and bound_ok
    f2 = GSF.parse("x1 + x1^3; x2 + x2^3", ctx=ctx)
    had = hadamard_certificate(f2)
    out["hadamard_table"] = had.table
    try:
        hadamard_certificate(GSF.parse("atan(x1); atan(x2)", ctx=ctx))
        out["arctan_rejected"] = False
    except GlobalInverseError as err:
        out["arctan_rejected"] = True
        out["arctan_error"] = str(err)
    ok &= out["arctan_rejected"]
    hl = hadamard_levy_certificate(f2)
    out["hadamard_levy_C"] = hl.C
    worst = 0.0
    for y in ((2.0, 2.0), (-3.0, 0.5), (10.0, -10.0)):
        ref = np.stack([_bisect(lambda t, yy: t + t ** 3 - yy, np.full(ctx.size, -20.0), np.full(ctx.size, 20.0),
                                np.full(ctx.size, yi)) for yi in y], axis=1)
        for c in (had, hl):
            res = global_inverse_eval(c, list(y))
            worst = max(worst, float(np.max(np.abs(res.value.samples - ref))))
            ok &= res.verdict.is_true and res.bound_ok is not False
    out["nD_oracle_error"] = worst
    ok &= worst <= 1e-10 and hl.surjective
    return ok, out


# 7. AFJ compatibility


def _afj(ctx, f):
    if ctx.gauge.name != "eps":
        ctx = get_context(ctx.config.replace(gauge="eps"))
    rep = afj_differentiability_check(f(ctx), 0.0)
    return rep.ok, rep.as_dict()


@_timed("7a", "AFJ quotient for x^2", 20.0)
def ac7_square(ctx):
    return _afj(ctx, lambda c: GSF.parse("x^2", ctx=c))


@_timed("7b", "AFJ quotient for delta", 20.0)
def ac7_delta(ctx):
    net = MollifierNet.from_config(ctx.config, d=0.5, psi0=True)
    return _afj(ctx, lambda c: embed(parse_dist("delta@0"), net, ctx=c))


CRITERIA = [ac1_ring, ac2_mollifier, ac3_embedding, ac4_local, ac5_examples, ac6_global, ac7_square, ac7_delta]


def run_all(config: Config | None = None, only=None):
    ctx = get_context(config)
    results = []
    for check in CRITERIA:
        if only and check.cid not in only:
            continue
        results.append(check(ctx))
    return results


__all__ = ["CRITERIA", "Criterion", "ring_corpus", "run_all"]
