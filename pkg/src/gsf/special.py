"""The unit bump, its derivatives, smooth steps and Gauss-Legendre helpers."""

from __future__ import annotations

from functools import cache

import mpmath
import numpy as np
from numpy.polynomial import Polynomial

from gsf.expr import Const, Kernel, as_expr

# D(u) = (1 - u^2)^2
_D = Polynomial([1.0, 0.0, -2.0, 0.0, 1.0])
_DD = _D.deriv()
_U = Polynomial([0.0, 1.0])


@cache
def gauss_legendre(n, a=-1.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@cache
def bump_numerator(m):
    """Polynomial N_m with chi^(m)(u) = chi(u) * N_m(u) / (1 - u^2)^(2m)."""
    if m == 0:
        return Polynomial([1.0])
    prev = bump_numerator(m - 1)
    k = m - 1
    return prev.deriv() * _D - k * prev * _DD - 2.0 * _U * prev


def chi_derivative(m, u):
    """m-th derivative of chi(u) = exp(-1/(1-u^2)) on (-1, 1), zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    inside = np.abs(u) < 1.0
    if not inside.any():
        return out
    ui = u[inside]
    one_minus = 1.0 - ui * ui
    log_scale = -1.0 / one_minus - 2.0 * m * np.log(one_minus)
    out[inside] = bump_numerator(m)(ui) * np.exp(log_scale)
    return out


def chi_derivative_mp(m, u):
    u = mpmath.mpf(u)
    if abs(u) >= 1:
        return mpmath.mpf(0)
    one_minus = 1 - u * u
    coeffs = bump_numerator(m).coef
    num = mpmath.polyval([mpmath.mpf(c) for c in coeffs[::-1]], u)
    return num * mpmath.exp(-1 / one_minus) / one_minus ** (2 * m)


_CDF_NODES = 120


@cache
def chi_mass():
    t, w = gauss_legendre(_CDF_NODES, -1.0, 0.0)
    return 2.0 * float(np.sum(w * chi_derivative(0, t)))


def cumulative(fn, u, nodes=_CDF_NODES, total=1.0):
    """``int_{-1}^u fn`` for a kernel supported in [-1, 1], vectorised over u.

    Negative u integrate from the left end, positive u from the right end so
    both tails keep full relative accuracy; ``total`` is the full mass.
    """
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 1.0, total, 0.0)
    mid = np.abs(u) < 1.0
    if not mid.any():
        return out
    um = u[mid]
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = (x + 1.0) / 2.0
    left = um <= 0.0
    res = np.empty(um.shape)
    if left.any():
        a = um[left]
        t = -1.0 + (a[:, None] + 1.0) * s
        res[left] = (a + 1.0) / 2.0 * (fn(t) @ w)
    if (~left).any():
        a = um[~left]
        t = a[:, None] + (1.0 - a[:, None]) * s
        res[~left] = total - (1.0 - a) / 2.0 * (fn(t) @ w)
    out[mid] = res
    return out


class BumpKernel:
    """The standard bump chi(u) = exp(-1/(1-u^2)) on (-1, 1).

    Order -1 is its normalised cumulative integral, a smooth step from 0 at
    u <= -1 to 1 at u >= 1 that equals 1/2 at u = 0.
    """

    key = ("chi",)
    eps_dependent = False

    def value(self, order, u, eps=None):
        if order >= 0:
            return chi_derivative(order, u)
        mass = chi_mass()
        return cumulative(lambda t: chi_derivative(0, t), u, total=mass) / mass

    def mp_value(self, order, u, eps=None):
        if order >= 0:
            return chi_derivative_mp(order, u)
        u = mpmath.mpf(u)
        if u <= -1:
            return mpmath.mpf(0)
        if u >= 1:
            return mpmath.mpf(1)
        mass = mpmath.quad(lambda t: chi_derivative_mp(0, t), [-1, 0, 1])
        return mpmath.quad(lambda t: chi_derivative_mp(0, t), [-1, u]) / mass


CHI = BumpKernel()


def bump(u, a, b):
    """Unit bump rescaled to be supported on (a, b) in the variable u."""
    u, a, b = as_expr(u), as_expr(a), as_expr(b)
    return Kernel(0, (2 * u - a - b) / (b - a), CHI)


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    return Kernel(-1, 2 * as_expr(u) - 1, CHI)


def cutoff(u, n):
    """phi_n: identically 1 on [-(n-1), n-1], supported in [-n, n]."""
    u, n = as_expr(u), as_expr(n)
    return smooth_step(u + n) * smooth_step(n - u)


def splice(u, f, g, a, b):
    """Smooth transition from f (u <= a) to g (u >= b) through a bump partition."""
    u, f, g, a, b = (as_expr(v) for v in (u, f, g, a, b))
    s = smooth_step((u - a) / (b - a))
    return f * (Const(1.0) - s) + g * s
