"""Deterministic probe sets for sampled sup/inf checks over balls and spheres."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.stats import norm, qmc


@lru_cache(maxsize=64)
def _halton(count, dim):
    # unscrambled Halton, first point (the origin) skipped
    pts = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
    return np.clip(pts, 1e-12, 1 - 1e-12)


@lru_cache(maxsize=64)
def unit_sphere(n, count):
    """``count`` deterministic unit vectors in R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    g = norm.ppf(_halton(count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@lru_cache(maxsize=64)
def unit_ball(n, count):
    """``count`` deterministic points of the closed unit ball of R^n (center included)."""
    if n == 1:
        return np.linspace(-1.0, 1.0, count + (count % 2 == 0))[:, None]
    if n == 2:
        u = _halton(count - 1, 2)
        r = np.sqrt(u[:, 0])
        t = 2 * np.pi * u[:, 1]
        pts = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    else:
        h = _halton(count - 1, n + 1)
        g = norm.ppf(h[:, :n])
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pts = g * h[:, n:] ** (1.0 / n)
    # always include the center and a few boundary points
    edge = unit_sphere(n, max(2, min(8, count // 8)))
    return np.vstack([np.zeros((1, n)), pts, edge])


def interval(a, b, count):
    return np.linspace(a, b, count)
