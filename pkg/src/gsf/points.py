"""Generalized points and matrices: componentwise nets sampled on the grid."""

from __future__ import annotations

import numpy as np

from gsf import expr as E
from gsf.ring import Context, GaugeMismatch, GenNum


class GenPoint:
    """Point of rho-R^n; ``samples`` has shape (grid size, n)."""

    __slots__ = ("ctx", "label", "samples")

    def __init__(self, ctx: Context, samples, label=None):
        arr = np.asarray(samples, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(ctx.size, 1) if arr.shape[0] == ctx.size else np.tile(arr, (ctx.size, 1))
        if arr.shape[0] != ctx.size:
            raise ValueError(f"expected {ctx.size} grid samples, got {arr.shape[0]}")
        arr = arr.copy()
        arr.setflags(write=False)
        self.ctx = ctx
        self.samples = arr
        self.label = label

    @classmethod
    def of(cls, ctx, value, label=None):
        """Build from a GenNum, a sequence of eps-expressions/GenNums, or a real vector."""
        if isinstance(value, GenPoint):
            return value
        if isinstance(value, GenNum):
            return cls(ctx, value.samples[:, None], label or value.label)
        if isinstance(value, (str, E.Expr)):
            value = [value]
        if np.isscalar(value):
            return cls(ctx, np.full((ctx.size, 1), float(value)), label)
        comps = []
        for v in value:
            if isinstance(v, GenNum):
                comps.append(v.samples)
            elif isinstance(v, (str, E.Expr)):
                ex = E.as_expr(v)
                comps.append(np.broadcast_to(ex.evaluate({E.EPS: ctx.eps}), (ctx.size,)))
            else:
                comps.append(np.full(ctx.size, float(v)))
        return cls(ctx, np.stack(comps, axis=1), label)

    @property
    def dim(self):
        return self.samples.shape[1]

    def component(self, i) -> GenNum:
        return GenNum.from_values(self.ctx, self.samples[:, i])

    def norm(self) -> GenNum:
        return GenNum.from_values(self.ctx, np.linalg.norm(self.samples, axis=1))

    def _other(self, other):
        if isinstance(other, GenPoint):
            if not self.ctx.same_as(other.ctx):
                raise GaugeMismatch("points built on different contexts")
            return other.samples
        if isinstance(other, GenNum):
            return other.samples[:, None]
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return GenPoint(self.ctx, self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GenPoint(self.ctx, self.samples - self._other(other))

    def __rsub__(self, other):
        return GenPoint(self.ctx, self._other(other) - self.samples)

    def __mul__(self, scalar):
        return GenPoint(self.ctx, self.samples * self._other(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return GenPoint(self.ctx, self.samples / self._other(scalar))

    def __neg__(self):
        return GenPoint(self.ctx, -self.samples)

    def env(self, names):
        """Evaluation environment binding variable names and eps per grid sample."""
        out = {name: self.samples[:, i] for i, name in enumerate(names)}
        out[E.EPS] = self.ctx.eps
        return out

    def __repr__(self):
        return f"GenPoint(n={self.dim}, last={self.samples[-1]})"


class GenMatrix:
    """Linear map of rho-R^n; ``samples`` has shape (grid size, d, n)."""

    __slots__ = ("ctx", "samples")

    def __init__(self, ctx: Context, samples):
        arr = np.asarray(samples, dtype=float)
        if arr.ndim == 2:
            arr = np.broadcast_to(arr, (ctx.size,) + arr.shape)
        if arr.shape[0] != ctx.size:
            raise ValueError("matrix samples must lead with the grid axis")
        arr = np.array(arr)
        arr.setflags(write=False)
        self.ctx = ctx
        self.samples = arr

    @classmethod
    def identity(cls, ctx, n):
        return cls(ctx, np.eye(n))

    @classmethod
    def diag(cls, ctx, entries):
        pts = GenPoint.of(ctx, entries)
        return cls(ctx, np.einsum("gi,ij->gij", pts.samples, np.eye(pts.dim)))

    @property
    def shape(self):
        return self.samples.shape[1:]

    def det(self) -> GenNum:
        return GenNum.from_values(self.ctx, np.linalg.det(self.samples))

    def op_norm(self) -> GenNum:
        """Per-eps spectral norm (largest singular value)."""
        return GenNum.from_values(self.ctx, np.linalg.norm(self.samples, ord=2, axis=(1, 2)))

    def inv(self) -> GenMatrix:
        return GenMatrix(self.ctx, np.linalg.inv(self.samples))

    def entry(self, i, j) -> GenNum:
        return GenNum.from_values(self.ctx, self.samples[:, i, j])

    def __matmul__(self, other):
        if isinstance(other, GenMatrix):
            return GenMatrix(self.ctx, self.samples @ other.samples)
        if isinstance(other, GenPoint):
            return GenPoint(self.ctx, np.einsum("gij,gj->gi", self.samples, other.samples))
        raise TypeError("can only multiply by GenMatrix or GenPoint")

    def __sub__(self, other):
        return GenMatrix(self.ctx, self.samples - other.samples)

    def __repr__(self):
        return f"GenMatrix(shape={self.shape})"


def op_norm(a: GenMatrix) -> GenNum:
    return a.op_norm()
