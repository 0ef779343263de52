"""Thresholds and grid settings, loadable from a ``key = value`` text file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields


@dataclass(frozen=True)
class Config:
    gauge: str = "eps"
    kmin: int = 4
    kmax: int = 40
    tail_window: int = 8
    n_max: float = 100.0  # moderateness bound: |x| <= rho^-n_max
    m_max: int = 30  # negligibility / invertibility search
    zero_threshold: float = 1e-300  # linear-domain zero for float-built nets
    slack: float = 0.1  # exponent-estimator slack
    fit_tol: float = 1.0  # max log-residual of a power-law fit on the tail
    machine_floor: float = 1e-13  # relative floor for computed residuals
    cert_order: int = 3  # K, derivative orders certified for a GSF
    probes: int = 64  # deterministic probe points per ball and dimension
    q_tol: float = 10.0  # Newton stops at residual <= rho^q_tol ...
    newton_floor: float = 1e-13  # ... or this absolute floor
    newton_max_iter: int = 60
    halving_budget: int = 200
    initial_radius: float = 1.0
    j_max: int = 10
    quad_nodes: int = 200
    oracle_nodes: int = 400
    l1_eta: float = 1.0  # flag mollifiers whose L1 norm exceeds 1 + eta
    hadamard_levels: int = 10  # properness radii 2^0 .. 2^J
    hadamard_bound: float = 100.0  # M the properness table has to exceed
    homotopy_steps: int = 16
    homotopy_max_steps: int = 1024
    monotone_n_cap: int = 8

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def snapshot(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(kind, text):
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text.strip()


def parse_config(text, base=None):
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``grid = kmin:kmax`` is accepted as a shorthand for the two bounds.
    """
    base = base or Config()
    types = {f.name: f.type for f in fields(Config)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "grid":
            lo, hi = value.split(":")
            changes["kmin"], changes["kmax"] = int(lo), int(hi)
            continue
        if key not in types:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        changes[key] = _coerce(types[key], value)
    return base.replace(**changes)


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)
