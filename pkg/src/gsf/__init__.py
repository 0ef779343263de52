"""Generalized smooth functions on the Robinson-Colombeau ring.

Numbers are eps-nets sampled on a dyadic grid; decisions (moderate,
negligible, positive, membership) are three-valued verdicts read off the tail
of the grid.  On top sit distribution embeddings and certified local and
global inverses.
"""

from gsf.config import Config, load_config, parse_config
from gsf.embedding import (
    MollifierNet,
    build_mollifier,
    derivative_commutation_check,
    derivative_growth,
    embed,
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
    CertificateError,
    NewtonError,
    afj_differentiability_check,
    fermat_ift_certificate,
    inverse_jacobian,
    local_inverse_eval,
    sharp_ift_certificate,
)
from gsf.points import GenMatrix, GenPoint
from gsf.report import Report, emit
from gsf.ring import (
    Context,
    GenNum,
    Verdict,
    exponent_estimate,
    get_context,
    infinitely_close,
    is_finite,
    is_infinitesimal,
    is_invertible,
    is_moderate,
    is_negligible,
    is_strictly_positive,
    leq,
    lt_fermat,
    lt_sharp,
    sharp_norm,
    valuation,
)
from gsf.sets import (
    Ball,
    Box,
    HalfLine,
    Union,
    internal_membership,
    parse_set,
    strongly_internal_membership,
)
from gsf.smooth import GSF, compose, differentiate, gsf_eval, jacobian

__all__ = [
    "GSF",
    "Ball",
    "Box",
    "CertificateError",
    "Config",
    "Context",
    "GenMatrix",
    "GenNum",
    "GenPoint",
    "GlobalInverseError",
    "HalfLine",
    "MollifierNet",
    "NewtonError",
    "Report",
    "Union",
    "Verdict",
    "afj_differentiability_check",
    "build_mollifier",
    "compose",
    "derivative_commutation_check",
    "derivative_growth",
    "differentiate",
    "embed",
    "emit",
    "exponent_estimate",
    "fermat_ift_certificate",
    "get_context",
    "global_1d_invert",
    "global_inverse_eval",
    "gsf_eval",
    "hadamard_certificate",
    "hadamard_levy_certificate",
    "infinitely_close",
    "internal_membership",
    "inverse_jacobian",
    "is_finite",
    "is_infinitesimal",
    "is_invertible",
    "is_moderate",
    "is_negligible",
    "is_strictly_positive",
    "jacobian",
    "leq",
    "load_config",
    "local_inverse_eval",
    "lt_fermat",
    "lt_sharp",
    "pairing_limit",
    "parse_config",
    "parse_dist",
    "parse_set",
    "sharp_ift_certificate",
    "sharp_norm",
    "strongly_internal_membership",
    "valuation",
]
