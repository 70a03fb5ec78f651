"""Numerical verification toolkit for the sharp Del Pino--Dolbeault GNS family and its stability."""

from .params import Params, ParamsRangeError, derive_params
from .profiles import PerturbationFamily, extremal_v, lift, normalize, perturb

__all__ = [
    "Params",
    "ParamsRangeError",
    "PerturbationFamily",
    "derive_params",
    "extremal_v",
    "lift",
    "normalize",
    "perturb",
]

__version__ = "0.1.0"
