"""Deterministic derivative-free minimizers.

Thin wrappers over scipy's bounded Brent and Nelder--Mead that add what the
extremal-manifold searches need: endpoint checks, log-space coordinates for
positive parameters, reflection at zero for offsets, and one restart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as _sopt


@dataclass(frozen=True)
class OptimizeResult:
    x_star: np.ndarray
    f_star: float
    iterations: int
    converged: bool


def minimize_scalar(f: Callable[[float], float], lo: float, hi: float, x_tol: float = 1e-8, max_iter: int = 500) -> OptimizeResult:
    """Bracketed minimum of ``f`` on ``[lo, hi]``; the endpoints are candidates too."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    res = _sopt.minimize_scalar(
        f, bounds=(lo, hi), method="bounded", options={"xatol": x_tol, "maxiter": max_iter}
    )
    best_x, best_f = float(res.x), float(res.fun)
    for edge in (lo, hi):
        fe = float(f(edge))
        if fe < best_f:
            best_x, best_f = edge, fe
    return OptimizeResult(np.array([best_x]), best_f, int(res.nfev) + 2, bool(res.success))


def _to_internal(x, log_coords):
    return np.array([math.log(v) if lg else v for v, lg in zip(x, log_coords)], dtype=float)


def _to_physical(z, log_coords, reflect):
    out = []
    for v, lg, rf in zip(z, log_coords, reflect):
        if lg:
            out.append(math.exp(v))
        elif rf:
            out.append(abs(v))
        else:
            out.append(float(v))
    return np.array(out)


def minimize_2d(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    scale: Sequence[float],
    x_tol: float = 1e-8,
    log_coords: Sequence[bool] = (False, False),
    reflect: Sequence[bool] = (False, False),
    max_iter: int = 400,
) -> OptimizeResult:
    """Nelder--Mead from the simplex ``x0, x0 + scale_i e_i``, then one restart at half scale.

    ``f`` takes physical coordinates.  Coordinates flagged in ``log_coords``
    are searched in ``log x`` (their ``scale`` is a log step); those flagged
    in ``reflect`` are searched on the line and folded by ``|.|``.
    """
    x0 = np.asarray(x0, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if x0.shape != (2,) or scale.shape != (2,):
        raise ValueError("minimize_2d needs 2-vectors for x0 and scale")
    if np.any(scale <= 0):
        raise ValueError("scale entries must be positive")

    def g(z):
        return float(f(_to_physical(z, log_coords, reflect)))

    z = _to_internal(x0, log_coords)
    iters = 0
    converged = True
    best_f = math.inf
    for step in (scale, scale / 2):
        simplex = np.array([z, z + [step[0], 0.0], z + [0.0, step[1]]])
        res = _sopt.minimize(
            g, z, method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": x_tol, "fatol": math.inf, "maxiter": max_iter, "maxfev": 2 * max_iter},
        )
        iters += int(res.nfev)
        converged = bool(res.success)
        if res.fun <= best_f:
            best_f, z = float(res.fun), np.asarray(res.x, dtype=float)
    return OptimizeResult(_to_physical(z, log_coords, reflect), best_f, iters, converged)
