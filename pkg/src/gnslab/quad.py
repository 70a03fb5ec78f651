"""Adaptive Gauss--Kronrod quadrature on finite and semi-infinite intervals.

The engine is a globally adaptive G7/K15 bisection scheme that works on
vector-valued integrands: the callable receives a 1-D array of nodes and
returns an array whose *last* axis matches the nodes.  Iterated integrals
use this to integrate the inner variable for every outer node at once.

Semi-infinite integrals are split at ``split`` (default 1).  The tail
``(split, inf)`` is mapped onto ``(0, 1)`` by ``r = split * u^(-m)`` with
``m = 1/(beta - 1)`` for slowly decaying integrands (``beta < 2``) and
``m = 1`` otherwise, which keeps the mapped integrand bounded.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .params import sphere_area

DEFAULT_BUDGET = 1_000_000
_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

# QUADPACK qk15 abscissae and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
W_K = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
W_G = np.zeros(15)
# Gauss nodes sit at the odd Kronrod positions 1, 3, 5, 7, 9, 11, 13.
W_G[[1, 3, 5]] = _WG[:3]
W_G[7] = _WG[3]
W_G[[9, 11, 13]] = _WG[2::-1]


class QuadratureError(RuntimeError):
    """The adaptive budget ran out before the error estimate met tolerance."""


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class Integrand1D:
    """A vectorized integrand on ``(0, inf)`` with tail metadata.

    ``tail_exponent`` is a ``beta > 1`` with ``|f(r)| <= M r^-beta`` for large
    ``r``; ``singular_at_zero`` optionally gives ``sigma > -1`` with
    ``f(r) ~ r^sigma`` near the origin.  ``breakpoints`` lists radii where
    the integrand has narrow features; the first pass starts with panel
    boundaries there so such features cannot be missed.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    tail_exponent: float = 2.0
    singular_at_zero: Optional[float] = None
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.tail_exponent > 1:
            raise ValueError(f"tail_exponent must exceed 1 for convergence, got {self.tail_exponent}")
        if self.singular_at_zero is not None and not self.singular_at_zero > -1:
            raise ValueError(f"singular_at_zero exponent must exceed -1, got {self.singular_at_zero}")


def _gk_panels(func, lo, hi):
    """Evaluate the G7/K15 pair on every panel ``[lo_j, hi_j]``.

    Returns (value, error, resabs) with shape ``(k, m)`` for ``k`` integrand
    components and ``m`` panels.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
    fx = np.asarray(func(x), dtype=float)
    m = lo.size
    fx = fx.reshape(-1, m, 15)
    resk = fx @ W_K
    resg = fx @ W_G
    mean = 0.5 * resk
    resabs = np.abs(fx) @ W_K
    resasc = np.abs(fx - mean[..., None]) @ W_K
    err = np.abs(resk - resg)
    scale = np.where(resasc > 0, np.minimum(1.0, (200 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), 1.0)
    err = np.where((resasc > 0) & (err > 0), resasc * scale, err)
    floor = 50 * _EPS * resabs
    err = np.where(resabs > _TINY / (50 * _EPS), np.maximum(floor, err), err)
    return resk * half, err * half, resabs * half


_budget = [DEFAULT_BUDGET]


def default_budget() -> int:
    return _budget[0]


@contextmanager
def budget_limit(evaluations: int):
    """Temporarily change the evaluation budget used when callers pass ``budget=None``."""
    if evaluations < 15:
        raise ValueError("budget must allow at least one panel (15 evaluations)")
    old = _budget[0]
    _budget[0] = int(evaluations)
    try:
        yield
    finally:
        _budget[0] = old


def _adaptive(func, a: float, b: float, rel_tol: float, abs_tol, budget: Optional[int], points=()):
    """Globally adaptive bisection; returns arrays (value, error) and the evaluation count.

    ``points`` inside ``(a, b)`` become the initial panel boundaries.
    """
    if budget is None:
        budget = _budget[0]
    inner = sorted({float(x) for x in points if a < x < b})
    edges = np.array([a, *inner, b], dtype=float)
    lo, hi = edges[:-1], edges[1:]
    val, err, rabs = _gk_panels(func, lo, hi)
    evals = 15 * lo.size
    frozen_val = np.zeros(val.shape[0])
    frozen_err = np.zeros(val.shape[0])
    frozen_abs = np.zeros(val.shape[0])
    while True:
        tot = frozen_val + val.sum(axis=1)
        etot = frozen_err + err.sum(axis=1)
        atot = frozen_abs + rabs.sum(axis=1)
        tol = np.maximum(np.maximum(rel_tol * np.abs(tot), abs_tol), 50 * _EPS * atot)
        tol = np.maximum(tol, 1e-300)
        if np.all(etot <= tol) or lo.size == 0:
            return tot, etot, evals
        if evals >= budget:
            raise QuadratureError(
                f"quadrature budget of {budget} evaluations exhausted on [{a}, {b}]: "
                f"error estimate {np.max(etot):.3e} above tolerance {np.min(tol):.3e}"
            )
        score = np.max(err / tol[:, None], axis=0)
        order = np.argsort(-score, kind="stable")
        csum = np.cumsum(score[order])
        total = csum[-1]
        frozen_score = np.max(frozen_err / tol)
        # split the worst panels until what is left is comfortably below tolerance
        target = max(total + frozen_score - 0.5, 0.0)
        nsplit = int(np.searchsorted(csum, target, side="left")) + 1
        nsplit = min(max(nsplit, 1), order.size)
        nsplit = min(nsplit, max(1, (budget - evals) // 30))
        pick = order[:nsplit]
        keep = np.ones(lo.size, dtype=bool)
        keep[pick] = False
        plo, phi = lo[pick], hi[pick]
        pmid = 0.5 * (plo + phi)
        # panels that can no longer be bisected in floating point are frozen
        narrow = (pmid <= plo) | (pmid >= phi) | ((phi - plo) < 8 * _EPS * np.maximum(np.abs(plo), np.abs(phi)))
        if np.any(narrow):
            sel = pick[narrow]
            frozen_val += val[:, sel].sum(axis=1)
            frozen_err += err[:, sel].sum(axis=1)
            frozen_abs += rabs[:, sel].sum(axis=1)
            plo, phi, pmid = plo[~narrow], phi[~narrow], pmid[~narrow]
        new_lo = np.concatenate([plo, pmid])
        new_hi = np.concatenate([pmid, phi])
        if new_lo.size:
            nval, nerr, nabs = _gk_panels(func, new_lo, new_hi)
            evals += 15 * new_lo.size
        else:
            nval = np.zeros((val.shape[0], 0))
            nerr, nabs = nval, nval
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[:, keep], nval], axis=1)
        err = np.concatenate([err[:, keep], nerr], axis=1)
        rabs = np.concatenate([rabs[:, keep], nabs], axis=1)


def _check_tol(rel_tol: float) -> None:
    if not (1e-14 <= rel_tol <= 1e-2):
        raise ValueError(f"rel_tol must lie in [1e-14, 1e-2], got {rel_tol}")


def adaptive_finite(func, a: float, b: float, rel_tol: float, abs_tol: float = 0.0, budget: Optional[int] = None, points=()):
    """Vector-valued adaptive integral over ``[a, b]``; returns (values, errors, evals)."""
    return _adaptive(func, a, b, rel_tol, abs_tol, budget, points)


def _tail_power(tail_exponent: float, singular_at_zero: Optional[float]):
    if not tail_exponent > 1:
        raise ValueError(f"integrand tail exponent must exceed 1 for convergence, got {tail_exponent}")
    m_tail = 1.0 / (tail_exponent - 1.0) if tail_exponent < 2 else 1.0
    if singular_at_zero is not None and singular_at_zero < 0:
        m_head = 1.0 / (1.0 + singular_at_zero)
    else:
        m_head = 1.0
    return m_tail, m_head


def mapped_points(radii, tail_exponent: float = 2.0, singular_at_zero: Optional[float] = None, split: float = 1.0) -> list:
    """Images in ``[0, 2]`` of radii under the map used by :func:`mapped_semi_infinite`.

    The seam ``w = 1`` between the two maps is always included: the mapped
    integrand is only continuous there, and a panel straddling it can hide the
    kink between its outermost nodes and an edge.
    """
    m_tail, m_head = _tail_power(tail_exponent, singular_at_zero)
    out = [1.0]
    for r in radii:
        if not 0 < r < math.inf:
            continue
        if r <= split:
            out.append((r / split) ** (1.0 / m_head))
        else:
            out.append(2.0 - (r / split) ** (-1.0 / m_tail))
    return out


def mapped_semi_infinite(func, tail_exponent: float = 2.0, singular_at_zero: Optional[float] = None, split: float = 1.0):
    """Rewrite ``int_0^inf func`` as an integral of the returned callable over ``[0, 2]``."""
    m_tail, m_head = _tail_power(tail_exponent, singular_at_zero)

    def mapped(w):
        w = np.asarray(w, dtype=float)
        head = w <= 1.0
        r = np.empty_like(w)
        jac = np.empty_like(w)
        wh = w[head]
        if m_head == 1.0:
            r[head] = split * wh
            jac[head] = split
        else:
            r[head] = split * wh**m_head
            jac[head] = split * m_head * wh ** (m_head - 1)
        u = 2.0 - w[~head]
        tiny = u < 1e-250
        u = np.where(tiny, 1.0, u)
        r[~head] = np.where(tiny, np.inf, split * u ** (-m_tail))
        jac[~head] = np.where(tiny, 0.0, split * m_tail * u ** (-m_tail - 1))
        finite = np.isfinite(r)
        rr = np.where(finite, r, 1.0)
        fx = np.asarray(func(rr), dtype=float)
        fx = np.where(finite, fx, 0.0)
        return fx * jac

    return mapped


def integrate_semi_infinite(
    f: Integrand1D,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    budget: Optional[int] = None,
    split: float = 1.0,
) -> QuadResult:
    """``int_0^inf f(r) dr`` for a scalar integrand."""
    _check_tol(rel_tol)
    mapped = mapped_semi_infinite(f.eval, f.tail_exponent, f.singular_at_zero, split)
    pts = mapped_points(f.breakpoints, f.tail_exponent, f.singular_at_zero, split)
    val, err, evals = _adaptive(lambda w: np.atleast_2d(mapped(w)), 0.0, 2.0, rel_tol, abs_tol, budget, pts)
    return QuadResult(float(val[0]), float(err[0]), int(evals))


def semi_infinite_vector(func, rel_tol, abs_tol=0.0, budget=None, tail_exponent=2.0, singular_at_zero=None, split=1.0, breakpoints=()):
    """Vector-valued ``int_0^inf``; ``func(r)`` returns shape ``(k, len(r))``."""
    mapped = mapped_semi_infinite(func, tail_exponent, singular_at_zero, split)
    pts = mapped_points(breakpoints, tail_exponent, singular_at_zero, split)
    return _adaptive(mapped, 0.0, 2.0, rel_tol, abs_tol, budget, pts)


def integrate_radial(f: Integrand1D, n: int, rel_tol: float = 1e-10, abs_tol: float = 0.0, budget: Optional[int] = None) -> QuadResult:
    """``int_{R^n} F(|x|) dx = |S^{n-1}| int_0^inf F(r) r^(n-1) dr``."""
    area = sphere_area(n)
    weighted = Integrand1D(
        eval=lambda r: f.eval(r) * r ** (n - 1),
        tail_exponent=f.tail_exponent - (n - 1),
        singular_at_zero=None if f.singular_at_zero is None else f.singular_at_zero + n - 1,
        breakpoints=f.breakpoints,
    )
    res = integrate_semi_infinite(weighted, rel_tol, abs_tol / area, budget)
    return QuadResult(area * res.value, area * res.abs_error_estimate, res.evaluations)


def _sphere_lower(n: int) -> float:
    """``|S^{n-2}|``, the area of the unit sphere in R^(n-1); 2 when n = 2."""
    if n == 2:
        return 2.0
    return sphere_area(n - 1)


def _inner_abs_tol(abs_tol: float, r: np.ndarray, lower: float, n: int) -> np.ndarray:
    """Split a global absolute tolerance over outer nodes with the density ``(1 + r)^-2``.

    An inner integral that meets this tolerance at every node contributes at
    most ``abs_tol / 2`` to the outer result.
    """
    if abs_tol <= 0:
        return np.zeros_like(r)
    with np.errstate(divide="ignore"):
        return 0.5 * abs_tol / (lower * np.maximum(r, _TINY) ** (n - 1) * (1 + r) ** 2)


def integrate_two_center_kernel(
    kernel: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    d: float,
    n: int,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    budget: Optional[int] = None,
    tail_exponent: float = 2.0,
    breakpoints: tuple = (),
) -> QuadResult:
    """``int_{R^n} K(r, rho, cos phi, sin phi) dx`` with ``r = |x|``, ``rho = |x - d e1|``.

    ``phi`` is the angle between ``x`` and ``e1``; its sine is passed separately
    so kernels can form small angles without cancellation.  For ``d = 0`` this is a
    radial integral.  ``tail_exponent`` refers to the decay of ``K`` in ``r``;
    ``breakpoints`` are radii of narrow features, used to seed the outer panels.
    """
    _check_tol(rel_tol)
    if d < 0:
        raise ValueError("offset d must be nonnegative")
    if d == 0:
        return integrate_radial(
            Integrand1D(lambda r: kernel(r, r, np.ones_like(r), np.zeros_like(r)), tail_exponent, breakpoints=tuple(breakpoints)),
            n, rel_tol, abs_tol, budget,
        )
    lower = _sphere_lower(n)
    used = [0]

    def outer(r):
        r = np.asarray(r, dtype=float)
        rc = r[:, None]
        inner_abs = _inner_abs_tol(abs_tol, r, lower, n)

        def inner(phi):
            c = np.cos(phi)[None, :]
            sn = np.sin(phi)[None, :]
            rho = np.sqrt((rc - d * c) ** 2 + (d * sn) ** 2)
            val = kernel(rc, rho, np.broadcast_to(c, rho.shape), np.broadcast_to(sn, rho.shape))
            if n > 2:
                val = val * sn ** (n - 2)
            return val

        vals, _, ev = _adaptive(inner, 0.0, math.pi, rel_tol / 4, inner_abs, budget)
        used[0] += ev
        return vals * lower * r ** (n - 1)

    split = max(1.0, d)
    mapped = mapped_semi_infinite(lambda r: outer(r)[None, :], tail_exponent - (n - 1), None, split=split)
    pts = mapped_points(breakpoints, tail_exponent - (n - 1), None, split)
    val, err, evals = _adaptive(mapped, 0.0, 2.0, rel_tol, abs_tol, budget, pts)
    return QuadResult(float(val[0]), float(err[0]), int(evals + used[0]))


def integrate_two_center(F: Integrand1D, G: Integrand1D, d: float, n: int, rel_tol: float = 1e-10, budget: Optional[int] = None) -> QuadResult:
    """``int_{R^n} F(|x|) G(|x - d e1|) dx``."""
    tail = F.tail_exponent + G.tail_exponent
    return integrate_two_center_kernel(
        lambda r, rho, c, sn: F.eval(r) * G.eval(rho), d, n, rel_tol, budget=budget, tail_exponent=tail
    )


def integrate_halfspace_weighted(
    h: Callable[[np.ndarray, np.ndarray], np.ndarray],
    s: float,
    n: int,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    budget: Optional[int] = None,
    tail_r: float = 2.0,
    tail_y: float = 2.0,
) -> QuadResult:
    """``int_{R^{n+1}_+} h(|x|, y) y^s dx dy`` by iterated quadrature (inner y, outer r).

    The inner variable is rescaled by ``1 + r`` so that the transition of
    ``h(r, .)`` stays at unit scale for every outer node.

    ``tail_r`` and ``tail_y`` are decay exponents of ``h * r^(n-1)`` and
    ``h * y^s`` in their respective variables.
    """
    _check_tol(rel_tol)
    if not s > -1:
        raise ValueError("weight exponent s must exceed -1")
    area = sphere_area(n)
    used = [0]
    sing_y = s if s < 0 else None

    def outer(r):
        r = np.asarray(r, dtype=float)
        rc = r[:, None]
        # the y-profile at radius r lives on the scale 1 + r; integrate in y / (1 + r)
        ys = 1.0 + rc
        vals, _, ev = semi_infinite_vector(
            lambda eta: h(rc, ys * eta[None, :]) * (ys * eta[None, :]) ** s * ys,
            rel_tol / 4, _inner_abs_tol(abs_tol, r, area, n), budget, tail_exponent=tail_y, singular_at_zero=sing_y,
        )
        used[0] += ev
        return vals * r ** (n - 1)

    val, err, evals = semi_infinite_vector(lambda r: outer(r)[None, :], rel_tol, abs_tol / area, budget, tail_exponent=tail_r)
    return QuadResult(float(area * val[0]), float(area * err[0]), int(evals + used[0]))


def integrate_halfspace_two_center(
    kernel: Callable[..., np.ndarray],
    d: float,
    s: float,
    n: int,
    rel_tol: float = 1e-8,
    abs_tol: float = 0.0,
    budget: Optional[int] = None,
    tail_r: float = 2.0,
    tail_y: float = 2.0,
) -> QuadResult:
    """``int_{R^{n+1}_+} K(r, rho, cos phi, sin phi, y) y^s dx dy`` with ``rho = |x - d e1|``.

    For ``d = 0`` this reduces to :func:`integrate_halfspace_weighted`.
    """
    if d == 0:
        return integrate_halfspace_weighted(
            lambda r, y: kernel(r, r, np.ones_like(r), np.zeros_like(r), y), s, n, rel_tol, abs_tol, budget, tail_r, tail_y
        )
    _check_tol(rel_tol)
    lower = _sphere_lower(n)
    used = [0]
    sing_y = s if s < 0 else None

    def outer(r):
        r = np.asarray(r, dtype=float)
        rc = r[:, None]
        mid_abs = _inner_abs_tol(abs_tol, r, lower, n)

        def middle(phi):
            c = np.cos(phi)[None, :]
            sn = np.sin(phi)[None, :]
            rho = np.sqrt((rc - d * c) ** 2 + (d * sn) ** 2)
            cc = np.broadcast_to(c, rho.shape)
            rr = np.broadcast_to(rc, rho.shape)
            shape = rho.shape
            ss = np.broadcast_to(sn, rho.shape)
            rr3, rho3 = rr.ravel()[:, None], rho.ravel()[:, None]
            cc3, ss3 = cc.ravel()[:, None], ss.ravel()[:, None]

            ys = 1.0 + np.minimum(rr3, rho3)

            def inner(eta):
                y = ys * eta[None, :]
                return kernel(rr3, rho3, cc3, ss3, y) * y**s * ys

            y_abs = np.broadcast_to(mid_abs[:, None] / (4 * math.pi), shape).ravel()
            vals, _, ev = semi_infinite_vector(inner, rel_tol / 16, y_abs, budget, tail_exponent=tail_y, singular_at_zero=sing_y)
            used[0] += ev
            vals = vals.reshape(shape)
            if n > 2:
                vals = vals * sn ** (n - 2)
            return vals

        vals, _, ev = _adaptive(middle, 0.0, math.pi, rel_tol / 4, mid_abs, budget)
        used[0] += ev
        return vals * lower * r ** (n - 1)

    mapped = mapped_semi_infinite(lambda r: outer(r)[None, :], tail_r, None, split=max(1.0, d))
    val, err, evals = _adaptive(mapped, 0.0, 2.0, rel_tol, abs_tol, budget)
    return QuadResult(float(val[0]), float(err[0]), int(evals + used[0]))
