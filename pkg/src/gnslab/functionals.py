"""Norms, deficits, distances to the extremal manifold, entropy and moments.

Distances are always integrated as squared (or absolute) pointwise
differences rather than expanded into cross terms: near the extremal
manifold they are O(eps^2) while the individual norms are O(1).
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .optimize import minimize_2d, minimize_scalar
from .params import Params, sandwich_constant, sphere_area, unit_ball_volume, v_grad_sq, v_norm, v_norm_power
from .profiles import HalfSpaceFunction, RadialProfile, extremal_g, extremal_v
from .quad import (
    Integrand1D,
    integrate_halfspace_two_center,
    integrate_halfspace_weighted,
    integrate_radial,
    integrate_two_center_kernel,
)

DEFAULT_REL_TOL = 1e-12
# absolute floor, relative to the natural O(1) scale of each distance, below
# which pointwise differences are rounding noise
NOISE_FLOOR = 1e-13
LOG_A_BRACKET = (-3.0, 3.0)
D_MAX = 2.0
D_PROBE = 1e-2


class DivergentMomentError(ValueError):
    pass


class SignSplitViolation(AssertionError):
    pass


@dataclass(frozen=True)
class Norms:
    lq_2t: float
    lq_t1: float
    grad_sq: float


def _radial(fun, tail, n, rel_tol, sing=None, breakpoints=()):
    return integrate_radial(Integrand1D(fun, max(tail, 1.0 + 1e-9 + (n - 1)), sing, tuple(breakpoints)), n, rel_tol).value


def norms(u: RadialProfile, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> Norms:
    """``||u||_{2t}``, ``||u||_{t+1}`` and ``||grad u||_2^2``."""
    n, t = params.n, params.t
    b = u.tail_exponent
    bp = u.breakpoints
    i2t = _radial(lambda r: np.abs(u.value(r)) ** (2 * t), 2 * t * b, n, rel_tol, breakpoints=bp)
    it1 = _radial(lambda r: np.abs(u.value(r)) ** (t + 1), (t + 1) * b, n, rel_tol, breakpoints=bp)
    ig = _radial(lambda r: np.square(u.deriv(r)), 2 * (b + 1), n, rel_tol, breakpoints=bp)
    return Norms(i2t ** (1 / (2 * t)), it1 ** (1 / (t + 1)), ig)


def lq_power(u: RadialProfile, q: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> float:
    return _radial(lambda r: np.abs(u.value(r)) ** q, q * u.tail_exponent, params.n, rel_tol, breakpoints=u.breakpoints)


# -- deficits ---------------------------------------------------------------------


def deficits_from_norms(nm: Norms, params: Params) -> tuple[float, float]:
    th, k = params.theta, params.k_hat
    if nm.lq_2t == 0:
        return 0.0, 0.0
    gns_rhs = params.a_gns * math.sqrt(nm.grad_sq) ** th * nm.lq_t1 ** (1 - th)
    delta = gns_rhs / nm.lq_2t - 1
    delta_hat = gns_rhs**k - nm.lq_2t**k
    return delta, delta_hat


def delta_hat_from_delta(delta: float, lq_2t: float, params: Params) -> float:
    """The deficit relation ``delta_hat = ||u||_{2t}^k ((1 + delta)^k - 1)``, ``k = 4t/2(t)``."""
    k = params.k_hat
    return lq_2t**k * math.expm1(k * math.log1p(delta))


def gns_deficits(u: RadialProfile, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """``(delta_GNS, delta_hat_GNS)``; both zero for the zero function."""
    nm = norms(u, params, rel_tol)
    return deficits_from_norms(nm, params)


def weighted_sobolev_deficit(f: HalfSpaceFunction, params: Params, rel_tol: float = 1e-10) -> float:
    """``S int |grad f|^2 y^s - (int f^{2*} y^s)^(2/2*)``."""
    grad, mass = halfspace_integrals(f, params, rel_tol)
    return params.s_sob * grad - mass ** (2 / params.two_star_s)


def halfspace_integrals(f: HalfSpaceFunction, params: Params, rel_tol: float = 1e-10) -> tuple[float, float]:
    """``(int |grad f|^2 y^s, int |f|^{2*} y^s)`` by direct half-space quadrature."""
    p2 = params.two_star_s
    grad = integrate_halfspace_weighted(f.grad_sq, params.s, params.n, rel_tol).value
    mass = integrate_halfspace_weighted(lambda r, y: np.abs(f.value(r, y)) ** p2, params.s, params.n, rel_tol).value
    return grad, mass


def lift_integrals_closed_form(nm: Norms, params: Params) -> tuple[float, float]:
    """Half-space integrals of a lift, reduced by change of variables to norms of ``u``."""
    from .params import beta_integral

    t, n_s, s = params.t, params.n_s, params.s
    d0 = beta_integral(n_s, s)
    d2 = beta_integral(n_s, s + 2)
    grad = ((t - 1) * (n_s - 2) / 2) ** 2 * d0 * nm.grad_sq + (n_s - 2) ** 2 * d2 * nm.lq_t1 ** (t + 1)
    mass = d0 * nm.lq_2t ** (2 * t)
    return grad, mass


# -- two-center kernels -------------------------------------------------------------


def _one_minus_cos_psi(r, rho, cphi, sphi, d):
    """``1 - cos`` of the angle between ``x`` and ``x - d e1``, without cancellation."""
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_psi = np.where(rho > 0, (r - d * cphi) / np.where(rho > 0, rho, 1.0), 1.0)
        sin_psi = np.where(rho > 0, d * sphi / np.where(rho > 0, rho, 1.0), 0.0)
        out = np.where(cos_psi > 0, np.square(sin_psi) / (1 + cos_psi), 1 - cos_psi)
    return out


def _gradient_gap_sq(du_r, dv_rho, one_minus):
    """``|du x/|x| - dv (x - d e1)/|x - d e1||^2`` split into nonnegative pieces."""
    return np.square(du_r - dv_rho) + 2 * du_r * dv_rho * one_minus


def thm11_objective(u: RadialProfile, d: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``int |grad u - grad v_{1,d e1}|^2 + int |u^((t+1)/2) - v_{1,d e1}^((t+1)/2)|^2``."""
    t = params.t
    v = extremal_v(1.0, params)
    h = (t + 1) / 2

    def kernel(r, rho, cphi, sphi):
        gap = _gradient_gap_sq(u.deriv(r), v.deriv(rho), _one_minus_cos_psi(r, rho, cphi, sphi, d))
        return gap + np.square(np.abs(u.value(r)) ** h - v.value(rho) ** h)

    tail = min(2 * (u.tail_exponent + 1), (t + 1) * u.tail_exponent)
    ref = NOISE_FLOOR * (v_norm_power(params, t + 1) + v_grad_sq(params))
    return integrate_two_center_kernel(kernel, d, params.n, rel_tol, ref, tail_exponent=tail, breakpoints=u.breakpoints).value


def _check_normalized(u: RadialProfile, params: Params, rel_tol: float, tol: float = 1e-6) -> None:
    nm = norms(u, params, rel_tol)
    c1 = abs(nm.lq_2t / v_norm(params, 2 * params.t) - 1)
    c2 = abs(params.ratio_const * nm.grad_sq / nm.lq_t1 ** (params.t + 1) - 1)
    if max(c1, c2) > tol:
        warnings.warn(
            f"profile {u.label} violates the normalization by {max(c1, c2):.2e}; distance may be meaningless",
            stacklevel=3,
        )


@dataclass(frozen=True)
class OffsetSearch:
    value: float
    d_star: float
    centered_wins: bool
    converged: bool


def _offset_search(obj, d_max: float = D_MAX, x_tol: float = 1e-6) -> OffsetSearch:
    f0 = obj(0.0)
    res = minimize_scalar(obj, 0.0, d_max, x_tol)
    if f0 <= res.f_star:
        return OffsetSearch(f0, 0.0, True, res.converged)
    return OffsetSearch(res.f_star, float(res.x_star[0]), False, res.converged)


def thm11_distance(u: RadialProfile, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """Minimum over offsets ``d >= 0`` of :func:`thm11_objective`; returns ``(dist, d_star)``."""
    _check_normalized(u, params, rel_tol)
    res = _offset_search(lambda d: thm11_objective(u, d, params, rel_tol))
    return res.value, res.d_star


# -- asymmetry and L^1 density distances ------------------------------------------------


def _two_center(kernel, d, params, rel_tol, tail, abs_tol=0.0, breakpoints=()):
    return integrate_two_center_kernel(kernel, d, params.n, rel_tol, abs_tol, tail_exponent=tail, breakpoints=breakpoints).value


def asymmetry_objective(u: RadialProfile, a: float, d: float, params: Params, scale: float, rel_tol: float) -> float:
    n, t = params.n, params.t
    va = extremal_v(a, params)
    amp = a ** (n / (2 * t))
    return _two_center(
        lambda r, rho, c, s: np.abs(scale * u.value(r) - amp * va.value(rho)) ** (2 * t),
        d, params, rel_tol, 2 * t * u.tail_exponent, 1e-40 * v_norm_power(params, 2 * t), u.breakpoints,
    )


def _search_a_d(obj, x_tol: float = 1e-10, polish_tol: float = 1e-6, floor: float = 0.0):
    """Centered 1-D search in ``log a`` followed by a 2-D simplex polish in ``(log a, d)``.

    The objective is even in ``d``, so ``d = 0`` is stationary and the mixed
    second derivative vanishes there; one probe at ``d = D_PROBE`` decides whether
    the centered minimizer is a local minimum in both variables.  The polish
    runs only when it is not.  It is also skipped when the centered minimum is
    already below ``floor``.
    """
    centered = minimize_scalar(lambda la: obj(math.exp(la), 0.0), *LOG_A_BRACKET, x_tol)
    la0 = float(centered.x_star[0])
    best = (centered.f_star, math.exp(la0), 0.0)
    if centered.f_star <= floor or obj(math.exp(la0), D_PROBE) >= centered.f_star:
        return best, centered.converged
    polish = minimize_2d(
        lambda x: obj(x[0], x[1]),
        [math.exp(la0), 0.0],
        [0.05, 0.05],
        polish_tol,
        log_coords=(True, False),
        reflect=(False, True),
    )
    if polish.f_star < best[0]:
        best = (polish.f_star, float(polish.x_star[0]), float(polish.x_star[1]))
    return best, centered.converged and polish.converged


def asymmetry(u: RadialProfile, params: Params, rel_tol: float = 1e-10) -> tuple[float, float, float]:
    """``lambda_GNS[u]`` with its minimizers ``(a*, d*)``."""
    t = params.t
    l2t = lq_power(u, 2 * t, params, rel_tol) ** (1 / (2 * t))
    if l2t == 0:
        return 0.0, 1.0, 0.0
    scale = v_norm(params, 2 * t) / l2t
    (val, a, d), _ = _search_a_d(lambda a, d: asymmetry_objective(u, a, d, params, scale, rel_tol))
    return val, a, d


def l1_2t_objective(u: RadialProfile, a: float, d: float, params: Params, rel_tol: float) -> float:
    n, t = params.n, params.t
    va = extremal_v(a, params)
    return _two_center(
        lambda r, rho, c, s: np.abs(np.abs(u.value(r)) ** (2 * t) - a**n * va.value(rho) ** (2 * t)),
        d, params, rel_tol, 2 * t * u.tail_exponent, NOISE_FLOOR * v_norm_power(params, 2 * t), u.breakpoints,
    )


def l1_t1_objective(u: RadialProfile, a: float, params: Params, rel_tol: float) -> float:
    n, t = params.n, params.t
    va = extremal_v(a, params)
    return integrate_radial(
        Integrand1D(
            lambda r: np.abs(np.abs(u.value(r)) ** (t + 1) - a**n * va.value(r) ** (t + 1)),
            (t + 1) * u.tail_exponent,
            breakpoints=u.breakpoints,
        ),
        n, rel_tol, NOISE_FLOOR * v_norm_power(params, t + 1),
    ).value


def l1_density_distances(u: RadialProfile, params: Params, rel_tol: float = 1e-8) -> tuple[float, float, float]:
    """``(l1_2t, l1_t1, a_star)`` with ``a_star`` the minimizer for the ``t+1`` density."""
    floor = 1e3 * NOISE_FLOOR * v_norm_power(params, 2 * params.t)
    (l1_2t, _, _), _ = _search_a_d(lambda a, d: l1_2t_objective(u, a, d, params, rel_tol), floor=floor)
    l1_t1, a_star = l1_t1_distance(u, params, rel_tol)
    return l1_2t, l1_t1, a_star


def l1_t1_distance(u: RadialProfile, params: Params, rel_tol: float = 1e-8) -> tuple[float, float]:
    """Centered ``inf_a ||u^{t+1} - a^n v_a^{t+1}||_1`` and its minimizer."""
    res = minimize_scalar(lambda la: l1_t1_objective(u, math.exp(la), params, rel_tol), *LOG_A_BRACKET, 1e-10)
    return res.f_star, math.exp(float(res.x_star[0]))


# -- entropy, moments and the a priori density estimates ----------------------------------


def moment_is_finite(u: RadialProfile, p: float, params: Params) -> bool:
    return p + params.n < (params.t + 1) * u.tail_exponent


def entropy(u: RadialProfile, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> float:
    t = params.t

    def integrand(r):
        w = np.abs(u.value(r)) ** (t + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)

    return _radial(integrand, (t + 1) * u.tail_exponent - 0.5, params.n, rel_tol, breakpoints=u.breakpoints)


def moment(u: RadialProfile, p: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> float:
    if not moment_is_finite(u, p, params):
        raise DivergentMomentError(
            f"N_p diverges for p={p}: need p + n < (t+1) * tail_exponent = {(params.t + 1) * u.tail_exponent:g}"
        )
    t, n = params.t, params.n
    beta = (t + 1) * u.tail_exponent - p - (n - 1)
    return integrate_radial(
        Integrand1D(lambda r: r**p * np.abs(u.value(r)) ** (t + 1), beta + n - 1, breakpoints=u.breakpoints), n, rel_tol
    ).value


def density_statistics(u: RadialProfile, p: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """``(S(u), N_p(u))``."""
    mom = moment(u, p, params, rel_tol)
    return entropy(u, params, rel_tol), mom


def ln_minus_estimate(u: RadialProfile, p: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """``(int rho ln_- rho, N_p + (1/e) int e^{-|x|^p})`` for ``rho = u^{t+1}``."""
    t, n = params.t, params.n

    def integrand(r):
        w = np.abs(u.value(r)) ** (t + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, w * np.maximum(-np.log(np.where(w > 0, w, 1.0)), 0.0), 0.0)

    lhs = _radial(integrand, (t + 1) * u.tail_exponent - 0.5, n, rel_tol, breakpoints=u.breakpoints)
    gauss_like = sphere_area(n) * math.gamma(n / p) / p
    return lhs, moment(u, p, params, rel_tol) + gauss_like / math.e


def lower_bound_constant(p: float, params: Params) -> float:
    """``c_1`` in ``||u||_{2t}^{2t} >= c_1 N_p(u)^(-n(t-1)/(p(t+1)))`` from the Holder/radius choice."""
    n, t = params.n, params.t
    mass = v_norm_power(params, t + 1)
    expo = n * (t - 1) / (p * (t + 1))
    return (mass / 2) ** (2 * t / (t + 1)) * params.omega_n ** (-(t - 1) / (t + 1)) * (2 / mass) ** (-expo)


def lower_bound_moment(u: RadialProfile, p: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """``(||u||_{2t}^{2t}, c_1 N_p(u)^(-n(t-1)/(p(t+1))))``; assumes ``||u||_{t+1} = ||v||_{t+1}``."""
    n, t = params.n, params.t
    lhs = lq_power(u, 2 * t, params, rel_tol)
    np_u = moment(u, p, params, rel_tol)
    return lhs, lower_bound_constant(p, params) * np_u ** (-n * (t - 1) / (p * (t + 1)))


def entropy_localization(u: RadialProfile, a: float, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """``(int_{B_a} u^{t+1} ln u^{t+1}, m ln(m / |B_a|))`` where ``m = int_{B_a} u^{t+1}`` (Jensen)."""
    from .quad import adaptive_finite

    n, t = params.n, params.t
    area = sphere_area(n)

    def ent(r):
        w = np.abs(u.value(r)) ** (t + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
        return np.vstack([e * r ** (n - 1), w * r ** (n - 1)])

    (lhs, mass), _, _ = adaptive_finite(ent, 0.0, a, rel_tol, points=u.breakpoints)
    lhs, mass = area * lhs, area * mass
    vol = unit_ball_volume(n) * a**n
    return lhs, mass * math.log(mass / vol)


# -- signed functions -------------------------------------------------------------------


def split_exponent_function(a, p: float, t: float):
    """``phi(a) = (a^(p/2t) + (1-a)^(p/2t))^(1/p) - 1``."""
    q = p / (2 * t)
    a = np.asarray(a, dtype=float)
    return (a**q + (1 - a) ** q) ** (1 / p) - 1


@dataclass(frozen=True)
class SignSplit:
    ratio: float
    a_plus: float
    phi: float
    delta_gns: float

    @property
    def holds(self) -> bool:
        return self.phi <= self.delta_gns


def sign_split_details(u: RadialProfile, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> SignSplit:
    from .params import corollary_exponents

    t = params.t
    bp = u.breakpoints
    plus = lq_power(RadialProfile(lambda r: np.maximum(u.value(r), 0.0), u.deriv, u.tail_exponent, "signed", breakpoints=bp), 2 * t, params, rel_tol)
    minus = lq_power(RadialProfile(lambda r: np.maximum(-u.value(r), 0.0), u.deriv, u.tail_exponent, "signed", breakpoints=bp), 2 * t, params, rel_tol)
    total = plus + minus
    if total == 0:
        raise ValueError("sign split of the zero function is undefined")
    a_plus = plus / total
    p = corollary_exponents(params).p_split
    phi = float(split_exponent_function(a_plus, p, t))
    delta, _ = gns_deficits(u, params, rel_tol)
    return SignSplit(min(plus, minus) / total, a_plus, phi, delta)


def sign_split_ratio(u: RadialProfile, params: Params, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``min(int u_-^{2t}, int u_+^{2t}) / ||u||_{2t}^{2t}``; checks the splitting bound on the way."""
    res = sign_split_details(u, params, rel_tol)
    if res.phi > res.delta_gns + rel_tol:
        raise SignSplitViolation(f"splitting bound fails: phi={res.phi} > delta={res.delta_gns}")
    return res.ratio


@dataclass(frozen=True)
class KappaCheck:
    kappa: float
    a_min: float
    grid_min_ratio: float
    concave: bool
    positive: bool

    @property
    def holds(self) -> bool:
        return self.kappa > 0 and self.concave and self.positive and self.grid_min_ratio >= self.kappa * (1 - 1e-9)


def kappa_claim(params: Params, grid_size: int = 20001) -> KappaCheck:
    """Estimate ``kappa`` with ``phi(a) >= kappa min(a, 1-a)^(p/2t)`` and verify it on a dense grid."""
    from .params import corollary_exponents

    t = params.t
    p = corollary_exponents(params).p_split
    q = p / (2 * t)

    def ratio(a):
        return float(split_exponent_function(a, p, t)) / min(a, 1 - a) ** q

    res = minimize_scalar(lambda la: ratio(10.0**la), -6.0, math.log10(0.5), 1e-10)
    kappa = res.f_star
    grid = np.concatenate([np.geomspace(1e-6, 0.5, grid_size // 2), 1 - np.geomspace(1e-6, 0.5, grid_size // 2)[::-1]])
    phi = split_exponent_function(grid, p, t)
    grid_ratio = phi / np.minimum(grid, 1 - grid) ** q
    lin = np.linspace(0, 1, 4001)
    phl = split_exponent_function(lin, p, t)
    second = phl[:-2] - 2 * phl[1:-1] + phl[2:]
    return KappaCheck(
        kappa=kappa,
        a_min=10.0 ** float(res.x_star[0]),
        grid_min_ratio=float(np.min(grid_ratio)),
        concave=bool(np.all(second <= 1e-14)),
        positive=bool(np.all(phi > 0)),
    )


# -- half-space gradient distance to the extremal manifold ------------------------------------


@lru_cache(maxsize=64)
def g_grad_sq_norm(params: Params, rel_tol: float = 1e-12) -> float:
    """``int |grad g_{1,1,0}|^2 y^s``; the same for every ``g_{1,a,x0}``."""
    g = extremal_g(1.0, 1.0, params)
    return integrate_halfspace_weighted(g.grad_sq, params.s, params.n, rel_tol).value


def _hs_kernels(f: HalfSpaceFunction, g: HalfSpaceFunction, d: float):
    def inner(r, rho, cphi, sphi, y):
        cos_psi = 1.0 if d == 0 else np.where(rho > 0, (r - d * cphi) / np.where(rho > 0, rho, 1.0), 1.0)
        return f.d_r(r, y) * g.d_r(rho, y) * cos_psi + f.d_y(r, y) * g.d_y(rho, y)

    return inner


def halfspace_inner_product(f: HalfSpaceFunction, a: float, d: float, params: Params, rel_tol: float) -> float:
    """Weighted pairing ``int grad f . grad g_{1,a,d e1} y^s``."""
    g = extremal_g(1.0, a, params)
    return integrate_halfspace_two_center(_hs_kernels(f, g, d), d, params.s, params.n, rel_tol, _hs_floor(params)).value


def gradient_distance(f: HalfSpaceFunction, c: float, a: float, d: float, params: Params, rel_tol: float) -> float:
    """``int |grad (f - g_{c,a,d e1})|^2 y^s`` integrated as a pointwise squared difference."""
    g = extremal_g(c, a, params)

    def kernel(r, rho, cphi, sphi, y):
        fr, gr = f.d_r(r, y), g.d_r(rho, y)
        if d == 0:
            x_part = np.square(fr - gr)
        else:
            x_part = _gradient_gap_sq(fr, gr, _one_minus_cos_psi(r, rho, cphi, sphi, d))
        return x_part + np.square(f.d_y(r, y) - g.d_y(rho, y))

    return integrate_halfspace_two_center(kernel, d, params.s, params.n, rel_tol, _hs_floor(params)).value


def _hs_floor(params: Params) -> float:
    return NOISE_FLOOR * g_grad_sq_norm(params)


@dataclass(frozen=True)
class ManifoldDistance:
    dist: float
    c: float
    a: float
    d: float
    converged: bool


def optimal_c(f: HalfSpaceFunction, a: float, d: float, params: Params, rel_tol: float, g_norm: Optional[float] = None) -> float:
    g_norm = g_grad_sq_norm(params) if g_norm is None else g_norm
    return halfspace_inner_product(f, a, d, params, rel_tol) / g_norm


def manifold_distance(f: HalfSpaceFunction, params: Params, rel_tol: float = 1e-9, x_tol: float = 1e-7) -> ManifoldDistance:
    """``inf_{c,a,d} int |grad (f - g_{c,a,d e1})|^2 y^s`` with ``c`` eliminated in closed form."""
    g_norm = g_grad_sq_norm(params)

    def obj(a, d):
        c = optimal_c(f, a, d, params, rel_tol, g_norm)
        return gradient_distance(f, c, a, d, params, rel_tol)

    (val, a, d), conv = _search_a_d(obj, x_tol)
    c = optimal_c(f, a, d, params, rel_tol, g_norm)
    return ManifoldDistance(val, c, a, d, conv)


# -- the full report -------------------------------------------------------------------------


@dataclass
class DeficitReport:
    lq_norms: dict
    grad_l2_sq: float
    delta_gns: float
    delta_hat: float
    thm11_dist: Optional[float]
    thm11_d_star: Optional[float]
    asymmetry: Optional[float]
    asymmetry_a_star: Optional[float]
    asymmetry_d_star: Optional[float]
    l1_dist_2t: Optional[float]
    l1_dist_t1: Optional[float]
    l1_a_star: Optional[float]
    entropy: Optional[float]
    moment_p: Optional[float]
    p_used: float
    delta_hat_relation: float = float("nan")
    label: str = ""
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["lq_norms"] = {f"{k:.17g}": v for k, v in self.lq_norms.items()}
        return out

    def flat(self) -> dict:
        """Scalar columns for CSV export."""
        out = {k: v for k, v in asdict(self).items() if k not in ("lq_norms", "flags")}
        for q, val in self.lq_norms.items():
            out[f"lq_norm_{q:.6g}"] = val
        out["flags"] = ";".join(self.flags)
        return out

    def check_invariants(self, params: Params, tol: float = 1e-8) -> list[str]:
        bad = []
        if self.delta_gns < -tol:
            bad.append("delta_gns negative")
        if self.delta_hat < -tol:
            bad.append("delta_hat negative")
        if self.asymmetry is not None and self.asymmetry < -1e-10:
            bad.append("asymmetry negative")
        if self.thm11_dist is not None and self.thm11_dist < -1e-10:
            bad.append("thm11_dist negative")
        if 0 <= self.delta_gns <= 1:
            b = sandwich_constant(params)
            if not (self.delta_gns / b - tol <= self.delta_hat <= b * self.delta_gns + tol):
                bad.append("sandwich violated")
        return bad


def deficit_report(
    u: RadialProfile,
    params: Params,
    p: Optional[float] = None,
    rel_tol: float = DEFAULT_REL_TOL,
    parts: tuple = ("thm11", "asymmetry", "l1", "density"),
    opt_rel_tol: float = 1e-10,
) -> DeficitReport:
    """Evaluate every functional on ``u`` (typically an already normalized profile)."""
    from .params import default_moment_p

    t = params.t
    p = default_moment_p(params) if p is None else p
    nm = norms(u, params, rel_tol)
    delta, delta_hat = deficits_from_norms(nm, params)
    flags = []
    rep = DeficitReport(
        lq_norms={t + 1: nm.lq_t1, 2 * t: nm.lq_2t},
        grad_l2_sq=nm.grad_sq,
        delta_gns=delta,
        delta_hat=delta_hat,
        thm11_dist=None,
        thm11_d_star=None,
        asymmetry=None,
        asymmetry_a_star=None,
        asymmetry_d_star=None,
        l1_dist_2t=None,
        l1_dist_t1=None,
        l1_a_star=None,
        entropy=None,
        moment_p=None,
        p_used=p,
        delta_hat_relation=delta_hat_from_delta(delta, nm.lq_2t, params),
        label=u.label,
        flags=flags,
    )
    if "thm11" in parts:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rep.thm11_dist, rep.thm11_d_star = thm11_distance(u, params, opt_rel_tol)
        if caught:
            flags.append("not_normalized")
    if "asymmetry" in parts:
        rep.asymmetry, rep.asymmetry_a_star, rep.asymmetry_d_star = asymmetry(u, params, opt_rel_tol)
    if "l1" in parts and u.sign == "nonnegative":
        rep.l1_dist_2t, rep.l1_dist_t1, rep.l1_a_star = l1_density_distances(u, params, opt_rel_tol)
    if "density" in parts:
        rep.entropy = entropy(u, params, rel_tol)
        if moment_is_finite(u, p, params):
            rep.moment_p = moment(u, p, params, rel_tol)
        else:
            flags.append("moment_divergent")
    return rep
