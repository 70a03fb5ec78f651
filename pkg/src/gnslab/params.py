"""Exponents and sharp constants of the Del Pino--Dolbeault GNS family.

Everything here is closed form: Gamma-function ratios and rational
expressions in ``(n, t)``.  The only quadrature in the module is the
optional Rayleigh-quotient route to the weighted Sobolev constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache


class ParamsRangeError(ValueError):
    """Raised for ``(n, t)`` outside ``1 < t < (2n+1)/(2n-3)``."""


class DomainError(ValueError):
    """Raised when a closed form is evaluated outside its domain."""


def gamma(x: float) -> float:
    return math.gamma(x)


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(1 + n / 2)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n (= n * omega_n)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def beta_integral(a: float, b: float) -> float:
    """``D(a, b) = int_0^inf (1 + r^2)^(-a) r^b dr``.

    Requires ``b > -1`` and ``2a - b > 1``.
    """
    return math.exp(log_beta_integral(a, b))


def log_beta_integral(a: float, b: float) -> float:
    """``ln D(a, b)``; stays finite where ``D`` itself under- or overflows."""
    if not (b > -1 and 2 * a - b > 1):
        raise DomainError(f"D(a, b) needs b > -1 and 2a - b > 1, got a={a}, b={b}")
    return math.lgamma((b + 1) / 2) + math.lgamma((2 * a - b - 1) / 2) - math.lgamma(a) - math.log(2)


def t_upper(n: int) -> float:
    if n == 2:
        return 5.0
    return (2 * n + 1) / (2 * n - 3)


@dataclass(frozen=True)
class Params:
    n: int
    t: float
    theta: float
    y_exp: float
    two_t: float
    s: float
    n_s: float
    two_star_s: float
    omega_n: float
    a_gns: float
    s_sob: float

    # Frequently used combinations.
    @property
    def k_hat(self) -> float:
        """Homogeneity degree ``4t / 2(t)`` of the deficit in (1.3) form."""
        return 4 * self.t / self.two_t

    @property
    def d_ns_s(self) -> float:
        return beta_integral(self.n_s, self.s)

    @property
    def ratio_const(self) -> float:
        """``(t^2 - 1) / (2n)``: the balance constant of the normalization."""
        return (self.t**2 - 1) / (2 * self.n)

    @property
    def v_tail(self) -> float:
        return 2 / (self.t - 1)

    def as_dict(self) -> dict:
        return asdict(self)


def check_range(n: int, t: float) -> None:
    if int(n) != n or n < 2:
        raise ParamsRangeError(f"dimension n must be an integer >= 2, got n={n}")
    hi = t_upper(int(n))
    if not (1 < t < hi):
        raise ParamsRangeError(
            f"t={t} outside the admissible range 1 < t < (2n+1)/(2n-3) = {hi:.12g} for n={n}"
        )


def sharp_gns_constant(n: int, t: float) -> float:
    theta = gns_theta(n, t)
    y = (t + 1) / (t - 1)
    first = (y * (t - 1) ** 2 / (2 * math.pi * n)) ** (theta / 2)
    second = ((2 * y - n) / (2 * y)) ** (1 / (2 * t))
    log_ratio = math.lgamma(y) - math.lgamma(y - n / 2)
    return first * second * math.exp(theta / n * log_ratio)


def gns_theta(n: int, t: float) -> float:
    return n * (t - 1) / (t * (2 * n - (1 + t) * (n - 2)))


def _sob_from_identity(n: int, t: float, theta: float, two_t: float, s: float, n_s: float, a_gns: float) -> float:
    # A^{4t/2(t)} = S (n_s-2)^2 D^{1-2/2(t)} (n-nt+4t)/(2(t+1)) ((t^2-1)/2n)^{2 theta t/2(t)},
    # solved in logarithms since D(n_s, s) underflows as t -> 1
    log_rhs = (
        2 * math.log(n_s - 2)
        + (1 - 2 / two_t) * log_beta_integral(n_s, s)
        + math.log((n - n * t + 4 * t) / (2 * (t + 1)))
        + (2 * theta * t / two_t) * math.log((t**2 - 1) / (2 * n))
    )
    return math.exp((4 * t / two_t) * math.log(a_gns) - log_rhs)


@lru_cache(maxsize=256)
def derive_params(n: int, t: float) -> Params:
    """All derived exponents and sharp constants for ``(n, t)``."""
    check_range(n, t)
    n = int(n)
    t = float(t)
    theta = gns_theta(n, t)
    y_exp = (t + 1) / (t - 1)
    two_t = 2 * (4 * t + n - n * t) / (n + 2 + 2 * t - n * t)
    # single fraction; the numerator vanishes at the upper end of the range
    s = (2 * n + 1 - (2 * n - 3) * t) / (t - 1)
    n_s = (n + 4 * t - n * t) / (t - 1)
    two_star_s = 2 * n_s / (n_s - 2)
    a_gns = sharp_gns_constant(n, t)
    s_sob = _sob_from_identity(n, t, theta, two_t, s, n_s, a_gns)
    return Params(
        n=n,
        t=t,
        theta=theta,
        y_exp=y_exp,
        two_t=two_t,
        s=s,
        n_s=n_s,
        two_star_s=two_star_s,
        omega_n=unit_ball_volume(n),
        a_gns=a_gns,
        s_sob=s_sob,
    )


# -- closed-form norms of the extremal v = (1 + r^2)^(-1/(t-1)) ---------------


def v_norm_power(params: Params, q: float) -> float:
    """``int v^q dx`` in closed form."""
    n, t = params.n, params.t
    return sphere_area(n) * beta_integral(q / (t - 1), n - 1)


def v_grad_sq(params: Params) -> float:
    """``int |grad v|^2 dx`` in closed form."""
    n, t = params.n, params.t
    return sphere_area(n) * (2 / (t - 1)) ** 2 * beta_integral(2 * t / (t - 1), n + 1)


def v_norm(params: Params, q: float) -> float:
    return v_norm_power(params, q) ** (1 / q)


# -- weighted Sobolev constant --------------------------------------------------


def sharp_constant_weighted_sobolev(params: Params, method: str = "identity", rel_tol: float = 1e-12) -> float:
    """Sharp constant of the weighted Sobolev inequality on the half space.

    ``identity`` solves the closed-form relation with the GNS constant;
    ``rayleigh`` evaluates the quotient at ``g = (1 + r^2 + y^2)^(-(n_s-2)/2)``
    by half-space quadrature.
    """
    if method == "identity":
        return _sob_from_identity(
            params.n, params.t, params.theta, params.two_t, params.s, params.n_s, params.a_gns
        )
    if method == "rayleigh":
        from .profiles import extremal_g
        from .quad import integrate_halfspace_weighted

        g = extremal_g(1.0, 1.0, params)
        p2 = params.two_star_s
        num = integrate_halfspace_weighted(lambda r, y: g.value(r, y) ** p2, params.s, params.n, rel_tol)
        den = integrate_halfspace_weighted(g.grad_sq, params.s, params.n, rel_tol)
        return num.value ** (2 / p2) / den.value
    raise ValueError(f"unknown method {method!r}; expected 'identity' or 'rayleigh'")


# -- explicit constant chain of the recentring lemma ---------------------------


@dataclass(frozen=True)
class Lemma22Constants:
    delta_1: float
    gamma: float
    gamma_1: float
    gamma_2: float
    delta_1_prime: float
    delta_1_dprime: float
    c_0: float
    delta_0: float

    def as_dict(self) -> dict:
        return asdict(self)


def halfspace_kernel_integral(params: Params) -> float:
    """``int_{R^{n+1}_+} (1 + |x|^2 + y^2)^(-(n_s-1)) y^s dx dy`` evaluated exactly."""
    s, n_s, n = params.s, params.n_s, params.n
    lg = math.lgamma((1 + s) / 2) + math.lgamma((n_s - 2) / 2) - math.lgamma(n_s - 1)
    return math.pi ** (n / 2) * math.exp(lg) / 2


def halfspace_kernel_integral_displayed(params: Params) -> float:
    """The same integral as displayed in the recentring proof, with ``pi^(n_s/2)``.

    Exceeds the exact value by the factor ``pi^((s+1)/2)``; the constant chain
    uses it verbatim, which only enlarges ``C_0``.
    """
    return halfspace_kernel_integral(params) * math.pi ** ((params.s + 1) / 2)


def lemma22_constants(params: Params) -> Lemma22Constants:
    """The explicit chain ``delta_1, gamma, ..., C_0, delta_0`` of the recentring lemma.

    Raises DomainError when a constant leaves double range (``n_s`` in the
    hundreds, i.e. ``t`` very close to 1).
    """
    try:
        out = _lemma22(params)
    except OverflowError:
        out = None
    if out is None or not all(math.isfinite(v) and v > 0 for v in out.as_dict().values()):
        raise DomainError(f"recentring constants leave double range for n={params.n}, t={params.t}")
    return out


def _lemma22(params: Params) -> Lemma22Constants:
    n, t, s, n_s = params.n, params.t, params.s, params.n_s
    k = params.k_hat
    v2t = v_norm(params, 2 * t)
    delta_1 = (
        (n_s - 2) ** 2
        * beta_integral(n_s, 2 + s)
        * params.ratio_const ** (2 * params.theta * t / params.two_t)
        * (v2t / params.a_gns) ** k
    )
    gamma_ = 2 * (s + 3) * 4 ** (s + 4) / ((n_s - 2) ** 2 * params.omega_n)
    delta_1_prime = 1 / (4 * 3**n_s * gamma_)
    gamma_1 = (2**5 * 3**n_s / n_s) ** 2 * gamma_
    delta_1_dprime = n_s**2 / (2**12 * 3 ** (2 * n_s) * gamma_)
    gamma_2 = (
        (n_s - 2) ** 2
        * n_s**2
        * 2 ** (n_s - 4)
        * 2 ** (4 * n_s / (n_s - 2))
        * halfspace_kernel_integral_displayed(params)
        * gamma_1
    )
    c_0 = 2 * (4 + gamma_2)
    return Lemma22Constants(
        delta_1=delta_1,
        gamma=gamma_,
        gamma_1=gamma_1,
        gamma_2=gamma_2,
        delta_1_prime=delta_1_prime,
        delta_1_dprime=delta_1_dprime,
        c_0=c_0,
        delta_0=min(delta_1, delta_1_prime, delta_1_dprime),
    )


# -- exponents of the corollary and the sign-splitting argument ------------------


@dataclass(frozen=True)
class CorollaryExponents:
    cor_power: float
    p_split: float
    alpha_split: float
    sharp_power: float

    def as_dict(self) -> dict:
        return asdict(self)


def corollary_exponents(params: Params) -> CorollaryExponents:
    t, th = params.t, params.theta
    denom = th * (t + 1) + 2 * (1 - th)
    return CorollaryExponents(
        cor_power=(t + 1) / (t * (2 * (1 - th) + (t + 1) * th)),
        p_split=2 * (t + 1) / denom,
        alpha_split=(t + 1) * th / denom,
        sharp_power=1 / t,
    )


def sandwich_constant(params: Params) -> float:
    """An explicit ``B_{n,t}`` with ``B^-1 delta <= delta_hat <= B delta`` for ``delta <= 1``.

    Valid when ``||u||_{2t} = ||v||_{2t}``: by convexity of ``(1 + x)^k`` on
    ``[0, 1]``, ``k x <= (1 + x)^k - 1 <= (2^k - 1) x``.
    """
    k = params.k_hat
    nk = v_norm(params, 2 * params.t) ** k
    return max(nk * (2**k - 1), 1 / (nk * k))


def moment_range(params: Params) -> tuple[float, float]:
    """Open interval of moment exponents ``p`` with ``N_p(v)`` finite and ``p > 1``."""
    return 1.0, 2 * (params.t + 1) / (params.t - 1) - params.n


def default_moment_p(params: Params) -> float:
    lo, hi = moment_range(params)
    return 0.5 * (lo + hi)
