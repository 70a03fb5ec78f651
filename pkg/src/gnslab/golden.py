"""Golden values: closed forms at (n, t) = (2, 3) and (3, 2), checked against the code."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .params import (
    beta_integral,
    corollary_exponents,
    derive_params,
    lemma22_constants,
    sharp_constant_weighted_sobolev,
    v_grad_sq,
    v_norm_power,
)

PI = math.pi


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    compute: Callable[[], float]
    expected: float
    rel_tol: float = 1e-8


@dataclass(frozen=True)
class GoldenResult:
    name: str
    value: float
    expected: float
    rel_error: float
    passed: bool


def _entropy_v23() -> float:
    from .functionals import entropy
    from .profiles import extremal_v

    p = derive_params(2, 3.0)
    return entropy(extremal_v(1.0, p), p)


def _quad_norm(q):
    def run():
        from .functionals import lq_power
        from .profiles import extremal_v

        p = derive_params(2, 3.0)
        return lq_power(extremal_v(1.0, p), q, p)

    return run


def _quad_grad():
    from .functionals import norms
    from .profiles import extremal_v

    p = derive_params(2, 3.0)
    return norms(extremal_v(1.0, p), p).grad_sq


def _g_integrals():
    from .functionals import halfspace_integrals
    from .profiles import extremal_g

    p = derive_params(2, 3.0)
    return halfspace_integrals(extremal_g(1.0, 1.0, p), p, 1e-12)


def checks() -> list:
    p23 = derive_params(2, 3.0)
    p32 = derive_params(3, 2.0)
    return [
        GoldenCheck("theta(2,3)", lambda: p23.theta, 1 / 3),
        GoldenCheck("two_t(2,3)", lambda: p23.two_t, 4.0),
        GoldenCheck("s(2,3)", lambda: p23.s, 1.0),
        GoldenCheck("n_s(2,3)", lambda: p23.n_s, 4.0),
        GoldenCheck("two_star_s(2,3)", lambda: p23.two_star_s, 4.0),
        GoldenCheck("theta(3,2)", lambda: p32.theta, 0.5),
        GoldenCheck("s(3,2)", lambda: p32.s, 1.0),
        GoldenCheck("n_s(3,2)", lambda: p32.n_s, 5.0),
        GoldenCheck("two_star_s(3,2)", lambda: p32.two_star_s, 10 / 3),
        GoldenCheck("two_t(3,2)", lambda: p32.two_t, 10 / 3),
        GoldenCheck("A(2,3)", lambda: p23.a_gns, PI ** (-1 / 6)),
        GoldenCheck("D(1,0)", lambda: beta_integral(1, 0), PI / 2),
        GoldenCheck("D(4,1)", lambda: beta_integral(4, 1), 1 / 6),
        GoldenCheck("D(4,3)", lambda: beta_integral(4, 3), 1 / 12),
        GoldenCheck("||v||_4^4 closed", lambda: v_norm_power(p23, 4), PI),
        GoldenCheck("||v||_6^6 closed", lambda: v_norm_power(p23, 6), PI / 2),
        GoldenCheck("||grad v||^2 closed", lambda: v_grad_sq(p23), PI / 2),
        GoldenCheck("||v||_4^4 quadrature", _quad_norm(4), PI),
        GoldenCheck("||v||_6^6 quadrature", _quad_norm(6), PI / 2),
        GoldenCheck("||grad v||^2 quadrature", _quad_grad, PI / 2),
        GoldenCheck("S(v)(2,3)", _entropy_v23, -2 * PI),
        GoldenCheck("int |grad g|^2 y (2,3)", lambda: _g_integrals()[0], 2 * PI / 3),
        GoldenCheck("int g^4 y (2,3)", lambda: _g_integrals()[1], PI / 12),
        GoldenCheck("delta_1(2,3)", lambda: lemma22_constants(p23).delta_1, PI / 3),
        GoldenCheck("gamma(2,3)", lambda: lemma22_constants(p23).gamma, 2048 / PI),
        GoldenCheck("S_sob identity(2,3)", lambda: sharp_constant_weighted_sobolev(p23), math.sqrt(3) / (4 * math.sqrt(PI))),
        GoldenCheck(
            "S_sob rayleigh(2,3)",
            lambda: sharp_constant_weighted_sobolev(p23, "rayleigh"),
            math.sqrt(3) / (4 * math.sqrt(PI)),
        ),
        GoldenCheck("cor_power(2,3)", lambda: corollary_exponents(p23).cor_power, 0.5),
        GoldenCheck("p_split(2,3)", lambda: corollary_exponents(p23).p_split, 3.0),
        GoldenCheck("alpha_split(2,3)", lambda: corollary_exponents(p23).alpha_split, 0.5),
    ]


def run_golden() -> list:
    out = []
    for c in checks():
        val = float(c.compute())
        err = abs(val - c.expected) / abs(c.expected)
        out.append(GoldenResult(c.name, val, c.expected, err, err <= c.rel_tol))
    return out
