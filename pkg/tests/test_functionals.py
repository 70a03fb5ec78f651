import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import PAIRS, PI, rel, zero_profile
from gnslab import functionals as fn
from gnslab.params import corollary_exponents, derive_params, sandwich_constant, v_grad_sq, v_norm, v_norm_power
from gnslab.profiles import PerturbationFamily, RadialProfile, extremal_g, extremal_v, lift, normalize, perturb

BUMP = PerturbationFamily("multiplicative_bump")


def normalized(kind, eps, params):
    return normalize(perturb(PerturbationFamily(kind), eps, params), params).u_norm


class TestNormsAndDeficits:
    @pytest.mark.parametrize("n,t", PAIRS)
    def test_norms_of_v(self, n, t):
        p = derive_params(n, t)
        nm = fn.norms(extremal_v(1.0, p), p)
        assert rel(nm.lq_2t, v_norm(p, 2 * t)) <= 1e-11
        assert rel(nm.lq_t1, v_norm(p, t + 1)) <= 1e-11
        assert rel(nm.grad_sq, v_grad_sq(p)) <= 1e-11

    @pytest.mark.parametrize("n,t", PAIRS)
    def test_v_has_zero_deficit(self, n, t):
        p = derive_params(n, t)
        delta, delta_hat = fn.gns_deficits(extremal_v(1.0, p), p)
        assert abs(delta) <= 1e-11 and abs(delta_hat) <= 1e-11

    def test_zero_function(self, p23):
        assert fn.gns_deficits(zero_profile(), p23) == (0.0, 0.0)

    @pytest.mark.parametrize("kind", ["multiplicative_bump", "tail_tilt", "mass_shift"])
    def test_positive_and_sandwiched(self, p23, kind):
        u = normalized(kind, 0.2, p23)
        delta, delta_hat = fn.gns_deficits(u, p23)
        b = sandwich_constant(p23)
        assert delta > 0 and delta_hat > 0
        assert delta / b <= delta_hat <= b * delta
        assert rel(fn.delta_hat_from_delta(delta, fn.norms(u, p23).lq_2t, p23), delta_hat) <= 1e-9

    @given(c=st.floats(0.1, 10.0), lam=st.floats(0.2, 5.0), eps=st.floats(-0.45, 0.45))
    @settings(max_examples=25, deadline=None)
    def test_delta_invariant_under_scaling(self, c, lam, eps):
        p = derive_params(2, 3.0)
        u = perturb(BUMP, eps, p)
        d0, _ = fn.gns_deficits(u, p)
        d1, _ = fn.gns_deficits(u.scaled(c).dilated(lam, p.n, p.t), p)
        assert abs(d1 - d0) <= 1e-10 * max(1.0, d0)
        assert d0 >= -1e-13

    def test_lq_power_against_scipy(self, p32):
        u = perturb(PerturbationFamily("tail_tilt"), 0.3, p32)
        oracle, _ = integrate.quad(lambda r: 4 * PI * r * r * abs(u.value(np.array([r]))[0]) ** 3.3, 0, np.inf, epsrel=1e-12, limit=400)
        assert rel(fn.lq_power(u, 3.3, p32), oracle) <= 1e-9


class TestHalfSpace:
    @pytest.mark.parametrize("n,t", PAIRS)
    def test_extremal_g_has_zero_weighted_deficit(self, n, t):
        p = derive_params(n, t)
        assert abs(fn.weighted_sobolev_deficit(extremal_g(1.0, 1.0, p), p)) <= 1e-8

    @pytest.mark.parametrize("n,t", [(2, 3.0), (3, 2.0), (2, 1.5)])
    def test_lift_integrals_closed_form(self, n, t):
        p = derive_params(n, t)
        u = perturb(PerturbationFamily("tail_tilt"), 0.3, p)
        grad_q, mass_q = fn.halfspace_integrals(lift(u, p), p)
        grad_c, mass_c = fn.lift_integrals_closed_form(fn.norms(u, p), p)
        assert rel(grad_q, grad_c) <= 1e-8
        assert rel(mass_q, mass_c) <= 1e-8

    def test_g_norm_closed_form(self, p23):
        # int |grad g|^2 y^s = closed form through D(n_s, s) for the lift of v
        grad, _ = fn.lift_integrals_closed_form(fn.norms(extremal_v(1.0, p23), p23), p23)
        assert rel(fn.g_grad_sq_norm(p23), grad) <= 1e-10

    def test_manifold_distance_recovers_extremal(self, p23):
        md = fn.manifold_distance(extremal_g(1.3, 0.8, p23), p23)
        assert md.dist <= 1e-12
        assert md.c == pytest.approx(1.3, rel=1e-8)
        assert md.a == pytest.approx(0.8, rel=1e-6)
        assert md.d == 0.0

    def test_optimal_c_matches_direct_minimum(self, p23):
        f = lift(normalized("multiplicative_bump", 0.05, p23), p23)
        c = fn.optimal_c(f, 0.97, 0.0, p23, 1e-10)
        vals = [fn.gradient_distance(f, c + h, 0.97, 0.0, p23, 1e-10) for h in (-1e-3, 0.0, 1e-3)]
        assert vals[1] < vals[0] and vals[1] < vals[2]
        # quadratic in c with leading coefficient the g-norm
        curv = (vals[0] - 2 * vals[1] + vals[2]) / 1e-6
        assert rel(curv, 2 * fn.g_grad_sq_norm(p23)) <= 1e-3

    def test_gradient_distance_translation(self, p23):
        # distance between g and its own translate, against an independent scipy integral
        g = extremal_g(1.0, 1.0, p23)
        d = 0.4
        val = fn.gradient_distance(g, 1.0, 1.0, d, p23, 1e-9)
        k = p23.n_s - 2

        def integrand(y, phi, r):
            rho2 = r * r + d * d - 2 * r * d * math.cos(phi)
            q1 = (1 + r * r + y * y) ** (-p23.n_s / 2)
            q2 = (1 + rho2 + y * y) ** (-p23.n_s / 2)
            gx = k * (r * q1 - (r - d * math.cos(phi)) * q2)
            gy = k * d * math.sin(phi) * q2
            gz = k * y * (q1 - q2)
            return 2 * r * y * (gx * gx + gy * gy + gz * gz)

        oracle, _ = integrate.tplquad(integrand, 0, 40, 0, PI, 0, 40, epsabs=1e-10, epsrel=1e-7)
        assert rel(val, oracle) <= 1e-5


class TestThm11:
    def test_v_at_zero_offset(self, p23):
        assert abs(fn.thm11_objective(extremal_v(1.0, p23), 0.0, p23)) <= 1e-20

    def test_translate_against_scipy(self, p23):
        v = extremal_v(1.0, p23)
        d = 0.5
        val = fn.thm11_objective(v, d, p23, 1e-11)
        t = p23.t

        def integrand(phi, r):
            x1, x2 = r * math.cos(phi), r * math.sin(phi)
            q = 1 + r * r
            q2 = 1 + (x1 - d) ** 2 + x2 * x2
            e = -1 / (t - 1)
            g1 = 2 * e * q ** (e - 1)
            g2 = 2 * e * q2 ** (e - 1)
            grad = (g1 * x1 - g2 * (x1 - d)) ** 2 + (g1 * x2 - g2 * x2) ** 2
            h = (q ** (e * (t + 1) / 2) - q2 ** (e * (t + 1) / 2)) ** 2
            return 2 * r * (grad + h)

        oracle, _ = integrate.dblquad(integrand, 0, np.inf, 0, PI, epsabs=0, epsrel=1e-11)
        assert rel(val, oracle) <= 1e-8

    def test_distance_for_v_is_zero(self, p23):
        dist, d_star = fn.thm11_distance(extremal_v(1.0, p23), p23)
        assert dist <= 1e-20 and d_star == 0.0

    def test_warns_when_not_normalized(self, p23):
        with pytest.warns(UserWarning, match="normalization"):
            fn.thm11_distance(extremal_v(1.0, p23).scaled(2.0), p23, 1e-8)

    def test_report_flags_unnormalized(self, p23):
        rep = fn.deficit_report(extremal_v(1.0, p23).scaled(2.0), p23, parts=("thm11",), opt_rel_tol=1e-8)
        assert "not_normalized" in rep.flags


class TestAsymmetryAndL1:
    @pytest.mark.parametrize("a", [0.7, 1.0, 1.6])
    def test_dilates_are_on_the_manifold(self, p23, a):
        u = extremal_v(a, p23).scaled(a ** (p23.n / (2 * p23.t)))
        lam, a_star, d_star = fn.asymmetry(u, p23)
        assert lam <= 1e-12
        assert a_star == pytest.approx(a, rel=1e-5)
        assert d_star == 0.0

    def test_zero_function(self, p23):
        assert fn.asymmetry(zero_profile(), p23) == (0.0, 1.0, 0.0)

    def test_asymmetry_objective_translate(self, p23):
        v = extremal_v(1.0, p23)
        d = 0.8
        val = fn.asymmetry_objective(v, 1.0, d, p23, 1.0, 1e-11)
        f = lambda r: (1 + r * r) ** -0.5
        oracle, _ = integrate.dblquad(
            lambda phi, r: 2 * r * abs(f(r) - f(math.sqrt(r * r + d * d - 2 * r * d * math.cos(phi)))) ** 6,
            0, np.inf, 0, PI, epsabs=0, epsrel=1e-11,
        )
        assert rel(val, oracle) <= 1e-8

    def test_asymmetry_bounded(self, p23):
        lam, _, _ = fn.asymmetry(normalized("multiplicative_bump", 0.4, p23), p23, 1e-8)
        assert 0 < lam <= 2 ** (2 * p23.t) * v_norm_power(p23, 2 * p23.t)

    def test_l1_of_v(self, p23):
        l2t, lt1, a = fn.l1_density_distances(extremal_v(1.0, p23), p23)
        assert l2t <= 1e-9 and lt1 <= 1e-9
        assert a == pytest.approx(1.0, rel=1e-4)

    def test_l1_t1_against_scipy(self, p23):
        u = normalized("multiplicative_bump", 0.1, p23)
        a = 1.05
        t = p23.t
        val = fn.l1_t1_objective(u, a, p23, 1e-10)
        va = extremal_v(a, p23)
        oracle, _ = integrate.quad(
            lambda r: 2 * PI * r * abs(u.value(np.array([r]))[0] ** (t + 1) - a**2 * va.value(np.array([r]))[0] ** (t + 1)),
            0, np.inf, epsabs=0, epsrel=1e-10, limit=500, points=None,
        )
        assert rel(val, oracle) <= 1e-7

    def test_l1_nonnegative_and_monotone(self, p23):
        small = fn.l1_t1_distance(normalized("multiplicative_bump", 0.01, p23), p23)[0]
        large = fn.l1_t1_distance(normalized("multiplicative_bump", 0.1, p23), p23)[0]
        assert 0 < small < large


class TestDensityStatistics:
    def test_entropy_of_v(self, p23):
        assert rel(fn.entropy(extremal_v(1.0, p23), p23), -2 * PI) <= 1e-10

    def test_moment_against_scipy(self, p23):
        oracle, _ = integrate.quad(lambda r: 2 * PI * r**2.5 * (1 + r * r) ** -2, 0, np.inf, epsrel=1e-12)
        assert rel(fn.moment(extremal_v(1.0, p23), 1.5, p23), oracle) <= 1e-10

    def test_divergent_moment(self, p23):
        v = extremal_v(1.0, p23)
        assert not fn.moment_is_finite(v, 2.0, p23)
        with pytest.raises(fn.DivergentMomentError):
            fn.moment(v, 2.0, p23)

    def test_density_statistics(self, p32):
        s, m = fn.density_statistics(extremal_v(1.0, p32), 1.0, p32)
        assert math.isfinite(s) and m > 0

    @pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
    def test_jensen_localization(self, p23, a):
        lhs, rhs = fn.entropy_localization(normalized("tail_tilt", 0.2, p23), a, p23)
        assert lhs >= rhs - 1e-12

    def test_ln_minus_and_lower_bound_for_v(self, p23):
        v = extremal_v(1.0, p23)
        lhs, rhs = fn.ln_minus_estimate(v, 1.5, p23)
        assert 0 <= lhs <= rhs
        lhs, rhs = fn.lower_bound_moment(v, 1.5, p23)
        assert lhs >= rhs > 0


class TestSignSplit:
    def test_phi_values(self):
        assert fn.split_exponent_function(0.0, 3.0, 3.0) == pytest.approx(0.0)
        assert fn.split_exponent_function(1.0, 3.0, 3.0) == pytest.approx(0.0)
        assert fn.split_exponent_function(0.5, 3.0, 3.0) == pytest.approx((2 * 0.5**0.5) ** (1 / 3) - 1)

    def test_mass_shift(self, p23):
        u = normalized("mass_shift", 0.3, p23)
        res = fn.sign_split_details(u, p23)
        assert 0 < res.ratio < 0.5
        assert res.holds
        assert fn.sign_split_ratio(u, p23) == res.ratio

    def test_nonnegative_has_zero_ratio(self, p23):
        assert fn.sign_split_ratio(extremal_v(1.0, p23), p23) == 0.0

    def test_violation_detected(self, p23):
        # deficit computed on |u| but split read from a forged sign pattern
        v = extremal_v(1.0, p23)
        forged = RadialProfile(lambda r: np.where(r < 1.0, 1.0, -1.0) * v.value(r), v.deriv, v.tail_exponent, "signed")
        with pytest.raises(fn.SignSplitViolation):
            fn.sign_split_ratio(forged, p23)

    def test_zero_function(self, p23):
        with pytest.raises(ValueError):
            fn.sign_split_details(zero_profile(), p23)

    @pytest.mark.parametrize("n,t", [(2, 3.0), (3, 2.0)])
    def test_kappa(self, n, t):
        kc = fn.kappa_claim(derive_params(n, t))
        assert kc.holds
        assert 0 < kc.kappa < 1


class TestReport:
    def test_report_for_v(self, p23):
        rep = fn.deficit_report(extremal_v(1.0, p23), p23, opt_rel_tol=1e-8)
        assert abs(rep.delta_hat) <= 1e-11
        assert rep.thm11_dist <= 1e-15 and rep.asymmetry <= 1e-15
        assert rep.l1_dist_2t <= 1e-8 and rep.l1_dist_t1 <= 1e-8
        assert rep.moment_p is not None and rep.p_used == 1.5
        assert rep.check_invariants(p23) == []

    def test_signed_report_skips_l1(self, p23):
        rep = fn.deficit_report(normalized("mass_shift", 0.2, p23), p23, parts=("l1", "density"))
        assert rep.l1_dist_2t is None and rep.entropy is not None

    def test_divergent_moment_flag(self, p23):
        rep = fn.deficit_report(extremal_v(1.0, p23), p23, p=2.0, parts=("density",))
        assert rep.moment_p is None and "moment_divergent" in rep.flags

    def test_serialization(self, p23):
        rep = fn.deficit_report(normalized("tail_tilt", 0.1, p23), p23, parts=())
        js = rep.to_json()
        assert set(js["lq_norms"]) == {"4", "6"}
        flat = rep.flat()
        assert "lq_norm_4" in flat and "lq_norms" not in flat
        assert isinstance(flat["flags"], str)

    def test_invariant_violations(self, p23):
        rep = fn.deficit_report(normalized("tail_tilt", 0.1, p23), p23, parts=())
        rep.delta_hat = -1.0
        rep.asymmetry = -1.0
        bad = rep.check_invariants(p23)
        assert "delta_hat negative" in bad and "asymmetry negative" in bad
        rep.delta_hat = 1e3 * rep.delta_gns + 1
        rep.asymmetry = 0.0
        assert rep.check_invariants(p23) == ["sandwich violated"]
