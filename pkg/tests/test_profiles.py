import math

import numpy as np
import pytest

from blowuplab.profiles import (BetaBranch, EquationKind, ProfileParams,
                                beta_from_g0, blowup_solution_eval, field_residual,
                                pde_residual, profile_eval, riccati_g,
                                sample_interior_cone, singular_denominator,
                                singular_selfsim_root)

NON_NULL = EquationKind.NON_NULL
NULL_FORM = EquationKind.NULL_FORM


class TestProfileEval:
    def test_ode_blowup_profile_vanishes(self):
        U, Up, Vt, _ = profile_eval(NON_NULL, 1.0, BetaBranch.infinity(), 0.3)
        assert U == pytest.approx(0.0, abs=1e-15)
        assert Up == pytest.approx(0.0, abs=1e-15)
        assert Vt == pytest.approx(1.0, abs=1e-15)

    def test_nonnull_closed_form_value(self):
        U, _, Vt, _ = profile_eval(NON_NULL, 0.75, BetaBranch.infinity(), 0.5)
        assert U == pytest.approx(-0.1673577, abs=1e-7)
        assert Vt == pytest.approx(0.6, abs=1e-12)

    def test_nullform_alpha1(self):
        U, _, _, _ = profile_eval(NULL_FORM, 1.0, BetaBranch.finite(3.0), 0.5)
        assert U == pytest.approx(-math.log(0.75), abs=1e-12)

    def test_nullform_alpha2_beta1_simplifies(self):
        for y in np.linspace(-1, 1, 21):
            U, _, _, _ = profile_eval(NULL_FORM, 2.0, BetaBranch.finite(1.0), float(y))
            assert U == pytest.approx(-math.log(1.0 + y * y), abs=1e-12)

    @pytest.mark.parametrize("eq,alpha,beta", [
        (NON_NULL, 0.4, BetaBranch.infinity()),
        (NON_NULL, 0.85, BetaBranch.zero()),
        (NULL_FORM, 2.0, BetaBranch.finite(0.7)),
        (NULL_FORM, 1.0, BetaBranch.finite(2.2)),
    ])
    def test_derivative_matches_finite_difference(self, eq, alpha, beta):
        h = 1e-5
        for y in np.linspace(-0.9, 0.9, 7):
            _, Up, _, _ = profile_eval(eq, alpha, beta, float(y))
            Um = profile_eval(eq, alpha, beta, float(y - h))[0]
            Uc = profile_eval(eq, alpha, beta, float(y + h))[0]
            assert Up == pytest.approx((Uc - Um) / (2 * h), abs=1e-8)

    def test_nonnull_potential_identity(self):
        # V_time * (1 + sqrt(1-alpha)*y) == alpha exactly on the inf branch
        for alpha in (0.25, 0.6, 1.0):
            g = math.sqrt(1 - alpha)
            for y in np.linspace(-1, 1, 11):
                _, _, Vt, _ = profile_eval(NON_NULL, alpha, BetaBranch.infinity(), float(y))
                assert Vt * (1 + g * y) == pytest.approx(alpha, abs=1e-14)

    def test_nullform_exponential_identity(self):
        for alpha, beta in ((1.0, 0.5), (2.0, 1.7), (3.0, 4.0)):
            for y in np.linspace(-1, 1, 11):
                U, _, _, _ = profile_eval(NULL_FORM, alpha, BetaBranch.finite(beta), float(y))
                lhs = math.exp(-U) * (1 + beta)
                rhs = (1 + y) ** alpha + beta * (1 - y) ** alpha
                assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_rejects_inadmissible(self):
        with pytest.raises(ValueError):
            profile_eval(NON_NULL, 1.5, BetaBranch.infinity(), 0.0)
        with pytest.raises(ValueError):
            profile_eval(NULL_FORM, 1.5, BetaBranch.finite(1.0), 0.0)
        with pytest.raises(ValueError):
            profile_eval(NULL_FORM, 1.0, BetaBranch.infinity(), 0.0)
        # finite-beta non-null profiles exist only on the open interval
        with pytest.raises(ValueError):
            profile_eval(NON_NULL, 0.5, BetaBranch.finite(1.0), 1.0)
        with pytest.raises(ValueError):
            profile_eval(NON_NULL, 1.0, BetaBranch.finite(1.0), 0.5)

    def test_nonnull_finite_beta_solves_profile_ode(self):
        # quadrature-defined member: check the profile ODE by finite differences
        alpha, beta, h = 0.6, 1.5, 1e-5
        for y in (-0.5, 0.2, 0.8):
            Um = profile_eval(NON_NULL, alpha, BetaBranch.finite(beta), y - h)[0]
            U0 = profile_eval(NON_NULL, alpha, BetaBranch.finite(beta), y)[0]
            Up = profile_eval(NON_NULL, alpha, BetaBranch.finite(beta), y + h)[0]
            d1 = (Up - Um) / (2 * h)
            d2 = (Up - 2 * U0 + Um) / h**2
            res = alpha + 2 * y * d1 + (y * y - 1) * d2 - (alpha + y * d1) ** 2
            assert abs(res) < 1e-5


class TestBlowupSolution:
    def test_ode_blowup(self):
        p = ProfileParams(NON_NULL, 1.0, BetaBranch.infinity(), kappa=0.7, T=2.0)
        for (t, x) in ((0.0, 0.3), (1.5, -0.2)):
            u, ut, ux = blowup_solution_eval(p, t, x)
            assert u == pytest.approx(-math.log(2.0 - t) + 0.7, abs=1e-14)
            assert ux == pytest.approx(0.0, abs=1e-14)
            assert ut == pytest.approx(1.0 / (2.0 - t), abs=1e-14)

    def test_reflection_identity(self):
        # u_{a,0,k,T,x0}(t,x) == u_{a,inf,k,T,-x0}(t,-x)
        pz = ProfileParams(NON_NULL, 0.6, BetaBranch.zero(), kappa=0.1, T=1.0, x0=0.2)
        pi = ProfileParams(NON_NULL, 0.6, BetaBranch.infinity(), kappa=0.1, T=1.0, x0=-0.2)
        rng = np.random.default_rng(3)
        for _ in range(20):
            t = rng.uniform(0, 0.9)
            x = 0.2 + rng.uniform(-1, 1) * (1.0 - t)
            uz = blowup_solution_eval(pz, t, x)[0]
            ui = blowup_solution_eval(pi, t, -x)[0]
            assert uz == pytest.approx(ui, abs=1e-13)

    def test_nullform_center_value(self):
        T = 1.6
        p = ProfileParams(NULL_FORM, 1.0, BetaBranch.finite(1.0), kappa=0.25, T=T)
        u, _, _ = blowup_solution_eval(p, 0.5 * T, 0.0)
        assert u == pytest.approx(-math.log(T / 2) + 0.25, abs=1e-14)

    def test_rejects_outside_cone(self):
        p = ProfileParams(NON_NULL, 0.5, BetaBranch.infinity(), T=1.0)
        with pytest.raises(ValueError):
            blowup_solution_eval(p, 0.5, 0.7)


class TestPdeResidual:
    @pytest.mark.parametrize("params", [
        ProfileParams(NON_NULL, 0.6, BetaBranch.infinity(), kappa=0.2, T=1.0),
        ProfileParams(NULL_FORM, 2.0, BetaBranch.finite(0.7), kappa=-0.1, T=1.0),
    ])
    def test_exact_members_have_discretization_residual(self, params):
        rng = np.random.default_rng(11)
        samples = sample_interior_cone(params, 40, margin=1e-4, rng=rng)
        assert pde_residual(params, samples, h=1e-4) < 1e-6

    def test_perturbed_residual_scales_linearly(self):
        p = ProfileParams(NON_NULL, 1.0, BetaBranch.infinity(), T=1.0)
        samples = [(0.3, 0.1), (0.5, -0.2), (0.2, 0.4)]

        def perturbed(eps):
            u = lambda t, x: blowup_solution_eval(p, t, x)[0] + eps * math.cos(x)
            return field_residual(NON_NULL, u, samples, h=1e-4)

        r1, r2 = perturbed(1e-2), perturbed(5e-3)
        assert r1 / r2 == pytest.approx(2.0, rel=0.05)

    def test_rejects_boundary_samples(self):
        p = ProfileParams(NON_NULL, 0.5, BetaBranch.infinity(), T=1.0)
        with pytest.raises(ValueError):
            pde_residual(p, [(0.5, 0.4999)], h=1e-4)


class TestRiccati:
    def test_value_at_beta_zero(self):
        assert riccati_g(0.5, 0.0, 0.0) == pytest.approx(2 * 0.5 * math.sqrt(0.5), abs=1e-12)

    def test_decays_in_beta(self):
        vals = [riccati_g(0.4, b, 0.3) for b in (1.0, 10.0, 100.0, 1000.0)]
        assert all(vals[i + 1] < vals[i] for i in range(3))
        assert vals[-1] < 1e-2 * vals[0]

    def test_round_trip(self):
        g0 = riccati_g(0.3, 2.5, 0.0)
        assert beta_from_g0(0.3, g0) == pytest.approx(2.5, abs=1e-12)

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = rng.uniform(0.05, 0.95)
            b = rng.uniform(0.0, 8.0)
            assert beta_from_g0(a, riccati_g(a, b, 0.0)) == pytest.approx(b, abs=1e-10)

    def test_alpha_one_rejected(self):
        with pytest.raises(ValueError):
            riccati_g(1.0, 1.0, 0.0)


class TestSingularFamily:
    def test_odd_root_at_zero(self):
        assert singular_selfsim_root(NON_NULL, 0.0) == pytest.approx(0.0, abs=1e-11)
        assert singular_selfsim_root(NULL_FORM, 0.0) == pytest.approx(0.0, abs=1e-11)

    def test_nullform_root_matches_tanh(self):
        # bracketing check of the spec example: denominator changes sign on (-1,0)
        assert singular_denominator(NULL_FORM, 1.0, -1 + 1e-12) < 0
        assert singular_denominator(NULL_FORM, 1.0, 0.0) > 0
        root = singular_selfsim_root(NULL_FORM, 1.0)
        assert -1 < root < 0
        assert root == pytest.approx(-math.tanh(1.0), abs=1e-11)

    def test_nonnull_endpoint_limits(self):
        assert singular_denominator(NON_NULL, 3.0, 1 - 1e-9) == pytest.approx(2.0, abs=1e-6)
        assert singular_denominator(NON_NULL, 3.0, -1 + 1e-9) == pytest.approx(-2.0, abs=1e-6)

    @pytest.mark.parametrize("d", [-2.0, -0.5, 0.7, 4.0])
    def test_root_is_zero_of_denominator(self, d):
        for eq in (NON_NULL, NULL_FORM):
            r = singular_selfsim_root(eq, d)
            assert -1 < r < 1
            assert abs(singular_denominator(eq, d, r)) < 1e-9
