import math

import numpy as np
import pytest

from blowuplab.operators import build_discretization
from blowuplab.specfun import (FrobeniusBranch, SingularPoint, SingularPointData,
                               barycentric_interp, branch_parameters,
                               eigen_equation_residual, frobenius_series, hyp2f1,
                               indicial_roots, lorentz_pullback, ratio_limit)


class TestHyp2f1:
    def test_a_zero_terminates(self):
        v, term = hyp2f1(0, 3.3, 1.1, 0.7)
        assert v == 1.0 and term

    def test_z_zero(self):
        v, _ = hyp2f1(0.3, -1.2, 2.7, 0.0)
        assert v == 1.0

    def test_log_closed_form(self):
        v, term = hyp2f1(1, 1, 2, 0.5, tol=1e-15)
        assert not term
        assert v.real == pytest.approx(2 * math.log(2), abs=1e-13)

    def test_negative_integer_a_is_polynomial(self):
        v, term = hyp2f1(-2, 1.5, 0.7, 3.0)   # polynomial: |z|>1 allowed
        assert term
        # 1 + (-2)(1.5)/0.7*3 + ((-2)(-1)(1.5)(2.5))/(0.7*1.7*2)*9
        expected = 1 - 2 * 1.5 / 0.7 * 3 + (2 * 1.5 * 2.5) / (0.7 * 1.7) / 2 * 9
        assert v.real == pytest.approx(expected, rel=1e-12)

    def test_rejects_divergent(self):
        with pytest.raises(ValueError):
            hyp2f1(0.5, 0.7, 1.1, 1.3)

    def test_rejects_bad_c(self):
        with pytest.raises(ValueError):
            hyp2f1(0.5, 0.7, -2.0, 0.3)


class TestIndicial:
    def test_example_at_zero(self):
        pt = SingularPointData(SingularPoint.ZP_ZERO, 0.5, 0.75)
        sp, sm, natural = indicial_roots(pt)
        assert sp == pytest.approx(1.0) and sm == pytest.approx(0.0)
        assert natural

    def test_double_root_at_one(self):
        lam = 1.0 - math.sqrt(1 - 0.75)
        pt = SingularPointData(SingularPoint.ZP_ONE, lam, 0.75)
        sp, sm, natural = indicial_roots(pt)
        assert sp == pytest.approx(0.0, abs=1e-14)
        assert sm == pytest.approx(0.0, abs=1e-14)
        assert natural

    def test_alpha_one(self):
        pt = SingularPointData(SingularPoint.ZP_ZERO, 0.3 + 0.2j, 1.0)
        sp, sm, _ = indicial_roots(pt)
        roots = sorted([sp, sm], key=lambda s: s.real)
        assert roots[1] == pytest.approx(1 - (0.3 + 0.2j)) or \
            roots[0] == pytest.approx(1 - (0.3 + 0.2j))

    def test_vieta(self):
        # s+ + s- = 1 - p0 with p0 = lam -/+ sqrt(1-alpha); s+ * s- = 0
        rng = np.random.default_rng(5)
        for _ in range(25):
            lam = complex(rng.uniform(-1, 3), rng.uniform(-2, 2))
            alpha = rng.uniform(0.05, 1.0)
            for loc, sign in ((SingularPoint.ZP_ZERO, -1), (SingularPoint.ZP_ONE, +1)):
                sp, sm, _ = indicial_roots(SingularPointData(loc, lam, alpha))
                p0 = lam + sign * math.sqrt(1 - alpha)
                assert sp + sm == pytest.approx(1 - p0, abs=1e-12)
                assert sp * sm == pytest.approx(0.0, abs=1e-12)


class TestFrobenius:
    def test_leading_coefficient_normalized(self):
        for branch in FrobeniusBranch:
            loc = SingularPoint.ZP_ZERO if branch in (FrobeniusBranch.H1, FrobeniusBranch.H2) \
                else SingularPoint.ZP_ONE
            pt = SingularPointData(loc, 0.4 + 0.1j, 0.6)
            series, _ = frobenius_series(pt, branch, 16, 0.1)
            assert series.coefficients[0] == 1.0

    def test_h2_matches_direct_summation(self):
        lam, alpha, z = 0.5 + 0.5j, 0.75, 0.25
        pt = SingularPointData(SingularPoint.ZP_ZERO, lam, alpha)
        _, val = frobenius_series(pt, FrobeniusBranch.H2, 400, z)
        a, b, c, _ = branch_parameters(FrobeniusBranch.H2, lam, alpha)
        ref, _ = hyp2f1(a, b, c, z, tol=1e-15)
        assert abs(val - ref) < 1e-10

    def test_obstruction_detected(self):
        # s+ = 1 at z'=1 means lam = -sqrt(1-alpha); then c = 0 for h4 and the
        # recurrence hits the 1/z'' obstruction immediately
        alpha = 0.75
        lam = -math.sqrt(1 - alpha)
        pt = SingularPointData(SingularPoint.ZP_ONE, lam, alpha)
        series, _ = frobenius_series(pt, FrobeniusBranch.H4, 50, 0.1)
        assert series.log_flag

    def test_wrong_point_rejected(self):
        pt = SingularPointData(SingularPoint.ZP_ZERO, 0.5, 0.6)
        with pytest.raises(ValueError):
            frobenius_series(pt, FrobeniusBranch.H3, 20, 0.1)

    def test_agrees_with_hyp2f1_random(self):
        rng = np.random.default_rng(17)
        branches = list(FrobeniusBranch)
        for i in range(100):
            alpha = rng.uniform(0.1, 1.0)
            lam = complex(rng.uniform(-0.8, 2.0), rng.uniform(-1.0, 1.0))
            branch = branches[i % 4]
            a, b, c, _ = branch_parameters(branch, lam, alpha)
            if abs(c - round(c.real)) < 0.05 and c.real < 0.5:
                continue   # stay away from the log obstruction set
            z = rng.uniform(0.05, 0.5)
            loc = SingularPoint.ZP_ZERO if branch in (FrobeniusBranch.H1, FrobeniusBranch.H2) \
                else SingularPoint.ZP_ONE
            pt = SingularPointData(loc, lam, alpha)
            series, val = frobenius_series(pt, branch, 600, z)
            ref, _ = hyp2f1(a, b, c, z, tol=1e-15)
            expo = series.exponent
            ref = ref * z**expo if expo != 0 else ref
            assert abs(val - ref) < 1e-10 * max(1.0, abs(ref))


class TestRatioLimit:
    def test_radius_one_example(self):
        lim, term = ratio_limit(FrobeniusBranch.H4, 2.5, 0.75, 200)
        assert not term
        assert lim == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("lam", [0.0, 1.0])
    def test_symmetry_modes_terminate(self, lam):
        _, term = ratio_limit(FrobeniusBranch.H4, lam, 0.5, 200)
        assert term

    def test_random_unstable_half_plane(self):
        # the computational core of mode stability: radius exactly 1 for
        # Re(lam) > -1 away from {0, 1}
        rng = np.random.default_rng(23)
        count = 0
        while count < 20:
            lam = complex(rng.uniform(-0.95, 3.0), rng.uniform(-2.0, 2.0))
            if abs(lam) < 0.1 or abs(lam - 1) < 0.1:
                continue
            alpha = [0.25, 0.5, 0.75][count % 3]
            lim, term = ratio_limit(FrobeniusBranch.H4, lam, alpha, 400)
            assert not term
            assert 0.95 <= lim <= 1.05
            count += 1


class TestLorentzPullback:
    def test_gamma_zero_is_identity(self):
        grid = build_discretization(48)
        phi = np.exp(np.sin(2 * grid.nodes))
        out = lorentz_pullback(phi, grid.nodes, 1.3, 0.0)
        assert np.max(np.abs(out - phi)) < 1e-12

    def test_inverse_boost_round_trip(self):
        grid = build_discretization(64)
        phi = (1.0 + 0.3 * grid.nodes) ** 1.7
        lam = 0.8 + 0.4j
        gam = 0.55
        fwd = lorentz_pullback(phi, grid.nodes, lam, gam)
        back = lorentz_pullback(fwd, grid.nodes, lam, -gam)
        assert np.max(np.abs(back - phi)) < 1e-9

    def test_unit_mode_maps_to_f1_component(self):
        # the boosted-frame eigenfunction at lam=1 is constant; the inverse
        # boost carries it to a multiple of alpha/(1 + sqrt(1-alpha)*y)
        alpha = 0.5
        grid = build_discretization(64)
        g = math.sqrt(1 - alpha)
        phi_prime = np.ones(grid.size, dtype=complex)
        mapped = lorentz_pullback(phi_prime, grid.nodes, 1.0, -g)
        target = alpha / (1.0 + g * grid.nodes)
        ratio = mapped / target
        assert np.max(np.abs(ratio - ratio[0])) < 1e-10
        res = eigen_equation_residual(mapped, grid.nodes, grid.D, 1.0, alpha)
        assert res < 1e-8

    def test_boost_transforms_eigen_equations(self):
        # forward boost: original-frame unit eigenfunction satisfies the
        # boosted-frame equation
        alpha = 0.75
        g = math.sqrt(1 - alpha)
        grid = build_discretization(64)
        f1 = alpha / (1.0 + g * grid.nodes)
        fwd = lorentz_pullback(f1.astype(complex), grid.nodes, 1.0, g)
        res = eigen_equation_residual(fwd, grid.nodes, grid.D, 1.0, alpha, boosted=True)
        assert res < 1e-8

    def test_rejects_bad_gamma(self):
        grid = build_discretization(16)
        with pytest.raises(ValueError):
            lorentz_pullback(np.ones(grid.size), grid.nodes, 1.0, 1.0)

    def test_barycentric_exact_at_nodes(self):
        grid = build_discretization(20)
        vals = np.sin(3 * grid.nodes)
        out = barycentric_interp(grid.nodes, vals, grid.nodes[::2])
        assert np.max(np.abs(out - vals[::2])) == 0.0
