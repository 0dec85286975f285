import math

import numpy as np
import pytest

from blowuplab.operators import (GramFlavor, OperatorKind, assemble_linearized,
                                 build_discretization, commutator_shifted,
                                 potential_upsilon, rayleigh_dissipativity,
                                 sobolev_gram)


def smooth_pair(rng, y, n_modes=4):
    q1 = np.zeros_like(y)
    q2 = np.zeros_like(y)
    for j in range(1, n_modes + 1):
        q1 += rng.standard_normal() * np.sin(j * y) + rng.standard_normal() * np.cos(j * y)
        q2 += rng.standard_normal() * np.sin(j * y) + rng.standard_normal() * np.cos(j * y)
    return np.concatenate([q1, q2])


class TestDiscretization:
    def test_constants_annihilated(self):
        g = build_discretization(8)
        assert np.max(np.abs(g.D @ np.ones(g.size))) < 1e-12

    def test_polynomial_exactness(self):
        g = build_discretization(16)
        err = np.max(np.abs(g.D @ g.nodes**5 - 5 * g.nodes**4))
        assert err < 1e-10

    def test_monomials_up_to_half_N(self):
        g = build_discretization(32)
        for m in range(1, 17):
            err = np.max(np.abs(g.D @ g.nodes**m - m * g.nodes ** (m - 1)))
            assert err < 1e-10

    def test_spectral_accuracy_on_sine(self):
        g = build_discretization(32)
        err = np.max(np.abs(g.D @ np.sin(g.nodes) - np.cos(g.nodes)))
        assert err < 1e-10

    def test_endpoints_exact(self):
        g = build_discretization(24)
        assert g.nodes[0] == -1.0 and g.nodes[-1] == 1.0

    def test_weights_integrate_polynomials(self):
        g = build_discretization(20)
        assert g.weights @ np.ones(g.size) == pytest.approx(2.0, abs=1e-13)
        assert g.weights @ g.nodes**2 == pytest.approx(2.0 / 3.0, abs=1e-13)

    def test_filter_preserves_smooth(self):
        g = build_discretization(48)
        f = np.exp(np.sin(2 * g.nodes))
        assert np.max(np.abs(g.filter_matrix() @ f - f)) < 1e-10

    def test_rejects_small_N(self):
        with pytest.raises(ValueError):
            build_discretization(4)


class TestAssembly:
    def test_f1_is_unit_eigenvector(self):
        grid = build_discretization(48)
        alpha = 0.5
        g = math.sqrt(1 - alpha)
        op = assemble_linearized(OperatorKind.L_ALPHA, grid, alpha)
        f1 = np.concatenate([alpha / (1 + g * grid.nodes),
                             alpha / (1 + g * grid.nodes) ** 2])
        assert np.max(np.abs(op.entries @ f1 - f1)) < 1e-9

    def test_f0_in_kernel(self):
        # round-off floor of the spectral second derivative at N=48 sits
        # near 1e-10; well under the 1e-8 identity budget
        grid = build_discretization(48)
        op = assemble_linearized(OperatorKind.L_ALPHA, grid, 0.5)
        f0 = np.concatenate([np.ones(grid.size), np.zeros(grid.size)])
        assert np.max(np.abs(op.entries @ f0)) < 1e-9

    def test_l2_beta_one_equals_l_alpha_one(self):
        grid = build_discretization(32)
        A = assemble_linearized(OperatorKind.L_ALPHA, grid, 1.0).entries
        B = assemble_linearized(OperatorKind.L2_ALPHA_BETA, grid, 1.0, 1.0).entries
        assert np.max(np.abs(A - B)) < 1e-12

    def test_potential_split(self):
        # L_alpha - FreeWave is the boundary restoration plus the
        # multiplication potential, entrywise
        grid = build_discretization(24)
        alpha = 0.7
        M = grid.size
        A = assemble_linearized(OperatorKind.L_ALPHA, grid, alpha).entries
        W = assemble_linearized(OperatorKind.FREE_WAVE, grid, alpha).entries
        V = A - W
        expected = np.zeros_like(V)
        expected[:M, 0] = 1.0
        expected[M:, M:] = np.diag(potential_upsilon(alpha, grid.nodes))
        assert np.max(np.abs(V - expected)) < 1e-11

    def test_inadmissible_rejected(self):
        grid = build_discretization(16)
        with pytest.raises(ValueError):
            assemble_linearized(OperatorKind.L_ALPHA, grid, 1.5)
        with pytest.raises(ValueError):
            assemble_linearized(OperatorKind.L2_ALPHA_BETA, grid, 1.0)

    def test_csv_export_roundtrip(self, tmp_path):
        grid = build_discretization(12)
        op = assemble_linearized(OperatorKind.L_ALPHA, grid, 0.9)
        path = tmp_path / "op.csv"
        op.to_csv(str(path))
        back = np.loadtxt(path, delimiter=",")
        assert np.max(np.abs(back - op.entries)) == 0.0

    @pytest.mark.parametrize("k,N,fp_floor", [(1, 16, 1e-9), (2, 20, 5e-9)])
    def test_commutator_identity(self, k, N, fp_floor):
        # D^k L - L_k D^k annihilates the first component (to round-off of
        # the triple matrix products, hence the low k and N here) and its
        # second component involves only lower derivatives of q2
        grid = build_discretization(N)
        alpha = 0.6
        A = assemble_linearized(OperatorKind.L_ALPHA, grid, alpha).entries
        Lk = commutator_shifted(OperatorKind.L_ALPHA, grid, alpha, k)
        M = grid.size
        Dk = grid.dmatrix(k)
        DK = np.zeros((2 * M, 2 * M))
        DK[:M, :M] = Dk
        DK[M:, M:] = Dk
        R = DK @ A - Lk @ DK
        rng = np.random.default_rng(1)
        for _ in range(10):
            q1 = np.polyval(rng.standard_normal(5), grid.nodes)
            q2 = np.polyval(rng.standard_normal(4), grid.nodes)
            q = np.concatenate([q1, q2])
            r = R @ q
            assert np.max(np.abs(r[:M])) < fp_floor * max(1.0, np.max(np.abs(q)))
            bound = sum(np.abs(grid.dmatrix(j) @ q2) for j in range(k))
            assert np.all(np.abs(r[M:]) <= 50.0 * (bound + 1e-9))
            # the residual genuinely acts on q2: states with q2 = 0 are
            # annihilated entirely
            r0 = R @ np.concatenate([q1, np.zeros(M)])
            assert np.max(np.abs(r0)) < fp_floor * max(1.0, np.max(np.abs(q1)))


class TestGram:
    def test_boundary_only_state(self):
        grid = build_discretization(32)
        gram = sobolev_gram(grid, 0, GramFlavor.TRIPLE_K)
        f = np.concatenate([np.ones(grid.size), np.zeros(grid.size)])
        assert gram.norm(f) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_linear_state(self):
        grid = build_discretization(32)
        gram = sobolev_gram(grid, 0, GramFlavor.TRIPLE_K)
        f = np.concatenate([grid.nodes, np.zeros(grid.size)])
        # |f1(-1)|^2 + ||1||^2_{L2} = 1 + 2
        assert gram.norm(f) ** 2 == pytest.approx(3.0, abs=1e-12)

    def test_pair_gram_positive_definite(self):
        grid = build_discretization(24)
        gram = sobolev_gram(grid, 1, GramFlavor.PAIR_HK)
        rng = np.random.default_rng(2)
        for _ in range(10):
            q = rng.standard_normal(2 * grid.size)
            assert gram.norm(q) > 0

    def test_norm_equivalence_constants(self):
        grid = build_discretization(48)
        rng = np.random.default_rng(3)
        for k in (0, 2, 5):
            triple = sobolev_gram(grid, k, GramFlavor.TRIPLE_K)
            pair = sobolev_gram(grid, k, GramFlavor.PAIR_HK)
            for _ in range(50):
                q = smooth_pair(rng, grid.nodes)
                ratio = triple.norm(q) / pair.norm(q)
                assert 0.1 <= ratio <= 10.0

    def test_entries_match_factor(self):
        grid = build_discretization(16)
        gram = sobolev_gram(grid, 1, GramFlavor.TRIPLE_K)
        G = gram.entries
        assert np.allclose(G, G.T)
        rng = np.random.default_rng(4)
        q = rng.standard_normal(2 * grid.size)
        assert q @ G @ q == pytest.approx(gram.norm(q) ** 2, rel=1e-12)

    def test_k_budget_enforced(self):
        grid = build_discretization(16)
        with pytest.raises(ValueError):
            sobolev_gram(grid, 5, GramFlavor.PAIR_HK)


class TestDissipativity:
    def test_boundary_state_ratio(self):
        grid = build_discretization(32)
        fw = assemble_linearized(OperatorKind.FREE_WAVE, grid, 0.5)
        gram = sobolev_gram(grid, 0, GramFlavor.TRIPLE_K)
        q = np.concatenate([np.ones(grid.size), np.zeros(grid.size)])
        assert rayleigh_dissipativity(fw, gram, q) == pytest.approx(-1.0, abs=1e-12)

    @pytest.mark.parametrize("k", range(6))
    def test_free_wave_dissipative(self, k):
        grid = build_discretization(48)
        fw = assemble_linearized(OperatorKind.FREE_WAVE, grid, 0.5)
        gram = sobolev_gram(grid, k, GramFlavor.TRIPLE_K)
        rng = np.random.default_rng(10 + k)
        for _ in range(20):
            q = smooth_pair(rng, grid.nodes)
            assert rayleigh_dissipativity(fw, gram, q) <= -0.5 + 5e-3

    def test_stable_eigenvector_ratio_shows_gap(self):
        # on accepted stable eigenvectors the Rayleigh quotient reproduces
        # Re(lambda), which sits at or below the gap edge
        from blowuplab.spectrum import eigen_scan
        rep = eigen_scan(OperatorKind.L_ALPHA, 0.5, N=48)
        grid = build_discretization(48)
        op = assemble_linearized(OperatorKind.L_ALPHA, grid, 0.5)
        gram = sobolev_gram(grid, 5, GramFlavor.PAIR_HK)
        checked = 0
        for m in rep.accepted:
            if m.value.real > -0.9 or m.value.real < -3.0:
                continue
            for j in range(m.vectors.shape[1]):
                r = rayleigh_dissipativity(op, gram, m.vectors[:, j])
                assert r <= -0.9
                checked += 1
        assert checked >= 2

    def test_zero_state_rejected(self):
        grid = build_discretization(16)
        fw = assemble_linearized(OperatorKind.FREE_WAVE, grid, 0.5)
        gram = sobolev_gram(grid, 0, GramFlavor.TRIPLE_K)
        with pytest.raises(ValueError):
            rayleigh_dissipativity(fw, gram, np.zeros(2 * grid.size))
