import numpy as np
import pytest

from gaplab import lie, padic
from gaplab.approxhom import (HomError, LieStructure, LinearLieMap, PartialMap, approx_hom_defect, conjugation_map,
                              conjugator_of, critical_levels, fit_linear_theta, hensel_lift_hom, hom_residuals,
                              noisy_conjugation_map, project_to_variety_real, projective_distance_valuation,
                              quotient_hom_ladder, theta_diagnostics, theta_map)
from gaplab.groups import SpecialUnitary, padic_haar_sample

SU2 = LieStructure.su2()
SL2 = LieStructure.sl2()
S = SpecialUnitary(2)


def probe_pairs(rng, rho, n=50):
    # both factors within rho/2 keep the product inside the domain ball
    a = lie.random_su2_near_identity(rng, rho / 2, n)
    b = lie.random_su2_near_identity(rng, rho / 2, n)
    return list(zip(a, b))


class TestStructures:
    def test_rejects_non_antisymmetric(self):
        c = np.zeros((2, 2, 2))
        c[0, 1, 0] = 1
        with pytest.raises(HomError):
            LieStructure(c)

    def test_rejects_jacobi_failure(self):
        c = np.zeros((3, 3, 3))
        c[0, 1, 0], c[1, 0, 0] = 1, -1
        c[1, 2, 1], c[2, 1, 1] = 1, -1
        c[0, 2, 2], c[2, 0, 2] = 1, -1
        with pytest.raises(HomError, match="Jacobi"):
            LieStructure(c)

    def test_identity_is_hom(self):
        assert hom_residuals(LinearLieMap(np.eye(3)), SU2, SU2).is_zero
        assert hom_residuals(LinearLieMap(np.eye(3, dtype=int), 5, 6), SL2, SL2).is_zero

    def test_ad_is_hom(self):
        g = S.sample(np.random.default_rng(0))
        assert hom_residuals(LinearLieMap(lie.ad_matrix_su2(g)), SU2, SU2).max_abs < 1e-12

    def test_scaled_identity_is_not_hom(self):
        assert hom_residuals(LinearLieMap(2 * np.eye(3)), SU2, SU2).max_abs > 1

    def test_json_round_trip(self):
        real = LinearLieMap(np.arange(9.0).reshape(3, 3))
        assert np.array_equal(LinearLieMap.from_json(real.to_json()).x, real.x)
        pad = LinearLieMap(np.arange(9).reshape(3, 3) * 5**7, 5, 8)
        back = LinearLieMap.from_json(pad.to_json())
        assert (back.p, back.K) == (5, 8) and (back.x == pad.x).all()

    def test_reduce(self):
        L = LinearLieMap(np.full((3, 3), 5**4 + 1, dtype=object), 5, 6)
        assert (L.reduce(4).x == 1).all()
        with pytest.raises(HomError):
            L.reduce(7)


class TestPartialMaps:
    def test_must_fix_identity(self):
        with pytest.raises(HomError):
            PartialMap(S, S, 0.1, lambda h: -h)

    def test_domain(self):
        f = conjugation_map(np.eye(2, dtype=complex), 0.1)
        with pytest.raises(HomError):
            f(lie.su2_exp([0.5, 0, 0]))

    def test_conjugation_defect_zero(self):
        rng = np.random.default_rng(1)
        f = conjugation_map(S.sample(rng), 0.2)
        assert approx_hom_defect(f, probe_pairs(rng, 0.2)) < 1e-12

    def test_noisy_defect_scales_with_eps(self):
        rng = np.random.default_rng(2)
        g = S.sample(rng)
        pairs = probe_pairs(rng, 0.2)
        d = [approx_hom_defect(noisy_conjugation_map(g, 0.2, eps, np.random.default_rng(3)), pairs)
             for eps in (1e-3, 1e-4)]
        assert 0 < d[1] < d[0] <= 3e-3
        assert d[0] / d[1] == pytest.approx(10, rel=0.05)

    def test_unknown_noise_mode(self):
        with pytest.raises(HomError):
            noisy_conjugation_map(np.eye(2, dtype=complex), 0.1, 1e-3, np.random.default_rng(0), mode="loud")


class TestTheta:
    def test_theta_of_conjugation_is_ad(self):
        rng = np.random.default_rng(4)
        g = S.sample(rng)
        f = conjugation_map(g, 0.1)
        x = np.array([0.01, -0.02, 0.015])
        assert np.allclose(theta_map(f, 2, 0.1, x), x @ lie.ad_matrix_su2(g), atol=1e-10)

    def test_theta_domain(self):
        f = conjugation_map(np.eye(2, dtype=complex), 0.1)
        with pytest.raises(HomError):
            theta_map(f, 1, 0.1, [0.06, 0, 0])

    @pytest.mark.parametrize("mode", ["basis", "lstsq"])
    def test_fit_recovers_ad(self, mode):
        rng = np.random.default_rng(5)
        g = S.sample(rng)
        fit = fit_linear_theta(conjugation_map(g, 0.1), 3, 0.1, mode=mode, rng=rng)
        assert np.allclose(fit.theta.x, lie.ad_matrix_su2(g), atol=1e-9)
        assert fit.residual < 1e-9

    def test_diagnostics_small_for_noisy_map(self):
        rng = np.random.default_rng(6)
        f = noisy_conjugation_map(S.sample(rng), 0.1, 1e-4, rng)
        d = theta_diagnostics(f, 2, 0.1, [0.01, 0.0, 0.02], [0.0, 0.03, -0.01])
        assert max(d.values()) < 1e-2


class TestProjection:
    def test_projects_perturbed_ad(self):
        rng = np.random.default_rng(7)
        ad = lie.ad_matrix_su2(S.sample(rng))
        rep = project_to_variety_real(LinearLieMap(ad + 1e-3 * rng.normal(size=(3, 3))), SU2, SU2)
        assert rep.converged and rep.residual <= 1e-10
        assert rep.is_isomorphism
        assert rep.distance < 1e-2

    def test_zero_map_is_not_isomorphism(self):
        rep = project_to_variety_real(LinearLieMap(np.zeros((3, 3))), SU2, SU2)
        assert rep.residual == 0 and not rep.is_isomorphism


class TestHensel:
    def test_lift_of_ad(self):
        rng = np.random.default_rng(8)
        p, m, K = 5, 3, 15
        g = padic_haar_sample(rng, 2, p, K)
        ad = lie.ad_matrix_sl2_mod(g.entries.tolist(), p**K)
        rep = hensel_lift_hom(LinearLieMap(ad % p**m, p, m), m, SL2, SL2, K)
        assert hom_residuals(rep.theta, SL2, SL2).is_zero
        assert rep.congruence >= m - rep.s
        v = rep.valuations
        assert all(b >= min(2 * a - 2 * rep.s, K) for a, b in zip(v, v[1:]))

    def test_exact_hom_is_fixed(self):
        rep = hensel_lift_hom(LinearLieMap(np.eye(3, dtype=int), 5, 3), 3, SL2, SL2, 10)
        assert (rep.theta.x == np.eye(3, dtype=int)).all()
        assert rep.valuations == [rep.valuations[0]] and rep.valuations[0] >= 10

    def test_non_hom_rejected(self):
        with pytest.raises(HomError, match="residuals"):
            hensel_lift_hom(LinearLieMap(2 * np.eye(3, dtype=int), 5, 3), 3, SL2, SL2, 10)

    def test_conjugator_recovers_g(self):
        rng = np.random.default_rng(9)
        p, K = 5, 12
        g = padic_haar_sample(rng, 2, p, K)
        h, prec = conjugator_of(LinearLieMap(lie.ad_matrix_sl2_mod(g.entries.tolist(), p**K), p, K))
        assert prec == K
        assert projective_distance_valuation(h, g.entries, p, K) == K

    def test_projective_distance(self):
        g = np.array([[1, 5], [0, 1]], dtype=object)
        assert projective_distance_valuation(3 * g, g, 5, 6) == 6
        assert projective_distance_valuation(np.eye(2, dtype=int), g, 5, 6) == 1


class TestLadder:
    def test_critical_levels(self):
        l, n = critical_levels(2, 6)
        assert l > n
        l, n = critical_levels(2, 12)
        assert 2 < l <= n <= 24

    def test_small_m_rejected(self):
        with pytest.raises(HomError, match="critical levels"):
            quotient_hom_ladder(lambda x: x, 5, 2, 6)

    def test_conjugation_ladder(self):
        rng = np.random.default_rng(10)
        g = padic_haar_sample(rng, 2, 5, 24)
        gi = g.inverse()
        rep = quotient_hom_ladder(lambda x: g @ x @ gi, 5, 2, 12, rng, n_tests=3)
        assert rep.is_lie_hom and not rep.degenerate and rep.shift == 0
        assert rep.ladder

    def test_non_hom_detected(self):
        def phi(x):
            return x @ x

        with pytest.raises(HomError):
            quotient_hom_ladder(phi, 5, 2, 12, np.random.default_rng(11), n_tests=3)
