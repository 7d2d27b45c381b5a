import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaplab.acceptance import SPECTRAL_BASELINES
from gaplab.groups import FiniteGroup
from gaplab.walks import (FiniteSupportMeasure, convolution_power, convolve, cyclic_characters, delta_cyclic_exact,
                          displacement, elementary_walk, equidistribution_check, lives_at_scale, schreier_generators,
                          spectral_gap_abelian, spectral_gap_exact, word_length_sandwich, word_lengths)


def uniform(G, pts, exact=True):
    return FiniteSupportMeasure.uniform(G, pts, exact=exact)


class TestConvolution:
    def test_dirac_is_unit(self):
        G = FiniteGroup.cyclic(5)
        mu = uniform(G, [1, 4])
        out = convolve(FiniteSupportMeasure.dirac(G), mu)
        assert dict(zip(out.points, out.weights)) == {1: Fraction(1, 2), 4: Fraction(1, 2)}

    def test_plus_minus_one_squared(self):
        G = FiniteGroup.cyclic(5)
        mu = uniform(G, [1, 4])
        out = convolve(mu, mu)
        assert dict(zip(out.points, out.weights)) == {0: Fraction(1, 2), 2: Fraction(1, 4), 3: Fraction(1, 4)}

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(0, 11), min_size=1, max_size=5))
    def test_symmetry_preserved(self, gens):
        G = FiniteGroup.cyclic(12)
        pts = sorted(set(gens) | {(-g) % 12 for g in gens})
        mu = uniform(G, pts)
        assert convolve(mu, mu).is_symmetric()
        assert sum(convolution_power(mu, 3).weights) == 1

    def test_truncation_tracks_mass(self):
        G = FiniteGroup.cyclic(50)
        mu = uniform(G, [1, 49, 2, 48], exact=False)
        out = convolution_power(mu, 4, max_atoms=5)
        assert len(out) == 5
        assert float(sum(out.weights)) + out.truncated_mass == pytest.approx(1)


class TestSpectralGap:
    def test_full_averaging(self):
        G = FiniteGroup.cyclic(6)
        assert spectral_gap_exact(G, uniform(G, range(6))).lam == pytest.approx(0, abs=1e-12)

    def test_periodic_walk(self):
        G = FiniteGroup.cyclic(4)
        assert spectral_gap_exact(G, uniform(G, [1, 3])).lam == pytest.approx(1)

    def test_sl2_mod3_baseline(self):
        G = FiniteGroup.sl2_mod(3)
        assert G.order == 24
        lam = spectral_gap_exact(G, elementary_walk(G)).lam
        assert lam == pytest.approx(SPECTRAL_BASELINES[3], abs=1e-8)
        assert lam == pytest.approx((1 + math.sqrt(3)) / 4, abs=1e-12)

    def test_characters(self):
        G = FiniteGroup.cyclic(5)
        rep = spectral_gap_abelian(cyclic_characters(5), uniform(G, [1, 4]))
        # the maximum of |cos(2 pi k / 5)| over k = 1..4 is attained at k = 2
        assert rep.lam == pytest.approx(abs(math.cos(4 * math.pi / 5)))
        assert spectral_gap_abelian(cyclic_characters(5), uniform(G, range(5))).lam == pytest.approx(0, abs=1e-12)
        assert spectral_gap_abelian(cyclic_characters(5), FiniteSupportMeasure.dirac(G)).lam == pytest.approx(1)

    def test_characters_agree_with_dense(self):
        G = FiniteGroup.cyclic(9)
        mu = uniform(G, [1, 8, 3, 6])
        assert spectral_gap_abelian(cyclic_characters(9), mu).lam == pytest.approx(spectral_gap_exact(G, mu).lam)

    def test_non_symmetric_rejected(self):
        G = FiniteGroup.cyclic(5)
        with pytest.raises(ValueError):
            spectral_gap_exact(G, uniform(G, [1]))


class TestScale:
    def test_character_averages_to_zero(self):
        G = FiniteGroup.cyclic(25, padic_prime=5)
        f = np.exp(2j * np.pi * np.arange(25) / 25)
        rep = lives_at_scale(G, f, 0.5, 0.5)  # averaging over the ball of radius 1/4, i.e. 5Z/25
        assert rep.averaging_ratio == pytest.approx(0, abs=1e-12)
        assert rep.averaging_ok

    def test_constant_fails_averaging(self):
        G = FiniteGroup.cyclic(25, padic_prime=5)
        rep = lives_at_scale(G, np.ones(25), 0.5, 0.5)
        assert rep.averaging_ratio == pytest.approx(1)
        assert not rep.averaging_ok

    def test_level_m_character(self):
        G = FiniteGroup.cyclic(125, padic_prime=5)
        f = np.exp(2j * np.pi * np.arange(125) / 25)  # trivial on 25Z/125, nontrivial on 5Z/125
        rep = lives_at_scale(G, f, 0.2, 0.9)
        # averaging runs over 25Z/125, where f is constant on cosets; the
        # invariance scale is 5Z/125, where f averages to zero
        assert rep.averaging_ratio == pytest.approx(1)
        assert rep.invariance_ratio == pytest.approx(1)
        assert not rep.averaging_ok and not rep.invariance_ok


class TestDisplacement:
    def test_two_point(self):
        G = FiniteGroup.cyclic(2)
        rep = displacement(G, [0, 1], np.array([1.0, -1.0]) / math.sqrt(2))
        assert rep.delta_f == pytest.approx(2)
        assert rep.delta_f >= math.sqrt(2 / 2)

    def test_invariant_generators(self):
        G = FiniteGroup.cyclic(6)
        f = np.array([1.0, -1.0] * 3)  # invariant under 2Z/6
        rep = displacement(G, [2, 4, 1, 5], f)
        assert rep.per_generator[0] == pytest.approx(0) and rep.per_generator[1] == pytest.approx(0)

    def test_character(self):
        G = FiniteGroup.cyclic(5)
        f = np.exp(2j * np.pi * np.arange(5) / 5)
        rep = displacement(G, [1, 4], f)
        assert rep.delta_f == pytest.approx(abs(np.exp(2j * np.pi / 5) - 1))

    @pytest.mark.parametrize("n", range(2, 25))
    def test_full_set_bound(self, n):
        assert delta_cyclic_exact(n, list(range(n))) >= math.sqrt(2 / n)


class TestSchreier:
    def test_index_one(self):
        G = FiniteGroup.cyclic(5)
        gens = schreier_generators(G, [1, 4], lambda x: True)
        assert np.isfinite(word_lengths(G, gens)).all()

    def test_s3_sandwich(self):
        G = FiniteGroup.symmetric3()
        A3 = {x for x in range(6) if round(np.linalg.det(np.array(G.labels[x]).reshape(3, 3))) == 1}
        rep = word_length_sandwich(G, list(range(6)), lambda x: x in A3)
        assert rep["violations"] == [] and rep["generates_H"] and rep["checked"] == 3

    def test_z6_generates_subgroup(self):
        G = FiniteGroup.cyclic(6)
        rep = word_length_sandwich(G, [0, 1, 5], lambda x: x % 2 == 0)
        assert rep["generates_H"] and rep["violations"] == []

    def test_missing_coset(self):
        G = FiniteGroup.cyclic(6)
        with pytest.raises(ValueError):
            schreier_generators(G, [2, 4], lambda x: x % 2 == 0)


class TestEquidistribution:
    def test_trivial(self):
        G = FiniteGroup.cyclic(7)
        v = equidistribution_check(G, FiniteSupportMeasure.dirac(G), 0, 0.5, lambda x: True, lam=1.0)
        assert v.lhs == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("ell", [1, 20])
    def test_z7(self, ell):
        G = FiniteGroup.cyclic(7)
        v = equidistribution_check(G, uniform(G, [1, 6]), ell, 0.5, lambda x: x in (0, 2, 5))
        assert v.holds
        if ell == 20:
            assert v.slack > 0
