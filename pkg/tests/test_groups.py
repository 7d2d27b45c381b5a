import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gaplab import lie, padic
from gaplab.groups import (Circle, FiniteGroup, GroupPoint, PAdicSpecialLinear, Product, SampleCloud, SpecialUnitary,
                           SpecMismatch, ball_volume, commutator, distance, fit_dimension, haar_sample, metric_entropy,
                           neighbourhood_volume, nth_root, renyi_entropy, renyi_entropy_exact, su2_ball_volume_exact)

SU2 = SpecialUnitary(2)


class TestDistance:
    def test_self_distance(self):
        rng = np.random.default_rng(0)
        g = SU2.sample(rng)
        assert distance(SU2, g, g) == pytest.approx(0, abs=1e-15)

    def test_su2_diagonal(self):
        t = 0.7
        g = np.diag([np.exp(1j * t), np.exp(-1j * t)])
        assert distance(SU2, np.eye(2), g) == pytest.approx(abs(np.exp(1j * t) - 1))

    def test_padic(self):
        G = PAdicSpecialLinear(2, 5, 4)
        g = padic.PAdicMatrix(5, 4, np.array([[1, 25], [0, 1]], dtype=object))
        assert distance(G, G.identity(), g) == pytest.approx(5**-2)

    def test_mismatched_point(self):
        pt = GroupPoint(Circle(), 0.25)
        with pytest.raises(SpecMismatch):
            distance(SU2, pt, np.eye(2))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_bi_invariance(self, seed):
        rng = np.random.default_rng(seed)
        g, h, k = (SU2.sample(rng) for _ in range(3))
        d = distance(SU2, g, h)
        assert distance(SU2, k @ g, k @ h) == pytest.approx(d, abs=1e-12)
        assert distance(SU2, g @ k, h @ k) == pytest.approx(d, abs=1e-12)


class TestHaar:
    def test_su2_trace_mean(self):
        rng = np.random.default_rng(1)
        g = SU2.sample_many(rng, 100_000)
        assert abs(np.mean(np.trace(g, axis1=1, axis2=2))) < 0.02

    def test_su2_samples_are_special_unitary(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            assert SU2.contains(haar_sample(SU2, rng).payload)

    def test_cyclic_uniform(self):
        rng = np.random.default_rng(3)
        Z6 = FiniteGroup.cyclic(6)
        x = [Z6.sample(rng) for _ in range(100_000)]
        assert stats.chisquare(np.bincount(x, minlength=6)).pvalue > 0.01

    def test_padic_congruence_mass(self):
        rng = np.random.default_rng(4)
        G = PAdicSpecialLinear(2, 5, 2)
        n = 20_000
        hits = sum(G.level_of(G.sample(rng)) >= 1 for _ in range(n))
        q = 1 / padic.sl_order(2, 5, 1)
        assert abs(hits / n - q) <= 3 * math.sqrt(q * (1 - q) / n)


class TestBallVolume:
    def test_padic_exact(self):
        for p in (3, 5):
            assert ball_volume(PAdicSpecialLinear(2, p, 4), 1 / p).value == pytest.approx(1 / (p * (p * p - 1)))

    def test_diameter(self):
        assert ball_volume(SU2, 2.0).value == 1.0
        assert ball_volume(FiniteGroup.cyclic(5), 1.0).value == 1.0

    def test_su2_dimension(self):
        rng = np.random.default_rng(5)
        assert 2.7 <= fit_dimension(SU2, 0.2, rng, 400_000) <= 3.3

    def test_su2_monte_carlo_matches_closed_form(self):
        rng = np.random.default_rng(6)
        v = ball_volume(SU2, 0.5, rng, 200_000)
        assert abs(v.value - su2_ball_volume_exact(0.5)) < 4 * v.stderr

    def test_product(self):
        G = Product(FiniteGroup.cyclic(4), Circle())
        assert ball_volume(G, 0.1).value == pytest.approx(0.25 * 0.2)


class TestEntropy:
    def test_metric_entropy_trivial(self):
        assert metric_entropy(SU2, [np.eye(2)], 0.3) == 0
        g = lie.su2_exp([1.0, 0, 0])
        assert metric_entropy(SU2, [np.eye(2), g], 0.3) == pytest.approx(math.log(2))

    def test_metric_entropy_cloud(self):
        rng = np.random.default_rng(7)
        eta = 0.3
        pts = list(SU2.sample_many(rng, 1000))
        h = metric_entropy(SU2, pts, eta)
        vol = neighbourhood_volume(SU2, pts, eta, rng, 100_000)
        ref = math.log(vol / su2_ball_volume_exact(eta))
        v = su2_ball_volume_exact
        C = max(v(2 * eta) / v(eta), v(eta) / v(eta / 2))
        assert abs(h - ref) <= math.log(C) + 0.05

    def test_renyi_point_mass(self):
        G = FiniteGroup.cyclic(7)
        assert renyi_entropy(G, [0] * 50, 0.5).value == pytest.approx(0)

    def test_renyi_uniform_exact(self):
        G = FiniteGroup.cyclic(9)
        assert renyi_entropy_exact(G, np.full(9, 1 / 9), 0.5) == pytest.approx(math.log(9))

    def test_coupling_bound(self):
        Z = FiniteGroup.cyclic(8)
        G = FiniteGroup.direct_product(Z, Z)
        diag = np.zeros(64)
        diag[[9 * i for i in range(8)]] = 1 / 8
        assert renyi_entropy_exact(G, diag, 0.5) >= math.log(8) - 1e-12


class TestRootsAndCommutators:
    def test_root_of_identity(self):
        assert np.allclose(nth_root(np.eye(2), 3), np.eye(2))

    def test_diagonal_root(self):
        t = 0.2
        g = np.diag([np.exp(1j * t), np.exp(-1j * t)])
        assert np.allclose(nth_root(g, 2), np.diag([np.exp(0.5j * t), np.exp(-0.5j * t)]))

    def test_root_domain(self):
        with pytest.raises(ValueError):
            nth_root(lie.su2_exp([1.0, 0, 0]), 2)

    def test_commutator_trivial_cases(self):
        rng = np.random.default_rng(8)
        g = SU2.sample(rng)
        assert np.allclose(commutator(SU2, g, np.eye(2)), np.eye(2))
        a, b = np.diag([1j, -1j]), np.diag([np.exp(0.3j), np.exp(-0.3j)])
        assert np.allclose(commutator(SU2, a, b), np.eye(2))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.001, 0.3), st.floats(0.001, 0.3))
    def test_commutator_bound(self, seed, r1, r2):
        rng = np.random.default_rng(seed)
        g = lie.random_su2_near_identity(rng, r1, 1, boundary_frac=1.0)[0]
        h = lie.random_su2_near_identity(rng, r2, 1, boundary_frac=1.0)[0]
        d = np.linalg.norm(commutator(SU2, g, h) - np.eye(2), 2)
        assert d <= 2 * r1 * r2 * (1 + 1e-9)


def test_cloud_csv_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    cloud = SampleCloud(SU2, list(SU2.sample_many(rng, 5)), seed=9)
    path = str(tmp_path / "cloud.csv")
    cloud.to_csv(path)
    back = SampleCloud.from_csv(path)
    assert back.seed == 9
    assert all(np.allclose(a, b) for a, b in zip(cloud.points, back.points))
