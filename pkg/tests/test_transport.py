import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaplab import padic
from gaplab.acceptance import perturbed_uniform, random_rational_coupling
from gaplab.groups import Circle, FiniteGroup, PAdicSpecialLinear, Product, SpecialUnitary
from gaplab.transport import (BipartiteSpanningTree, MarginPair, TransportError, correct_coupling, coupling_from_csv,
                              coupling_to_csv, decompose, decomposition_from_json, discretize, hopf_point,
                              is_admissible, is_coupling, margins_of, symmetric_coupling_pipeline, tree_measure)
from gaplab.walks import FiniteSupportMeasure

HALF = MarginPair([F(1, 2)] * 2, [F(1, 2)] * 2)
# rows a, b = 0, 1 and columns c, d = 0, 1; tau = {ac, ad, bd}
TAU = BipartiteSpanningTree(2, 2, ((0, 0), (0, 1), (1, 1)))


class TestTrees:
    def test_single_edge(self):
        t = BipartiteSpanningTree(1, 1, ((0, 0),))
        assert tree_measure(t, MarginPair([F(1)], [F(1)])) == [[F(1)]]
        assert is_admissible(t, MarginPair([F(1)], [F(1)]))

    def test_uniform_margins(self):
        assert tree_measure(TAU, HALF) == [[F(1, 2), F(0)], [F(0), F(1, 2)]]
        assert is_admissible(TAU, HALF)

    def test_skewed_margins(self):
        m = MarginPair([F(3, 4), F(1, 4)], [F(1, 2), F(1, 2)])
        assert tree_measure(TAU, m) == [[F(1, 2), F(1, 4)], [F(0), F(1, 4)]]

    def test_negative_entry_not_admissible(self):
        m = MarginPair([F(1), F(0)], [F(1, 2), F(1, 2)])
        t = BipartiteSpanningTree(2, 2, ((0, 0), (1, 0), (1, 1)))  # routes b's (zero) mass to d
        assert not is_admissible(t, m)

    def test_tree_validation(self):
        with pytest.raises(TransportError):
            BipartiteSpanningTree(2, 2, ((0, 0), (0, 1)))
        with pytest.raises(TransportError):
            BipartiteSpanningTree(2, 2, ((0, 0), (0, 1), (1, 0), (1, 1)))

    def test_margins_must_balance(self):
        with pytest.raises((TransportError, ValueError)):
            MarginPair([F(1, 2), F(1, 2)], [F(1, 3), F(1, 3)])


class TestDecompose:
    def test_tree_supported(self):
        sigma = [[F(1, 2), F(0)], [F(0), F(1, 2)]]
        dec = decompose(sigma)
        assert len(dec.terms) == 1 and dec.terms[0][0] == 1
        assert dec.reconstruct() == sigma

    def test_uniform_2x2(self):
        sigma = [[F(1, 4)] * 2 for _ in range(2)]
        dec = decompose(sigma)
        assert len(dec.terms) <= 2
        assert dec.reconstruct() == sigma

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_random_exact(self, N1, N2, seed):
        rng = np.random.default_rng(seed)
        sigma = random_rational_coupling(rng, N1, N2)
        dec = decompose(sigma)
        ws = [c for c, _ in dec.terms]
        assert dec.reconstruct() == sigma
        assert sum(ws) == 1 and min(ws) >= 0
        assert len(ws) <= (N1 - 1) * (N2 - 1) + 1
        m = margins_of(sigma)
        assert all(is_admissible(t, m) for _, t in dec.terms)

    def test_random_float(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            N1, N2 = rng.integers(1, 9, size=2)
            M = rng.random((N1, N2)) * (rng.random((N1, N2)) < 0.7)
            if M.sum() == 0:
                continue
            M = (M / M.sum()).tolist()
            dec = decompose(M)
            R = np.array(dec.reconstruct(), dtype=float)
            assert np.max(np.abs(R - np.array(M))) <= 1e-10
            assert abs(sum(c for c, _ in dec.terms) - 1) <= 1e-12

    def test_json_round_trip(self):
        sigma = random_rational_coupling(np.random.default_rng(2), 3, 4)
        dec = decompose(sigma)
        back = decomposition_from_json(dec.to_json())
        assert back.reconstruct() == sigma

    def test_csv_round_trip(self, tmp_path):
        sigma = random_rational_coupling(np.random.default_rng(3), 3, 2)
        path = str(tmp_path / "c.csv")
        coupling_to_csv(sigma, path)
        assert coupling_from_csv(path) == sigma


class TestCorrect:
    def test_already_uniform(self):
        sigma = [[F(1, 4)] * 2 for _ in range(2)]
        rep = correct_coupling(sigma, 3)
        assert rep.nu == sigma and rep.max_entry_change == 0

    def test_plus_minus_eps(self):
        eps = F(1, 4**3)
        mu = [[F(1, 4) + eps, F(1, 4)], [F(1, 4), F(1, 4) - eps]]
        rep = correct_coupling(mu, 3)
        assert is_coupling(rep.nu, MarginPair.uniform(2, 2))
        assert rep.max_entry_change <= F(1, 16)

    def test_random_6x6(self):
        rng = np.random.default_rng(4)
        worst = 0
        for _ in range(10):
            mu = perturbed_uniform(rng, 6, 6, 3)
            rep = correct_coupling(mu, 3)
            assert is_coupling(rep.nu, MarginPair.uniform(6, 6))
            assert rep.max_entry_change <= F(1, 36**2)
            worst = max(worst, rep.max_entry_change / F(1, 36**2))
        assert worst < 1

    def test_A_must_exceed_two(self):
        with pytest.raises(TransportError, match="A > 2"):
            correct_coupling([[F(1, 4)] * 2] * 2, 2)

    def test_margin_precondition(self):
        with pytest.raises(TransportError):
            correct_coupling([[F(1, 2), F(0)], [F(1, 4), F(1, 4)]], 3)

    def test_float_weights_stay_exact(self):
        rng = np.random.default_rng(5)
        mu = perturbed_uniform(rng, 4, 5, 3)
        rep = correct_coupling(mu, 3, exact_weights=False)
        assert is_coupling(rep.nu, MarginPair.uniform(4, 5))


class TestDiscretize:
    def test_padic_cosets(self):
        d = discretize(PAdicSpecialLinear(2, 5, 2), 0.2)
        assert d.count == padic.sl_order(2, 5, 1) and not d.relaxed

    def test_circle(self):
        d = discretize(Circle(), 0.1)
        assert d.count == 10 and d.info["inner_radius"] >= 0.01
        assert d.membership(0.05) == 0 and d.membership(0.95) == 9

    def test_su2(self):
        d = discretize(SpecialUnitary(2), 0.2)
        assert d.relaxed
        m = d.cell_measures
        assert np.max(np.abs(m - 1 / d.count)) <= 1e-6 / d.count
        rng = np.random.default_rng(6)
        for c in rng.integers(0, d.count, size=40):
            u0, u1, a0, a1, b0, b1 = d.cell_box(int(c))
            pts = [hopf_point(rng.uniform(u0, u1), rng.uniform(a0, a1), rng.uniform(b0, b1)) for _ in range(30)]
            assert all(d.membership(g) == c for g in pts)
            diam = max(np.linalg.norm(g - h, 2) for g in pts for h in pts)
            assert diam <= 0.2

    def test_finite_needs_subgroup_ball(self):
        G = FiniteGroup.cyclic(8, padic_prime=2)
        assert discretize(G, 0.25).count == 4


class TestPipeline:
    def test_cyclic_product(self):
        G = Product(FiniteGroup.cyclic(3), FiniteGroup.cyclic(4))
        pts = [(a, b) for a in (1, 2) for b in (1, 3)] + [(0, 0)]
        mu = FiniteSupportMeasure.uniform(G, pts)
        rep = symmetric_coupling_pipeline(mu, 40, 0.5)
        assert rep.precondition_met and rep.nu_is_coupling and rep.symmetric
        assert rep.max_cell_error < 1e-3

    def test_product_of_haar(self):
        G = Product(FiniteGroup.cyclic(3), FiniteGroup.cyclic(2))
        mu = FiniteSupportMeasure.uniform(G, [(a, b) for a in range(3) for b in range(2)])
        rep = symmetric_coupling_pipeline(mu, 1, 0.5)
        assert rep.nu_is_coupling and rep.tv_on_cells == 0

    def test_insufficient_length_reports_requirement(self):
        G = Product(FiniteGroup.cyclic(5), FiniteGroup.cyclic(7))
        mu = FiniteSupportMeasure.uniform(G, [(a, b) for a in (1, 4) for b in (1, 6)] + [(0, 0)])
        rep = symmetric_coupling_pipeline(mu, 1, 0.5, lam=(0.9, 0.9))
        assert not rep.precondition_met and rep.required_ell > 1

    def test_sl2_mod_9_times_mod_25(self):
        G = Product(PAdicSpecialLinear(2, 3, 2), PAdicSpecialLinear(2, 5, 2))

        def gens(p):
            return [padic.elementary(2, i, j, c, p, 2) for (i, j) in ((0, 1), (1, 0)) for c in (1, p * p - 1)]

        pts = [(a, b) for a in gens(3) for b in gens(5)]
        mu = FiniteSupportMeasure.uniform(G, pts)
        rep = symmetric_coupling_pipeline(mu, 130, 1 / 3)
        assert (rep.N1, rep.N2) == (24, 120)
        assert rep.precondition_met and rep.nu_is_coupling and rep.symmetric
