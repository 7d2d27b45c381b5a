import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaplab import lie, padic
from gaplab.groups import padic_haar_sample
from gaplab.padic import (AtLeast, CongruenceElement, DomainError, PAdicMatrix, PAdicScalar, commutator_finite_log_check,
                          finite_log, finite_log_inverse, padic_exp, padic_log, smith_mod, solve_mod)


def E12(p, K, c=1):
    return PAdicMatrix(p, K, np.array([[0, c], [0, 0]], dtype=object))


class TestValuation:
    def test_zero_is_at_least_K(self):
        v = padic.valuation(PAdicScalar(5, 10, 0))
        assert isinstance(v, AtLeast) and v == 10

    def test_small_values(self):
        assert padic.valuation(PAdicScalar(5, 10, 25)) == 2
        assert padic.valuation(PAdicScalar(3, 6, 54)) == 3

    @given(st.integers(1, 10**12), st.sampled_from([2, 3, 5, 7]))
    def test_matches_factorization(self, x, p):
        v = 0
        y = x
        while y % p == 0:
            y //= p
            v += 1
        assert padic.int_valuation(x, p, 60) == min(v, 60)

    def test_scalar_inverse(self):
        a = PAdicScalar(7, 8, 12)
        assert (a * a.inverse()).value == 1


class TestExpLog:
    def test_nilpotent_exp(self):
        g = padic_exp(E12(5, 6, 5))
        assert g.matrix == PAdicMatrix(5, 6, np.array([[1, 5], [0, 1]], dtype=object))

    def test_exp_zero(self):
        g = padic_exp(PAdicMatrix.zeros(2, 5, 6))
        assert g.matrix == PAdicMatrix.identity(2, 5, 6)

    def test_log_identity_and_nilpotent(self):
        I = CongruenceElement(PAdicMatrix.identity(2, 5, 6), 6)
        assert padic_log(I) == PAdicMatrix.zeros(2, 5, 6)
        g = CongruenceElement(PAdicMatrix(5, 6, np.array([[1, 5], [0, 1]], dtype=object)), 1)
        assert padic_log(g) == E12(5, 6, 5)

    def test_exp_needs_positive_valuation(self):
        with pytest.raises(DomainError):
            padic_exp(E12(5, 6, 1))

    def test_round_trip_p7(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            X = padic.random_traceless(rng, 2, 7, 20).scale(7)
            assert padic_log(padic_exp(X)) == X

    def test_round_trip_p3_level2(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            g = padic_exp(padic.random_traceless(rng, 2, 3, 18).scale(9))
            assert g.level >= 2
            assert padic_exp(padic_log(g)).matrix == g.matrix

    def test_exp_of_traceless_has_det_one(self):
        rng = np.random.default_rng(2)
        X = padic.random_traceless(rng, 3, 5, 10).scale(5)
        assert padic_exp(X).matrix.det() == 1


class TestFiniteLog:
    def test_direct_formula(self):
        g = CongruenceElement(PAdicMatrix(5, 4, np.array([[1, 5], [0, 1]], dtype=object)), 1)
        assert finite_log(g, 1, 2) == PAdicMatrix(5, 1, np.array([[0, 1], [0, 0]], dtype=object))

    def test_identity_class(self):
        I = CongruenceElement(PAdicMatrix.identity(2, 5, 6), 6)
        assert finite_log(I, 2, 3).valuation() >= 1

    def test_range_check(self):
        I = CongruenceElement(PAdicMatrix.identity(2, 5, 6), 6)
        with pytest.raises(DomainError):
            finite_log(I, 1, 3)  # n above 2l - k0 + 1

    def test_equivariance(self):
        rng = np.random.default_rng(3)
        p, K, l, n = 5, 8, 2, 4
        for _ in range(5):
            X = padic.random_traceless(rng, 2, p, n - l)
            g = finite_log_inverse(X, l, K)
            h = padic_haar_sample(rng, 2, p, K)
            conj = CongruenceElement(h @ g.matrix @ h.inverse(), l)
            lhs = finite_log(conj, l, n)
            rhs = (h.reduce(n - l) @ finite_log(g, l, n) @ h.inverse().reduce(n - l))
            assert lhs == rhs

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(4)
        X = padic.random_traceless(rng, 2, 5, 2)
        g = finite_log_inverse(X, 2, 8)
        assert finite_log(g, 2, 4) == X


class TestCommutatorCheck:
    def test_identity_pair(self):
        I = CongruenceElement(PAdicMatrix.identity(2, 5, 12), 12)
        assert commutator_finite_log_check(I, 2, 3, I, 2, 3)

    def test_random_pairs(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            g = padic_exp(padic.random_traceless(rng, 2, 5, 12).scale(25))
            h = padic_exp(padic.random_traceless(rng, 2, 5, 12).scale(25))
            assert commutator_finite_log_check(g, 2, 3, h, 2, 3)

    def test_corrupted_bracket_detected(self):
        rng = np.random.default_rng(6)
        hits = 0
        for _ in range(5):
            g = padic_exp(padic.random_traceless(rng, 2, 5, 12).scale(25))
            h = padic_exp(padic.random_traceless(rng, 2, 5, 12).scale(25))
            bad = lambda x, y: np.dot(x, y) - np.dot(y, x) + np.array([[1, 0], [0, -1]], dtype=object)
            hits += not commutator_finite_log_check(g, 2, 3, h, 2, 3, bracket_fn=bad)
        assert hits == 5


class TestSmith:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_smith_form(self, seed):
        rng = np.random.default_rng(seed)
        p, K = 5, 6
        m = p**K
        A = [[int(rng.integers(0, 50)) * int(p ** rng.integers(0, 3)) for _ in range(4)] for _ in range(6)]
        U, e, V = smith_mod(A, p, K)
        D = np.dot(np.dot(np.array(U, dtype=object), np.array(A, dtype=object)), np.array(V, dtype=object)) % m
        for i in range(6):
            for j in range(4):
                want = (p ** e[i]) % m if (i == j and e[i] < K) else 0
                assert D[i, j] == want
        assert list(e) == sorted(e)

    def test_solve_mod(self):
        A = [[1, 2], [3, 4]]
        x, ob = solve_mod(A, [5, 6], 7, 5)
        m = 7**5
        assert [(A[i][0] * x[0] + A[i][1] * x[1] - b) % m for i, b in enumerate([5, 6])] == [0, 0]


def test_ad_matrix_is_lie_hom_mod():
    rng = np.random.default_rng(7)
    from gaplab.approxhom import LieStructure, LinearLieMap, hom_residuals
    g = padic_haar_sample(rng, 2, 5, 10)
    ad = lie.ad_matrix_sl2_mod(g.entries.tolist(), 5**10)
    s = LieStructure.sl2()
    assert hom_residuals(LinearLieMap(ad, 5, 10), s, s).is_zero


def test_json_round_trip():
    rng = np.random.default_rng(8)
    mats = [padic.random_traceless(rng, 2, 3, 7) for _ in range(3)]
    assert padic.matrices_from_json(padic.matrices_to_json(mats)) == mats
