import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaplab.counterexample import (CounterexampleError, batch_from_digits, decay_constant, decay_report, f_infinity,
                                   f_p, gamma_at, gamma_j, marginal_tests, no_gap_witness, one_block_oracle,
                                   sample_mu, sigma_array, sigma_perm)


class TestPermutation:
    def test_first_values(self):
        assert [sigma_perm(i) for i in range(8)] == [0, 1, 3, 2, 7, 6, 5, 4]

    @given(st.integers(2, 12))
    def test_permutation_and_involution(self, e):
        s = sigma_array(2**e)
        assert sorted(s.tolist()) == list(range(2**e))
        assert (s[s] == np.arange(2**e)).all()

    def test_negative(self):
        with pytest.raises(CounterexampleError):
            sigma_perm(-1)


class TestDigits:
    def test_real_embedding(self):
        assert f_infinity([1, 0, 0, 0], 2) == 0.5
        assert f_infinity([0, 2, 0, 0], 3) == pytest.approx(2 / 9)

    def test_padic_embedding(self):
        assert f_p([1, 1, 0, 0], 3) == 4
        assert f_p([4, 4, 4, 4], 5) == 5**4 - 1

    def test_block_size(self):
        with pytest.raises(CounterexampleError):
            batch_from_digits([[0] * 6], 2)

    def test_support_relation(self):
        rng = np.random.default_rng(0)
        assert sample_mu(rng, 3, 16, 100).support_relation_holds().all()
        assert not sample_mu(rng, 3, 16, 100, independent=True).support_relation_holds().any()


class TestCharacters:
    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_decay_on_support(self, p):
        batch = sample_mu(np.random.default_rng(p), p, 32, 2000)
        for j in range(1, 5):
            dev = np.max(np.abs(gamma_j(batch, j) - 1))
            assert dev <= 2 * math.pi * float(p) ** -(2**j)

    def test_range(self):
        batch = sample_mu(np.random.default_rng(1), 2, 8, 5)
        with pytest.raises(CounterexampleError):
            gamma_j(batch, 3)

    def test_off_support_is_not_close_to_one(self):
        x = [0, 0, 0, 0, 0, 0, 0, 0]
        y = [0, 1, 0, 0, 0, 0, 0, 0]  # beta phase 2 / 16 = 1/8 at j = 1
        assert abs(gamma_at(x, y, 2, 1) - 1) == pytest.approx(abs(np.exp(-2j * np.pi / 8) - 1))

    def test_gamma_at_matches_batch(self):
        batch = sample_mu(np.random.default_rng(2), 3, 16, 3)
        g = gamma_j(batch, 2)
        assert gamma_at(batch.z[1], batch.w[1], 3, 2) == pytest.approx(g[1])


class TestOracle:
    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_exact_worst_case(self, j):
        k = 2**j
        want = 2**k * 2 * math.sin(math.pi * 2.0**-k)
        # with 64 digits the tail of x is long enough to reach the supremum
        assert one_block_oracle(2, j, 64) == pytest.approx(want, rel=1e-9)
        assert one_block_oracle(2, j, 4 * k) < want <= decay_constant(2, 64, 5)

    def test_too_large(self):
        with pytest.raises(CounterexampleError):
            one_block_oracle(5, 3)


class TestReports:
    def test_decay_report(self, tmp_path):
        rep = decay_report(np.random.default_rng(3), 3, 32, 4, 5000)
        assert all(r.max_dev <= r.bound for r in rep.rows)
        assert all(r.mu_hat >= 0.9 for r in rep.rows)
        assert json.loads(rep.to_json())["N"] == 5000
        path = tmp_path / "decay.csv"
        rep.to_csv(str(path))
        rows = list(csv.reader(open(path)))
        assert rows[0][0] == "j" and len(rows) == 5

    def test_range_check(self):
        with pytest.raises(CounterexampleError):
            decay_report(np.random.default_rng(0), 2, 16, 4, 10)

    def test_no_gap_pass(self):
        v = no_gap_witness(np.random.default_rng(4), 2, 64, 5, 10_000)
        assert v.verdict == "pass"

    def test_independent_fails(self):
        v = no_gap_witness(np.random.default_rng(5), 2, 64, 5, 10_000, independent=True)
        assert v.verdict == "fail"

    def test_small_sample_inconclusive(self):
        assert no_gap_witness(np.random.default_rng(6), 2, 16, 2, 50).verdict == "inconclusive"

    def test_marginals(self):
        batch = sample_mu(np.random.default_rng(7), 5, 16, 20_000)
        assert marginal_tests(batch).passed
