"""A coupling of Haar measures on R/Z and Z_p without spectral gap.

A uniform digit string z in {0..p-1}^M is sent to x = sum z_i p^-(i+1) in
R/Z and to y = sum w_i p^i in Z/p^M, where w_i = z_sigma(i) and sigma
reverses each dyadic block [2^j, 2^(j+1)) while fixing 0 and 1.  The
characters gamma_j(x, y) = e(p^(2^j) x) / e(p^-(2^(j+1)) y) are nontrivial,
yet on the support they are within O(p^-(2^j)) of 1.

All characters are evaluated from the digit arrays, never from rounded x.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats


class CounterexampleError(ValueError):
    pass


def _e(t):
    return np.exp(2j * np.pi * np.asarray(t))


def sigma_perm(i: int) -> int:
    """sigma(0) = 0, sigma(1) = 1, sigma(i + 2^j) = 2^(j+1) - i - 1 for 0 <= i < 2^j."""
    if i < 0:
        raise CounterexampleError("sigma is defined on nonnegative integers")
    if i < 2:
        return i
    j = i.bit_length() - 1
    return 2 ** (j + 1) - (i - 2**j) - 1


def sigma_array(M: int) -> np.ndarray:
    return np.array([sigma_perm(i) for i in range(M)], dtype=np.int64)


def _check_M(M: int):
    if M < 4 or M & (M - 1):
        raise CounterexampleError("M must be a power of two >= 4 so the blocks are complete")


def f_infinity(z, p: int) -> float:
    """sum z_i p^-(i+1) (error below p^-M from truncation)."""
    z = np.asarray(z)
    return float(np.sum(z * float(p) ** -(np.arange(z.shape[-1]) + 1.0), axis=-1))


def f_p(z, p: int) -> int:
    """sum z_i p^i mod p^M as an exact integer."""
    return sum(int(d) * p**i for i, d in enumerate(z))


@dataclass
class CouplingBatch:
    """N samples of the coupling as digit arrays: z gives x, w gives y."""

    p: int
    M: int
    z: np.ndarray
    w: np.ndarray

    def __len__(self):
        return self.z.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.z @ (float(self.p) ** -(np.arange(self.M) + 1.0))

    def y_mod(self, k: int) -> np.ndarray:
        """y mod p^k (k small enough for int64)."""
        if self.p**k >= 2**62:
            raise CounterexampleError("residue too large for int64")
        return self.w[:, :k] @ (self.p ** np.arange(k, dtype=np.int64))

    def y(self, n: int) -> int:
        return f_p(self.w[n], self.p)

    def support_relation_holds(self) -> np.ndarray:
        """Digitwise x_{i+2^j} = y_{2^(j+1)-i-1} on all complete blocks, plus digits 0 and 1."""
        s = sigma_array(self.M)
        return np.all(self.w == self.z[:, s], axis=1)


def sample_mu(rng: np.random.Generator, p: int, M: int, N: int, independent: bool = False) -> CouplingBatch:
    """N draws from the coupling (or from the product of the marginals)."""
    _check_M(M)
    z = rng.integers(0, p, size=(N, M))
    if independent:
        z2 = rng.integers(0, p, size=(N, M))
        return CouplingBatch(p, M, z, z2)
    return CouplingBatch(p, M, z, z[:, sigma_array(M)])


def batch_from_digits(z, p: int) -> CouplingBatch:
    z = np.atleast_2d(np.asarray(z, dtype=np.int64))
    M = z.shape[1]
    _check_M(M)
    return CouplingBatch(p, M, z, z[:, sigma_array(M)])


def alpha_phase(z: np.ndarray, p: int, j: int) -> np.ndarray:
    """Fractional part of p^(2^j) x from the digits of x."""
    k = 2**j
    tail = z[:, k:]
    return tail @ (float(p) ** -(np.arange(tail.shape[1]) + 1.0))


def beta_phase(w: np.ndarray, p: int, j: int) -> np.ndarray:
    """Fractional part of p^-(2^(j+1)) y from the low digits of y."""
    k = 2 ** (j + 1)
    head = w[:, :k]
    return head @ (float(p) ** (np.arange(k) - k * 1.0))


def gamma_j(batch: CouplingBatch, j: int) -> np.ndarray:
    if j < 0 or 2 ** (j + 1) > batch.M:
        raise CounterexampleError(f"gamma_{j} needs 2^(j+1) <= M = {batch.M}")
    return _e(alpha_phase(batch.z, batch.p, j) - beta_phase(batch.w, batch.p, j))


def gamma_at(x_digits, y_digits, p: int, j: int) -> complex:
    """gamma_j at an arbitrary pair given by digit arrays (not necessarily on the support)."""
    z = np.atleast_2d(np.asarray(x_digits))
    w = np.atleast_2d(np.asarray(y_digits))
    return complex(_e(alpha_phase(z, p, j) - beta_phase(w, p, j))[0])


def control_character(batch: CouplingBatch) -> np.ndarray:
    """e(x) times the conjugate of e(y / p)."""
    p = batch.p
    return _e(batch.x - batch.w[:, 0] / p)


def one_block_oracle(p: int, j: int, M: int | None = None) -> float:
    """Worst case of |gamma_j - 1| p^(2^j) on the support by digit enumeration.

    On the support gamma_j = e(a - b) where a collects the digits of x past
    position 2^(j+1) and b the digits of y below 2^j; the block in between
    cancels.  The leading block of each (2^j digits of x from position
    2^(j+1), and w_{2^j-1}, ..., w_0) is enumerated exhaustively; the digits
    past that block move a and b within intervals whose endpoints are
    checked, which is exact because |e(t) - 1| grows with |t| on |t| < 1/2.
    """
    k = 2**j
    M = M or 4 * k
    if p ** (2 * k) > 2**22:
        raise CounterexampleError("block too large to enumerate")
    # a = sum_{s>=0} z_{2k+s} p^-(k+s+1); enumerated digits s < k
    a_w = float(p) ** -(np.arange(k) + k + 1.0)
    a_rem = max(0.0, float(p) ** (-2 * k) - float(p) ** (-(M - k)))  # remaining x digits, all p-1
    # b = sum_{i<k} w_i p^(i-2k)
    b_w = float(p) ** (np.arange(k) - 2.0 * k)
    digs = np.array(list(itertools.product(range(p), repeat=k)), dtype=float)
    A = digs @ a_w
    B = digs @ b_w
    worst = 0.0
    for extra in (0.0, a_rem):
        d = (A[:, None] + extra) - B[None, :]
        worst = max(worst, float(np.max(np.abs(_e(d) - 1))))
    return worst * float(p) ** k


def decay_constant(p: int, M: int, j_max: int) -> float:
    """C for max|gamma_j - 1| <= C p^-(2^j): the supremum of the one-block ratio.

    The one-block oracle gives the exact worst case p^(2^j) 2 sin(pi p^-(2^j))
    (up to truncation) for every j small enough to enumerate; this increases
    to 2 pi, so C = 2 pi covers all j.  The oracle values are returned in the
    report for audit.
    """
    return 2 * math.pi


@dataclass
class DecayRow:
    j: int
    max_dev: float
    bound: float
    mu_hat: float
    mu_hat_complex: tuple


@dataclass
class DecayReport:
    p: int
    M: int
    N: int
    C: float
    oracle: dict
    rows: list
    control: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "max_abs_gamma_minus_1", "bound", "abs_mu_hat"])
            for r in self.rows:
                w.writerow([r.j, repr(r.max_dev), repr(r.bound), repr(r.mu_hat)])


def _check_range(M, j_max):
    if j_max < 1 or 2 ** (j_max + 1) > M:
        raise CounterexampleError(f"need 1 <= j_max and 2^(j_max+1) <= M; got j_max = {j_max}, M = {M}")


def decay_report(rng: np.random.Generator, p: int, M: int, j_max: int, N: int, batch: CouplingBatch | None = None,
                 independent: bool = False) -> DecayReport:
    _check_M(M)
    _check_range(M, j_max)
    batch = batch or sample_mu(rng, p, M, N, independent=independent)
    C = decay_constant(p, M, j_max)
    oracle = {}
    for j in range(1, j_max + 1):
        try:
            oracle[j] = one_block_oracle(p, j, M)
        except CounterexampleError:
            break
    rows = []
    for j in range(1, j_max + 1):
        g = gamma_j(batch, j)
        mh = complex(np.mean(g))
        rows.append(DecayRow(j, float(np.max(np.abs(g - 1))), C * float(p) ** -(2**j), abs(mh), (mh.real, mh.imag)))
    ctrl = abs(complex(np.mean(control_character(batch))))
    return DecayReport(p, M, len(batch), C, oracle, rows, ctrl)


@dataclass
class NoGapVerdict:
    verdict: str  # "pass", "fail" or "inconclusive"
    thresholds: list
    mu_hats: list
    band: float


def no_gap_witness(rng: np.random.Generator, p: int, M: int, j_max: int, N: int, C_prime: float = 10.0,
                   independent: bool = False, batch: CouplingBatch | None = None) -> NoGapVerdict:
    """Check |mu_hat(gamma_j)| >= 1 - C' p^-(2^j) - 4/sqrt(N) for j = 1..j_max.

    With 4/sqrt(N) >= 1/2 the statistical band is too wide for the check
    to mean anything and the verdict is ``inconclusive``.
    """
    rep = decay_report(rng, p, M, j_max, N, batch=batch, independent=independent)
    band = 4 / math.sqrt(rep.N)
    th = [1 - C_prime * float(p) ** -(2**r.j) - band for r in rep.rows]
    mh = [r.mu_hat for r in rep.rows]
    if band >= 0.5:
        verdict = "inconclusive"
    else:
        verdict = "pass" if all(m >= t for m, t in zip(mh, th)) else "fail"
    return NoGapVerdict(verdict, th, mh, band)


@dataclass
class MarginalReport:
    ks_statistic: float
    ks_pvalue: float
    chi2_statistic: float
    chi2_pvalue: float
    level: float

    @property
    def passed(self) -> bool:
        return self.ks_pvalue > self.level and self.chi2_pvalue > self.level


def marginal_tests(batch: CouplingBatch, k: int = 3, level: float = 0.01) -> MarginalReport:
    """KS test of x against uniform on [0, 1) and chi-square of y mod p^k."""
    ks = stats.kstest(batch.x, "uniform")
    counts = np.bincount(batch.y_mod(k), minlength=batch.p**k)
    chi = stats.chisquare(counts)
    return MarginalReport(float(ks.statistic), float(ks.pvalue), float(chi.statistic), float(chi.pvalue), level)
