"""Quantitative inverse function theorems, BCH calculus and SU(2) probes.

sigma(A) is the radius of the largest ball around 0 inside A(unit ball).  For
real A (m <= n) it is the m-th singular value; over Z_p it is p^-v for the
largest elementary-divisor exponent v.
"""
from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import lie, padic


class NumericsError(ValueError):
    pass


class PreconditionError(NumericsError):
    pass


# ---------------------------------------------------------------------------
# sigma


def sigma_real(A) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if m > n:
        raise NumericsError(f"sigma needs m <= n, got a {m}x{n} matrix")
    return float(np.linalg.svd(A, compute_uv=False)[m - 1])


@dataclass
class PAdicSigma:
    value: float
    exponent: int
    divisors: list


def sigma_padic(A, p: int, K: int) -> PAdicSigma:
    """p^-v with v the largest elementary-divisor exponent of A over Z/p^K."""
    A = [[int(x) for x in row] for row in np.atleast_2d(np.asarray(A, dtype=object))]
    m, n = len(A), len(A[0])
    if m > n:
        raise NumericsError(f"sigma needs m <= n, got a {m}x{n} matrix")
    _, e, _ = padic.smith_mod(A, p, K)
    if any(v >= K for v in e):
        raise NumericsError(f"matrix is rank deficient mod p^{K}: exponents {e}")
    v = max(e) if e else 0
    return PAdicSigma(float(p) ** (-v), int(v), list(e))


# ---------------------------------------------------------------------------
# real inverse function theorem


def central_jacobian(phi: Callable, x, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(phi(x + e)) - np.asarray(phi(x - e))) / (2 * h))
    return np.array(cols).T


@dataclass
class SmoothMapProbe:
    """A C^2 map R^n -> R^m near x0 with a bound alpha on |d_j d_j' Phi|."""

    phi: Callable
    jac: Callable
    alpha: float
    x0: np.ndarray
    r0: float
    n: int
    m: int

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.m > self.n:
            raise NumericsError("need m <= n")
        if self.alpha < 0:
            raise NumericsError("alpha must be nonnegative")

    def audit(self, points=None, tol: float = 1e-6) -> float:
        """Largest relative gap between jac and central differences."""
        points = [self.x0] if points is None else points
        worst = 0.0
        for x in points:
            J = np.asarray(self.jac(x), dtype=float)
            F = central_jacobian(self.phi, x)
            worst = max(worst, float(np.max(np.abs(J - F)) / max(1.0, np.max(np.abs(J)))))
        if worst > tol:
            raise NumericsError(f"Jacobian oracle disagrees with finite differences ({worst:.2e})")
        return worst

    def sigma0(self) -> float:
        return sigma_real(self.jac(self.x0))

    def radius_limit(self, sigma0: float | None = None) -> float:
        """sup of admissible r: min(sigma0 / (2 m n max(alpha, sqrt(alpha))), r0)."""
        s = self.sigma0() if sigma0 is None else sigma0
        a = max(self.alpha, math.sqrt(self.alpha))
        if a == 0:
            return self.r0
        return min(s / (2 * self.m * self.n * a), self.r0)


def quadratic_probe(A, Q, b=None, x0=None, r0: float = 1.0) -> SmoothMapProbe:
    """Phi(x) = b + A (x - x0) + Q[:, j, k] (x - x0)_j (x - x0)_k.

    The second derivatives are the constant vectors Q[:, j, k] + Q[:, k, j],
    so alpha is their largest Euclidean norm.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    m, n = A.shape
    b = np.zeros(m) if b is None else np.asarray(b, dtype=float)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    S = Q + np.swapaxes(Q, 1, 2)

    def phi(x):
        d = np.asarray(x, dtype=float) - x0
        return b + A @ d + np.einsum("ijk,j,k->i", Q, d, d)

    def jac(x):
        d = np.asarray(x, dtype=float) - x0
        return A + np.einsum("ijk,k->ij", S, d)

    alpha = float(np.max(np.linalg.norm(S, axis=0)))
    return SmoothMapProbe(phi, jac, alpha, x0, r0, n, m)


@dataclass
class IFTResult:
    x: np.ndarray
    residual: float
    distance: float
    iterations: int
    solved: bool


def solve_real_ift(probe: SmoothMapProbe, y, r: float, tol: float = 1e-10, max_iter: int = 500,
                   check: bool = True) -> IFTResult:
    """Find x in the closed r-ball around x0 with Phi(x) = y.

    Preconditions (checked unless ``check`` is false): r below the
    admissible radius and |y - Phi(x0)| <= sigma0 r / 4.  The solver runs
    projected gradient descent with Armijo steps on |Phi(x) - y|^2 and
    switches to projected Gauss-Newton once the residual is below 1e-3.
    """
    y = np.asarray(y, dtype=float)
    x0 = probe.x0
    if check:
        s0 = probe.sigma0()
        if s0 <= 0:
            raise PreconditionError("dPhi(x0) is not surjective")
        if not 0 < r < probe.radius_limit(s0):
            raise PreconditionError(f"r = {r} is not below the admissible radius {probe.radius_limit(s0)}")
        if np.linalg.norm(y - probe.phi(x0)) > s0 * r / 4:
            raise PreconditionError("target lies outside the guaranteed ball")

    def proj(x):
        d = x - x0
        nd = np.linalg.norm(d)
        return x if nd <= r else x0 + d * (r / nd)

    x = x0.copy()
    F = probe.phi(x) - y
    val = float(F @ F)
    it = 0
    while math.sqrt(val) > tol and it < max_iter:
        it += 1
        J = np.asarray(probe.jac(x), dtype=float)
        if math.sqrt(val) < 1e-3:
            step = -np.linalg.lstsq(J, F, rcond=None)[0]
            xn = proj(x + step)
            Fn = probe.phi(xn) - y
            vn = float(Fn @ Fn)
            if vn < val:
                x, F, val = xn, Fn, vn
                continue
        g = 2 * J.T @ F
        t = 1.0 / max(1e-12, 2 * np.linalg.norm(J, 2) ** 2)
        while True:
            xn = proj(x - t * g)
            Fn = probe.phi(xn) - y
            vn = float(Fn @ Fn)
            if vn <= val - 1e-4 * float(g @ (x - xn)) or t < 1e-16:
                break
            t /= 2
        if vn >= val:
            break
        x, F, val = xn, Fn, vn
    res = math.sqrt(val)
    dist = float(np.linalg.norm(x - x0))
    return IFTResult(x, res, dist, it, bool(res <= tol and dist <= r * (1 + 1e-12)))


# ---------------------------------------------------------------------------
# p-adic inverse function theorem


@dataclass
class PAdicPolyMap:
    """Phi(x) = sum_i c_i (x - x0)^i with c_i in Z_p^m (dict multi-index -> list).

    Coefficients are integers read modulo p^K.
    """

    terms: dict
    x0: list
    p: int
    K: int
    m: int

    def __post_init__(self):
        self.x0 = [int(v) for v in self.x0]
        self.n = len(self.x0)
        mod = self.p**self.K
        self.terms = {tuple(int(a) for a in k): [int(c) % mod for c in v] for k, v in self.terms.items()}
        for k, v in self.terms.items():
            if len(k) != self.n or len(v) != self.m:
                raise NumericsError("term shapes do not match (n, m)")

    def __call__(self, x, W: int | None = None) -> list:
        mod = self.p ** (W or self.K)
        d = [(int(a) - b) % mod for a, b in zip(x, self.x0)]
        out = [0] * self.m
        for idx, c in self.terms.items():
            mon = 1
            for di, e in zip(d, idx):
                if e:
                    mon = mon * pow(di, e, mod) % mod
            for i in range(self.m):
                out[i] = (out[i] + c[i] * mon) % mod
        return out

    def jacobian(self, x, W: int | None = None) -> list:
        mod = self.p ** (W or self.K)
        d = [(int(a) - b) % mod for a, b in zip(x, self.x0)]
        J = [[0] * self.n for _ in range(self.m)]
        for idx, c in self.terms.items():
            for j in range(self.n):
                if idx[j] == 0:
                    continue
                mon = idx[j]
                for k, (dk, e) in enumerate(zip(d, idx)):
                    ee = e - 1 if k == j else e
                    if ee:
                        mon = mon * pow(dk, ee, mod) % mod
                for i in range(self.m):
                    J[i][j] = (J[i][j] + c[i] * mon) % mod
        return J


def random_padic_polymap(rng: np.random.Generator, p: int, K: int, n: int, m: int, k0: int,
                         degree: int = 3) -> PAdicPolyMap:
    """Polynomial map whose linear part U diag(p^k0, 1, ...) V has sigma = p^-k0."""
    mod = p**K

    def unimodular(size):
        while True:
            M = [[padic.random_zp(rng, p, K) for _ in range(size)] for _ in range(size)]
            if padic.det_mod(np.array(M, dtype=object), p) % p:
                return M

    U, V = unimodular(m), unimodular(n)
    D = [[(p**k0 if (i == j and i == 0) else int(i == j)) for j in range(n)] for i in range(m)]
    L = np.dot(np.dot(np.array(U, dtype=object), np.array(D, dtype=object)), np.array(V, dtype=object)) % mod
    x0 = [padic.random_zp(rng, p, K) for _ in range(n)]
    terms = {tuple([0] * n): [padic.random_zp(rng, p, K) for _ in range(m)]}
    for j in range(n):
        idx = [0] * n
        idx[j] = 1
        terms[tuple(idx)] = [int(L[i, j]) for i in range(m)]
    for deg in range(2, degree + 1):
        for idx in itertools.product(range(deg + 1), repeat=n):
            if sum(idx) == deg:
                terms[tuple(idx)] = [padic.random_zp(rng, p, K) for _ in range(m)]
    return PAdicPolyMap(terms, x0, p, K, m)


def _vmin(vec, p, W):
    return min((padic.int_valuation(int(v), p, W) for v in vec), default=W)


def solve_padic_ift(phi: PAdicPolyMap, y, k0: int, l: int, max_iter: int = 64) -> list:
    """Hensel-Newton preimage x = x0 mod p^l with Phi(x) = y mod p^K.

    Preconditions: sigma(dPhi(x0)) >= p^-k0, l >= k0 + 1 and
    Phi(x0) = y mod p^(k0 + l).
    """
    p, K = phi.p, phi.K
    if l < k0 + 1:
        raise PreconditionError("need l >= k0 + 1")
    W = K + 2 * k0 + 2
    mod = p**W
    J0 = phi.jacobian(phi.x0, W)
    sig = sigma_padic(J0, p, W)
    if sig.exponent > k0:
        raise PreconditionError(f"sigma(dPhi(x0)) = p^-{sig.exponent} < p^-{k0}")
    y = [int(v) for v in y]
    F0 = [(a - b) % p**K for a, b in zip(phi(phi.x0), y)]
    if _vmin(F0, p, K) < k0 + l:
        raise PreconditionError("target outside the ball of radius p^-(k0 + l) around Phi(x0)")
    x = list(phi.x0)
    for _ in range(max_iter):
        F = [(a - b) % mod for a, b in zip(phi(x, W), y)]
        if _vmin(F, p, W) >= K:
            break
        J = phi.jacobian(x, W)
        delta, ob = padic.solve_mod(J, F, p, W)
        x = [(a - d) % mod for a, d in zip(x, delta)]
    else:
        raise NumericsError("Hensel iteration did not converge")
    x = [v % p**K for v in x]
    if _vmin([(a - b) % p**K for a, b in zip(x, phi.x0)], p, K) < l:
        raise NumericsError("preimage left the ball of radius p^-l")
    return x


# ---------------------------------------------------------------------------
# BCH


def _br(a, b, bracket):
    return bracket(a, b)


def bch(x, y, order: int = 4, bracket: Callable | None = None) -> np.ndarray:
    """Baker-Campbell-Hausdorff series of log(exp x exp y) through the given degree (1..5).

    ``bracket`` defaults to the su(2) coordinate bracket 2 (x cross y); pass
    the matrix commutator to work with matrices.
    """
    if not 1 <= order <= 5:
        raise NumericsError("order must be between 1 and 5")
    x = np.asarray(x)
    y = np.asarray(y)
    if _norm(x) >= 0.5 or _norm(y) >= 0.5:
        raise NumericsError("bch needs |x|, |y| < 1/2")
    B = bracket or lie.su2_bracket
    z = x + y
    if order >= 2:
        xy = B(x, y)
        z = z + xy / 2
    if order >= 3:
        xxy = B(x, xy)
        yyx = B(y, B(y, x))
        z = z + (xxy + yyx) / 12
    if order >= 4:
        z = z - B(y, xxy) / 24
    if order >= 5:
        yx = -xy
        z = z - (B(y, B(y, yyx)) + B(x, B(x, xxy))) / 720
        z = z + (B(x, B(y, yyx)) + B(y, B(x, xxy))) / 360
        z = z + (B(y, B(x, B(y, xy))) + B(x, B(y, B(x, yx)))) / 120
    return z


def _norm(a) -> float:
    a = np.asarray(a)
    if a.ndim == 2:
        return float(np.linalg.norm(a, 2))
    return float(np.linalg.norm(a))


def _log2_minus_exp_coeffs(N: int) -> list:
    """Taylor coefficients c_n of -log(2 - e^u) for n <= N."""
    # -log(2 - e^u) = sum_k (e^u - 1)^k / k ; build by power series arithmetic
    e1 = [0.0] + [1.0 / math.factorial(n) for n in range(1, N + 1)]
    out = [0.0] * (N + 1)
    power = [1.0] + [0.0] * N
    for k in range(1, N + 1):
        power = [sum(power[i] * e1[n - i] for i in range(n + 1)) for n in range(N + 1)]
        for n in range(N + 1):
            out[n] += power[n] / k
    return out


_C = _log2_minus_exp_coeffs(80)


def bch_tail_bound(nx: float, ny: float, order: int, bracket_const: float = 2.0) -> float:
    """Bound on the BCH terms of degree > order.

    With |[a, b]| <= beta |a| |b| the degree-n term of the Dynkin series is
    at most beta^(n-1) c_n (|x| + |y|)^n / n, where c_n are the Taylor
    coefficients of -log(2 - e^u).  Returns inf outside the convergence
    radius beta (|x| + |y|) < log 2.
    """
    s = bracket_const * (nx + ny)
    if s >= math.log(2):
        return math.inf
    tail = 0.0
    for n in range(order + 1, len(_C)):
        tail += _C[n] * s**n / (n * bracket_const)
    # geometric remainder past the table: c_n <= (1/log 2)^n
    q = s / math.log(2)
    tail += q ** len(_C) / (1 - q) / bracket_const
    return tail


def bch_exact_su2(x, y) -> np.ndarray:
    """log(exp x exp y) in su(2) coordinates through dense matrices."""
    return lie.su2_log(lie.su2_exp(x) @ lie.su2_exp(y))


def commutator_log_su2(x, y) -> np.ndarray:
    """log(exp x exp y exp -x exp -y)."""
    g, h = lie.su2_exp(x), lie.su2_exp(y)
    return lie.su2_log(g @ h @ g.conj().T @ h.conj().T)


@dataclass
class BCHCalibration:
    Cbar: float
    commutator_C: dict
    samples: int


def calibrate_bch(rng: np.random.Generator, samples: int = 1000, radius: float = 0.05,
                  etas=(0.1, 0.05, 0.025)) -> BCHCalibration:
    """Empirical C-bar in |x#y - x - y| <= C-bar |x||y| and the commutator constant per eta."""
    cbar = 0.0
    for _ in range(samples):
        x = _ball_point(rng, radius)
        y = _ball_point(rng, radius)
        z = bch_exact_su2(x, y)
        cbar = max(cbar, np.linalg.norm(z - x - y) / (np.linalg.norm(x) * np.linalg.norm(y)))
    cs = {}
    for eta in etas:
        c = 0.0
        for _ in range(samples):
            x = _ball_point(rng, 1.0)
            y = _ball_point(rng, 1.0)
            e = commutator_log_su2(eta * x, eta * y) - eta**2 * lie.su2_bracket(x, y)
            c = max(c, np.linalg.norm(e) / eta**3)
        cs[float(eta)] = float(c)
    return BCHCalibration(float(cbar), cs, samples)


def _ball_point(rng, radius):
    u = rng.normal(size=3)
    return u / np.linalg.norm(u) * radius * rng.random() ** (1 / 3)


# ---------------------------------------------------------------------------
# zonotopes


def icosphere(depth: int) -> np.ndarray:
    """Vertices of the icosahedron subdivided ``depth`` times (unit vectors)."""
    t = (1 + 5**0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4), (11, 10, 2),
             (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5), (2, 4, 11),
             (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    V = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(depth):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                v = V[a] + V[b]
                V.append(v / np.linalg.norm(v))
                cache[key] = len(V) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(V)


@dataclass
class InradiusReport:
    value: float
    direction: np.ndarray
    grid_value: float
    method: str


def zonotope_inradius(vectors, depth: int = 5, rng: np.random.Generator | None = None,
                      n_dirs: int = 20000) -> InradiusReport:
    """Largest r with the r-ball inside {sum c_i v_i : |c_i| <= 1}.

    This is min over unit u of h(u) = sum |<u, v_i>|.  In dimensions 2 and 3
    h is linear on the cones cut out by the hyperplanes v_i-perp, and on a
    great-circle arc where it is positive it has the form R cos(t - t0),
    whose minimum sits at an endpoint; so the minimum is attained at a
    direction orthogonal to d - 1 of the v_i, and those finitely many
    candidates are checked exactly.  The icosphere grid value is reported
    alongside as a cross-check.  Higher dimensions use random directions.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    d = V.shape[1]

    def h(U):
        return np.sum(np.abs(U @ V.T), axis=-1)

    if np.linalg.matrix_rank(V, tol=1e-12) < d:
        # a direction orthogonal to all vectors gives 0
        _, _, vt = np.linalg.svd(V)
        return InradiusReport(0.0, vt[-1], 0.0, "degenerate")
    if d == 3:
        cands = []
        for a, b in itertools.combinations(range(len(V)), 2):
            c = np.cross(V[a], V[b])
            nc = np.linalg.norm(c)
            if nc > 1e-12 * np.linalg.norm(V[a]) * np.linalg.norm(V[b]):
                cands.append(c / nc)
        C = np.array(cands)
        vals = h(C)
        k = int(np.argmin(vals))
        G = icosphere(depth)
        return InradiusReport(float(vals[k]), C[k], float(np.min(h(G))), "exact-vertices")
    if d == 2:
        C = np.array([[-v[1], v[0]] / np.linalg.norm(v) for v in V if np.linalg.norm(v) > 0])
        vals = h(C)
        k = int(np.argmin(vals))
        ang = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        G = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return InradiusReport(float(vals[k]), C[k], float(np.min(h(G))), "exact-vertices")
    rng = rng or np.random.default_rng(0)
    U = rng.normal(size=(n_dirs, d))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    vals = h(U)
    k = int(np.argmin(vals))
    return InradiusReport(float(vals[k]), U[k], float(vals[k]), "sampled")


# ---------------------------------------------------------------------------
# SU(2) probes


def _group_comm(g, h):
    return g @ h @ g.conj().T @ h.conj().T


def _sample_ball_su2(rng, rho, size):
    return lie.random_su2_near_identity(rng, rho, size, boundary_frac=0.0)


@dataclass
class BoundedGenerationReport:
    sigma0: float
    alpha: float
    r: float
    jacobian_audit: float
    inradius: float
    solved: int
    targets: int
    degenerate: bool
    failures: list = field(default_factory=list)


def bounded_generation_map(h: np.ndarray, gs, x):
    """Phi(t) = log prod_i g_i [h, exp(t_i x)] g_i^-1 in su(2) coordinates."""
    x = np.asarray(x, dtype=float)

    def phi(t):
        P = np.eye(2, dtype=complex)
        for ti, g in zip(t, gs):
            P = P @ g @ _group_comm(h, lie.su2_exp(ti * x)) @ g.conj().T
        return lie.su2_log(P)

    return phi


def _measure_alpha(phi, n, r0, rng, samples=40, step=1e-3) -> float:
    """Largest |d_j d_k Phi| seen at sampled points of the r0-ball (central differences)."""
    best = 0.0
    pts = [np.zeros(n)] + [(_unit(rng, n) * r0 * rng.random() ** (1 / n)) for _ in range(samples)]
    E = np.eye(n) * step
    for x in pts:
        for j in range(n):
            for k in range(j, n):
                v = (phi(x + E[j] + E[k]) - phi(x + E[j] - E[k]) - phi(x - E[j] + E[k]) + phi(x - E[j] - E[k])) / (
                    4 * step * step)
                best = max(best, float(np.linalg.norm(v)))
    return best


def _unit(rng, n):
    u = rng.normal(size=n)
    return u / np.linalg.norm(u)


def bounded_generation_probe(h: np.ndarray, rho: float, x, rng: np.random.Generator, n_targets: int = 50,
                             r0: float = 1.0, safety: float = 1.5, r_fraction: float = 0.9) -> BoundedGenerationReport:
    """Measure sigma0 and alpha for the 9-fold product map and solve sampled targets.

    The g_i are drawn from the rho-ball, sigma0 = sigma(dPhi(0)) uses the
    analytic differential sum_i c_i Ad(g_i)(Ad(h) - I)x (checked against
    central differences), alpha is the largest sampled second derivative
    times ``safety``, and r is ``r_fraction`` of the admissible radius.
    """
    if np.linalg.norm(h - np.eye(2), 2) > 0.25 + 1e-12 or not 0 < rho <= 0.25:
        raise PreconditionError("need |h - I| <= 1/4 and 0 < rho <= 1/4")
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    n = 9
    gs = list(_sample_ball_su2(rng, rho, n))
    w = (lie.ad_matrix_su2(h).T - np.eye(3)) @ x
    cols = np.array([lie.ad_matrix_su2(g).T @ w for g in gs]).T
    phi = bounded_generation_map(h, gs, x)
    num = central_jacobian(phi, np.zeros(n))
    audit = float(np.max(np.abs(num - cols)) / max(1.0, np.max(np.abs(cols))))
    s0 = sigma_real(cols)
    inr = zonotope_inradius(cols.T).value
    if s0 < 1e-12:
        return BoundedGenerationReport(s0, 0.0, 0.0, audit, inr, 0, 0, True)
    alpha = safety * _measure_alpha(phi, n, r0, rng)

    def jac(t):
        return central_jacobian(phi, t)

    probe = SmoothMapProbe(phi, jac, alpha, np.zeros(n), r0, n, 3)
    r = r_fraction * probe.radius_limit(s0)
    solved, fails = 0, []
    for _ in range(n_targets):
        y = _unit(rng, 3) * (s0 * r / 4) * rng.random() ** (1 / 3)
        res = solve_real_ift(probe, y, r)
        if res.solved:
            solved += 1
        else:
            fails.append({"target": y.tolist(), "residual": res.residual, "distance": res.distance})
    return BoundedGenerationReport(s0, alpha, r, audit, inr, solved, n_targets, False, fails)


def su2_algebra_radius(rho: float) -> float:
    """|a| bound for exp(a) in the rho-ball: |exp(a) - I| = 2 sin(|a|/2)."""
    return 2 * math.asin(min(rho, 2.0) / 2)


@dataclass
class CommutatorSolution:
    g1: np.ndarray
    g2: np.ndarray
    error: float
    inside: bool


def commutator_surjectivity(rho1: float, rho2: float, target: np.ndarray, c_hat: float | None = None,
                            tol: float = 1e-12, max_iter: int = 100) -> CommutatorSolution:
    """Find g1 in the rho1-ball and g2 in the rho2-ball with [g1, g2] = target.

    Starts from x = a sqrt(|z| t1/(2 t2)), y = b sqrt(|z| t2/(2 t1)) where
    z = log(target), a and b are orthonormal with a x b along z (so that the
    linearisation [x, y] = 2 x cross y equals z) and t_i are the Lie-algebra
    radii; then runs minimum-norm Newton on (x, y) -> log [exp x, exp y] - z.
    """
    if c_hat is not None and np.linalg.norm(target - np.eye(2), 2) > c_hat * rho1 * rho2 * (1 + 1e-12):
        raise PreconditionError("target outside the calibrated ball")
    z = lie.su2_log(target)
    nz = float(np.linalg.norm(z))
    t1, t2 = su2_algebra_radius(rho1), su2_algebra_radius(rho2)
    if nz == 0:
        I = np.eye(2, dtype=complex)
        return CommutatorSolution(I, I, 0.0, True)
    u = z / nz
    a = np.cross(u, [1.0, 0, 0] if abs(u[0]) < 0.9 else [0, 1.0, 0])
    a /= np.linalg.norm(a)
    b = np.cross(u, a)
    v = np.concatenate([a * math.sqrt(nz * t1 / (2 * t2)), b * math.sqrt(nz * t2 / (2 * t1))])

    def F(v):
        return commutator_log_su2(v[:3], v[3:]) - z

    Fv = F(v)
    for _ in range(max_iter):
        if np.linalg.norm(Fv) <= tol:
            break
        J = central_jacobian(F, v, h=1e-7)
        step = np.linalg.lstsq(J, Fv, rcond=None)[0]
        s = 1.0
        while s > 1e-6:
            vn = v - s * step
            Fn = F(vn)
            if np.linalg.norm(Fn) < np.linalg.norm(Fv):
                break
            s /= 2
        if np.linalg.norm(Fn) >= np.linalg.norm(Fv):
            break
        v, Fv = vn, Fn
    g1, g2 = lie.su2_exp(v[:3]), lie.su2_exp(v[3:])
    err = float(np.linalg.norm(_group_comm(g1, g2) @ target.conj().T - np.eye(2), 2))
    inside = bool(np.linalg.norm(g1 - np.eye(2), 2) <= rho1 * (1 + 1e-12)
                  and np.linalg.norm(g2 - np.eye(2), 2) <= rho2 * (1 + 1e-12))
    return CommutatorSolution(g1, g2, err, inside)


CALIBRATION_VERSION = 1
DEFAULT_CALIBRATION = os.path.join(os.path.dirname(__file__), "data", "calibration.json")


def _all_solved(c, rho1, rho2, dirs, tol):
    for u in dirs:
        R = c * rho1 * rho2
        # |exp(a) - I| = 2 sin(|a|/2) = R
        a = u * 2 * math.asin(R / 2)
        sol = commutator_surjectivity(rho1, rho2, lie.su2_exp(a))
        if not (sol.inside and sol.error <= tol):
            return False
    return True


def calibrate_commutator_constant(rho1: float, rho2: float, rng: np.random.Generator, n_dirs: int = 20,
                                  tol: float = 1e-9, iters: int = 20) -> float:
    """Largest c (by bisection on [0, 2]) such that sampled targets on the sphere of
    radius c rho1 rho2 are all commutators of elements of the two balls."""
    dirs = [_unit(rng, 3) for _ in range(n_dirs)]
    lo, hi = 0.0, 2.0
    if _all_solved(hi, rho1, rho2, dirs, tol):
        return hi
    for _ in range(iters):
        mid = (lo + hi) / 2
        if _all_solved(mid, rho1, rho2, dirs, tol):
            lo = mid
        else:
            hi = mid
    return lo


def save_calibration(values: dict, path: str = DEFAULT_CALIBRATION) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump({"version": CALIBRATION_VERSION, **values}, fh, indent=1, sort_keys=True)


def load_calibration(path: str = DEFAULT_CALIBRATION) -> dict:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("version") != CALIBRATION_VERSION:
        raise NumericsError(f"calibration file version {d.get('version')} != {CALIBRATION_VERSION}")
    return d


def calibrate_all(seed: int = 20240601, samples: int = 1000) -> dict:
    """Values stored in the calibration file: BCH constants and the commutator constant."""
    ss = np.random.SeedSequence(seed)
    r1, r2 = (np.random.default_rng(s) for s in ss.spawn(2))
    cal = calibrate_bch(r1, samples=samples)
    c_hat = calibrate_commutator_constant(0.1, 0.1, r2)
    return {
        "seed": seed,
        "samples": samples,
        "bch_Cbar": cal.Cbar,
        "commutator_expansion_C": {str(k): v for k, v in cal.commutator_C.items()},
        "commutator_expansion_C_max": max(cal.commutator_C.values()),
        "commutator_c_hat": c_hat,
        "commutator_rho": [0.1, 0.1],
    }
