"""Approximate homomorphisms and their linearisation.

A linear map T between Lie algebras with fixed bases is stored row-indexed,
T(e_j) = sum_s x[j, s] e_s.  T is a Lie ring homomorphism exactly when the
quadratic residuals

    f[j, k, r] = sum_{a, b} c2[a, b, r] x[j, a] x[k, b] - sum_i c1[j, k, i] x[i, r]

all vanish; this is the coefficient of e_r in [T e_j, T e_k] - T[e_j, e_k].
Real maps are projected onto this variety by Gauss-Newton and p-adic ones
lifted by Hensel-Newton through a Smith form of the Jacobian.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lie, padic
from .groups import GroupSpec, PAdicSpecialLinear, SpecialUnitary
from .padic import CongruenceElement, DomainError, PAdicMatrix


class HomError(ValueError):
    pass


# ---------------------------------------------------------------------------
# structures and maps


@dataclass
class LieStructure:
    """Structure constants c[j, k, s] with [e_j, e_k] = sum_s c[j, k, s] e_s."""

    c: np.ndarray
    field: str = "real"
    name: str = ""

    def __post_init__(self):
        c = np.asarray(self.c)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[0] != c.shape[2]:
            raise HomError("structure constants must have shape (d, d, d)")
        if self.field == "padic":
            c = c.astype(object)
            if np.any((c + np.swapaxes(c, 0, 1)) != 0):
                raise HomError("structure constants are not antisymmetric")
        else:
            c = c.astype(float)
            if np.max(np.abs(c + np.swapaxes(c, 0, 1)), initial=0) > 1e-12:
                raise HomError("structure constants are not antisymmetric")
        if lie.jacobi_residual(np.asarray(c, dtype=float)) > 1e-12:
            raise HomError("structure constants violate the Jacobi identity")
        self.c = c

    @property
    def d(self) -> int:
        return self.c.shape[0]

    @classmethod
    def su2(cls) -> "LieStructure":
        return cls(lie.SU2_STRUCTURE, "real", "su2")

    @classmethod
    def sl2(cls, field: str = "padic") -> "LieStructure":
        return cls(lie.SL2_STRUCTURE, field, "sl2")


@dataclass
class LinearLieMap:
    """Coefficient matrix x (d1 x d2); p-adic maps also carry (p, K)."""

    x: np.ndarray
    p: int | None = None
    K: int | None = None
    basis: tuple = ("", "")

    def __post_init__(self):
        if self.p is None:
            self.x = np.asarray(self.x, dtype=float)
            if not np.all(np.isfinite(self.x)):
                raise HomError("coefficients must be finite")
        else:
            m = self.p**self.K
            x = np.empty(np.shape(self.x), dtype=object)
            for idx, v in np.ndenumerate(np.asarray(self.x, dtype=object)):
                x[idx] = int(v) % m
            self.x = x

    def apply(self, a) -> np.ndarray:
        """Coordinates of T(sum a_j e_j)."""
        a = np.asarray(a)
        out = a @ self.x
        if self.p is not None:
            out = out % self.p**self.K
        return out

    def reduce(self, K: int) -> "LinearLieMap":
        if self.p is None or K > self.K:
            raise HomError("can only reduce a p-adic map to lower precision")
        return LinearLieMap(self.x, self.p, K, self.basis)

    def to_json(self) -> str:
        return json.dumps({
            "x": [[str(v) if self.p else float(v) for v in row] for row in self.x],
            "p": self.p, "K": self.K, "basis": list(self.basis),
        })

    @classmethod
    def from_json(cls, s: str) -> "LinearLieMap":
        d = json.loads(s)
        conv = int if d["p"] else float
        return cls(np.array([[conv(v) for v in row] for row in d["x"]], dtype=object if d["p"] else float),
                   d["p"], d["K"], tuple(d["basis"]))


@dataclass
class HomResidualReport:
    values: np.ndarray  # shape (d1, d1, d2)
    max_abs: float | None = None
    min_valuation: int | None = None
    p: int | None = None
    K: int | None = None

    @property
    def is_zero(self) -> bool:
        if self.p is None:
            return self.max_abs == 0
        return self.min_valuation >= self.K

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("j,k,r,value\n")
            for (j, k, r), v in np.ndenumerate(self.values):
                fh.write(f"{j},{k},{r},{v}\n")


def _residual_array(x, c1, c2, modulus=None):
    if modulus is None:
        x = np.asarray(x, dtype=float)
        quad = np.einsum("abr,ja,kb->jkr", c2, x, x)
        lin = np.einsum("jki,ir->jkr", c1, x)
        return quad - lin
    x = np.asarray(x, dtype=object)
    c1 = np.asarray(c1, dtype=object)
    c2 = np.asarray(c2, dtype=object)
    d1, d2 = x.shape
    out = np.empty((d1, d1, d2), dtype=object)
    for j in range(d1):
        for k in range(d1):
            Tj, Tk = x[j], x[k]
            br = [sum(c2[a, b, r] * Tj[a] * Tk[b] for a in range(d2) for b in range(d2) if c2[a, b, r])
                  for r in range(d2)]
            lin = [sum(c1[j, k, i] * x[i, r] for i in range(d1) if c1[j, k, i]) for r in range(d2)]
            for r in range(d2):
                out[j, k, r] = int(br[r] - lin[r]) % modulus
    return out


def hom_residuals(theta: LinearLieMap, s1: LieStructure, s2: LieStructure) -> HomResidualReport:
    """All f[j, k, r]; exact modulo p^K for p-adic maps."""
    d1, d2 = np.shape(theta.x)
    if (s1.d, s2.d) != (d1, d2):
        raise HomError(f"map is {d1}x{d2} but structures have dimensions {s1.d}, {s2.d}")
    if theta.p is None:
        vals = _residual_array(theta.x, s1.c.astype(float), s2.c.astype(float))
        return HomResidualReport(vals, max_abs=float(np.max(np.abs(vals), initial=0.0)))
    m = theta.p**theta.K
    vals = _residual_array(theta.x, s1.c, s2.c, m)
    v = min((padic.int_valuation(int(a), theta.p, theta.K) for a in vals.ravel()), default=theta.K)
    return HomResidualReport(vals, min_valuation=int(v), p=theta.p, K=theta.K)


def residual_jacobian(x, c1, c2) -> np.ndarray:
    """d f[j,k,r] / d x[a,b] as a (d1*d1*d2) x (d1*d2) array (real or integer)."""
    x = np.asarray(x)
    d1, d2 = x.shape
    obj = x.dtype == object
    dt = object if obj else float
    c1 = np.asarray(c1, dtype=dt)
    c2 = np.asarray(c2, dtype=dt)
    J = np.zeros((d1, d1, d2, d1, d2), dtype=dt)
    if obj:
        J[...] = 0
    # quadratic part: c2[b, i, r] x[k, i] when a == j, plus c2[i, b, r] x[j, i] when a == k
    A = np.einsum("bir,ki->kbr", c2, x) if not obj else _obj_einsum_left(c2, x)
    B = np.einsum("ibr,ji->jbr", c2, x) if not obj else _obj_einsum_right(c2, x)
    for j in range(d1):
        for k in range(d1):
            J[j, k, :, j, :] += A[k].T
            J[j, k, :, k, :] += B[j].T
            for i in range(d1):
                if c1[j, k, i]:
                    for r in range(d2):
                        J[j, k, r, i, r] -= c1[j, k, i]
    return J.reshape(d1 * d1 * d2, d1 * d2)


def _obj_einsum_left(c2, x):
    d2 = c2.shape[0]
    d1 = x.shape[0]
    out = np.zeros((d1, d2, d2), dtype=object)
    for k in range(d1):
        for b in range(d2):
            for r in range(d2):
                out[k, b, r] = sum(c2[b, i, r] * x[k, i] for i in range(d2))
    return out


def _obj_einsum_right(c2, x):
    d2 = c2.shape[0]
    d1 = x.shape[0]
    out = np.zeros((d1, d2, d2), dtype=object)
    for j in range(d1):
        for b in range(d2):
            for r in range(d2):
                out[j, b, r] = sum(c2[i, b, r] * x[j, i] for i in range(d2))
    return out


# ---------------------------------------------------------------------------
# partial maps on SU(2) and on p-adic groups


@dataclass
class PartialMap:
    """A map f defined on the ball of radius rho around 1 in ``domain``."""

    domain: GroupSpec
    target: GroupSpec
    rho: float
    oracle: Callable

    def __post_init__(self):
        e1, e2 = self.domain.identity(), self.target.identity()
        if self.target.dist(self.oracle(e1), e2) > 1e-12:
            raise HomError("a partial map must send 1 to 1")

    def in_domain(self, g) -> bool:
        return self.domain.dist(g, self.domain.identity()) <= self.rho

    def __call__(self, g):
        if not self.in_domain(g):
            raise HomError("point outside the domain ball")
        return self.oracle(g)


def approx_hom_defect(f: PartialMap, probes: Sequence) -> float:
    """Largest observed d(f(gh), f(g)f(h)) and d(f(g^-1), f(g)^-1) over probe pairs.

    This is a lower bound for the defect over the whole domain.
    """
    D, T = f.domain, f.target
    worst = 0.0
    for g, h in probes:
        gh = D.mul(g, h)
        for pt in (g, h, gh):
            if not f.in_domain(pt):
                raise HomError("probe outside the domain ball")
        fg, fh = f(g), f(h)
        worst = max(worst, float(T.dist(f(gh), T.mul(fg, fh))))
        worst = max(worst, float(T.dist(f(D.inv(g)), T.inv(fg))))
    return worst


def compare_to_reference(f: Callable, psi: Callable, probes: Sequence, target: GroupSpec) -> float:
    """sup over probes of d(f(g), psi(g))."""
    return max((float(target.dist(f(g), psi(g))) for g in probes), default=0.0)


def conjugation_map(g: np.ndarray, rho: float) -> PartialMap:
    S = SpecialUnitary(2)
    gi = g.conj().T
    return PartialMap(S, S, rho, lambda h: g @ h @ gi)


def noisy_conjugation_map(g: np.ndarray, rho: float, eps: float, rng: np.random.Generator,
                          mode: str = "smooth") -> PartialMap:
    """Conjugation by g followed by right multiplication with exp(eps N(log h)).

    ``smooth``: N(x) = A x / rho + B(x, x) / rho^2 with random A, B scaled so
    that |N| <= 1 on the ball |x| <= 2 rho; the perturbation vanishes at the
    identity, so f(1) = 1 and f is an approximate homomorphism.
    ``absolute``: N(x) is a fixed unit vector for x != 0 and 0 at x = 0, an
    output perturbation of size eps at every scale.
    """
    S = SpecialUnitary(2)
    gi = g.conj().T
    if mode == "smooth":
        A = rng.normal(size=(3, 3))
        Bq = rng.normal(size=(3, 3, 3))
        # |A x|/rho <= 2|A| and |B(x,x)|/rho^2 <= 4|B| on |x| <= 2 rho
        nA = np.linalg.norm(A, 2)
        nB = math.sqrt(np.sum(Bq**2))
        A = A / (4 * nA)
        Bq = Bq / (8 * nB)

        def N(x):
            return A @ x / rho + np.einsum("sab,a,b->s", Bq, x, x) / rho**2
    elif mode == "absolute":
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)

        def N(x):
            return v if np.any(x != 0) else np.zeros(3)
    else:
        raise HomError(f"unknown noise mode {mode!r}")

    def oracle(h):
        x = lie.su2_log(h)
        return g @ h @ gi @ lie.su2_exp(eps * N(x))

    return PartialMap(S, S, rho, oracle)


def theta_map(f: PartialMap, k: int, rho: float, x) -> np.ndarray:
    """theta_k(x) = log(f(exp(rho^k x))) / rho^k on su(2) coordinates."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) >= rho / 2 + 1e-15:
        raise HomError("theta_k needs |x| < rho/2")
    scale = rho**k
    y = f(lie.su2_exp(scale * x))
    if np.linalg.norm(y - np.eye(2), 2) >= 1:
        raise DomainError("image outside the principal logarithm domain")
    return lie.su2_log(y) / scale


@dataclass
class ThetaFit:
    theta: LinearLieMap
    residual: float
    probes: int


def fit_linear_theta(f: PartialMap, k: int, rho: float, mode: str = "basis", probes: np.ndarray | None = None,
                     rng: np.random.Generator | None = None, n_probes: int = 50) -> ThetaFit:
    """Linear approximation of theta_k.

    ``basis``: row i is theta_k((rho/2) e_i) / (rho/2), with a slight inward
    shrink so the argument sits strictly inside the ball.  ``lstsq``: least
    squares over a probe cloud.  The residual is the largest
    |theta_k(x) - theta x| over the probes.
    """
    t = 0.5 * rho * (1 - 1e-9)
    if probes is None:
        rng = rng or np.random.default_rng(0)
        u = rng.normal(size=(n_probes, 3))
        probes = u / np.linalg.norm(u, axis=1, keepdims=True) * (t * rng.random((n_probes, 1)))
    vals = np.array([theta_map(f, k, rho, x) for x in probes])
    if mode == "basis":
        x = np.array([theta_map(f, k, rho, t * e) / t for e in np.eye(3)])
    elif mode == "lstsq":
        x = np.linalg.lstsq(probes, vals, rcond=None)[0]
    else:
        raise HomError(f"unknown fit mode {mode!r}")
    res = float(np.max(np.linalg.norm(vals - probes @ x, axis=1))) if len(probes) else 0.0
    return ThetaFit(LinearLieMap(x, basis=("su2", "su2")), res, len(probes))


def theta_diagnostics(f: PartialMap, k: int, rho: float, x, y) -> dict:
    """Near-additivity, doubling and bracket defects of theta_k at (x, y)."""
    tk = lambda v, kk=k: theta_map(f, kk, rho, v)
    return {
        "additivity": float(np.linalg.norm(tk(np.add(x, y)) - tk(x) - tk(y))),
        "doubling": float(np.linalg.norm(theta_map(f, 2 * k, rho, x) - tk(x))),
        "bracket": float(np.linalg.norm(theta_map(f, 2 * k, rho, lie.su2_bracket(x, y))
                                        - lie.su2_bracket(tk(x), tk(y)))),
    }


# ---------------------------------------------------------------------------
# real projection


@dataclass
class ProjectionReport:
    theta: LinearLieMap
    residual: float
    distance: float
    sigma_min: float
    is_isomorphism: bool
    iterations: int
    converged: bool


def project_to_variety_real(theta: LinearLieMap, s1: LieStructure, s2: LieStructure, tol: float = 1e-10,
                            max_iter: int = 200) -> ProjectionReport:
    """Gauss-Newton on sum f^2 from ``theta`` (minimum-norm steps, halving on increase)."""
    c1, c2 = s1.c.astype(float), s2.c.astype(float)
    x0 = np.asarray(theta.x, dtype=float)
    x = x0.copy()
    shape = x.shape

    def resid(z):
        return _residual_array(z, c1, c2).ravel()

    F = resid(x)
    it = 0
    while np.max(np.abs(F), initial=0) > tol and it < max_iter:
        it += 1
        J = residual_jacobian(x, c1, c2)
        step = np.linalg.lstsq(J, F, rcond=None)[0].reshape(shape)
        t = 1.0
        cur = np.linalg.norm(F)
        while True:
            xn = x - t * step
            Fn = resid(xn)
            if np.linalg.norm(Fn) < cur or t < 1e-8:
                break
            t /= 2
        x, F = xn, Fn
    res = float(np.max(np.abs(F), initial=0))
    sv = np.linalg.svd(x, compute_uv=False)
    smin = float(sv[-1]) if len(sv) else 0.0
    square = shape[0] == shape[1]
    return ProjectionReport(LinearLieMap(x, basis=theta.basis), res, float(np.linalg.norm(x - x0, 2)), smin,
                            bool(square and smin > 1e-6 and res <= tol), it, res <= tol)


# ---------------------------------------------------------------------------
# p-adic lifting


@dataclass
class HenselReport:
    theta: LinearLieMap
    s: int
    valuations: list
    congruence: int  # valuation of lift - start
    elementary_divisors: list


def _int_matrix(x):
    return [[int(v) for v in row] for row in np.asarray(x, dtype=object)]


def _jacobian_divisors(x, c1, c2, p, m):
    J = residual_jacobian(np.asarray(x, dtype=object), c1, c2)
    _, e, _ = padic.smith_mod(_int_matrix(J), p, m)
    return e


def hensel_lift_hom(theta_bar: LinearLieMap, m: int, s1: LieStructure, s2: LieStructure, K: int) -> HenselReport:
    """Lift a Lie ring homomorphism mod p^m to one mod p^K.

    s is the largest exponent among the elementary divisors of the residual
    Jacobian at theta_bar that are below m/2; larger ones are treated as
    zero.  Requires residuals = 0 mod p^m and m > 2s.  Each Newton step
    solves J delta = F through the Smith form, and the residual valuation is
    asserted to satisfy v_next >= 2 v - 2 s.
    """
    p = theta_bar.p
    if p is None:
        raise HomError("hensel_lift_hom needs a p-adic map")
    if m > theta_bar.K:
        raise HomError("theta_bar is not known mod p^m")
    c1, c2 = s1.c, s2.c
    x = np.array(_int_matrix(theta_bar.x), dtype=object) % p**m
    start = x.copy()
    r0 = hom_residuals(LinearLieMap(x, p, m), s1, s2)
    if r0.min_valuation < m:
        raise HomError(f"residuals vanish only mod p^{r0.min_valuation}, not mod p^{m}")
    e = _jacobian_divisors(x, c1, c2, p, m)
    small = [v for v in e if 2 * v < m]
    s = max(small) if small else 0
    if not small or m <= 2 * s:
        raise HomError(f"Hensel criterion fails: m = {m}, measured s = {s}, divisors {e}")
    W = K + 2 * s + 2
    mod = p**W
    d1, d2 = x.shape
    vals = []
    while True:
        F = _residual_array(x, c1, c2, mod).ravel()
        v = min((padic.int_valuation(int(a), p, W) for a in F), default=W)
        if vals:
            need = min(2 * vals[-1] - 2 * s, W)
            if v < need:
                raise HomError(f"residual valuation did not double: {vals[-1]} -> {v} (s = {s})")
        vals.append(int(v))
        if v >= K:
            break
        J = residual_jacobian(x, c1, c2)
        U, ex, V = padic.smith_mod(_int_matrix(J), p, W)
        cb = [sum(U[i][k] * int(F[k]) for k in range(len(F))) % mod for i in range(len(F))]
        y = [0] * (d1 * d2)
        for i in range(min(len(ex), d1 * d2)):
            if ex[i] <= s:
                y[i] = cb[i] // p ** ex[i]
        delta = [sum(V[j][i] * y[i] for i in range(d1 * d2)) % mod for j in range(d1 * d2)]
        x = (x - np.array(delta, dtype=object).reshape(d1, d2)) % mod
        if len(vals) > 64:
            raise HomError("Newton iteration did not converge")
    lift = LinearLieMap(x, p, K, theta_bar.basis)
    diff = [(int(a) - int(b)) % p**K for a, b in zip(x.ravel(), start.ravel())]
    cong = min((padic.int_valuation(v, p, K) for v in diff), default=K)
    if cong < m - s:
        raise HomError("lift drifted further than p^(m - s) from the start")
    return HenselReport(lift, s, vals, int(cong), list(e))


def conjugator_of(L: LinearLieMap) -> tuple:
    """Find h in GL_2 with Ad(h) = L on sl_2 (mod p^K), if any.

    Solves h E_j = L(E_j) h for the basis (e, f, h); returns (h as a 2x2
    integer array, precision to which Ad(h) = L holds).
    """
    p, K = L.p, L.K
    mod = p**K
    E = [np.array(b, dtype=object) for b in lie.SL2_BASIS]
    rows = []
    for j in range(3):
        co = [int(v) for v in L.x[j]]
        img = co[0] * E[0] + co[1] * E[1] + co[2] * E[2]
        # unknown h = [[h0, h1], [h2, h3]]; entries of h E_j - img h
        for a in range(2):
            for b in range(2):
                row = [0] * 4
                for c in range(2):
                    row[2 * a + c] += int(E[j][c, b])
                    row[2 * c + b] -= int(img[a, c])
                rows.append([v % mod for v in row])
    U, e, V = padic.smith_mod(rows, p, K)
    k = max(range(4), key=lambda i: e[i])
    h = np.array([V[i][k] for i in range(4)], dtype=object).reshape(2, 2)
    if all(int(v) % p == 0 for v in h.ravel()):
        raise HomError("no unit conjugator found")
    Ad = lie.ad_matrix_sl2_mod(h.tolist(), mod)
    det = (int(h[0, 0]) * int(h[1, 1]) - int(h[0, 1]) * int(h[1, 0])) % mod
    # Ad(h) of a non-SL matrix is det(h) times the conjugation map
    dinv = padic.inv_mod(det, mod)
    diff = [(int(a) * dinv - int(b)) % mod for a, b in zip(Ad.ravel(), L.x.ravel())]
    prec = min((padic.int_valuation(v, p, K) for v in diff), default=K)
    return h, int(prec)


def projective_distance_valuation(h, g, p: int, K: int) -> int:
    """Largest t with lambda h = g mod p^t for some unit lambda."""
    mod = p**K
    h = [int(v) % mod for v in np.asarray(h, dtype=object).ravel()]
    g = [int(v) % mod for v in np.asarray(g, dtype=object).ravel()]
    i = next((i for i in range(4) if h[i] % p), None)
    if i is None or g[i] % p == 0:
        return 0
    lam = g[i] * padic.inv_mod(h[i], mod) % mod
    return min((padic.int_valuation((lam * a - b) % mod, p, K) for a, b in zip(h, g)), default=K)


# ---------------------------------------------------------------------------
# the finite-log ladder


@dataclass
class LadderReport:
    k0: int
    m: int
    K: int
    shift: int
    l_m: int
    n_m: int
    theta_m: LinearLieMap
    is_lie_hom: bool
    degenerate: bool
    rank_mod_p: int
    ladder: list = field(default_factory=list)  # (l, n, LinearLieMap)


def critical_levels(k0: int, m: int) -> tuple:
    l = 2 * math.ceil(k0 * m / 3 + (2 * k0 - 2) / 3) - k0 + 1
    n = k0 * (m - 1) - 2
    return l, n


def _rank_mod_p(x, p) -> int:
    _, e, _ = padic.smith_mod(_int_matrix(x), p, 1)
    return sum(1 for v in e if v == 0)


def theta_ln(phi: Callable, p: int, K: int, l: int, n: int, shift: int) -> LinearLieMap:
    """theta_{l,n}: sl_2/p^{n-l} -> sl_2/p^{n-l} through finite logs on both sides."""
    prec = n - l
    rows = []
    for E in lie.SL2_BASIS:
        X = PAdicMatrix(p, max(prec, 1), np.array(E, dtype=object))
        g = padic.finite_log_inverse(X, l, K)
        h = phi(g.matrix)
        hc = CongruenceElement(h, l - shift)
        Y = padic.finite_log(hc, l - shift, n - shift)
        rows.append([int(v) for v in lie.sl2_coords_int(Y.entries.tolist())])
    return LinearLieMap(np.array(rows, dtype=object), p, max(prec, 1), ("sl2", "sl2"))


def quotient_hom_ladder(phi: Callable, p: int, k0: int, m: int, rng: np.random.Generator | None = None,
                        n_tests: int = 10) -> LadderReport:
    """Lie ring maps extracted from a homomorphism SL_2 -> SL_2(Z/p^{k0 m}).

    ``phi`` takes and returns PAdicMatrix values at precision K = k0 m.  The
    homomorphism property is tested on random pairs from the level-k0
    congruence subgroup.  The level drop of phi is measured on basis
    exponentials (at most k0 - 1 is allowed) and used as the shift between
    source and target finite logs.
    """
    K = k0 * m
    rng = rng or np.random.default_rng(0)
    l_m, n_m = critical_levels(k0, m)
    if not (k0 < l_m <= n_m <= K):
        raise HomError(f"critical levels l_m = {l_m}, n_m = {n_m} do not satisfy k0 < l_m <= n_m <= k0 m "
                       f"for k0 = {k0}, m = {m}")
    G = PAdicSpecialLinear(2, p, K)
    for _ in range(n_tests):
        g1 = padic.padic_exp(padic.random_traceless(rng, 2, p, K).scale(p**k0)).matrix
        g2 = padic.padic_exp(padic.random_traceless(rng, 2, p, K).scale(p**k0)).matrix
        if phi(g1 @ g2) != phi(g1) @ phi(g2):
            raise HomError("phi fails the homomorphism test on the finite data")
    lt = k0 + 1
    shift = 0
    for E in lie.SL2_BASIS:
        g = padic.finite_log_inverse(PAdicMatrix(p, K, np.array(E, dtype=object)), lt, K).matrix
        shift = max(shift, lt - G.level_of(phi(g)))
    if shift > k0 - 1:
        raise HomError(f"phi lowers congruence levels by {shift} > k0 - 1")
    ladder = []
    for l in range(k0 + 1, l_m + 1):
        n = min(2 * l - 2 * k0 + 1, k0 * (m - 1))
        if n > l:
            ladder.append((l, n, theta_ln(phi, p, K, l, n, shift)))
    th = theta_ln(phi, p, K, l_m, n_m, shift)
    res = hom_residuals(th, LieStructure.sl2(), LieStructure.sl2())
    rank = _rank_mod_p(th.x, p)
    return LadderReport(k0, m, K, shift, l_m, n_m, th, res.is_zero, rank < 3, rank, ladder)
