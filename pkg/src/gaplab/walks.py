"""Random walks driven by finitely supported symmetric measures.

Convolution of measures, exact contraction factors on finite groups,
scale-eta diagnostics for functions, displacement of functions under a
generating set, and Schreier-type generators of finite-index subgroups.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .groups import FiniteGroup, GroupSpec, SpecialUnitary


@dataclass
class FiniteSupportMeasure:
    """Probability measure with finitely many atoms (payloads of ``spec``).

    Weights may be floats or Fractions; Fractions stay exact under convolution.
    """

    spec: GroupSpec
    points: list
    weights: list
    truncated_mass: float = 0.0

    def __post_init__(self):
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise ValueError("negative weight")
        total = sum(self.weights) + self.truncated_mass
        if abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {float(total)!r}, not 1")

    @classmethod
    def uniform(cls, spec: GroupSpec, points: Sequence, exact: bool = True) -> "FiniteSupportMeasure":
        n = len(points)
        w = Fraction(1, n) if exact else 1.0 / n
        merged = _merge(spec, list(points), [w] * n)
        return cls(spec, merged[0], merged[1])

    @classmethod
    def dirac(cls, spec: GroupSpec, point=None) -> "FiniteSupportMeasure":
        return cls(spec, [spec.identity() if point is None else point], [Fraction(1)])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        for g, w in zip(self.points, self.weights):
            gi = self.spec.inv(g)
            wi = sum(w2 for h, w2 in zip(self.points, self.weights) if _same(self.spec, h, gi))
            if abs(float(wi) - float(w)) > tol:
                return False
        return True

    def dense(self) -> np.ndarray:
        """Weight vector over a finite group (float)."""
        if not isinstance(self.spec, FiniteGroup):
            raise TypeError("dense() needs a finite group")
        v = np.zeros(self.spec.order)
        for g, w in zip(self.points, self.weights):
            v[g] += float(w)
        return v

    def __len__(self):
        return len(self.points)


def _same(spec, a, b) -> bool:
    if isinstance(spec, SpecialUnitary):
        return spec.dist(a, b) <= 1e-10
    if isinstance(spec, FiniteGroup):
        return a == b
    return spec.key(a) == spec.key(b)


def _merge(spec, points, weights):
    """Coalesce atoms: exact keys for discrete payloads, 1e-10 operator distance on SU(n)."""
    if isinstance(spec, SpecialUnitary):
        out_p, out_w = [], []
        buckets: dict = {}
        for g, w in zip(points, weights):
            key = tuple(np.round(np.concatenate([g.real.ravel(), g.imag.ravel()]) * 1e8).astype(np.int64))
            cands = buckets.setdefault(key[:4], [])
            for idx in cands:
                if spec.dist(out_p[idx], g) <= 1e-10:
                    out_w[idx] += w
                    break
            else:
                cands.append(len(out_p))
                out_p.append(g)
                out_w.append(w)
        return out_p, out_w
    acc: dict = {}
    first: dict = {}
    for g, w in zip(points, weights):
        k = g if isinstance(spec, FiniteGroup) else spec.key(g)
        if k in acc:
            acc[k] += w
        else:
            acc[k] = w
            first[k] = g
    return [first[k] for k in acc], [acc[k] for k in acc]


def convolve(mu: FiniteSupportMeasure, nu: FiniteSupportMeasure, max_atoms: int | None = None) -> FiniteSupportMeasure:
    """mu * nu, the law of xy with x ~ mu and y ~ nu independent.

    With ``max_atoms`` the lightest atoms beyond the cap are dropped and their
    mass is carried in ``truncated_mass``.
    """
    if mu.spec != nu.spec:
        raise ValueError("measures live on different groups")
    spec = mu.spec
    if isinstance(spec, FiniteGroup):
        acc: dict = {}
        for x, wx in zip(mu.points, mu.weights):
            row = spec.table[x]
            for y, wy in zip(nu.points, nu.weights):
                z = int(row[y])
                acc[z] = acc.get(z, 0) + wx * wy
        pts, wts = list(acc.keys()), list(acc.values())
    else:
        pts, wts = [], []
        for x, wx in zip(mu.points, mu.weights):
            for y, wy in zip(nu.points, nu.weights):
                pts.append(spec.mul(x, y))
                wts.append(wx * wy)
        pts, wts = _merge(spec, pts, wts)
    trunc = mu.truncated_mass + nu.truncated_mass
    if max_atoms is not None and len(pts) > max_atoms:
        order = sorted(range(len(pts)), key=lambda i: -float(wts[i]))
        keep = order[:max_atoms]
        trunc += float(sum(wts[i] for i in order[max_atoms:]))
        pts = [pts[i] for i in keep]
        wts = [wts[i] for i in keep]
    return FiniteSupportMeasure(spec, pts, wts, trunc)


def convolution_power(mu: FiniteSupportMeasure, ell: int, max_atoms: int | None = None) -> FiniteSupportMeasure:
    out = FiniteSupportMeasure.dirac(mu.spec)
    for _ in range(ell):
        out = convolve(out, mu, max_atoms)
    return out


# ---------------------------------------------------------------------------
# spectral gaps


@dataclass
class SpectralReport:
    lam: float
    lyapunov: float
    method: str
    dimension: int

    def __post_init__(self):
        self.lam = float(min(max(self.lam, 0.0), 1.0))
        self.lyapunov = math.inf if self.lam == 0 else -math.log(self.lam)

    def to_json(self) -> str:
        d = asdict(self)
        d["lyapunov"] = None if math.isinf(self.lyapunov) else self.lyapunov
        return json.dumps(d)


def convolution_matrix(G: FiniteGroup, weights: np.ndarray) -> np.ndarray:
    """Matrix of f -> mu * f: M[x, z] = mu(x z^-1)."""
    w = np.asarray(weights, dtype=float)
    return w[G.table[:, G.inverse]]


def spectral_gap_exact(G: FiniteGroup, mu: FiniteSupportMeasure, max_order: int = 10_000) -> SpectralReport:
    """lambda(mu) = norm of the convolution operator on L^2_0(G), by dense symmetric eigensolve."""
    if G.order > max_order:
        raise ValueError(f"group of order {G.order} exceeds the dense limit {max_order}")
    if not mu.is_symmetric():
        raise ValueError("measure is not symmetric")
    M = convolution_matrix(G, mu.dense())
    M = M - 1.0 / G.order
    ev = scipy.linalg.eigvalsh(M)
    return SpectralReport(float(np.max(np.abs(ev))), 0.0, "dense-eigvalsh", G.order - 1)


def cyclic_characters(n: int, include_trivial: bool = False) -> list:
    ks = range(0 if include_trivial else 1, n)
    return [(lambda x, k=k: np.exp(2j * np.pi * k * x / n)) for k in ks]


def fourier_coefficient(mu: FiniteSupportMeasure, chi: Callable) -> complex:
    return complex(sum(float(w) * chi(g) for g, w in zip(mu.points, mu.weights)))


def spectral_gap_abelian(characters: Iterable[Callable], mu: FiniteSupportMeasure, abelian: bool = True) -> SpectralReport:
    """sup |mu^(chi)| over the supplied nontrivial characters."""
    if not abelian:
        raise ValueError("character formula needs an abelian group")
    chars = list(characters)
    vals = [abs(fourier_coefficient(mu, c)) for c in chars]
    return SpectralReport(max(vals) if vals else 0.0, 0.0, "characters", len(chars))


# ---------------------------------------------------------------------------
# functions at scale eta


def smooth_at_scale(G: FiniteGroup, f: np.ndarray, eta: float) -> np.ndarray:
    """f_eta = f * P_eta: the average of f over the ball x 1_eta."""
    B = G.ball(eta)
    f = np.asarray(f)
    # (f * P_eta)(x) = avg_{b in B} f(x b^-1); the ball is symmetric
    return np.mean(f[G.table[:, G.inverse[B]]], axis=1)


def _l2(f) -> float:
    return float(np.sqrt(np.mean(np.abs(f) ** 2)))


@dataclass
class ScaleReport:
    averaging_ratio: float
    averaging_threshold: float
    averaging_ok: bool
    invariance_ratio: float
    invariance_threshold: float
    invariance_ok: bool


def lives_at_scale(G: FiniteGroup, f: np.ndarray, eta: float, a: float) -> ScaleReport:
    """Check averaging-to-zero at scale eta^(1/a) and almost invariance at scale eta^(a^2)."""
    if not (0 < a < 1 and 0 < eta < 1):
        raise ValueError("need 0 < a < 1 and 0 < eta < 1")
    nf = _l2(f)
    if nf == 0:
        raise ValueError("f is zero")
    r1 = _l2(smooth_at_scale(G, f, eta ** (1 / a))) / nf
    t1 = eta ** (1 / (2 * a))
    r2 = _l2(smooth_at_scale(G, f, eta ** (a * a)) - f) / nf
    t2 = eta ** (a / 2)
    return ScaleReport(r1, t1, r1 <= t1 + 1e-12, r2, t2, r2 <= t2 + 1e-12)


# ---------------------------------------------------------------------------
# displacement


@dataclass
class DisplacementReport:
    per_generator: list
    delta_f: float
    delta_candidate_min: float | None = None
    candidate_family: str = ""
    sandwich: dict = field(default_factory=dict)


def translate(G: FiniteGroup, w: int, f: np.ndarray) -> np.ndarray:
    """(w.f)(x) = f(w^-1 x)."""
    return np.asarray(f)[G.table[G.inverse[w], :]]


def displacement(G: FiniteGroup, omega: Sequence[int], f: np.ndarray, spectral: SpectralReport | None = None,
                 candidates: str | None = "auto") -> DisplacementReport:
    """delta_Omega(f) = max_w ||w.f - f|| / ||f|| on a finite group.

    The candidate-family minimum delta(Omega) is exact on cyclic groups via a
    linear program over character weights; otherwise it is the minimum over
    a few random mean-zero functions (an upper bound only).
    """
    f = np.asarray(f, dtype=complex)
    nf = _l2(f)
    if nf == 0 or abs(np.mean(f)) > 1e-12 * max(1.0, nf):
        raise ValueError("f must be nonzero and orthogonal to constants")
    per = [_l2(translate(G, w, f) - f) / nf for w in omega]
    rep = DisplacementReport(per, max(per))
    if candidates is not None:
        if G.descriptor.get("kind") == "cyclic":
            rep.delta_candidate_min = delta_cyclic_exact(G.order, [int(G.labels[w]) for w in omega])
            rep.candidate_family = "characters (linear program, exact)"
        else:
            rep.delta_candidate_min = delta_random_upper(G, omega, np.random.default_rng(0))
            rep.candidate_family = "random mean-zero functions and eigenvectors (upper bound)"
    if spectral is not None and rep.delta_candidate_min:
        Lb = min(spectral.lyapunov, 1.0)
        d = rep.delta_candidate_min
        rep.sandwich = {"L_bullet": Lb, "c1": Lb * len(omega) / d**2, "c2": Lb / d}
    return rep


def delta_cyclic_exact(n: int, omega: Sequence[int]) -> float:
    """inf over unit f in L^2_0(Z/n) of max_w ||w.f - f||.

    Writing f = sum a_k chi_k gives ||w.f - f||^2 = sum |a_k|^2 |chi_k(w) - 1|^2,
    so delta^2 is the value of: minimize t over probability vectors q on
    k = 1..n-1 subject to sum_k q_k |e(kw/n) - 1|^2 <= t for every w.
    """
    ks = np.arange(1, n)
    A = np.array([np.abs(np.exp(2j * np.pi * ks * w / n) - 1) ** 2 for w in omega])  # |Omega| x (n-1)
    m = len(ks)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((len(omega), 1))])
    b_ub = np.zeros(len(omega))
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                                 bounds=[(0, None)] * m + [(0, None)], method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(math.sqrt(max(res.fun, 0.0)))


def delta_random_upper(G: FiniteGroup, omega: Sequence[int], rng, trials: int = 16) -> float:
    """Upper bound for delta(Omega): minimum of delta_Omega over eigenvectors of P_Omega and random functions."""
    w = np.zeros(G.order)
    for g in omega:
        w[g] += 1.0 / len(omega)
    M = convolution_matrix(G, w)
    M = (M + M.T) / 2 - 1.0 / G.order
    vals, vecs = scipy.linalg.eigh(M)
    cands = [vecs[:, i] for i in np.argsort(-np.abs(vals))[:8]]
    for _ in range(trials):
        v = rng.normal(size=G.order)
        cands.append(v - v.mean())
    best = math.inf
    for v in cands:
        v = v - v.mean()
        nv = _l2(v)
        if nv < 1e-12:
            continue
        best = min(best, max(_l2(translate(G, g, v) - v) / nv for g in omega))
    return best


# ---------------------------------------------------------------------------
# Schreier generators and word lengths


def canonical_section(G: FiniteGroup, omega: Sequence[int], in_H: Callable[[int], bool]) -> Callable[[int], int]:
    """s(xH) = first w in Omega (in the given order) with w^-1 x in H."""
    cache: dict = {}

    def s(x: int) -> int:
        for w in omega:
            if in_H(G.mul(G.inv(w), x)):
                return w
        raise ValueError("a coset of H misses Omega")

    def cached(x):
        if x not in cache:
            cache[x] = s(x)
        return cache[x]

    return cached


def schreier_generators(G: FiniteGroup, omega: Sequence[int], in_H: Callable[[int], bool],
                        section: Callable[[int], int] | None = None) -> list:
    """Omega_H = {s(w1 w2 H)^-1 w1 w2} together with inverses, as a sorted duplicate-free list."""
    omega = list(dict.fromkeys(omega))
    if set(G.inv(w) for w in omega) != set(omega):
        raise ValueError("Omega is not symmetric")
    # every coset must meet Omega
    for x in range(G.order):
        if not any(in_H(G.mul(G.inv(w), x)) for w in omega):
            raise ValueError("a coset of H misses Omega")
    s = section or canonical_section(G, omega, in_H)
    out = set()
    for w1 in omega:
        for w2 in omega:
            x = G.mul(w1, w2)
            sx = s(x)
            if not in_H(G.mul(G.inv(sx), x)):
                raise ValueError("section value not in the coset")
            h = G.mul(G.inv(sx), x)
            out.add(h)
            out.add(G.inv(h))
    return sorted(out)


def word_lengths(G: FiniteGroup, gens: Sequence[int]) -> np.ndarray:
    """BFS distances from the identity in the Cayley graph (inf when unreachable)."""
    dist = np.full(G.order, np.inf)
    dist[G.e] = 0
    q = deque([G.e])
    while q:
        x = q.popleft()
        for g in gens:
            y = int(G.table[x, g])
            if dist[y] == np.inf:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def word_length_sandwich(G: FiniteGroup, omega: Sequence[int], in_H: Callable[[int], bool],
                         section=None) -> dict:
    """Check (1/3) l_Omega(x) <= l_{Omega_H}(x) <= l_Omega(x) for every x in H."""
    omega_H = schreier_generators(G, omega, in_H, section)
    lo = word_lengths(G, omega)
    lh = word_lengths(G, omega_H)
    H = [x for x in range(G.order) if in_H(x)]
    bad = [x for x in H if not (lo[x] / 3 <= lh[x] <= lo[x])]
    generates = all(np.isfinite(lh[x]) for x in H)
    return {"omega_H": omega_H, "violations": bad, "generates_H": generates, "checked": len(H)}


# ---------------------------------------------------------------------------
# equidistribution


@dataclass
class EquidistributionVerdict:
    lhs: float
    rhs: float
    slack: float
    holds: bool
    lam: float


def equidistribution_check(G: FiniteGroup, mu: FiniteSupportMeasure, ell: int, eta: float,
                           X: Callable[[int], bool], lam: float | None = None) -> EquidistributionVerdict:
    """Compare |sigma_eta(X) - |X|| with lambda(sigma) (|X| / |1_eta|)^(1/2) for sigma = mu^(ell)."""
    if lam is None:
        lam = spectral_gap_exact(G, mu).lam
    sigma = convolution_power(mu, ell).dense()
    B = G.ball(eta)
    vol = len(B) / G.order
    dens = np.zeros(G.order)
    for y in np.nonzero(sigma)[0]:
        dens[G.table[y, B]] += sigma[y] / vol
    mask = np.array([bool(X(x)) for x in range(G.order)])
    sX = float(np.sum(dens[mask]) / G.order)
    hX = float(mask.sum() / G.order)
    lhs = abs(sX - hX)
    lam_sigma = lam**ell if ell > 0 else 1.0
    rhs = lam_sigma * math.sqrt(hX / vol)
    return EquidistributionVerdict(lhs, rhs, rhs - lhs, lhs <= rhs + 1e-12, lam_sigma)


def elementary_walk(G: FiniteGroup, exact: bool = False) -> FiniteSupportMeasure:
    """Uniform measure on the elementary generators of SL_2(Z/p^k) and their inverses."""
    m = G.descriptor["p"] ** G.descriptor.get("k", 1)
    gens = [(1, 1, 0, 1), (1, m - 1, 0, 1), (1, 0, 1, 1), (1, 0, m - 1, 1)]
    idx = [G.index_of(g) for g in gens]
    return FiniteSupportMeasure.uniform(G, idx, exact=exact)
