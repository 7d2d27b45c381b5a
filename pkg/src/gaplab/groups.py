"""Compact metric groups, Haar sampling, ball volumes and entropy estimators.

Four kinds of group are supported: SU(n) with the operator-norm metric,
SL_n(Z/p^K) with d(g, h) = p^{-v(g - h)}, finite groups given by a
multiplication table (discrete metric unless a distance matrix is supplied),
and binary products with the max metric.  Group elements are plain payloads
(numpy arrays, PAdicMatrix, integer indices, tuples); ``GroupPoint`` wraps a
payload together with its spec where provenance matters.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from . import padic
from .lie import unitary_log, unitary_power
from .padic import PAdicMatrix


class SpecMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# group specs


class GroupSpec:
    """Common interface; subclasses implement the payload operations."""

    diameter: float = 2.0

    def identity(self):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def dist(self, a, b) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator):
        raise NotImplementedError

    def key(self, a) -> str:
        """Canonical serialization of a payload."""
        raise NotImplementedError

    def parse(self, s: str):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def contains(self, a) -> bool:
        return True


class SpecialUnitary(GroupSpec):
    def __init__(self, n: int = 2):
        self.n = int(n)
        self.diameter = 2.0

    def __eq__(self, other):
        return isinstance(other, SpecialUnitary) and other.n == self.n

    def __hash__(self):
        return hash(("SU", self.n))

    def __repr__(self):
        return f"SpecialUnitary({self.n})"

    def identity(self):
        return np.eye(self.n, dtype=complex)

    def mul(self, a, b):
        return a @ b

    def inv(self, a):
        return np.conj(a.T)

    def dist(self, a, b) -> float:
        return float(np.linalg.norm(a - b, 2))

    def contains(self, a, tol=1e-12) -> bool:
        a = np.asarray(a)
        return (
            a.shape == (self.n, self.n)
            and np.linalg.norm(a @ np.conj(a.T) - np.eye(self.n)) <= tol * 10
            and abs(np.linalg.det(a) - 1) <= 1e-10
        )

    def sample(self, rng):
        if self.n == 2:
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            return quaternion_to_su2(q)
        z = (rng.normal(size=(self.n, self.n)) + 1j * rng.normal(size=(self.n, self.n))) / np.sqrt(2)
        Q, R = np.linalg.qr(z)
        d = np.diag(R)
        Q = Q * (d / np.abs(d))
        det = np.linalg.det(Q)
        Q[:, 0] /= det
        return Q

    def sample_many(self, rng, size: int) -> np.ndarray:
        if self.n == 2:
            q = rng.normal(size=(size, 4))
            q /= np.linalg.norm(q, axis=1, keepdims=True)
            return quaternion_to_su2(q)
        return np.array([self.sample(rng) for _ in range(size)])

    def key(self, a) -> str:
        a = np.asarray(a)
        return json.dumps([[float(x) for x in np.ravel(a.real)], [float(x) for x in np.ravel(a.imag)]])

    def parse(self, s: str):
        re_, im_ = json.loads(s)
        return (np.array(re_) + 1j * np.array(im_)).reshape(self.n, self.n)

    def to_json(self):
        return {"kind": "SU", "n": self.n}


def quaternion_to_su2(q) -> np.ndarray:
    """Unit quaternion(s) (a, b, c, d) to [[a+bi, c+di], [-c+di, a-bi]]."""
    q = np.asarray(q, dtype=float)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a + 1j * b
    out[..., 0, 1] = c + 1j * d
    out[..., 1, 0] = -c + 1j * d
    out[..., 1, 1] = a - 1j * b
    return out


def su2_dist_to_identity(g) -> np.ndarray:
    """||g - I|| for SU(2) matrices, = sqrt(2 - 2 Re(g_00 + g_11)/2)."""
    g = np.asarray(g)
    a = np.real(np.trace(g, axis1=-2, axis2=-1)) / 2
    return np.sqrt(np.maximum(2 - 2 * a, 0.0))


class PAdicSpecialLinear(GroupSpec):
    def __init__(self, n: int, p: int, K: int):
        self.n, self.p, self.K = int(n), int(p), int(K)
        self.diameter = 1.0

    def __eq__(self, other):
        return isinstance(other, PAdicSpecialLinear) and (other.n, other.p, other.K) == (self.n, self.p, self.K)

    def __hash__(self):
        return hash(("SLp", self.n, self.p, self.K))

    def __repr__(self):
        return f"PAdicSpecialLinear(n={self.n}, p={self.p}, K={self.K})"

    def identity(self):
        return PAdicMatrix.identity(self.n, self.p, self.K)

    def mul(self, a, b):
        return a @ b

    def inv(self, a):
        return a.inverse()

    def dist(self, a, b) -> float:
        return (a - b).norm()

    def contains(self, a) -> bool:
        return isinstance(a, PAdicMatrix) and (a.p, a.K, a.n) == (self.p, self.K, self.n) and a.det() == 1

    def level_of(self, a) -> int:
        """Valuation of a - I (K when a = I)."""
        return int((a - PAdicMatrix.identity(self.n, self.p, self.K, tag=None)).valuation())

    def sample(self, rng):
        return padic_haar_sample(rng, self.n, self.p, self.K)

    def key(self, a) -> str:
        return json.dumps([str(v) for v in a.entries.ravel()])

    def parse(self, s: str):
        vals = [int(v) for v in json.loads(s)]
        return PAdicMatrix(self.p, self.K, np.array(vals, dtype=object).reshape(self.n, self.n), tag="SL")

    def to_json(self):
        return {"kind": "PAdicSL", "n": self.n, "p": self.p, "K": self.K}


def padic_haar_sample(rng: np.random.Generator, n: int, p: int, K: int) -> PAdicMatrix:
    """Uniform element of SL_n(Z/p^K).

    A residue mod p^{k'} (k' = 1, or 2 when p = 2) is drawn by rejection on
    the determinant, its integer lift is corrected to determinant 1 by scaling
    the first row, and the result is multiplied by exp(p^{k'} X) with X
    uniform in sl_n(Z/p^{K-k'}).  exp is a bijection from p^{k'} sl_n onto the
    level-k' congruence kernel, so the product is uniform.
    """
    kp = min(2 if p == 2 else 1, K)
    m1 = p**kp
    while True:
        a = rng.integers(0, m1, size=(n, n))
        d = padic.det_mod(a.astype(object), m1)
        if d == 1 % m1:
            break
    A = PAdicMatrix(p, K, a.astype(object))
    u = A.det()
    ent = np.array(A.entries, dtype=object)
    ent[0, :] = (ent[0, :] * padic.inv_mod(u, p**K)) % p**K
    A = PAdicMatrix(p, K, ent, tag="SL")
    if K == kp:
        return A
    X = padic.random_traceless(rng, n, p, K).scale(p**kp)
    return A @ padic.padic_exp(X).matrix


class FiniteGroup(GroupSpec):
    """Finite group on indices 0..N-1 given by a multiplication table.

    ``distance`` is an optional N x N bi-invariant distance matrix; without it
    the metric is discrete (distinct elements at distance 1).
    """

    def __init__(self, table: np.ndarray, labels: Sequence | None = None, distance: np.ndarray | None = None,
                 name: str = "finite", descriptor: dict | None = None):
        table = np.asarray(table, dtype=np.int64)
        N = table.shape[0]
        if table.shape != (N, N):
            raise ValueError("multiplication table must be square")
        self.table = table
        self.order = N
        e = [i for i in range(N) if np.array_equal(table[i], np.arange(N))]
        if len(e) != 1:
            raise ValueError("table has no unique identity")
        self.e = e[0]
        inv = np.empty(N, dtype=np.int64)
        for i in range(N):
            inv[i] = int(np.nonzero(table[i] == self.e)[0][0])
        self.inverse = inv
        self.labels = list(labels) if labels is not None else list(range(N))
        self._index = {self._hashable(l): i for i, l in enumerate(self.labels)}
        self.distance_matrix = None if distance is None else np.asarray(distance, dtype=float)
        self.diameter = 1.0 if distance is None else float(np.max(distance))
        self.name = name
        self.descriptor = descriptor or {"kind": "finite", "name": name, "order": N}

    @staticmethod
    def _hashable(l):
        if isinstance(l, np.ndarray):
            return tuple(l.ravel().tolist())
        return l

    def __eq__(self, other):
        return isinstance(other, FiniteGroup) and other.order == self.order and np.array_equal(other.table, self.table)

    def __hash__(self):
        return hash(("finite", self.name, self.order))

    def __repr__(self):
        return f"FiniteGroup({self.name}, order={self.order})"

    # constructors
    @classmethod
    def cyclic(cls, n: int, padic_prime: int | None = None):
        """Z/n; with ``padic_prime`` p (n a power of p) the metric is p^{-v(x - y)}."""
        idx = np.arange(n)
        table = (idx[:, None] + idx[None, :]) % n
        D = None
        if padic_prime is not None:
            p = padic_prime
            K = round(math.log(n, p))
            if p**K != n:
                raise ValueError("n must be a power of the prime")
            diff = (idx[:, None] - idx[None, :]) % n
            D = np.vectorize(lambda x: 0.0 if x == 0 else float(p) ** (-padic.int_valuation(x, p, K)))(diff)
        return cls(table, labels=list(range(n)), distance=D, name=f"Z/{n}",
                   descriptor={"kind": "cyclic", "n": n, "padic_prime": padic_prime})

    @classmethod
    def from_generators(cls, gens: Sequence, mul: Callable, key: Callable[[object], Hashable], name="generated",
                        distance_fn: Callable | None = None, descriptor=None):
        """Close ``gens`` under ``mul`` by breadth-first search and tabulate."""
        elems = []
        index = {}
        frontier = []
        ident = None
        for g in gens:
            k = key(g)
            if k not in index:
                index[k] = len(elems)
                elems.append(g)
                frontier.append(g)
        while frontier:
            new = []
            for a in frontier:
                for g in gens:
                    b = mul(a, g)
                    k = key(b)
                    if k not in index:
                        index[k] = len(elems)
                        elems.append(b)
                        new.append(b)
            frontier = new
        N = len(elems)
        table = np.empty((N, N), dtype=np.int64)
        for i, a in enumerate(elems):
            for j, b in enumerate(elems):
                table[i, j] = index[key(mul(a, b))]
        D = None
        if distance_fn is not None:
            D = np.array([[distance_fn(a, b) for b in elems] for a in elems], dtype=float)
        G = cls(table, labels=[key(a) for a in elems], distance=D, name=name, descriptor=descriptor)
        G.elements = elems
        return G

    @classmethod
    def sl2_mod(cls, p: int, k: int = 1):
        """SL_2(Z/p^k) with elements stored as 4-tuples (a, b, c, d)."""
        m = p**k

        def mul(x, y):
            a, b, c, d = x
            e, f, g, h = y
            return ((a * e + b * g) % m, (a * f + b * h) % m, (c * e + d * g) % m, (c * f + d * h) % m)

        gens = [(1, 1, 0, 1), (1, 0, 1, 1), (1, m - 1, 0, 1), (1, 0, m - 1, 1)]
        G = cls.from_generators(gens, mul, key=lambda x: x, name=f"SL2(Z/{m})",
                                descriptor={"kind": "sl2", "p": p, "k": k})
        G.mul_tuple = mul
        return G

    @classmethod
    def symmetric3(cls):
        """S_3 realized as 3x3 permutation matrices."""
        import itertools

        mats = []
        for perm in itertools.permutations(range(3)):
            M = np.zeros((3, 3), dtype=int)
            for i, j in enumerate(perm):
                M[j, i] = 1
            mats.append(M)
        G = cls.from_generators(mats, lambda a, b: a @ b, key=lambda a: tuple(a.ravel().tolist()), name="S3",
                                descriptor={"kind": "S3"})
        return G

    @classmethod
    def direct_product(cls, G1: "FiniteGroup", G2: "FiniteGroup"):
        """G1 x G2 with index i*|G2| + j and the max metric."""
        n1, n2 = G1.order, G2.order
        i1 = np.repeat(np.arange(n1), n2)
        i2 = np.tile(np.arange(n2), n1)
        table = G1.table[i1[:, None], i1[None, :]] * n2 + G2.table[i2[:, None], i2[None, :]]
        D = None
        if G1.distance_matrix is not None or G2.distance_matrix is not None:
            D1 = G1.dist_matrix()
            D2 = G2.dist_matrix()
            D = np.maximum(D1[i1[:, None], i1[None, :]], D2[i2[:, None], i2[None, :]])
        labels = [(a, b) for a in G1.labels for b in G2.labels]
        return cls(table, labels=labels, distance=D, name=f"{G1.name}x{G2.name}",
                   descriptor={"kind": "product", "factors": [G1.descriptor, G2.descriptor]})

    def index_of(self, label) -> int:
        return self._index[self._hashable(label)]

    def dist_matrix(self) -> np.ndarray:
        if self.distance_matrix is not None:
            return self.distance_matrix
        return 1.0 - np.eye(self.order)

    def identity(self):
        return self.e

    def mul(self, a, b):
        return int(self.table[a, b])

    def inv(self, a):
        return int(self.inverse[a])

    def dist(self, a, b) -> float:
        if self.distance_matrix is not None:
            return float(self.distance_matrix[a, b])
        return 0.0 if a == b else 1.0

    def contains(self, a) -> bool:
        return isinstance(a, (int, np.integer)) and 0 <= a < self.order

    def sample(self, rng):
        return int(rng.integers(self.order))

    def ball(self, eta: float) -> np.ndarray:
        """Indices of the closed ball of radius eta about the identity."""
        return np.nonzero(self.dist_matrix()[self.e] <= eta)[0]

    def key(self, a) -> str:
        return str(int(a))

    def parse(self, s):
        return int(s)

    def to_json(self):
        return dict(self.descriptor)


class Circle(GroupSpec):
    """R/Z with d(x, y) = min(|x - y| mod 1, 1 - |x - y| mod 1); payloads are floats in [0, 1)."""

    diameter = 0.5

    def __eq__(self, other):
        return isinstance(other, Circle)

    def __hash__(self):
        return hash("circle")

    def __repr__(self):
        return "Circle()"

    def identity(self):
        return 0.0

    def mul(self, a, b):
        return (a + b) % 1.0

    def inv(self, a):
        return (-a) % 1.0

    def dist(self, a, b) -> float:
        t = abs(a - b) % 1.0
        return min(t, 1.0 - t)

    def contains(self, a) -> bool:
        return 0.0 <= float(a) < 1.0

    def sample(self, rng):
        return float(rng.random())

    def key(self, a) -> str:
        return repr(float(a))

    def parse(self, s):
        return float(s)

    def to_json(self):
        return {"kind": "circle"}


class Product(GroupSpec):
    """Binary product with d((a1, a2), (b1, b2)) = max(d1, d2)."""

    def __init__(self, spec1: GroupSpec, spec2: GroupSpec):
        self.s1, self.s2 = spec1, spec2
        self.diameter = max(spec1.diameter, spec2.diameter)

    def __eq__(self, other):
        return isinstance(other, Product) and other.s1 == self.s1 and other.s2 == self.s2

    def __hash__(self):
        return hash(("prod", hash(self.s1), hash(self.s2)))

    def __repr__(self):
        return f"Product({self.s1!r}, {self.s2!r})"

    def identity(self):
        return (self.s1.identity(), self.s2.identity())

    def mul(self, a, b):
        return (self.s1.mul(a[0], b[0]), self.s2.mul(a[1], b[1]))

    def inv(self, a):
        return (self.s1.inv(a[0]), self.s2.inv(a[1]))

    def dist(self, a, b) -> float:
        return max(self.s1.dist(a[0], b[0]), self.s2.dist(a[1], b[1]))

    def contains(self, a) -> bool:
        return self.s1.contains(a[0]) and self.s2.contains(a[1])

    def sample(self, rng):
        return (self.s1.sample(rng), self.s2.sample(rng))

    def key(self, a) -> str:
        return json.dumps([self.s1.key(a[0]), self.s2.key(a[1])])

    def parse(self, s):
        k1, k2 = json.loads(s)
        return (self.s1.parse(k1), self.s2.parse(k2))

    def to_json(self):
        return {"kind": "product", "factors": [self.s1.to_json(), self.s2.to_json()]}


def spec_from_json(d: dict) -> GroupSpec:
    kind = d["kind"]
    if kind == "SU":
        return SpecialUnitary(d["n"])
    if kind == "PAdicSL":
        return PAdicSpecialLinear(d["n"], d["p"], d["K"])
    if kind == "cyclic":
        return FiniteGroup.cyclic(d["n"], d.get("padic_prime"))
    if kind == "sl2":
        return FiniteGroup.sl2_mod(d["p"], d.get("k", 1))
    if kind == "circle":
        return Circle()
    if kind == "S3":
        return FiniteGroup.symmetric3()
    if kind == "product":
        f1, f2 = (spec_from_json(f) for f in d["factors"])
        return Product(f1, f2)
    raise ValueError(f"unknown spec kind {kind!r}")


@dataclass(frozen=True)
class GroupPoint:
    spec: GroupSpec
    payload: object

    def __post_init__(self):
        if not self.spec.contains(self.payload):
            raise ValueError("payload is not an element of the group")


@dataclass(frozen=True)
class DimensionProfile:
    d0: float
    C1: float

    def __post_init__(self):
        if not (self.C1 >= 1 and self.d0 > 0):
            raise ValueError("need C1 >= 1 and d0 > 0")


@dataclass(frozen=True)
class LocalRandomnessProfile:
    L: float
    C0: float

    def __post_init__(self):
        if not (self.L >= 1 and self.C0 >= 1):
            raise ValueError("need L >= 1 and C0 >= 1")


def _unwrap(spec, g):
    if isinstance(g, GroupPoint):
        if g.spec != spec:
            raise SpecMismatch(f"point of {g.spec!r} used with {spec!r}")
        return g.payload
    return g


# ---------------------------------------------------------------------------
# operations


def distance(spec: GroupSpec, g, h) -> float:
    return spec.dist(_unwrap(spec, g), _unwrap(spec, h))


def haar_sample(spec: GroupSpec, rng: np.random.Generator) -> GroupPoint:
    return GroupPoint(spec, spec.sample(rng))


def commutator(spec: GroupSpec, g, h):
    """ghg^-1h^-1."""
    a, b = _unwrap(spec, g), _unwrap(spec, h)
    return spec.mul(spec.mul(spec.mul(a, b), spec.inv(a)), spec.inv(b))


@dataclass
class BallVolume:
    value: float
    stderr: float = 0.0
    exact: bool = True
    n_samples: int = 0


def su2_ball_volume_exact(eta: float) -> float:
    """Haar measure of {g in SU(2): ||g - I|| <= eta}, = (t - sin t cos t)/pi with 2 sin(t/2) = eta."""
    if eta >= 2:
        return 1.0
    t = 2 * math.asin(eta / 2)
    return (t - math.sin(t) * math.cos(t)) / math.pi


def padic_ball_level(p: int, eta: float) -> int:
    """Smallest l >= 0 with p^-l <= eta."""
    l = max(0, math.ceil(-math.log(eta) / math.log(p) - 1e-12))
    while float(p) ** (-l) > eta:
        l += 1
    while l > 0 and float(p) ** (-(l - 1)) <= eta:
        l -= 1
    return l


def ball_volume(spec: GroupSpec, eta: float, rng: np.random.Generator | None = None,
                n_samples: int = 200_000, method: str = "auto") -> BallVolume:
    """Haar measure of the closed ball 1_eta.

    Exact for SL_n(Z/p^K), finite groups and products of these; SU(n) uses a
    Monte Carlo estimate (``method="exact"`` gives the closed form on SU(2)).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if eta >= spec.diameter:
        return BallVolume(1.0)
    if isinstance(spec, PAdicSpecialLinear):
        l = padic_ball_level(spec.p, eta)
        if l == 0:
            return BallVolume(1.0)
        l = min(l, spec.K)
        return BallVolume(1.0 / padic.sl_order(spec.n, spec.p, l))
    if isinstance(spec, FiniteGroup):
        return BallVolume(len(spec.ball(eta)) / spec.order)
    if isinstance(spec, Circle):
        return BallVolume(min(1.0, 2 * eta))
    if isinstance(spec, Product):
        a = ball_volume(spec.s1, eta, rng, n_samples, method)
        b = ball_volume(spec.s2, eta, rng, n_samples, method)
        val = a.value * b.value
        se = math.hypot(a.stderr * b.value, b.stderr * a.value)
        return BallVolume(val, se, a.exact and b.exact, max(a.n_samples, b.n_samples))
    if isinstance(spec, SpecialUnitary):
        if method == "exact" and spec.n == 2:
            return BallVolume(su2_ball_volume_exact(eta))
        if rng is None:
            raise ValueError("Monte Carlo volume needs an rng")
        hits = 0
        done = 0
        chunk = 50_000
        while done < n_samples:
            m = min(chunk, n_samples - done)
            g = spec.sample_many(rng, m)
            if spec.n == 2:
                d = su2_dist_to_identity(g)
            else:
                d = np.array([np.linalg.norm(x - np.eye(spec.n), 2) for x in g])
            hits += int(np.sum(d <= eta))
            done += m
        q = hits / n_samples
        return BallVolume(q, math.sqrt(max(q * (1 - q), 1e-300) / n_samples), False, n_samples)
    raise TypeError(spec)


def fit_dimension(spec: GroupSpec, eta: float, rng=None, n_samples: int = 200_000) -> float:
    """Exponent d with |1_eta| / |1_{eta/2}| = 2^d."""
    v1 = ball_volume(spec, eta, rng, n_samples).value
    v2 = ball_volume(spec, eta / 2, rng, n_samples).value
    return math.log(v1 / v2, 2)


# ---------------------------------------------------------------------------
# clouds and entropies


@dataclass
class SampleCloud:
    spec: GroupSpec
    points: list
    weights: np.ndarray | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            self.weights = w

    def __len__(self):
        return len(self.points)

    def to_csv(self, path: str) -> None:
        """One serialized point per row plus a JSON sidecar ``path + '.json'``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["point", "weight"])
            for i, pt in enumerate(self.points):
                wt = "" if self.weights is None else repr(float(self.weights[i]))
                w.writerow([self.spec.key(pt), wt])
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump({"spec": self.spec.to_json(), "seed": self.seed, "count": len(self.points), **self.meta},
                      fh, indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, path: str, spec: GroupSpec | None = None) -> "SampleCloud":
        with open(path + ".json", encoding="utf-8") as fh:
            side = json.load(fh)
        spec = spec or spec_from_json(side["spec"])
        pts, wts = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            next(r)
            for row in r:
                pts.append(spec.parse(row[0]))
                wts.append(row[1])
        weights = None if all(w == "" for w in wts) else np.array([float(w) for w in wts])
        return cls(spec, pts, weights, side.get("seed"))


def metric_entropy(spec: GroupSpec, points: Sequence, eta: float) -> float:
    """log of the size of a greedy maximal eta-separated subset.

    Points are visited in the order of their serialized keys; a point is
    kept when it is at distance > eta from every kept point, so the kept set
    is also an eta-cover of the input.
    """
    if len(points) == 0:
        raise ValueError("empty cloud")
    order = sorted(range(len(points)), key=lambda i: spec.key(points[i]))
    if isinstance(spec, SpecialUnitary) and spec.n == 2:
        P = np.asarray(points)[order]
        kept = []
        for g in P:
            if kept:
                K = np.asarray(kept)
                # ||g - h|| = ||h^-1 g - I||, tr(h^* g) real part
                a = np.real(np.einsum("kba,ba->k", np.conj(K), g)) / 2
                d = np.sqrt(np.maximum(2 - 2 * a, 0.0))
                if np.any(d <= eta):
                    continue
            kept.append(g)
        return math.log(len(kept))
    kept = []
    for i in order:
        g = points[i]
        if all(spec.dist(g, h) > eta for h in kept):
            kept.append(g)
    return math.log(len(kept))


def neighbourhood_volume(spec: SpecialUnitary, points: Sequence, eta: float, rng, n_samples: int = 100_000) -> float:
    """Monte Carlo Haar measure of the eta-neighbourhood A_eta of a finite SU(2) cloud."""
    P = np.asarray(points)
    hits = 0
    for start in range(0, n_samples, 5000):
        m = min(5000, n_samples - start)
        G = spec.sample_many(rng, m)
        a = np.real(np.einsum("kba,mba->mk", np.conj(P), G)) / 2
        d = np.sqrt(np.maximum(2 - 2 * a, 0.0))
        hits += int(np.sum(d.min(axis=1) <= eta))
    return hits / n_samples


@dataclass
class RenyiEstimate:
    value: float
    collisions: float
    pairs: int
    method: str
    note: str = ""


def _coset_label(spec: GroupSpec, g, eta: float):
    if isinstance(spec, PAdicSpecialLinear):
        l = padic_ball_level(spec.p, eta)
        if l == 0:
            return 0
        return tuple(int(v) % spec.p ** min(l, spec.K) for v in g.entries.ravel())
    if isinstance(spec, FiniteGroup):
        B = spec.ball(eta)
        return int(min(spec.table[g, B]))
    if isinstance(spec, Product):
        return (_coset_label(spec.s1, g[0], eta), _coset_label(spec.s2, g[1], eta))
    raise TypeError(spec)


def _ball_is_subgroup(spec: GroupSpec, eta: float) -> bool:
    if isinstance(spec, PAdicSpecialLinear):
        return True
    if isinstance(spec, FiniteGroup):
        B = set(spec.ball(eta).tolist())
        return all(int(spec.table[a, b]) in B for a in B for b in B)
    if isinstance(spec, Product):
        return _ball_is_subgroup(spec.s1, eta) and _ball_is_subgroup(spec.s2, eta)
    return False


def renyi_entropy(spec: GroupSpec, samples: Sequence, eta: float) -> RenyiEstimate:
    """Estimate H_2 at scale eta from i.i.d. samples.

    When 1_eta is a subgroup, H_2 = -log P(X, X' in the same eta-coset) and
    the collision probability is estimated by unbiased pair counting.  On
    SU(n) the indicator-ball estimator -log P(d(X, X') <= eta) is used; it
    over-estimates ||mu_eta||^2 by at most the factor |1_{2 eta}| / |1_eta|,
    so the returned value errs low.
    """
    N = len(samples)
    if N < 2:
        raise ValueError("need at least two samples")
    pairs = N * (N - 1) // 2
    if isinstance(spec, SpecialUnitary):
        P = np.asarray(samples)
        coll = 0
        for i in range(N - 1):
            if spec.n == 2:
                a = np.real(np.einsum("ba,kba->k", np.conj(P[i]), P[i + 1:])) / 2
                d = np.sqrt(np.maximum(2 - 2 * a, 0.0))
            else:
                d = np.array([np.linalg.norm(P[i] - q, 2) for q in P[i + 1:]])
            coll += int(np.sum(d <= eta))
        q = coll / pairs
        return RenyiEstimate(-math.log(q) if q > 0 else math.inf, q, pairs, "ball-collision",
                             "biased low by at most log(|1_2eta|/|1_eta|)")
    if not _ball_is_subgroup(spec, eta):
        raise ValueError("1_eta is not a subgroup; use renyi_entropy_exact on finite groups")
    counts: dict = {}
    for g in samples:
        lab = _coset_label(spec, g, eta)
        counts[lab] = counts.get(lab, 0) + 1
    coll = sum(c * (c - 1) for c in counts.values()) / 2
    q = coll / pairs
    return RenyiEstimate(-math.log(q) if q > 0 else math.inf, q, pairs, "coset-collision")


def renyi_entropy_exact(G: FiniteGroup, weights: np.ndarray, eta: float) -> float:
    """Exact H_2(mu; eta) = log(1/|1_eta|) - log ||mu * P_eta||_2^2 on a finite group.

    Densities are taken with respect to the normalized counting measure.
    """
    w = np.asarray(weights, dtype=float)
    N = G.order
    B = G.ball(eta)
    vol = len(B) / N
    # density of mu * P_eta at x: sum_y mu(y) P_eta(y^-1 x), P_eta = 1_B / vol
    dens = np.zeros(N)
    for y in np.nonzero(w)[0]:
        dens[G.table[y, B]] += w[y] / vol
    norm2 = float(np.sum(dens**2) / N)
    return math.log(1 / vol) - math.log(norm2)


def nth_root(g: np.ndarray, k: int) -> np.ndarray:
    """Principal k-th root exp(log(g)/k) of g in SU(n) with ||g - I|| < 1/3."""
    g = np.asarray(g)
    if np.linalg.norm(g - np.eye(g.shape[0]), 2) >= 1 / 3:
        raise ValueError("nth_root needs ||g - I|| < 1/3")
    return unitary_power(g, 1.0 / k)


def su_log(g: np.ndarray) -> np.ndarray:
    return unitary_log(g)
