"""Fixed-precision arithmetic over Z_p and matrix groups over Z/p^K.

Every value carries its prime ``p`` and absolute precision ``K``; arithmetic
happens modulo ``p**K`` and mixing precisions raises instead of coercing.
Matrices are stored as read-only numpy object arrays of Python integers so
products never overflow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class PrecisionError(ValueError):
    """Raised when operands with different (p, K) are combined."""


class DomainError(ValueError):
    """Raised when an input lies outside the convergence domain of a map."""


class AtLeast(int):
    """Saturated valuation: the true valuation is at least this value."""

    def __repr__(self):
        return f"AtLeast({int(self)})"

    __str__ = __repr__


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def safe_level(p: int) -> int:
    """Smallest congruence level on which exp and log are used: 1 for p >= 5, 2 for p in {2, 3}."""
    return 1 if p >= 5 else 2


def int_valuation(x: int, p: int, cap: int) -> int:
    """p-adic valuation of the integer ``x`` capped at ``cap`` (zero gives ``cap``)."""
    x = int(x)
    if x == 0:
        return cap
    v = 0
    while v < cap and x % p == 0:
        x //= p
        v += 1
    return v


def inv_mod(a: int, m: int) -> int:
    return pow(int(a), -1, int(m))


def _check_prime(p):
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")


@dataclass(frozen=True)
class PAdicScalar:
    """An element of Z_p known modulo p^K."""

    p: int
    K: int
    value: int

    def __post_init__(self):
        _check_prime(self.p)
        if self.K < 1:
            raise ValueError("precision must be positive")
        object.__setattr__(self, "value", int(self.value) % self.p**self.K)

    @property
    def modulus(self) -> int:
        return self.p**self.K

    def _coerce(self, other):
        if isinstance(other, PAdicScalar):
            if (other.p, other.K) != (self.p, self.K):
                raise PrecisionError(f"cannot combine Z_{self.p} mod p^{self.K} with Z_{other.p} mod p^{other.K}")
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PAdicScalar(self.p, self.K, self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PAdicScalar(self.p, self.K, self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PAdicScalar(self.p, self.K, o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PAdicScalar(self.p, self.K, self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return PAdicScalar(self.p, self.K, -self.value)

    def inverse(self) -> "PAdicScalar":
        if self.value % self.p == 0:
            raise ZeroDivisionError("only units of Z_p are invertible at fixed precision")
        return PAdicScalar(self.p, self.K, inv_mod(self.value, self.modulus))

    def valuation(self) -> int:
        return valuation(self)

    def norm(self) -> float:
        """p-adic absolute value p^{-v}; zero maps to 0."""
        return 0.0 if self.value == 0 else float(self.p) ** (-valuation(self))

    def to_json(self) -> dict:
        return {"p": self.p, "K": self.K, "value": str(self.value)}

    @classmethod
    def from_json(cls, d: dict) -> "PAdicScalar":
        return cls(int(d["p"]), int(d["K"]), int(d["value"]))


def valuation(x) -> int:
    """Largest k <= K with p^k dividing the representative; zero returns ``AtLeast(K)``."""
    if isinstance(x, PAdicScalar):
        if x.value == 0:
            return AtLeast(x.K)
        return int_valuation(x.value, x.p, x.K)
    if isinstance(x, PAdicMatrix):
        return x.valuation()
    raise TypeError(type(x))


def _as_object_array(rows, modulus) -> np.ndarray:
    arr = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            arr[i, j] = int(v) % modulus
    return arr


class PAdicMatrix:
    """Square matrix over Z/p^K.

    ``tag`` may be ``"SL"`` in which case the determinant is checked to be 1.
    """

    __slots__ = ("p", "K", "n", "_a", "tag")

    def __init__(self, p: int, K: int, entries, tag: str | None = None):
        _check_prime(p)
        self.p, self.K = int(p), int(K)
        mod = self.p**self.K
        if isinstance(entries, np.ndarray):
            a = np.empty(entries.shape, dtype=object)
            for idx, v in np.ndenumerate(entries):
                a[idx] = int(v) % mod
        else:
            a = _as_object_array([list(r) for r in entries], mod)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("PAdicMatrix must be square")
        a.flags.writeable = False
        self._a = a
        self.n = a.shape[0]
        self.tag = tag
        if tag == "SL" and self.det() != 1 % mod:
            raise ValueError("matrix tagged SL has determinant != 1 mod p^K")

    # construction helpers
    @classmethod
    def identity(cls, n, p, K, tag="SL"):
        return cls(p, K, np.identity(n, dtype=int).astype(object), tag=tag)

    @classmethod
    def zeros(cls, n, p, K):
        return cls(p, K, np.zeros((n, n), dtype=int).astype(object))

    @property
    def modulus(self) -> int:
        return self.p**self.K

    @property
    def entries(self) -> np.ndarray:
        """Read-only object array of integer representatives in [0, p^K)."""
        return self._a

    def __getitem__(self, idx):
        return PAdicScalar(self.p, self.K, self._a[idx])

    def _other(self, other):
        if isinstance(other, PAdicMatrix):
            if (other.p, other.K) != (self.p, self.K):
                raise PrecisionError(
                    f"cannot combine matrices mod {self.p}^{self.K} and {other.p}^{other.K}"
                )
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other._a
        raise TypeError(type(other))

    def __add__(self, other):
        return PAdicMatrix(self.p, self.K, (self._a + self._other(other)) % self.modulus)

    def __sub__(self, other):
        return PAdicMatrix(self.p, self.K, (self._a - self._other(other)) % self.modulus)

    def __neg__(self):
        return PAdicMatrix(self.p, self.K, (-self._a) % self.modulus)

    def __matmul__(self, other):
        tag = "SL" if (self.tag == "SL" and getattr(other, "tag", None) == "SL") else None
        prod = matmul_mod(self._a, self._other(other), self.modulus)
        out = PAdicMatrix.__new__(PAdicMatrix)
        out.p, out.K, out.n, out.tag = self.p, self.K, self.n, tag
        prod.flags.writeable = False
        out._a = prod
        return out

    def scale(self, c: int) -> "PAdicMatrix":
        return PAdicMatrix(self.p, self.K, (self._a * int(c)) % self.modulus, tag=None)

    def __eq__(self, other):
        if not isinstance(other, PAdicMatrix):
            return NotImplemented
        return (self.p, self.K, self.n) == (other.p, other.K, other.n) and bool(np.all(self._a == other._a))

    def __hash__(self):
        return hash((self.p, self.K, self.key()))

    def key(self) -> tuple:
        return tuple(int(v) for v in self._a.ravel())

    def __repr__(self):
        rows = ", ".join("[" + ", ".join(str(v) for v in r) + "]" for r in self._a)
        return f"PAdicMatrix(p={self.p}, K={self.K}, [{rows}])"

    def det(self) -> int:
        return det_mod(self._a, self.modulus)

    def trace(self) -> int:
        return int(sum(self._a[i, i] for i in range(self.n))) % self.modulus

    def inverse(self) -> "PAdicMatrix":
        inv = inv_matrix_mod(self._a, self.p, self.K)
        return PAdicMatrix(self.p, self.K, inv, tag=self.tag)

    def valuation(self) -> int:
        """Minimum entrywise valuation; zero matrix gives ``AtLeast(K)``."""
        v = min(int_valuation(x, self.p, self.K) for x in self._a.ravel())
        return AtLeast(self.K) if v >= self.K else v

    def norm(self) -> float:
        v = self.valuation()
        return 0.0 if isinstance(v, AtLeast) else float(self.p) ** (-v)

    def reduce(self, K: int) -> "PAdicMatrix":
        """Reduction to a lower precision K' <= K."""
        if K > self.K:
            raise PrecisionError("cannot raise precision by reduction")
        return PAdicMatrix(self.p, K, self._a, tag=self.tag)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "K": self.K,
            "n": self.n,
            "entries": [[str(v) for v in row] for row in self._a],
            **({"tag": self.tag} if self.tag else {}),
        }

    @classmethod
    def from_json(cls, d) -> "PAdicMatrix":
        if isinstance(d, str):
            d = json.loads(d)
        return cls(int(d["p"]), int(d["K"]), [[int(v) for v in row] for row in d["entries"]], tag=d.get("tag"))


# low level helpers on object arrays ---------------------------------------

def matmul_mod(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    return np.dot(a, b) % m


def det_mod(a: np.ndarray, m: int) -> int:
    """Determinant via exact integer Bareiss elimination, reduced mod m."""
    n = a.shape[0]
    M = [[int(x) for x in row] for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if M[i][k] != 0), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return (sign * M[n - 1][n - 1]) % m


def inv_matrix_mod(a: np.ndarray, p: int, K: int) -> np.ndarray:
    """Inverse over Z/p^K by Gauss-Jordan with unit pivots."""
    m = p**K
    n = a.shape[0]
    A = [[int(x) % m for x in row] + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(a)]
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] % p != 0), None)
        if piv is None:
            raise ZeroDivisionError("matrix is not invertible over Z_p")
        A[c], A[piv] = A[piv], A[c]
        iv = inv_mod(A[c][c], m)
        A[c] = [(x * iv) % m for x in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [(x - f * y) % m for x, y in zip(A[r], A[c])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = A[i][n + j]
    return out


def _vp_factorial(k: int, p: int) -> int:
    v, q = 0, p
    while q <= k:
        v += k // q
        q *= p
    return v


class CongruenceElement:
    """A matrix g with g = I mod p^level."""

    __slots__ = ("matrix", "level")

    def __init__(self, matrix: PAdicMatrix, level: int):
        if level < 1:
            raise ValueError("level must be at least 1")
        d = matrix - PAdicMatrix.identity(matrix.n, matrix.p, matrix.K, tag=None)
        if d.valuation() < level:
            raise ValueError(f"matrix is not congruent to I mod p^{level}")
        self.matrix = matrix
        self.level = int(level)

    @classmethod
    def from_matrix(cls, matrix: PAdicMatrix) -> "CongruenceElement":
        """Wrap ``matrix`` at its exact level (valuation of g - I)."""
        d = matrix - PAdicMatrix.identity(matrix.n, matrix.p, matrix.K, tag=None)
        return cls(matrix, int(d.valuation()))

    @property
    def p(self):
        return self.matrix.p

    @property
    def K(self):
        return self.matrix.K

    def __repr__(self):
        return f"CongruenceElement(level={self.level}, {self.matrix!r})"


def padic_exp(X: PAdicMatrix) -> CongruenceElement:
    """Matrix exponential on p^v gl_n(Z_p), summed exactly modulo p^K.

    Requires entrywise valuation at least 1 (at least 2 when p = 2).  Each term
    X^k / k! is formed at raised working precision so the division by the
    p-part of k! is exact.
    """
    p, K, n = X.p, X.K, X.n
    v = X.valuation()
    vmin = 2 if p == 2 else 1
    if v < vmin:
        raise DomainError(f"exp needs valuation >= {vmin} for p = {p}; got {v}")
    if isinstance(v, AtLeast):
        return CongruenceElement(PAdicMatrix.identity(n, p, K), K)
    # last k with a possibly nonzero term: k*v - v_p(k!) < K, using v_p(k!) <= (k-1)/(p-1)
    kmax = 1
    while kmax * v - (kmax - 1) / (p - 1) < K:
        kmax += 1
    W = K + _vp_factorial(kmax, p)
    mW, mK = p**W, p**K
    Xw = X.entries
    total = np.identity(n, dtype=int).astype(object)
    power = np.identity(n, dtype=int).astype(object)
    for k in range(1, kmax + 1):
        power = matmul_mod(power, Xw, mW)
        fact = 1
        for i in range(2, k + 1):
            fact *= i
        e = _vp_factorial(k, p)
        unit = fact // p**e
        term = (power // p**e) * inv_mod(unit, mK)
        total = (total + term) % mK
    g = PAdicMatrix(p, K, total)
    if X.trace() == 0:
        g = PAdicMatrix(p, K, total, tag="SL")
    return CongruenceElement(g, min(int(v), K))


def padic_log(g: CongruenceElement) -> PAdicMatrix:
    """Matrix logarithm on the congruence subgroup of level >= 1 (>= 2 for p = 2)."""
    p, K, n = g.p, g.K, g.matrix.n
    vmin = 2 if p == 2 else 1
    if g.level < vmin:
        raise DomainError(f"log needs level >= {vmin} for p = {p}; got {g.level}")
    Y = g.matrix - PAdicMatrix.identity(n, p, K, tag=None)
    l = Y.valuation()
    if isinstance(l, AtLeast):
        return PAdicMatrix.zeros(n, p, K)
    # terms Y^k / k have valuation >= k*l - log_p(k), increasing in k on this domain
    kmax = 1
    while (kmax + 1) * l - np.log(kmax + 1) / np.log(p) < K:
        kmax += 1
    extra = max(int_valuation(k, p, 10**6) for k in range(1, kmax + 1))
    W = K + extra
    mW, mK = p**W, p**K
    Yw = Y.entries
    total = np.zeros((n, n), dtype=int).astype(object)
    power = np.identity(n, dtype=int).astype(object)
    for k in range(1, kmax + 1):
        power = matmul_mod(power, Yw, mW)
        e = int_valuation(k, p, 10**6)
        unit = k // p**e
        term = (power // p**e) * inv_mod(unit, mK)
        total = (total + term) % mK if k % 2 == 1 else (total - term) % mK
    return PAdicMatrix(p, K, total)


def _check_finite_log_range(p, l, n, K):
    k0 = safe_level(p)
    if l < k0:
        raise DomainError(f"finite log needs l >= k0 = {k0}; got l = {l}")
    if not (l <= n <= 2 * l - k0 + 1):
        raise DomainError(f"finite log needs n in [l, 2l - k0 + 1] = [{l}, {2 * l - k0 + 1}]; got n = {n}")
    if n > K:
        raise DomainError(f"target level n = {n} exceeds working precision K = {K}")


def finite_log(g: CongruenceElement, l: int, n: int) -> PAdicMatrix:
    """Finite logarithm: the class of (g - I)/p^l in gl_n(Z_p)/p^{n-l}.

    The result is a PAdicMatrix at precision n - l (or the zero class when
    n = l, represented at precision 1 with every entry zero).
    """
    p, K = g.p, g.K
    _check_finite_log_range(p, l, n, K)
    if g.level < l:
        raise DomainError(f"element has level {g.level} < l = {l}")
    Y = (g.matrix - PAdicMatrix.identity(g.matrix.n, p, K, tag=None)).entries
    prec = n - l
    if prec == 0:
        return PAdicMatrix.zeros(g.matrix.n, p, 1)
    return PAdicMatrix(p, prec, (Y // p**l) % p**prec)


def finite_log_inverse(X: PAdicMatrix, l: int, K: int) -> CongruenceElement:
    """A representative in SL_n(Z/p^K) of the class mapped to ``X`` by ``finite_log``.

    ``X`` must be traceless mod p^{X.K}; the representative is exp(p^l X~)
    for a traceless integer lift X~.
    """
    p, n = X.p, X.n
    lift = np.array(X.entries, dtype=object)
    lift[n - 1, n - 1] = -sum(int(lift[i, i]) for i in range(n - 1))
    return padic_exp(PAdicMatrix(p, K, lift * p**l))


def bracket(X: PAdicMatrix, Y: PAdicMatrix) -> PAdicMatrix:
    return (X @ Y) - (Y @ X)


def group_commutator(g: PAdicMatrix, h: PAdicMatrix) -> PAdicMatrix:
    return g @ h @ g.inverse() @ h.inverse()


def commutator_finite_log_check(g: CongruenceElement, l: int, n: int,
                                g2: CongruenceElement, l2: int, n2: int,
                                bracket_fn=None) -> bool:
    """Compare the finite log of [g, g2] with the bracket of the finite logs.

    Both sides live in gl/p^{n'' - l - l2} with n'' = min(n + l2, n2 + l).
    ``bracket_fn`` replaces the Lie bracket (used for negative controls).
    """
    if (g.p, g.K) != (g2.p, g2.K):
        raise PrecisionError("arguments must share (p, K)")
    _check_finite_log_range(g.p, l, n, g.K)
    _check_finite_log_range(g.p, l2, n2, g.K)
    npp = min(n + l2, n2 + l)
    prec = npp - l - l2
    c = CongruenceElement(group_commutator(g.matrix, g2.matrix), l + l2)
    lhs = finite_log(c, l + l2, npp)
    if prec == 0:
        return True
    a = finite_log(g, l, n).entries
    b = finite_log(g2, l2, n2).entries
    br = bracket_fn or (lambda x, y: np.dot(x, y) - np.dot(y, x))
    rhs = PAdicMatrix(g.p, prec, br(a, b) % g.p**prec)
    return lhs.reduce(prec) == rhs


def random_traceless(rng: np.random.Generator, n: int, p: int, K: int) -> PAdicMatrix:
    """Uniform element of sl_n(Z/p^K)."""
    m = p**K
    a = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            a[i, j] = int(rng.integers(0, p, size=K) @ (p ** np.arange(K, dtype=object)))
    a[n - 1, n - 1] = (a[n - 1, n - 1] - sum(a[i, i] for i in range(n))) % m
    return PAdicMatrix(p, K, a)


def random_zp(rng: np.random.Generator, p: int, K: int) -> int:
    """Uniform residue mod p^K built digit by digit (works for any size)."""
    digits = rng.integers(0, p, size=K)
    return int(sum(int(d) * p**i for i, d in enumerate(digits)))


def matrices_to_json(mats: Sequence[PAdicMatrix]) -> str:
    return json.dumps([m.to_json() for m in mats])


def matrices_from_json(s: str) -> list:
    return [PAdicMatrix.from_json(d) for d in json.loads(s)]


def elementary(n: int, i: int, j: int, c: int, p: int, K: int) -> PAdicMatrix:
    a = np.identity(n, dtype=int).astype(object)
    a[i, j] = c
    return PAdicMatrix(p, K, a, tag="SL")


def sl_order(n: int, p: int, k: int = 1) -> int:
    """|SL_n(Z/p^k)|."""
    order = p ** ((k - 1) * (n * n - 1))
    base = p ** (n * (n - 1) // 2)
    for i in range(2, n + 1):
        base *= p**i - 1
    return order * base


def iter_sl2_mod(p: int) -> Iterable[tuple]:
    """All (a, b, c, d) with ad - bc = 1 mod p."""
    for a in range(p):
        for b in range(p):
            for c in range(p):
                for d in range(p):
                    if (a * d - b * c) % p == 1:
                        yield (a, b, c, d)


# Smith normal form over Z/p^K -----------------------------------------------

def smith_mod(A, p: int, K: int):
    """Smith form of an r x c integer matrix over Z/p^K.

    Returns (U, e, V) with U (r x r) and V (c x c) invertible mod p^K and
    U A V = diag(p^e_0, p^e_1, ...) mod p^K, where e is nondecreasing and an
    exponent equal to K stands for a zero elementary divisor.  Matrices are
    lists of lists of Python ints.
    """
    m = p**K
    M = [[int(x) % m for x in row] for row in A]
    r, c = len(M), len(M[0]) if M else 0
    U = [[int(i == j) for j in range(r)] for i in range(r)]
    V = [[int(i == j) for j in range(c)] for i in range(c)]
    exps = []
    for t in range(min(r, c)):
        best, bi, bj = K, -1, -1
        for i in range(t, r):
            for j in range(t, c):
                if M[i][j]:
                    v = int_valuation(M[i][j], p, K)
                    if v < best:
                        best, bi, bj = v, i, j
                        if v == 0:
                            break
            if best == 0:
                break
        if bi < 0:
            exps.extend([K] * (min(r, c) - t))
            break
        M[t], M[bi] = M[bi], M[t]
        U[t], U[bi] = U[bi], U[t]
        for row in M:
            row[t], row[bj] = row[bj], row[t]
        for row in V:
            row[t], row[bj] = row[bj], row[t]
        # scale the pivot row so the pivot is exactly p^best
        unit = inv_mod(M[t][t] // p**best, m)
        M[t] = [(x * unit) % m for x in M[t]]
        U[t] = [(x * unit) % m for x in U[t]]
        piv = p**best
        for i in range(r):
            if i != t and M[i][t]:
                f = M[i][t] // piv
                M[i] = [(x - f * y) % m for x, y in zip(M[i], M[t])]
                U[i] = [(x - f * y) % m for x, y in zip(U[i], U[t])]
        for j in range(c):
            if j != t and M[t][j]:
                f = M[t][j] // piv
                for row in M:
                    row[j] = (row[j] - f * row[t]) % m
                for row in V:
                    row[j] = (row[j] - f * row[t]) % m
        exps.append(best)
    return U, exps, V


def solve_mod(A, b, p: int, K: int):
    """Solve A x = b over Z/p^K as far as possible.

    Returns (x, obstruction) where x minimises nothing in particular but
    satisfies A x = b modulo p^obstruction; obstruction is K when the system
    is solvable.  Components of U b that cannot be divided by their
    elementary divisor set the obstruction.
    """
    m = p**K
    U, e, V = smith_mod(A, p, K)
    rows, cols = len(U), len(V)
    cb = [sum(U[i][k] * int(b[k]) for k in range(rows)) % m for i in range(rows)]
    y = [0] * cols
    obstruction = K
    for i in range(rows):
        ci = cb[i]
        ei = e[i] if i < len(e) else K
        if ci == 0:
            continue
        vi = int_valuation(ci, p, K)
        if ei < K and vi >= ei:
            y[i] = ci // p**ei
        else:
            obstruction = min(obstruction, vi)
    x = [sum(V[j][i] * y[i] for i in range(cols)) % m for j in range(cols)]
    return x, obstruction
