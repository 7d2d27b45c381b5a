"""Transportation polytope tools and the symmetric-coupling construction.

Couplings are N1 x N2 matrices (lists of lists) whose entries are Fractions
when the inputs are rational, so identities such as the marginal property of
tree measures hold exactly.  Spanning trees of the complete bipartite graph
K_{N1,N2} carry edges (i, j) with i a row index and j a column index.
"""
from __future__ import annotations

import bisect
import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .groups import Circle, FiniteGroup, GroupSpec, PAdicSpecialLinear, Product, SpecialUnitary, padic_ball_level
from .walks import FiniteSupportMeasure


class TransportError(ValueError):
    pass


# ---------------------------------------------------------------------------
# basic types


@dataclass(frozen=True)
class BipartiteSpanningTree:
    N1: int
    N2: int
    edges: tuple

    def __post_init__(self):
        edges = tuple(sorted((int(i), int(j)) for i, j in self.edges))
        object.__setattr__(self, "edges", edges)
        if len(edges) != self.N1 + self.N2 - 1 or len(set(edges)) != len(edges):
            raise TransportError(f"a spanning tree of K_{self.N1},{self.N2} has {self.N1 + self.N2 - 1} distinct edges")
        for i, j in edges:
            if not (0 <= i < self.N1 and 0 <= j < self.N2):
                raise TransportError(f"edge {(i, j)} out of range")
        uf = _UnionFind(self.N1 + self.N2)
        for i, j in edges:
            if not uf.union(i, self.N1 + j):
                raise TransportError("edges contain a cycle")

    def to_json(self) -> dict:
        return {"N1": self.N1, "N2": self.N2, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, d) -> "BipartiteSpanningTree":
        return cls(d["N1"], d["N2"], tuple(tuple(e) for e in d["edges"]))


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


@dataclass
class MarginPair:
    sigma1: list
    sigma2: list

    def __post_init__(self):
        for s in (self.sigma1, self.sigma2):
            if any(x < 0 for x in s):
                raise TransportError("margins must be nonnegative")
            if abs(float(sum(s)) - 1.0) > 1e-12:
                raise TransportError("margins must sum to 1")

    @property
    def N1(self):
        return len(self.sigma1)

    @property
    def N2(self):
        return len(self.sigma2)

    @classmethod
    def uniform(cls, N1: int, N2: int) -> "MarginPair":
        return cls([Fraction(1, N1)] * N1, [Fraction(1, N2)] * N2)


def margins_of(M) -> MarginPair:
    rows = [sum(r) for r in M]
    cols = [sum(M[i][j] for i in range(len(M))) for j in range(len(M[0]))]
    return MarginPair(rows, cols)


def is_coupling(M, margins: MarginPair, tol: float = 1e-12) -> bool:
    exact = all(isinstance(x, (int, Fraction)) for r in M for x in r)
    m = margins_of_raw(M)
    if exact:
        return all(x >= 0 for r in M for x in r) and m[0] == list(margins.sigma1) and m[1] == list(margins.sigma2)
    return (
        all(x >= -tol for r in M for x in r)
        and all(abs(a - b) <= tol for a, b in zip(m[0], margins.sigma1))
        and all(abs(a - b) <= tol for a, b in zip(m[1], margins.sigma2))
    )


def margins_of_raw(M):
    rows = [sum(r) for r in M]
    cols = [sum(M[i][j] for i in range(len(M))) for j in range(len(M[0]))]
    return rows, cols


# ---------------------------------------------------------------------------
# tree measures


def tree_measure(tree: BipartiteSpanningTree, margins: MarginPair) -> list:
    """M^tau: the unique matrix supported on ``tree`` with the given row and column sums.

    For an edge (y1, y2) the value is sigma1(Y1') - sigma2(Y2') where Y1', Y2'
    are the parts of the component of tau minus the edge containing y1.
    Non-edges are 0.  Entries can be negative for inadmissible trees.
    """
    N1, N2 = tree.N1, tree.N2
    if (margins.N1, margins.N2) != (N1, N2):
        raise TransportError("tree and margins have different sizes")
    n = N1 + N2
    adj = [[] for _ in range(n)]
    for i, j in tree.edges:
        adj[i].append(N1 + j)
        adj[N1 + j].append(i)
    parent = [-1] * n
    order = []
    seen = [False] * n
    seen[0] = True
    q = deque([0])
    while q:
        u = q.popleft()
        order.append(u)
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                q.append(v)
    zero = margins.sigma1[0] * 0
    s1 = [margins.sigma1[u] if u < N1 else zero for u in range(n)]
    s2 = [margins.sigma2[u - N1] if u >= N1 else zero for u in range(n)]
    for u in reversed(order):
        pu = parent[u]
        if pu >= 0:
            s1[pu] = s1[pu] + s1[u]
            s2[pu] = s2[pu] + s2[u]
    M = [[zero] * N2 for _ in range(N1)]
    for i, j in tree.edges:
        c = N1 + j
        if parent[c] == i:  # removing the edge cuts off the subtree of column c
            M[i][j] = s2[c] - s1[c]
        else:  # row i is the child
            M[i][j] = s1[i] - s2[i]
    return M


def is_admissible(tree: BipartiteSpanningTree, margins: MarginPair, tol: float = 1e-12) -> bool:
    M = tree_measure(tree, margins)
    exact = all(isinstance(x, (int, Fraction)) for r in M for x in r)
    return all((x >= 0) if exact else (x >= -tol) for r in M for x in r)


# ---------------------------------------------------------------------------
# decomposition into tree measures


@dataclass
class Decomposition:
    terms: list  # (weight, BipartiteSpanningTree)
    margins: MarginPair

    def reconstruct(self) -> list:
        N1, N2 = self.margins.N1, self.margins.N2
        zero = self.margins.sigma1[0] * 0
        out = [[zero] * N2 for _ in range(N1)]
        for c, t in self.terms:
            M = tree_measure(t, self.margins)
            for i, j in t.edges:
                out[i][j] = out[i][j] + c * M[i][j]
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "margins": [[str(x) for x in self.margins.sigma1], [str(x) for x in self.margins.sigma2]],
                "terms": [{"weight": str(c), "tree": t.to_json()} for c, t in self.terms],
            },
            indent=1,
        )


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


class _FlowState:
    """A nonnegative flow x on allowed edges with margin deficits."""

    def __init__(self, N1, N2, sigma1, sigma2, allowed_by_row, x: dict, eps):
        self.N1, self.N2 = N1, N2
        self.sigma1, self.sigma2 = sigma1, sigma2
        self.allowed = allowed_by_row  # list of sorted column lists
        self.x = x
        self.eps = eps
        zero = sigma1[0] * 0
        self.d1 = list(sigma1)
        self.d2 = list(sigma2)
        for (i, j), v in x.items():
            self.d1[i] -= v
            self.d2[j] -= v
        self.pos_by_col = [set() for _ in range(N2)]
        for (i, j), v in x.items():
            if v > eps:
                self.pos_by_col[j].add(i)
        self.zero = zero

    def augment_all(self):
        eps = self.eps
        while True:
            sources = [i for i in range(self.N1) if self.d1[i] > eps]
            if not sources:
                return
            # breadth-first search in the residual graph
            prev_row = {}  # col -> row it was reached from (forward edge)
            prev_col = {}  # row -> col it was reached from (backward edge)
            seen_r = set(sources)
            seen_c = set()
            q = deque(sources)
            sink = None
            while q and sink is None:
                i = q.popleft()
                for j in self.allowed[i]:
                    if j in seen_c:
                        continue
                    seen_c.add(j)
                    prev_row[j] = i
                    if self.d2[j] > 0:
                        sink = j
                        break
                    for i2 in self.pos_by_col[j]:
                        if i2 not in seen_r:
                            seen_r.add(i2)
                            prev_col[i2] = j
                            q.append(i2)
            if sink is None:
                if sum(self.d1[i] for i in sources) <= 1e3 * eps:
                    # rounding residue in floating point: nothing left to route
                    for i in sources:
                        self.d1[i] = self.zero
                    return
                raise TransportError("no feasible coupling on the given support")
            # walk back collecting the path
            path = []  # list of (edge, sign)
            j = sink
            while True:
                i = prev_row[j]
                path.append(((i, j), +1))
                if i in prev_col:
                    j2 = prev_col[i]
                    path.append(((i, j2), -1))
                    j = j2
                else:
                    break
            src = path[-1][0][0]
            amt = min(self.d1[src], self.d2[sink])
            for e, s in path:
                if s < 0:
                    amt = min(amt, self.x[e])
            for e, s in path:
                self._add(e, s * amt)
            self.d1[src] -= amt
            self.d2[sink] -= amt

    def _add(self, e, delta):
        i, j = e
        v = self.x.get(e, self.zero) + delta
        if v <= self.eps:
            self.x.pop(e, None)
            self.pos_by_col[j].discard(i)
        else:
            self.x[e] = v
            self.pos_by_col[j].add(i)

    def cancel_cycles(self):
        """Push flow around cycles of the support until it is a forest."""
        N1 = self.N1
        while True:
            uf = _UnionFind(N1 + self.N2)
            adj: dict = {}
            cycle = None
            for (i, j) in sorted(self.x):
                a, b = i, N1 + j
                if uf.find(a) == uf.find(b):
                    cycle = (i, j, adj)
                    break
                uf.union(a, b)
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
            if cycle is None:
                return
            i, j, adj = cycle
            # path in the forest from column node back to row node
            start, goal = N1 + j, i
            prev = {start: None}
            q = deque([start])
            while q:
                u = q.popleft()
                if u == goal:
                    break
                for v in adj.get(u, ()):
                    if v not in prev:
                        prev[v] = u
                        q.append(v)
            nodes = []
            u = goal
            while u is not None:
                nodes.append(u)
                u = prev[u]
            # nodes: i, ..., N1+j ; cycle edges: (i, j) then consecutive pairs
            edges = [(i, j)]
            for a, b in zip(nodes[:-1], nodes[1:]):
                r, c = (a, b - N1) if a < N1 else (b, a - N1)
                edges.append((r, c))
            # edges alternate around the cycle starting at the closing edge;
            # decrease the closing edge's class
            dec = edges[0::2]
            inc = edges[1::2]
            amt = min(self.x[e] for e in dec)
            for e in dec:
                self._add(e, -amt)
            for e in inc:
                self._add(e, amt)


def _extend_to_tree(N1, N2, forest_edges) -> BipartiteSpanningTree:
    uf = _UnionFind(N1 + N2)
    edges = []
    for i, j in sorted(forest_edges):
        if uf.union(i, N1 + j):
            edges.append((i, j))
    for i in range(N1):
        for j in range(N2):
            if len(edges) == N1 + N2 - 1:
                break
            if uf.union(i, N1 + j):
                edges.append((i, j))
    return BipartiteSpanningTree(N1, N2, tuple(edges))


def _find_vertex(N1, N2, sigma1, sigma2, support: set, start: dict | None, eps):
    allowed = [[] for _ in range(N1)]
    for i, j in sorted(support):
        allowed[i].append(j)
    x = {} if start is None else {e: v for e, v in start.items() if e in support and v > eps}
    st = _FlowState(N1, N2, sigma1, sigma2, allowed, x, eps)
    st.augment_all()
    st.cancel_cycles()
    return st.x


def decompose(sigma, check: bool = True) -> Decomposition:
    """Write a coupling as a convex combination of admissible tree measures.

    Repeatedly finds a vertex w of the face {x coupling : supp x inside supp r}
    of the residual r, subtracts t w with t = min r_e / w_e, and records the
    spanning tree of w.  Each step zeroes at least one entry of r, so the
    face dimension drops and at most (N1-1)(N2-1)+1 terms are produced.
    Vertices are found by augmenting-path repair of the previous vertex
    followed by cycle cancellation.
    """
    N1, N2 = len(sigma), len(sigma[0])
    exact = all(_is_exact(x) for r in sigma for x in r)
    if exact:
        sigma = [[Fraction(x) for x in r] for r in sigma]
    if any(x < 0 for r in sigma for x in r):
        raise TransportError("coupling has negative entries")
    rows, cols = margins_of_raw(sigma)
    margins = MarginPair(rows, cols)
    scale = max(max(r) for r in sigma)
    eps = 0 if exact else 1e-13 * scale
    r = {(i, j): sigma[i][j] for i in range(N1) for j in range(N2) if sigma[i][j] > eps}
    terms = []
    w = None
    while r:
        if exact:
            # residual margins are (1 - sum of weights) times the original ones
            w = _find_vertex(N1, N2, rows, cols, set(r), w, eps)
        else:
            # in floating point use the residual's own margins, which keeps
            # the face nonempty despite rounding
            rr = [0.0] * N1
            rc = [0.0] * N2
            for (i, j), v in r.items():
                rr[i] += v
                rc[j] += v
            mass = sum(rr)
            if mass <= 1e-11:
                # what is left is rounding noise; its normalized margins no
                # longer resemble the original ones, so fold it into the
                # existing weights instead of producing a spurious tree
                total = sum(c for c, _ in terms)
                terms = [(c / total, t) for c, t in terms]
                break
            rr = [x / mass for x in rr]
            rc = [x / mass for x in rc]
            w = _find_vertex(N1, N2, rr, rc, set(r), w, eps)
        # w has unit mass; r - t w stays nonnegative
        t = min(r[e] / v for e, v in w.items())
        for e, v in w.items():
            nv = r[e] - t * v
            if nv <= eps:
                r.pop(e)
            else:
                r[e] = nv
        tree = _extend_to_tree(N1, N2, list(w.keys()))
        terms.append((t, tree))
        if not exact and sum(c for c, _ in terms) >= 1 - 1e-13:
            break
    dec = Decomposition(terms, margins)
    if check:
        for _, t in terms:
            if not is_admissible(t, margins):
                raise TransportError("internal: produced an inadmissible tree")
    return dec


def coupling_to_csv(M, path: str) -> None:
    """Write a coupling matrix as CSV (Fractions written as p/q)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow([str(x) for x in row])


def coupling_from_csv(path: str) -> list:
    with open(path, newline="") as fh:
        return [[Fraction(x) if "/" in x or x.lstrip("-").isdigit() else float(x) for x in row] for row in csv.reader(fh)]


def decomposition_from_json(s: str) -> Decomposition:
    d = json.loads(s)
    margins = MarginPair([Fraction(x) for x in d["margins"][0]], [Fraction(x) for x in d["margins"][1]])
    terms = [(Fraction(t["weight"]), BipartiteSpanningTree.from_json(t["tree"])) for t in d["terms"]]
    return Decomposition(terms, margins)


# ---------------------------------------------------------------------------
# marginal repair


def _power_bound(base: int, A: float, exact: bool):
    """base^-A, as a Fraction when exact and A is an integer."""
    if exact and float(A).is_integer():
        return Fraction(1, base ** int(A))
    return float(base) ** (-A)


@dataclass
class CorrectionReport:
    nu: list
    decomposition: Decomposition
    max_entry_change: Fraction | float
    bound: Fraction | float
    margin_deviation: Fraction | float


def _rationalize_weights(terms) -> list:
    """Float weights as exact Fractions summing to exactly 1."""
    ws = [Fraction(float(c)) for c, _ in terms]
    k = max(range(len(ws)), key=lambda i: ws[i])
    ws[k] += 1 - sum(ws)
    if ws[k] < 0:
        raise TransportError("weights cannot be rationalized")
    return [(w, t) for w, (_, t) in zip(ws, terms)]


def correct_coupling(mu, A: float, exact_weights: bool | None = None) -> CorrectionReport:
    """Exact coupling of the uniform margins close to ``mu``.

    Decomposes ``mu`` over its own margins and swaps each tree measure for the
    tree measure of the same tree with uniform margins, keeping the weights.
    Requires A > 2 and every margin within (N1 N2)^-A of uniform.

    With rational input and ``exact_weights`` false the decomposition runs in
    floating point (exact peeling makes denominators grow with every term,
    which is prohibitive beyond a few hundred cells); the weights are then
    made exact Fractions summing to 1, so the output is still an exact
    coupling of the uniform margins.  The default is exact weights when
    N1 N2 <= 100.
    """
    if not A > 2:
        raise TransportError("correct_coupling needs A > 2")
    N1, N2 = len(mu), len(mu[0])
    exact = all(_is_exact(x) for r in mu for x in r)
    if exact:
        mu = [[Fraction(x) for x in r] for r in mu]
    rows, cols = margins_of_raw(mu)
    tol = _power_bound(N1 * N2, A, exact)
    if exact:
        dev = max(max(abs(x - Fraction(1, N1)) for x in rows), max(abs(x - Fraction(1, N2)) for x in cols))
    else:
        dev = max(max(abs(x - 1 / N1) for x in rows), max(abs(x - 1 / N2) for x in cols))
    if dev > tol:
        raise TransportError(f"margin deviation {float(dev):.3e} exceeds (N1 N2)^-A = {float(tol):.3e}")
    if exact_weights is None:
        exact_weights = N1 * N2 <= 100
    if exact and not exact_weights:
        fdec = decompose([[float(x) for x in r] for r in mu])
        dec = Decomposition(_rationalize_weights(fdec.terms), MarginPair(rows, cols))
    else:
        dec = decompose(mu)
    uni = MarginPair.uniform(N1, N2) if exact else MarginPair([1 / N1] * N1, [1 / N2] * N2)
    zero = Fraction(0) if exact else 0.0
    nu = [[zero] * N2 for _ in range(N1)]
    for c, t in dec.terms:
        if not is_admissible(t, uni):
            raise TransportError("tree admissible for mu's margins but not for uniform margins")
        M = tree_measure(t, uni)
        for i, j in t.edges:
            nu[i][j] += c * M[i][j]
    change = max(abs(nu[i][j] - mu[i][j]) for i in range(N1) for j in range(N2))
    bound = _power_bound(N1 * N2, A - 1, exact)
    return CorrectionReport(nu, dec, change, bound, dev)


# ---------------------------------------------------------------------------
# discretizations


@dataclass
class Discretization:
    spec: GroupSpec
    delta: float
    count: int
    membership: Callable
    relaxed: bool = False
    cell_measures: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def discretize(spec: GroupSpec, delta: float) -> Discretization:
    """Partition into equal-measure cells of diameter <= delta.

    p-adic and finite groups use cosets of the ball 1_delta (a subgroup);
    the circle uses ceil(1/delta) equal arcs; SU(2) uses boxes in Hopf
    coordinates (see ``su2_discretization``), where the inner-ball condition
    is not guaranteed and the result is flagged ``relaxed``.
    """
    if not 0 < delta:
        raise TransportError("delta must be positive")
    if isinstance(spec, PAdicSpecialLinear):
        l = min(padic_ball_level(spec.p, delta), spec.K)
        m = spec.p**l
        from .padic import sl_order

        N = sl_order(spec.n, spec.p, l) if l > 0 else 1

        def member(g, m=m):
            return tuple(int(v) % m for v in g.entries.ravel())

        return Discretization(spec, delta, N, member, False, None, {"level": l})
    if isinstance(spec, FiniteGroup):
        B = spec.ball(delta)
        bs = set(B.tolist())
        if not all(int(spec.table[a, b]) in bs for a in bs for b in bs):
            raise TransportError("1_delta is not a subgroup of this finite group")
        labels = {}
        for x in range(spec.order):
            labels[x] = int(min(spec.table[x, B]))
        reps = sorted(set(labels.values()))
        idx = {r: k for k, r in enumerate(reps)}
        return Discretization(spec, delta, len(reps), lambda g: idx[labels[g]], False,
                              np.full(len(reps), 1 / len(reps)), {"subgroup_order": len(B), "reps": reps})
    if isinstance(spec, Circle):
        N = math.ceil(1 / delta - 1e-12)
        return Discretization(spec, delta, N, lambda x: min(int(math.floor(x * N)), N - 1), False,
                              np.full(N, 1 / N), {"arc": 1 / N, "inner_radius": 1 / (2 * N)})
    if isinstance(spec, SpecialUnitary) and spec.n == 2:
        return su2_discretization(delta)
    raise TransportError(f"no discretization for {spec!r}")


def su2_discretization(delta: float) -> Discretization:
    """Equal-measure cells on SU(2) with operator-norm diameter <= delta.

    Hopf coordinates q = (cos(e) e^{i a}, sin(e) e^{i b}) turn Haar measure
    into the uniform measure in (u, a, b) with u = sin(e)^2, and the round
    metric reads de^2 + cos(e)^2 da^2 + sin(e)^2 db^2.  The e-range [0, pi/2]
    is cut into latitude bands of width <= s = delta/sqrt(3); band k gets an
    integer number n_k of cells of measure 1/N, split into sectors in a of
    width <= s/cos(e_lo), each sector cut into pieces in b of width
    <= s/sin(e_hi).  The straight path between two points of a box then has
    length <= sqrt(3) s = delta, and the operator norm of g - h is the chordal
    distance on the 3-sphere, which is smaller still.
    """
    side = delta / math.sqrt(3)
    B = math.ceil((math.pi / 2) / (0.95 * side))
    e_nom = np.linspace(0, math.pi / 2, B + 1)
    u_nom = np.sin(e_nom) ** 2
    N = 1024
    while True:
        counts = np.diff(np.round(u_nom * N).astype(np.int64))
        if np.any(counts <= 0):
            N *= 2
            continue
        u_edges = np.concatenate([[0], np.cumsum(counts)]) / N
        e_edges = np.arcsin(np.sqrt(np.clip(u_edges, 0, 1)))
        ok = True
        bands = []
        for k in range(B):
            e_lo, e_hi = e_edges[k], e_edges[k + 1]
            if e_hi - e_lo > side:
                ok = False
                break
            n1 = max(1, math.ceil(2 * math.pi * math.cos(e_lo) / (0.95 * side)))
            mmin = max(1, math.ceil(2 * math.pi * math.sin(e_hi) / side))
            nk = int(counts[k])
            if nk < n1 * mmin:
                ok = False
                break
            # distribute nk pieces over n1 sectors as evenly as possible
            q, r = divmod(nk, n1)
            pieces = [q + 1] * r + [q] * (n1 - r)
            widths = [2 * math.pi * m / nk for m in pieces]
            if max(widths) * math.cos(e_lo) > side or 2 * math.pi / min(pieces) * math.sin(e_hi) > side:
                ok = False
                break
            bands.append((pieces, np.concatenate([[0], np.cumsum(widths)])))
        if ok:
            break
        N *= 2
    offsets = np.concatenate([[0], np.cumsum(counts)])
    sector_offsets = []
    for k, (pieces, _) in enumerate(bands):
        sector_offsets.append(offsets[k] + np.concatenate([[0], np.cumsum(pieces)]))

    def member(g):
        z1, z2 = g[0, 0], g[0, 1]
        u = float(abs(z2) ** 2)
        k = min(max(bisect.bisect_right(u_edges, u) - 1, 0), B - 1)
        pieces, a_edges = bands[k]
        a = math.atan2(z1.imag, z1.real) % (2 * math.pi)
        s = min(max(bisect.bisect_right(a_edges, a) - 1, 0), len(pieces) - 1)
        b = math.atan2(z2.imag, z2.real) % (2 * math.pi)
        m = pieces[s]
        t = min(int(b / (2 * math.pi) * m), m - 1)
        return int(sector_offsets[k][s] + t)

    def cell_box(c: int):
        k = int(np.searchsorted(offsets, c, side="right") - 1)
        pieces, a_edges = bands[k]
        so = sector_offsets[k]
        s = int(np.searchsorted(so, c, side="right") - 1)
        t = c - int(so[s])
        m = pieces[s]
        return (u_edges[k], u_edges[k + 1], a_edges[s], a_edges[s + 1], 2 * math.pi * t / m, 2 * math.pi * (t + 1) / m)

    measures = []
    for k, (pieces, a_edges) in enumerate(bands):
        du = u_edges[k + 1] - u_edges[k]
        for s, m in enumerate(pieces):
            da = (a_edges[s + 1] - a_edges[s]) / (2 * math.pi)
            measures.extend([du * da / m] * m)
    d = Discretization(SpecialUnitary(2), delta, int(N), member, True, np.array(measures),
                       {"bands": B, "u_edges": u_edges})
    d.cell_box = cell_box
    return d


def hopf_point(u, a, b) -> np.ndarray:
    """SU(2) matrix with Hopf coordinates (u, a, b)."""
    ce, se = math.sqrt(1 - u), math.sqrt(u)
    z1 = ce * complex(math.cos(a), math.sin(a))
    z2 = se * complex(math.cos(b), math.sin(b))
    return np.array([[z1, z2], [-z2.conjugate(), z1.conjugate()]])


# ---------------------------------------------------------------------------
# symmetric coupling pipeline


@dataclass
class PipelineReport:
    ell: int
    N1: int
    N2: int
    mu_cells: list
    nu_cells: list
    margin_deviation: float
    precondition_met: bool
    nu_is_coupling: bool
    symmetric: bool
    tv_on_cells: float
    max_cell_error: float
    required_ell: int | None = None
    notes: str = ""


def _quotient_map(spec, disc: Discretization):
    """Map a payload to a hashable cell label (coset of the congruence ball)."""
    if isinstance(spec, PAdicSpecialLinear):
        m = spec.p ** disc.info["level"]
        return lambda g: tuple(int(v) % m for v in g.entries.ravel())
    if isinstance(spec, FiniteGroup):
        B = set(spec.ball(disc.delta).tolist())
        inv = spec.inverse
        if any(int(spec.table[spec.table[x, b], inv[x]]) not in B for x in range(spec.order) for b in B):
            raise TransportError("1_delta is not a normal subgroup, so the cells do not form a quotient group")
        return disc.membership
    raise TransportError(f"pipeline supports p-adic and finite factors, not {spec!r}")


def symmetric_coupling_pipeline(mu: FiniteSupportMeasure, ell: int, delta: float, A: float = 3.0,
                                lam: tuple | None = None) -> PipelineReport:
    """Cell masses of mu^(ell), marginal repair, and symmetrization.

    ``mu`` lives on a Product of two p-adic or finite factors with Fraction
    weights.  Cells are cosets of the delta-balls, which are normal
    subgroups, so the cell masses of mu^(ell) are computed exactly by running
    the walk on the finite quotient group.  The output density is constant on
    product cells with values N1 N2 c_jk, symmetrized through c(j,k) ->
    (c(j,k) + c(j^-1,k^-1))/2.
    """
    spec = mu.spec
    if not isinstance(spec, Product):
        raise TransportError("pipeline needs a product group")
    if not mu.is_symmetric():
        raise TransportError("mu must be symmetric")
    d1, d2 = discretize(spec.s1, delta), discretize(spec.s2, delta)
    q1, q2 = _quotient_map(spec.s1, d1), _quotient_map(spec.s2, d2)

    # quotient group generated by the reduced support
    labels = [(q1(g[0]), q2(g[1])) for g in mu.points]

    def mul1(a, b):
        return _label_mul(spec.s1, d1, a, b)

    def mul2(a, b):
        return _label_mul(spec.s2, d2, a, b)

    gens1 = sorted(set(l[0] for l in labels))
    gens2 = sorted(set(l[1] for l in labels))
    Q1 = FiniteGroup.from_generators(gens1, mul1, key=lambda x: x, name="Q1")
    Q2 = FiniteGroup.from_generators(gens2, mul2, key=lambda x: x, name="Q2")
    N1, N2 = Q1.order, Q2.order
    if N1 != d1.count or N2 != d2.count:
        raise TransportError("support of mu does not generate the quotients onto the cells")
    # integer-count walk on Q1 x Q2 (index i*N2 + j)
    den = 1
    for w in mu.weights:
        den = den * Fraction(w).denominator // math.gcd(den, Fraction(w).denominator)
    nums = [int(Fraction(w) * den) for w in mu.weights]
    steps = []
    for (l1, l2), a in zip(labels, nums):
        i1, i2 = Q1.index_of(l1), Q2.index_of(l2)
        src1 = Q1.table[:, i1]  # x -> x g  (right multiplication)
        src2 = Q2.table[:, i2]
        dest = (src1[:, None] * N2 + src2[None, :]).ravel()
        steps.append((dest, a))
    counts = np.zeros(N1 * N2, dtype=object)
    counts[:] = 0
    counts[Q1.e * N2 + Q2.e] = 1
    for _ in range(ell):
        new = np.zeros(N1 * N2, dtype=object)
        new[:] = 0
        for dest, a in steps:
            np.add.at(new, dest, counts * a)
        counts = new
    total = den**ell
    mu_cells = [[Fraction(int(counts[i * N2 + j]), total) for j in range(N2)] for i in range(N1)]
    rows, cols = margins_of_raw(mu_cells)
    dev = max(max(abs(x - Fraction(1, N1)) for x in rows), max(abs(x - Fraction(1, N2)) for x in cols))
    tol = _power_bound(N1 * N2, A, True)
    if dev > tol:
        req = None
        if lam is not None:
            lmax = max(lam)
            req = math.ceil(math.log(float(tol) / math.sqrt(max(N1, N2))) / math.log(lmax))
        return PipelineReport(ell, N1, N2, mu_cells, [], float(dev), False, False, False, math.nan, math.nan, req,
                              "marginal deviation too large: increase ell")
    rep = correct_coupling(mu_cells, A)
    nu = rep.nu
    sym = [[(nu[i][j] + nu[int(Q1.inverse[i])][int(Q2.inverse[j])]) / 2 for j in range(N2)] for i in range(N1)]
    is_cpl = is_coupling(sym, MarginPair.uniform(N1, N2))
    symmetric = all(sym[i][j] == sym[int(Q1.inverse[i])][int(Q2.inverse[j])] for i in range(N1) for j in range(N2))
    diff = [abs(mu_cells[i][j] - sym[i][j]) for i in range(N1) for j in range(N2)]
    return PipelineReport(ell, N1, N2, mu_cells, sym, float(dev), True, is_cpl, symmetric,
                          float(sum(diff)), float(max(diff)))


def _label_mul(spec, disc, a, b):
    if isinstance(spec, PAdicSpecialLinear):
        n = spec.n
        m = spec.p ** disc.info["level"]
        A = np.array(a, dtype=object).reshape(n, n)
        Bm = np.array(b, dtype=object).reshape(n, n)
        return tuple(int(v) % m for v in np.dot(A, Bm).ravel())
    if isinstance(spec, FiniteGroup):
        reps = disc.info["reps"]
        return disc.membership(int(spec.table[reps[a], reps[b]]))
    raise TransportError(repr(spec))
