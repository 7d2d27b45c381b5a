"""Bases, structure constants and exp/log helpers for su(2) and sl_2.

su(2) uses the basis e_k = -i*sigma_k, for which [e_x, e_y] = 2 e_z and
cyclic permutations, and the operator norm of sum a_k e_k equals |a|.
sl_2 uses (e, f, h) with [h, e] = 2e, [h, f] = -2f, [e, f] = h.

A linear map T between Lie algebras is stored row-indexed:
T(e_j) = sum_s x[j, s] e_s, so coordinates transform as b = x.T @ a.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

SU2_BASIS = -1j * PAULI

SL2_BASIS = np.array(
    [
        [[0, 1], [0, 0]],  # e
        [[0, 0], [1, 0]],  # f
        [[1, 0], [0, -1]],  # h
    ],
    dtype=int,
)


def _levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[i, j, k] = 1
        eps[j, i, k] = -1
    return eps


SU2_STRUCTURE = 2 * _levi_civita()


def _sl2_structure() -> np.ndarray:
    c = np.zeros((3, 3, 3), dtype=int)
    E, F, H = 0, 1, 2
    c[H, E, E], c[E, H, E] = 2, -2
    c[H, F, F], c[F, H, F] = -2, 2
    c[E, F, H], c[F, E, H] = 1, -1
    return c


SL2_STRUCTURE = _sl2_structure()


def su2_coords(X: np.ndarray) -> np.ndarray:
    """Coordinates of an anti-Hermitian traceless 2x2 matrix (works on stacks)."""
    X = np.asarray(X)
    return np.real(0.5j * np.einsum("...ab,kba->...k", X, PAULI))


def su2_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.einsum("...k,kab->...ab", a, SU2_BASIS)


def su2_exp(a) -> np.ndarray:
    """exp of sum a_k e_k in closed form: cos|a| I - i sin|a| (a/|a|).sigma."""
    a = np.asarray(a, dtype=float)
    t = np.linalg.norm(a, axis=-1)
    c = np.cos(t)
    s = np.where(t > 0, np.sin(t) / np.where(t > 0, t, 1.0), 1.0)
    eye = np.eye(2, dtype=complex)
    return c[..., None, None] * eye + s[..., None, None] * su2_matrix(a)


def su2_log(g) -> np.ndarray:
    """Principal logarithm in coordinates; valid when g is not -I."""
    g = np.asarray(g)
    cos_t = np.clip(np.real(np.trace(g, axis1=-2, axis2=-1)) / 2, -1.0, 1.0)
    t = np.arccos(cos_t)
    v = su2_coords((g - np.conj(np.swapaxes(g, -1, -2))) / 2)  # sin(t) * n
    sin_t = np.sin(t)
    scale = np.where(sin_t > 1e-300, t / np.where(sin_t > 1e-300, sin_t, 1.0), 1.0)
    return v * scale[..., None]


def su2_bracket(a, b) -> np.ndarray:
    return 2 * np.cross(a, b)


def unitary_log(g: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm of a unitary matrix via its Schur form."""
    T, Z = scipy.linalg.schur(g, output="complex")
    ang = np.angle(np.diag(T))
    return Z @ np.diag(1j * ang) @ Z.conj().T


def unitary_power(g: np.ndarray, t: float) -> np.ndarray:
    """g^t on the principal branch (g unitary)."""
    T, Z = scipy.linalg.schur(g, output="complex")
    ang = np.angle(np.diag(T))
    return Z @ np.diag(np.exp(1j * ang * t)) @ Z.conj().T


def ad_matrix_su2(g: np.ndarray) -> np.ndarray:
    """Row-indexed matrix of Ad(g) on su(2): row j holds the coordinates of g e_j g^-1."""
    gi = np.conj(g.T)
    return np.array([su2_coords(g @ SU2_BASIS[j] @ gi) for j in range(3)])


def sl2_coords_int(X) -> list:
    """Coordinates (e, f, h) of a traceless 2x2 integer matrix."""
    return [X[0][1], X[1][0], X[0][0]]


def ad_matrix_sl2_mod(g, modulus: int) -> np.ndarray:
    """Row-indexed Ad(g) on sl_2 over Z/modulus for g in SL_2 (object array)."""
    a, b = int(g[0][0]), int(g[0][1])
    c, d = int(g[1][0]), int(g[1][1])
    gi = [[d, -b], [-c, a]]
    G = [[a, b], [c, d]]
    out = np.empty((3, 3), dtype=object)
    for j in range(3):
        E = SL2_BASIS[j].tolist()
        M = _mm(_mm(G, E), gi)
        co = sl2_coords_int(M)
        for s in range(3):
            out[j, s] = int(co[s]) % modulus
    return out


def _mm(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(2)) for j in range(2)] for i in range(2)]


def jacobi_residual(c: np.ndarray) -> float:
    """Largest coefficient of [[e_j,e_k],e_l] + [[e_k,e_l],e_j] + [[e_l,e_j],e_k]."""
    c = np.asarray(c, dtype=float)
    A = np.einsum("jks,slm->jklm", c, c)
    total = A + np.einsum("abcm->cabm", A) + np.einsum("abcm->bcam", A)
    return float(np.max(np.abs(total))) if total.size else 0.0


def random_su2_near_identity(rng: np.random.Generator, radius: float, size: int, boundary_frac: float = 0.25):
    """Points g with ||g - I|| <= radius (operator norm), a fraction placed on the sphere itself.

    ||exp(a) - I|| = 2 sin(|a|/2), so the Lie-algebra radius is 2 arcsin(radius/2).
    """
    tmax = 2 * np.arcsin(min(radius, 2.0) / 2)
    u = rng.normal(size=(size, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = tmax * rng.random(size) ** (1 / 3)
    nb = int(boundary_frac * size)
    t[:nb] = tmax
    return su2_exp(u * t[:, None])
