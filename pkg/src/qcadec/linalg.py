"""Small dense linear-algebra helpers used by the algebra kernels."""

from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .config import get_settings


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def kron_all(mats) -> np.ndarray:
    mats = list(mats)
    if not mats:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, mats)


def nullspace(m: np.ndarray, tol: float | None = None, scale: float = 0.0) -> np.ndarray:
    """Orthonormal basis (as columns) of the kernel of ``m``.

    Singular values below ``tol`` times the largest one (or times ``scale``
    when that is larger) count as zero. Tall matrices are first reduced by a
    QR factorisation.
    """
    tol = get_settings().tol if tol is None else tol
    rows, cols = m.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=complex)
    if rows == 0 or not np.any(m):
        return np.eye(cols, dtype=complex)
    if rows > cols:
        m = np.linalg.qr(m, mode="r")
    try:
        _, s, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError:
        # the divide-and-conquer driver occasionally fails to converge
        _, s, vh = scipy.linalg.svd(m, full_matrices=True, lapack_driver="gesvd")
    cutoff = tol * max(s[0], scale, 1e-300)
    rank = int(np.sum(s > cutoff))
    return np.conj(vh[rank:].T)


def orthonormal_columns(v: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column span of ``v`` (rank-revealing SVD)."""
    tol = get_settings().tol if tol is None else tol
    if v.shape[1] == 0:
        return v
    u, s, _ = np.linalg.svd(v, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return v[:, :0]
    return u[:, s > tol * s[0]]


def extend_orthonormal(q: np.ndarray, v: np.ndarray, scale: float, tol: float | None = None) -> np.ndarray:
    """Append to ``q`` the directions of ``v`` it does not already span.

    ``scale`` sets the magnitude against which residual norms are judged,
    so that tiny numerical leftovers are discarded.
    """
    tol = get_settings().tol if tol is None else tol
    if v.shape[1] == 0:
        return q
    if q.shape[1]:
        v = v - q @ (dagger(q) @ v)
        v = v - q @ (dagger(q) @ v)
    u, s, _ = np.linalg.svd(v, full_matrices=False)
    keep = s > 10 * tol * max(scale, 1e-300)
    if not np.any(keep):
        return q
    return np.concatenate([q, u[:, keep]], axis=1)


def cluster_values(values: np.ndarray, rel_gap: float) -> list[np.ndarray]:
    """Group sorted real values into clusters separated by gaps above ``rel_gap`` times the range."""
    order = np.argsort(values)
    vals = values[order]
    spread = vals[-1] - vals[0] if vals.size else 0.0
    cut = rel_gap * max(spread, 1.0)
    groups, start = [], 0
    for i in range(1, vals.size + 1):
        if i == vals.size or vals[i] - vals[i - 1] > cut:
            groups.append(order[start:i])
            start = i
    return groups


def phase_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|Tr(a† b)| / (‖a‖‖b‖), equal to one iff ``b`` is a nonzero multiple of ``a``.

    Blind to overall scale; pair it with a deviation or unitarity check.
    """
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return float(na == nb)
    return float(abs(np.vdot(a, b)) / (na * nb))


def relative_phase(a: np.ndarray, b: np.ndarray) -> complex:
    """Unit complex c minimising ‖b − c a‖."""
    ov = np.vdot(a, b)
    return complex(ov / abs(ov)) if abs(ov) > 0 else 1.0 + 0j


def max_deviation_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """Max entrywise |b − c a| after the best global phase c."""
    c = relative_phase(a, b)
    return float(np.max(np.abs(b - c * a))) if a.size else 0.0


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(dim, random_state=rng)


def clock_and_shift(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Generalised Pauli pair; together they generate Lin(C^dim)."""
    omega = np.exp(2j * np.pi / dim)
    clock = np.diag(omega ** np.arange(dim))
    shift = np.roll(np.eye(dim), 1, axis=0)
    return clock.astype(complex), shift.astype(complex)


def embed_site(op: np.ndarray, site: int, dims) -> np.ndarray:
    """Place a single-site operator inside the tensor product of ``dims``."""
    dims = list(dims)
    left = int(np.prod(dims[:site], dtype=int))
    right = int(np.prod(dims[site + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def permute_tensor_factors(u: np.ndarray, dims, perm, side: str = "out") -> np.ndarray:
    """Reorder tensor factors on one side of a matrix.

    ``perm[k]`` names the old factor that moves to position ``k``.
    """
    dims = list(dims)
    n = len(dims)
    if side == "out":
        t = u.reshape(dims + [u.shape[1]])
        t = np.transpose(t, list(perm) + [n])
        return t.reshape(u.shape)
    t = u.reshape([u.shape[0]] + dims)
    t = np.transpose(t, [0] + [p + 1 for p in perm])
    return t.reshape(u.shape)
