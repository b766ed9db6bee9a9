"""Finite-dimensional C*-subalgebras of Lin(C^d).

An algebra is stored either through a Hilbert-Schmidt orthonormal basis or
through its block (Wedderburn) form

    A = ⊕_k W_k† (Lin(C^{p_k}) ⊗ I_{q_k}) W_k ,

where each ``W_k`` is a (p_k q_k) × d isometry onto the k-th central block.
Whichever form is missing is computed on first use. The block form makes
commutants, centres and projections cheap, which is what keeps the larger
decompositions tractable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import get_settings
from .errors import NonConvergence, NotCommutative, NotCommuting, NotFactor
from .linalg import cluster_values, dagger, extend_orthonormal, nullspace, orthonormal_columns

_BASIS_ENTRY_LIMIT = 4_000_000


@dataclass(frozen=True)
class Block:
    """One central block: ``isometry`` maps its support onto C^p ⊗ C^q."""

    isometry: np.ndarray
    p: int
    q: int

    @property
    def projector(self) -> np.ndarray:
        return dagger(self.isometry) @ self.isometry

    def swapped(self) -> "Block":
        w = self.isometry.reshape(self.p, self.q, -1).transpose(1, 0, 2)
        return Block(w.reshape(self.p * self.q, -1), self.q, self.p)


@dataclass(frozen=True)
class ProjectorSet:
    dim: int
    projectors: list

    def __len__(self) -> int:
        return len(self.projectors)

    def __iter__(self):
        return iter(self.projectors)

    def ranks(self) -> list[int]:
        return [int(round(np.trace(p).real)) for p in self.projectors]


@dataclass(frozen=True)
class FactorSplit:
    block_projector: np.ndarray
    p: int
    q: int
    isometry: np.ndarray


class MatAlgebra:
    """Unital *-subalgebra of Lin(C^dim)."""

    def __init__(self, dim: int, *, basis=None, blocks=None, tol: float | None = None):
        if basis is None and blocks is None:
            raise ValueError("need a basis or a block structure")
        self.dim = int(dim)
        self.tol = get_settings().tol if tol is None else tol
        self._basis = None if basis is None else np.asarray(basis, dtype=complex)
        self._blocks = None if blocks is None else list(blocks)

    # -- constructors -------------------------------------------------
    @classmethod
    def full(cls, dim: int) -> "MatAlgebra":
        return cls(dim, blocks=[Block(np.eye(dim, dtype=complex), dim, 1)])

    @classmethod
    def scalars(cls, dim: int) -> "MatAlgebra":
        return cls(dim, blocks=[Block(np.eye(dim, dtype=complex), 1, dim)])

    @classmethod
    def from_blocks(cls, dim: int, blocks) -> "MatAlgebra":
        return cls(dim, blocks=[b for b in blocks if b.p * b.q > 0])

    @classmethod
    def from_spanning_set(cls, mats, dim: int, tol: float | None = None) -> "MatAlgebra":
        """Algebra whose basis spans ``mats``; the caller guarantees closure."""
        tol = get_settings().tol if tol is None else tol
        mats = np.asarray(mats, dtype=complex).reshape(-1, dim * dim)
        q = orthonormal_columns(mats.T, tol)
        return cls(dim, basis=q.T.reshape(-1, dim, dim), tol=tol)

    # -- lazy views ---------------------------------------------------
    @property
    def blocks(self) -> list[Block]:
        if self._blocks is None:
            self._blocks = _blocks_from_basis(self.basis, self.dim, self.tol)
        return self._blocks

    @property
    def basis(self) -> np.ndarray:
        if self._basis is None:
            self._basis = _basis_from_blocks(self._blocks, self.dim)
        return self._basis

    @property
    def dimension(self) -> int:
        if self._basis is not None:
            return self._basis.shape[0]
        return sum(b.p * b.p for b in self._blocks)

    @property
    def has_basis(self) -> bool:
        return self._basis is not None

    def __repr__(self) -> str:
        return f"MatAlgebra(dim={self.dim}, dimension={self.dimension})"

    # -- element-level tools -------------------------------------------
    def random_element(self, rng: np.random.Generator, hermitian: bool = False) -> np.ndarray:
        if self._blocks is not None:
            x = np.zeros((self.dim, self.dim), dtype=complex)
            for b in self._blocks:
                g = rng.normal(size=(b.p, b.p)) + 1j * rng.normal(size=(b.p, b.p))
                if hermitian:
                    g = g + dagger(g)
                x += dagger(b.isometry) @ np.kron(g, np.eye(b.q)) @ b.isometry
            return x
        c = rng.normal(size=self.dimension) + 1j * rng.normal(size=self.dimension)
        x = np.tensordot(c, self._basis, axes=1)
        return x + dagger(x) if hermitian else x

    def generators(self, count: int = 2, seed: int | None = None) -> list[np.ndarray]:
        """A few generic elements together with their adjoints; they generate the algebra."""
        rng = np.random.default_rng(get_settings().seed if seed is None else seed)
        out = []
        for _ in range(count):
            x = self.random_element(rng)
            out += [x, dagger(x)]
        return out

    def project(self, x: np.ndarray) -> np.ndarray:
        """Hilbert-Schmidt orthogonal projection of ``x`` onto the algebra."""
        if self._blocks is not None:
            out = np.zeros((self.dim, self.dim), dtype=complex)
            for b in self._blocks:
                y = (b.isometry @ x @ dagger(b.isometry)).reshape(b.p, b.q, b.p, b.q)
                red = np.einsum("ajbj->ab", y) / b.q
                out += dagger(b.isometry) @ np.kron(red, np.eye(b.q)) @ b.isometry
            return out
        coeffs = np.tensordot(np.conj(self._basis), x, axes=([1, 2], [0, 1]))
        return np.tensordot(coeffs, self._basis, axes=1)

    def contains(self, x: np.ndarray) -> bool:
        nx = np.linalg.norm(x)
        return bool(np.linalg.norm(x - self.project(x)) <= 100 * self.tol * max(nx, 1.0))

    def is_commutative(self) -> bool:
        return all(b.p == 1 for b in self.blocks)


# ----------------------------------------------------------------------
# structure extraction


def _basis_from_blocks(blocks, dim: int) -> np.ndarray:
    total = sum(b.p * b.p for b in blocks)
    if total * dim * dim > _BASIS_ENTRY_LIMIT:
        raise MemoryError(f"explicit basis of {total} matrices of size {dim} is too large")
    out = np.zeros((total, dim, dim), dtype=complex)
    i = 0
    for b in blocks:
        w = b.isometry.reshape(b.p, b.q, dim)
        for a in range(b.p):
            for c in range(b.p):
                out[i] = dagger(w[a]) @ w[c] / np.sqrt(b.q)
                i += 1
    return out


def _blocks_from_basis(basis: np.ndarray, dim: int, tol: float) -> list[Block]:
    """Block form of the algebra spanned by ``basis``.

    A generic self-adjoint element splits the space into minimal projectors
    (its eigen-clusters); a generic element then links minimal projectors of
    the same central block, and its compressions give matrix units.
    """
    settings = get_settings()
    total = basis.shape[0]
    for attempt in range(settings.retries):
        rng = np.random.default_rng(settings.seed + 7919 * attempt)
        c = rng.normal(size=total)
        h = np.tensordot(c, basis, axes=1)
        h = (h + dagger(h)) / 2
        cz = rng.normal(size=total) + 1j * rng.normal(size=total)
        y = np.tensordot(cz, basis, axes=1)
        blocks = _blocks_from_generic(h, y, dim, tol, settings.cluster_gap)
        if blocks is not None and sum(b.p * b.p for b in blocks) == total:
            return blocks
    raise NonConvergence("could not resolve the block structure from generic elements")


def _blocks_from_generic(h, y, dim, tol, gap) -> list[Block] | None:
    evals, evecs = np.linalg.eigh(h)
    clusters = cluster_values(evals, gap)
    spaces = [evecs[:, idx] for idx in sorted(clusters, key=lambda g: g.min())]
    k = len(spaces)
    ynorm = max(np.linalg.norm(y), 1e-300)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    compressed = {}
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            m = dagger(spaces[i]) @ y @ spaces[j]
            if np.linalg.norm(m) > 1e3 * tol * ynorm:
                compressed[i, j] = m
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    blocks = []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        q = spaces[members[0]].shape[1]
        if any(spaces[i].shape[1] != q for i in members):
            return None
        first = members[0]
        rows = [dagger(spaces[first])]
        for i in members[1:]:
            m = compressed.get((i, first))
            if m is None:
                return None
            gram = dagger(m) @ m
            lam = np.trace(gram).real / q
            if lam <= 0 or np.linalg.norm(gram - lam * np.eye(q)) > 1e3 * tol * max(lam, 1e-300) + 1e-7 * lam:
                return None
            u = m / np.sqrt(lam)
            rows.append(dagger(spaces[i] @ u))
        w = np.concatenate(rows, axis=0)
        blocks.append(Block(w, len(members), q))
    return blocks


# ----------------------------------------------------------------------
# the public operations


def span_closure(generators, dim: int, tol: float | None = None) -> MatAlgebra:
    """Smallest unital *-algebra containing ``generators``."""
    tol = get_settings().tol if tol is None else tol
    gens = [np.asarray(g, dtype=complex) for g in generators]
    for g in gens:
        if g.shape != (dim, dim):
            raise ValueError("generator has the wrong shape")
    gens = gens + [dagger(g) for g in gens]
    scale = max([1.0] + [np.linalg.norm(g) for g in gens])
    vecs = [np.eye(dim, dtype=complex).reshape(-1)] + [g.reshape(-1) for g in gens]
    q = extend_orthonormal(np.zeros((dim * dim, 0), dtype=complex), np.stack(vecs, axis=1), scale, tol)
    frontier = q if gens else q[:, :0]
    while frontier.shape[1]:
        new = []
        for col in frontier.T:
            b = col.reshape(dim, dim)
            for g in gens:
                new.append((b @ g).reshape(-1))
                new.append((g @ b).reshape(-1))
        before = q.shape[1]
        q = extend_orthonormal(q, np.stack(new, axis=1), scale, tol)
        if q.shape[1] > dim * dim:
            raise NonConvergence("basis exceeded d^2 elements; tolerance is misconfigured")
        frontier = q[:, before:]
    return MatAlgebra(dim, basis=q.T.reshape(-1, dim, dim), tol=tol)


def commutant(a: MatAlgebra) -> MatAlgebra:
    return MatAlgebra(a.dim, blocks=[b.swapped() for b in a.blocks], tol=a.tol)


def centre(a: MatAlgebra) -> MatAlgebra:
    return MatAlgebra(a.dim, blocks=[Block(b.isometry, 1, b.p * b.q) for b in a.blocks], tol=a.tol)


def atomic_projectors(z: MatAlgebra) -> ProjectorSet:
    """Minimal projectors of a commutative algebra, ordered by descending rank."""
    if not z.is_commutative():
        raise NotCommutative("atomic projectors need a commutative algebra")
    projs = [b.projector for b in z.blocks]
    return ProjectorSet(z.dim, sort_projectors(projs))


def sort_projectors(projs) -> list[np.ndarray]:
    """Canonical order: descending rank, then lexicographic diagonal weight."""

    def key(p):
        diag = np.round(np.real(np.diag(p)), 8)
        return (-int(round(np.trace(p).real)), tuple(-diag))

    return sorted(projs, key=key)


def intersect(a: MatAlgebra, b: MatAlgebra) -> MatAlgebra:
    """Elements lying in both algebras.

    The smaller algebra is parametrised by its block coordinates ``⊕ X_k``;
    membership in the other is imposed as commutation with generic
    generators of its commutant, one operator-Schmidt piece at a time.
    """
    if a.dim != b.dim:
        raise ValueError("ambient dimensions differ")
    if a.dimension > b.dimension:
        a, b = b, a
    b_comm = commutant(b)
    if b_comm.dimension == 1:
        return a
    blocks = a.blocks
    ps = [blk.p for blk in blocks]
    offs = np.concatenate([[0], np.cumsum([p * p for p in ps])]).astype(int)
    gens = b_comm.generators(2)
    scale = max(np.linalg.norm(g) for g in gens)
    rows = []
    for g in gens:
        for j, bj in enumerate(blocks):
            left = bj.isometry @ g
            for k, bk in enumerate(blocks):
                m = (left @ dagger(bk.isometry)).reshape(bj.p, bj.q, bk.p, bk.q)
                m = m.transpose(0, 2, 1, 3).reshape(bj.p * bk.p, bj.q * bk.q)
                if not np.any(np.abs(m) > a.tol * scale):
                    continue
                u, sv, _ = np.linalg.svd(m, full_matrices=False)
                for i in np.flatnonzero(sv > a.tol * scale):
                    alpha = (u[:, i] * sv[i]).reshape(bj.p, bk.p)
                    row = np.zeros((bj.p * bk.p, offs[-1]), dtype=complex)
                    # X_j alpha - alpha X_k, row-major vectorisation
                    row[:, offs[j]:offs[j + 1]] += np.kron(np.eye(bj.p), alpha.T)
                    row[:, offs[k]:offs[k + 1]] -= np.kron(alpha, np.eye(bk.p))
                    rows.append(row)
    if not rows:
        return a
    ker = nullspace(np.concatenate(rows), a.tol, scale=scale)
    n = ker.shape[1]
    if n == offs[-1]:
        return a
    if n <= 1:
        return MatAlgebra.scalars(a.dim)

    def lift(coords):
        x = np.zeros((a.dim, a.dim), dtype=complex)
        for k, blk in enumerate(blocks):
            xk = coords[offs[k]:offs[k + 1]].reshape(blk.p, blk.p)
            x += dagger(blk.isometry) @ np.kron(xk, np.eye(blk.q)) @ blk.isometry
        return x

    settings = get_settings()
    for attempt in range(settings.retries):
        rng = np.random.default_rng(settings.seed + 104729 * attempt)
        h = lift(ker @ rng.normal(size=n))
        h = (h + dagger(h)) / 2
        y = lift(ker @ (rng.normal(size=n) + 1j * rng.normal(size=n)))
        found = _blocks_from_generic(h, y, a.dim, a.tol, settings.cluster_gap)
        if found is not None and sum(blk.p * blk.p for blk in found) == n:
            return MatAlgebra(a.dim, blocks=found, tol=a.tol)
    mats = np.stack([lift(ker[:, i]) for i in range(n)])
    return MatAlgebra.from_spanning_set(mats, a.dim, a.tol)


def join(a: MatAlgebra, b: MatAlgebra) -> MatAlgebra:
    """Smallest algebra containing both, as the commutant of the common commutant."""
    if a.dim != b.dim:
        raise ValueError("ambient dimensions differ")
    if a.dimension == 1:
        return b
    if b.dimension == 1:
        return a
    return commutant(intersect(commutant(a), commutant(b)))


def join_all(algebras, dim: int) -> MatAlgebra:
    out = MatAlgebra.scalars(dim)
    for alg in algebras:
        out = join(out, alg)
    return out


def commute(a: MatAlgebra, b: MatAlgebra) -> bool:
    scale = 1.0
    for x in a.generators(1):
        for y in b.generators(1, seed=get_settings().seed + 1):
            scale = max(np.linalg.norm(x) * np.linalg.norm(y), 1e-300)
            if np.linalg.norm(x @ y - y @ x) > 1e3 * a.tol * scale:
                return False
    return True


def is_uncorrelated(f: MatAlgebra, g: MatAlgebra) -> bool:
    """True iff every product of atomic projectors of the two centres is nonzero."""
    if not commute(f, g):
        raise NotCommuting("uncorrelatedness needs commuting algebras")
    pf = atomic_projectors(centre(f))
    pg = atomic_projectors(centre(g))
    return all(np.linalg.norm(x @ y) > 1e3 * f.tol for x in pf for y in pg)


def screening_projector(pi: np.ndarray, g: MatAlgebra) -> np.ndarray:
    """Smallest central projector μ of ``g`` with πμ = π."""
    pi = np.asarray(pi, dtype=complex)
    for x in g.generators(1):
        if np.linalg.norm(pi @ x - x @ pi) > 1e3 * g.tol * max(np.linalg.norm(x), 1.0):
            raise NotCommuting("projector does not commute with the algebra")
    mu = np.zeros_like(pi)
    for nu in atomic_projectors(centre(g)):
        if np.linalg.norm(pi @ nu) > 1e3 * g.tol:
            mu = mu + nu
    return mu


def homomorphism_kernel_blocks(h, f: MatAlgebra) -> tuple[np.ndarray, np.ndarray]:
    """Split the central blocks of ``f`` into those ``h`` keeps and those it kills.

    ``h`` is any callable acting on d×d matrices. Returns the support μ and
    its complement, both central projectors of ``f``.
    """
    mu = np.zeros((f.dim, f.dim), dtype=complex)
    rest = np.zeros_like(mu)
    for pi in atomic_projectors(centre(f)):
        if np.linalg.norm(h(pi)) > 1e3 * f.tol:
            mu = mu + pi
        else:
            rest = rest + pi
    return mu, rest


def factor_split(a: MatAlgebra, projector: np.ndarray | None = None) -> FactorSplit:
    """Tensor splitting of a factor block of ``a``.

    Without ``projector`` the algebra itself must be a factor. Otherwise
    ``projector`` must be one atomic projector of its centre.
    """
    blocks = a.blocks
    if projector is None:
        if len(blocks) != 1:
            raise NotFactor(f"algebra has {len(blocks)} central blocks")
        b = blocks[0]
        return FactorSplit(b.projector, b.p, b.q, b.isometry)
    projector = np.asarray(projector, dtype=complex)
    for b in blocks:
        pb = b.projector
        if np.linalg.norm(pb - projector) <= 1e3 * a.tol * max(1.0, np.linalg.norm(pb)):
            return FactorSplit(pb, b.p, b.q, b.isometry)
    raise NotFactor("projector is not an atomic central projector of the algebra")


def conjugate(a: MatAlgebra, u: np.ndarray) -> MatAlgebra:
    """The algebra u A u†."""
    u = np.asarray(u, dtype=complex)
    if a._blocks is not None:
        return MatAlgebra(a.dim, blocks=[Block(b.isometry @ dagger(u), b.p, b.q) for b in a._blocks], tol=a.tol)
    return MatAlgebra(a.dim, basis=u @ a.basis @ dagger(u), tol=a.tol)


def span_distance(a: MatAlgebra, b: MatAlgebra, probes: int = 6) -> float:
    """Sine of the largest principal angle between the two linear spans.

    Exact when both bases are affordable; otherwise estimated from generic
    elements of each algebra projected onto the other.
    """
    if a.dim != b.dim:
        return 1.0
    small = max(a.dimension, b.dimension) * a.dim * a.dim <= _BASIS_ENTRY_LIMIT
    if small:
        qa = a.basis.reshape(a.dimension, -1).T
        qb = b.basis.reshape(b.dimension, -1).T
        d1 = np.linalg.norm(qa - qb @ (dagger(qb) @ qa), 2) if qa.size else 0.0
        d2 = np.linalg.norm(qb - qa @ (dagger(qa) @ qb), 2) if qb.size else 0.0
        return float(min(1.0, max(d1, d2)))
    rng = np.random.default_rng(get_settings().seed + 17)
    worst = 0.0 if a.dimension == b.dimension else 1.0
    for _ in range(probes):
        for src, dst in ((a, b), (b, a)):
            x = src.random_element(rng)
            x /= np.linalg.norm(x)
            worst = max(worst, float(np.linalg.norm(x - dst.project(x))))
    return min(1.0, worst)


def same_algebra(a: MatAlgebra, b: MatAlgebra, tol: float = 1e-7) -> bool:
    return a.dimension == b.dimension and span_distance(a, b) <= tol


def compress(a: MatAlgebra, projector: np.ndarray) -> list[np.ndarray]:
    """Spanning set of π A (π central or commuting with A)."""
    return [projector @ x for x in a.basis]


def diagonal_algebra(patterns, dim: int | None = None) -> MatAlgebra:
    """Algebra of diagonal matrices with the given label patterns.

    ``patterns`` is a sequence such as ``"aabb"``; equal letters share a free
    parameter, as in diag(α, α, β, β).
    """
    labels = list(patterns)
    dim = len(labels) if dim is None else dim
    blocks = []
    for letter in sorted(set(labels), key=labels.index):
        idx = [i for i, c in enumerate(labels) if c == letter]
        w = np.zeros((len(idx), dim), dtype=complex)
        for r, i in enumerate(idx):
            w[r, i] = 1.0
        blocks.append(Block(w, 1, len(idx)))
    return MatAlgebra(dim, blocks=blocks)
