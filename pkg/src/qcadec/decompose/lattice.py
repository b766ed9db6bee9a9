"""Sectorised ring lattices in explicit coordinates.

A lattice has ``M`` sites on a ring. Edge ``j`` sits to the right of site
``j`` and carries one of ``K[j]`` labels. Site ``j`` holds a space of
dimension ``p[j][a, b]`` when its left edge has label ``a`` and its right edge
label ``b``. The global space is the direct sum, over label assignments with
every site non-empty, of the tensor product of the site spaces. Sectors are
ordered lexicographically and each sector is row-major over the sites.

The algebra of an interval is block diagonal in the labels of its two outer
edges and arbitrary inside; the algebra of a single site is therefore
``⊕ Lin(C^{p[j][a, b]})`` acting on that site's factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..config import get_settings
from ..cstar import MatAlgebra
from ..linalg import nullspace


def _region_basis(p, sites, left, right):
    """Inner label tuples of a run of sites with fixed outer labels.

    Returns ``{inner: (offset, dims)}`` and the total dimension.
    """
    ks = [p[s].shape[1] for s in sites[:-1]]
    out, pos = {}, 0
    for inner in itertools.product(*[range(k) for k in ks]):
        labs = (left,) + inner + (right,)
        dims = tuple(int(p[s][labs[i], labs[i + 1]]) for i, s in enumerate(sites))
        size = int(np.prod(dims))
        if size == 0:
            continue
        out[inner] = (pos, dims)
        pos += size
    return out, pos


@dataclass
class IntervalCoords:
    """Bipartite coordinates ``⊕_(kL,kR) H_J ⊗ H_Jbar`` for one interval."""

    sites: list
    blocks: list  # (kL, kR) in order
    dim_in: list  # dim H_J per block
    dim_out: list  # dim H_Jbar per block
    perm: np.ndarray  # global index -> bipartite position

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return inv

    @cached_property
    def block_offsets(self) -> list:
        offs, pos = [], 0
        for a, b in zip(self.dim_in, self.dim_out):
            offs.append(pos)
            pos += a * b
        return offs

    @cached_property
    def local_offsets(self) -> list:
        offs, pos = [], 0
        for a in self.dim_in:
            offs.append(pos)
            pos += a
        return offs

    @property
    def local_dim(self) -> int:
        return int(sum(self.dim_in))

    def to_bipartite(self, op: np.ndarray) -> np.ndarray:
        inv = self.inverse
        return op[np.ix_(inv, inv)]

    def from_bipartite(self, op: np.ndarray) -> np.ndarray:
        return op[np.ix_(self.perm, self.perm)]

    def to_global(self, x: np.ndarray) -> np.ndarray:
        """Embed a block-diagonal local operator as ``⊕_k X^k ⊗ I``."""
        d = len(self.perm)
        out = np.zeros((d, d), dtype=complex)
        for k, (a, b) in enumerate(zip(self.dim_in, self.dim_out)):
            lo = self.local_offsets[k]
            off = self.block_offsets[k]
            blk = x[lo:lo + a, lo:lo + a]
            out[off:off + a * b, off:off + a * b] = np.kron(blk, np.eye(b))
        return self.from_bipartite(out)

    def pieces(self, op: np.ndarray, tol: float):
        """Operator-Schmidt pieces ``(k', k, alpha)`` of ``op`` on the interval side."""
        ob = self.to_bipartite(op)
        out = []
        scale = max(np.linalg.norm(op), 1e-300)
        nb = len(self.blocks)
        for k2 in range(nb):
            a2, b2 = self.dim_in[k2], self.dim_out[k2]
            o2 = self.block_offsets[k2]
            for k1 in range(nb):
                a1, b1 = self.dim_in[k1], self.dim_out[k1]
                o1 = self.block_offsets[k1]
                sub = ob[o2:o2 + a2 * b2, o1:o1 + a1 * b1]
                if not np.any(np.abs(sub) > tol * scale):
                    continue
                m = sub.reshape(a2, b2, a1, b1).transpose(0, 2, 1, 3).reshape(a2 * a1, b2 * b1)
                u, s, _ = np.linalg.svd(m, full_matrices=False)
                for i in np.flatnonzero(s > tol * scale):
                    out.append((k2, k1, (u[:, i] * s[i]).reshape(a2, a1)))
        return out


class SectorLattice:
    def __init__(self, site_dims, edge_names=None):
        self.p = [np.asarray(x, dtype=int) for x in site_dims]
        self.M = len(self.p)
        for j in range(self.M):
            if self.p[j].shape[1] != self.p[(j + 1) % self.M].shape[0]:
                raise ValueError(f"label count mismatch on edge {j}")
        self.K = [self.p[j].shape[1] for j in range(self.M)]
        self.edge_names = list(edge_names) if edge_names is not None else [None] * self.M
        self._coords: dict = {}

    @classmethod
    def tensor(cls, dims) -> "SectorLattice":
        return cls([np.array([[int(x)]]) for x in dims])

    def site_dims(self, j: int, left: int, right: int) -> int:
        return int(self.p[j][left, right])

    @property
    def trivial_edges(self) -> bool:
        return all(k == 1 for k in self.K)

    @cached_property
    def sectors(self) -> list:
        out = []
        for labs in itertools.product(*[range(k) for k in self.K]):
            dims = [int(self.p[j][labs[j - 1], labs[j]]) for j in range(self.M)]
            if min(dims) > 0:
                out.append((labs, dims))
        return out

    @cached_property
    def dim(self) -> int:
        return int(sum(np.prod(d) for _, d in self.sectors))

    @cached_property
    def index_table(self):
        """Per global index: edge labels (d, M) and site coordinates (d, M)."""
        labels, coords = [], []
        for labs, dims in self.sectors:
            grid = np.indices(dims).reshape(self.M, -1).T
            coords.append(grid)
            labels.append(np.tile(np.array(labs), (grid.shape[0], 1)))
        return np.concatenate(labels), np.concatenate(coords)

    def interval(self, start: int, length: int) -> IntervalCoords:
        key = (start % self.M, length)
        if key in self._coords:
            return self._coords[key]
        M = self.M
        if not 1 <= length < M:
            raise ValueError("interval must be a proper non-empty run of sites")
        sites = [(start + i) % M for i in range(length)]
        rest = [(start + length + i) % M for i in range(M - length)]
        le, re = (start - 1) % M, sites[-1]
        inner_cache, outer_cache = {}, {}
        blocks = []
        for kl in range(self.K[le]):
            for kr in range(self.K[re]):
                bi = _region_basis(self.p, sites, kl, kr)
                bo = _region_basis(self.p, rest, kr, kl)
                inner_cache[(kl, kr)], outer_cache[(kl, kr)] = bi, bo
                if bi[1] and bo[1]:
                    blocks.append((kl, kr))
        index = {b: i for i, b in enumerate(blocks)}
        dim_in = [inner_cache[b][1] for b in blocks]
        dim_out = [outer_cache[b][1] for b in blocks]
        offs, pos = [], 0
        for a, b in zip(dim_in, dim_out):
            offs.append(pos)
            pos += a * b
        labels, coords = self.index_table
        perm = np.empty(len(labels), dtype=int)
        for g, (lab, c) in enumerate(zip(labels, coords)):
            kl, kr = int(lab[le]), int(lab[re])
            k = index[(kl, kr)]
            (mi, _), (mo, _) = inner_cache[(kl, kr)], outer_cache[(kl, kr)]
            ioff, idims = mi[tuple(int(lab[s]) for s in sites[:-1])]
            ooff, odims = mo[tuple(int(lab[s]) for s in rest[:-1])]
            i_in = ioff + int(np.ravel_multi_index([c[s] for s in sites], idims))
            i_out = ooff + int(np.ravel_multi_index([c[s] for s in rest], odims))
            perm[g] = offs[k] + i_in * dim_out[k] + i_out
        out = IntervalCoords(sites, blocks, dim_in, dim_out, perm)
        self._coords[key] = out
        return out

    def site(self, j: int) -> IntervalCoords:
        return self.interval(j, 1)

    def local_commutant(self, start: int, length: int, ops, tol: float | None = None) -> MatAlgebra:
        """Elements of the interval algebra commuting with every operator in ``ops``."""
        tol = get_settings().tol if tol is None else tol
        iv = self.interval(start, length)
        dims = iv.dim_in
        unk_off, pos = [], 0
        for a in dims:
            unk_off.append(pos)
            pos += a * a
        n_unk = pos
        rows = []
        scale = 1.0
        for op in ops:
            scale = max(scale, np.linalg.norm(op))
            for k2, k1, alpha in iv.pieces(op, tol):
                a2, a1 = dims[k2], dims[k1]
                m = np.zeros((a2 * a1, n_unk), dtype=complex)
                # X^{k2} alpha - alpha X^{k1}, row-major vectorisation
                m[:, unk_off[k2]:unk_off[k2] + a2 * a2] += np.kron(np.eye(a2), alpha.T)
                m[:, unk_off[k1]:unk_off[k1] + a1 * a1] -= np.kron(alpha, np.eye(a1))
                rows.append(m)
        cons = np.concatenate(rows) if rows else np.zeros((0, n_unk), dtype=complex)
        ker = nullspace(cons, tol, scale=scale)
        D = iv.local_dim
        basis = np.zeros((ker.shape[1], D, D), dtype=complex)
        for k, a in enumerate(dims):
            lo = iv.local_offsets[k]
            basis[:, lo:lo + a, lo:lo + a] = ker[unk_off[k]:unk_off[k] + a * a].T.reshape(-1, a, a)
        return MatAlgebra.from_spanning_set(basis, D, tol)

    def site_algebra_generators(self, j: int, rng) -> list:
        iv = self.site(j)
        out = []
        for _ in range(2):
            x = np.zeros((iv.local_dim, iv.local_dim), dtype=complex)
            for k, a in enumerate(iv.dim_in):
                lo = iv.local_offsets[k]
                x[lo:lo + a, lo:lo + a] = rng.normal(size=(a, a)) + 1j * rng.normal(size=(a, a))
            g = iv.to_global(x)
            out += [g, g.conj().T]
        return out
