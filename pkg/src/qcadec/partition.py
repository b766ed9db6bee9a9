"""Partitions of a factor algebra over a ring of N sites.

Site positions are integers in quarter units modulo 4N. Three grids are
used: ``"int"`` (positions 4n), ``"half"`` (4n + 2) and ``"fine"``
(4n ± 1, two sites per unit cell). Only interval algebras are stored; any
other subset is resolved as the join over its connected components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import cstar
from .config import get_settings
from .cstar import Block, MatAlgebra
from .errors import NoShift

GRID_OFFSETS = {"int": (0,), "half": (2,), "fine": (1, 3)}


def grid_sites(N: int, grid: str) -> list[int]:
    """Quarter-unit positions of a grid, in increasing order."""
    return sorted((4 * n + off) % (4 * N) for n in range(N) for off in GRID_OFFSETS[grid])


def to_quarters(x) -> int:
    q = Fraction(x) * 4
    if q.denominator != 1:
        raise ValueError(f"{x} is not a multiple of 1/4")
    return int(q)


def cyclic_distance(a: int, b: int, N: int) -> Fraction:
    """Distance between two quarter-unit positions, in site units."""
    m = 4 * N
    d = (a - b) % m
    return Fraction(min(d, m - d), 4)


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    grid: str


@dataclass
class PartitionReport:
    ok: bool
    failures: list = field(default_factory=list)
    checked: int = 0


class OneDPartition:
    """Interval-keyed algebras A_S of a factor Lin(C^dim).

    ``algebras`` maps ``(start, end)`` quarter-unit pairs to algebras. A
    ``provider`` callable can supply missing intervals lazily; results are
    cached.
    """

    def __init__(
        self,
        N: int,
        grid: str,
        dim: int,
        algebras: dict | None = None,
        provider: Callable[[int, int], MatAlgebra] | None = None,
        shift: np.ndarray | None = None,
        name: str = "",
    ):
        self.N = N
        self.grid = grid
        self.dim = dim
        self.sites = grid_sites(N, grid)
        self._index = {s: i for i, s in enumerate(self.sites)}
        self._algebras = dict(algebras or {})
        self._provider = provider
        self.shift = shift
        self.name = name

    # -- geometry ------------------------------------------------------
    @property
    def size(self) -> int:
        return len(self.sites)

    def step(self, site: int, k: int) -> int:
        return self.sites[(self._index[site] + k) % self.size]

    def interval_sites(self, start: int, end: int) -> list[int]:
        i, j = self._index[start], self._index[end]
        length = (j - i) % self.size + 1
        return [self.sites[(i + k) % self.size] for k in range(length)]

    def intervals(self) -> list[tuple[int, int]]:
        """All proper nonempty intervals as (start, end)."""
        out = []
        for length in range(1, self.size):
            for i in range(self.size):
                out.append((self.sites[i], self.sites[(i + length - 1) % self.size]))
        return out

    def components(self, subset) -> list[tuple[int, int]]:
        """Maximal intervals making up ``subset``."""
        subset = set(subset)
        if not subset:
            return []
        if len(subset) == self.size:
            return [("all", "all")]
        comps = []
        for s in subset:
            if self.step(s, -1) not in subset:
                end = s
                while self.step(end, 1) in subset:
                    end = self.step(end, 1)
                comps.append((s, end))
        return sorted(comps)

    # -- algebra lookup ------------------------------------------------
    def ambient(self) -> MatAlgebra:
        return MatAlgebra.full(self.dim)

    def interval_algebra(self, start: int, end: int) -> MatAlgebra:
        key = (start, end)
        if key not in self._algebras:
            if self._provider is None:
                comp = (self.step(end, 1), self.step(start, -1))
                if comp in self._algebras:
                    self._algebras[key] = cstar.commutant(self._algebras[comp])
                else:
                    raise KeyError(f"no algebra stored for interval {key}")
            else:
                self._algebras[key] = self._provider(start, end)
        return self._algebras[key]

    def algebra(self, subset) -> MatAlgebra:
        comps = self.components(subset)
        if not comps:
            return MatAlgebra.scalars(self.dim)
        if comps == [("all", "all")]:
            return self.ambient()
        return cstar.join_all([self.interval_algebra(a, b) for a, b in comps], self.dim)

    def site_algebra(self, site: int) -> MatAlgebra:
        return self.interval_algebra(site, site)

    def centre_of(self, subset) -> MatAlgebra:
        return cstar.centre(self.algebra(subset))

    def with_algebra(self, start: int, end: int, alg: MatAlgebra) -> "OneDPartition":
        """Copy with one interval algebra replaced (used for negative controls)."""
        algs = {k: self.interval_algebra(*k) for k in self.intervals()}
        algs[(start, end)] = alg
        return OneDPartition(self.N, self.grid, self.dim, algs, shift=self.shift, name=self.name)

    def materialise(self) -> "OneDPartition":
        algs = {k: self.interval_algebra(*k) for k in self.intervals()}
        return OneDPartition(self.N, self.grid, self.dim, algs, shift=self.shift, name=self.name)


# ----------------------------------------------------------------------
# construction


def factor_algebra(site_dims, subset) -> MatAlgebra:
    """Lin(⊗_{s ∈ subset} C^{d_s}) ⊗ I on the tensor product of ``site_dims``."""
    dims = list(site_dims)
    subset = sorted(set(subset))
    rest = [i for i in range(len(dims)) if i not in subset]
    d = int(np.prod(dims, dtype=int))
    p = int(np.prod([dims[i] for i in subset], dtype=int))
    eye = np.eye(d, dtype=complex).reshape(dims + [d])
    w = np.transpose(eye, subset + rest + [len(dims)]).reshape(d, d)
    return MatAlgebra(d, blocks=[Block(w, p, d // p)])


def from_factorisation(site_dims) -> OneDPartition:
    """Partition of Lin(⊗ C^{d_n}) into tensor factors on the integer grid."""
    dims = [int(x) for x in site_dims]
    N = len(dims)
    d = int(np.prod(dims, dtype=int))

    def provider(start, end):
        sites = [s // 4 for s in part.interval_sites(start, end)]
        return factor_algebra(dims, sites)

    part = OneDPartition(N, "int", d, provider=provider, name="factorisation")
    if len(set(dims)) == 1:
        part.shift = cyclic_shift_unitary(dims)
    return part


def cyclic_shift_unitary(site_dims) -> np.ndarray:
    """Unitary moving the tensor factor at site n to site n + 1."""
    dims = list(site_dims)
    if len(set(dims)) != 1:
        raise NoShift("a cyclic shift needs equal site dimensions")
    N = len(dims)
    d = int(np.prod(dims, dtype=int))
    eye = np.eye(d, dtype=complex).reshape(dims + [d])
    perm = [(k - 1) % N for k in range(N)]
    return np.transpose(eye, perm + [N]).reshape(d, d)


def partition_from_sites(N: int, site_algebras, grid: str = "int", pairs=None) -> OneDPartition:
    """Small-ring partition from its site algebras.

    Intervals of length N - 1 are the commutants of the missing site. For N = 4
    the two-site algebras must be given in ``pairs`` keyed by the first site
    index (n, n + 1); pairs not given are taken as commutants of the
    complementary pair.
    """
    dim = site_algebras[0].dim
    part = OneDPartition(N, grid, dim)
    sites = part.sites
    algs = {}
    for i, alg in enumerate(site_algebras):
        algs[(sites[i], sites[i])] = alg
    for (i, j), alg in (pairs or {}).items():
        algs[(sites[i], sites[j])] = alg
    for length in range(N - 1, 0, -1):
        for i in range(N):
            key = (sites[i], sites[(i + length - 1) % N])
            comp = (sites[(i + length) % N], sites[(i - 1) % N])
            if key not in algs and comp in algs:
                algs[key] = cstar.commutant(algs[comp])
    part._algebras = algs
    return part


# ----------------------------------------------------------------------
# validators


def validate_bipartition(a1: MatAlgebra, a2: MatAlgebra, w: MatAlgebra) -> bool:
    """(A1, A2) is a bipartition of W.

    Both lie in W and commute, the centre of W is contained in Z(A1) ∨ Z(A2),
    and for every atomic projector π of Z(W) the compression of the relative
    commutant of A1 equals the compression of A2.
    """
    for sub in (a1, a2):
        for x in sub.generators(1):
            if not w.contains(x):
                return False
    if not cstar.commute(a1, a2):
        return False
    zjoin = cstar.join(cstar.centre(a1), cstar.centre(a2))
    atoms = cstar.atomic_projectors(cstar.centre(w))
    for pi in atoms:
        if not zjoin.contains(pi):
            return False
    rel = cstar.intersect(cstar.commutant(a1), w)
    for pi in atoms:
        if not _same_compression(rel, a2, pi):
            return False
    return True


def _same_compression(x: MatAlgebra, y: MatAlgebra, pi: np.ndarray) -> bool:
    """``x π = y π`` for ``y ⊆ x`` and ``π`` commuting with both.

    Compression by such a projector keeps exactly the blocks it does not
    annihilate, so comparing dimensions suffices.
    """
    return _compressed_dimension(x, pi) == _compressed_dimension(y, pi)


def _compressed_dimension(alg: MatAlgebra, pi: np.ndarray) -> int:
    tol = get_settings().tol
    return sum(b.p * b.p for b in alg.blocks if np.linalg.norm(b.isometry @ pi) > 1e3 * tol * np.sqrt(b.p * b.q))


def validate_partition(part: OneDPartition, samples: int = 8, seed: int | None = None) -> PartitionReport:
    """Check every pair of disjoint intervals plus a sample of non-interval pairs."""
    rng = np.random.default_rng(get_settings().seed if seed is None else seed)
    intervals = part.intervals()
    sets = {k: frozenset(part.interval_sites(*k)) for k in intervals}
    pairs = []
    for k1 in intervals:
        for k2 in intervals:
            if k1 < k2 and not (sets[k1] & sets[k2]):
                pairs.append((sets[k1], sets[k2]))
    # non-interval subsets: random unions of two separated intervals
    for _ in range(samples):
        k1, k2 = rng.choice(len(intervals), size=2, replace=False)
        s = sets[intervals[k1]] | sets[intervals[k2]]
        rest = [x for x in part.sites if x not in s]
        if len(part.components(s)) < 2 or not rest:
            continue
        t = frozenset(rng.choice(rest, size=int(rng.integers(1, len(rest) + 1)), replace=False).tolist())
        pairs.append((frozenset(s), t))
    failures = []
    for s, t in pairs:
        ok = validate_bipartition(part.algebra(s), part.algebra(t), part.algebra(s | t))
        if not ok:
            failures.append((sorted(s), sorted(t)))
    return PartitionReport(not failures, failures, len(pairs))


def expand(part: OneDPartition, subset, radius) -> set:
    """Sites within ``radius`` (site units) of ``subset``."""
    r = Fraction(radius)
    return {x for x in part.sites if any(cyclic_distance(x, s, part.N) <= r for s in subset)}


def correlation_length_at_most(part: OneDPartition, l) -> bool:
    for start, end in part.intervals():
        s = part.interval_sites(start, end)
        rest = set(part.sites) - expand(part, s, l)
        if not rest:
            continue
        if not cstar.is_uncorrelated(part.algebra(s), part.algebra(rest)):
            return False
    return True


def _boundaries(part: OneDPartition, subset) -> tuple[set, set]:
    subset = set(subset)
    adj = set()
    for s in subset:
        adj |= {part.step(s, -1), part.step(s, 1)}
    outer = adj - subset
    comp = set(part.sites) - subset
    cadj = set()
    for s in comp:
        cadj |= {part.step(s, -1), part.step(s, 1)}
    inner = cadj - comp
    return outer, inner


def is_connected(part: OneDPartition, tol: float = 1e-7) -> bool:
    """Every interval centre is the intersection of its outer and inner boundary algebras."""
    for start, end in part.intervals():
        s = part.interval_sites(start, end)
        outer, inner = _boundaries(part, s)
        rhs = cstar.intersect(part.algebra(outer), part.algebra(inner))
        if cstar.span_distance(part.centre_of(s), rhs) > tol:
            return False
    return True


def edge_centre(part: OneDPartition, edge: int) -> MatAlgebra:
    """Z_left ∩ Z_right for the two sites adjacent to the quarter-unit edge position."""
    left = min(part.sites, key=lambda s: (edge - s) % (4 * part.N))
    right = part.step(left, 1)
    return cstar.intersect(part.centre_of([left]), part.centre_of([right]))


def is_strongly_connected(part: OneDPartition, tol: float = 1e-7) -> bool:
    if not is_connected(part, tol):
        return False
    edges = {}
    for s in part.sites:
        edges[s] = cstar.intersect(part.centre_of([part.step(s, -1)]), part.centre_of([s]))
    for start, end in part.intervals():
        after = part.step(end, 1)
        rhs = cstar.join(edges[start], edges[after])
        s = part.interval_sites(start, end)
        if cstar.span_distance(part.centre_of(s), rhs) > tol:
            return False
    return True


def check_shift(part: OneDPartition, tol: float = 1e-7) -> bool:
    """The stored shift moves every interval algebra one site along and has order N."""
    s = part.shift
    if s is None:
        return False
    power = np.linalg.matrix_power(s, part.N)
    if abs(abs(np.vdot(power, np.eye(part.dim))) / part.dim - 1) > 1e-8:
        return False
    per_cell = len(GRID_OFFSETS[part.grid])
    for start, end in part.intervals():
        moved = cstar.conjugate(part.interval_algebra(start, end), s)
        target = part.interval_algebra(part.step(start, per_cell), part.step(end, per_cell))
        if cstar.span_distance(moved, target) > tol:
            return False
    return True


# ----------------------------------------------------------------------
# small counterexample partitions


def connected_not_strong_partition() -> OneDPartition:
    """Three-site partition of Lin(C^4) that is connected but not strongly connected."""
    sites = [cstar.diagonal_algebra(p) for p in ("aabb", "abab", "abba")]
    return partition_from_sites(3, sites)


def product_obstruction_partition() -> OneDPartition:
    """Three-site strongly connected partition of Lin(C^8) with commutative site algebras.

    Conjugation by diag(1,…,1,−1) is inner-local on it, yet is not a product
    of site unitaries.
    """
    sites = [cstar.diagonal_algebra(p) for p in ("aabbccdd", "ababcdcd", "abcdabcd")]
    return partition_from_sites(3, sites)


def product_obstruction_unitary() -> np.ndarray:
    return np.diag([1, 1, 1, 1, 1, 1, 1, -1]).astype(complex)


def nonlocal_dephasing_partition() -> OneDPartition:
    """Four-site strongly connected partition of Lin(C^4).

    The diagonal unitary diag(1,1,1,−1) fixes every site algebra but does not
    preserve the two-site algebra on sites 0 and 1.
    """
    a01 = cstar.diagonal_algebra("abab")
    a23 = cstar.diagonal_algebra("aabb")
    m = factor_algebra([2, 2], [1])
    diag = cstar.diagonal_algebra("abcd")
    return partition_from_sites(4, [a01, a01, a23, a23], pairs={(0, 1): m, (1, 2): diag})


def nonlocal_dephasing_unitary() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(complex)


def disconnected_partition() -> OneDPartition:
    """Four sites of Lin(C^2 ⊗ C^2) where sites 0 and 2 share a nontrivial centre and site 1 is trivial.

    Sites 0 and 2 both carry the diagonal algebra of the first qubit, so they
    are perfectly correlated although not adjacent.
    """
    z = cstar.diagonal_algebra("aabb")
    low = factor_algebra([2, 2], [1])
    triv = MatAlgebra.scalars(4)
    return partition_from_sites(4, [z, triv, z, low], pairs={(0, 1): z, (1, 2): z})
