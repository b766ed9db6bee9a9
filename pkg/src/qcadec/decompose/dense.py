"""Partition-level splitting, fine- and coarse-graining on dense algebras.

These operate directly on :class:`OneDPartition` objects in the original
input frame. They are exponentially more expensive than the lattice engine
and serve as its independent reference on small rings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import cstar
from ..cstar import MatAlgebra
from ..errors import (
    DephasingObstruction,
    NotInnerLocal,
    PreconditionFailed,
    SizeTooSmall,
)
from ..linalg import dagger
from ..partition import OneDPartition, edge_centre, factor_algebra, to_quarters


@dataclass
class SplitContext:
    """Geometry of one vertex split; ``n`` is a quarter-unit position."""

    n: int
    N: int
    r_current: Fraction
    l_A: Fraction = Fraction(0)
    l_B: Fraction = Fraction(0)

    @property
    def p_minus(self) -> int:
        return -math.ceil((self.N - 1) / 2)

    @property
    def p_plus(self) -> int:
        return math.ceil((self.N - 1) / 2)

    @property
    def q_minus(self) -> Fraction:
        return self.p_minus + self.l_A

    @property
    def q_plus(self) -> Fraction:
        return self.p_plus - self.l_A


@dataclass
class VertexSplit:
    n: int
    left: MatAlgebra  # quarter site n − 1/4
    right: MatAlgebra  # quarter site n + 1/4
    seed: MatAlgebra  # algebra of the half ring ending at n − 1/4


def pulled_back_outputs(q) -> OneDPartition:
    """Output factorisation of a map pulled back into its input frame.

    Output site m sits at quarter position 4(m − out_offset); its algebra is
    U† Lin(C^{d_m}) U.
    """
    N = q.N
    off = to_quarters(q.out_offset + q.in_offset)
    grid = "int" if off % 4 == 0 else "half"
    u_dag = dagger(q.unitary)
    dims = list(q.out_dims)

    def provider(start, end):
        sites = [((s + off) // 4) % N for s in part.interval_sites(start, end)]
        return cstar.conjugate(factor_algebra(dims, sites), u_dag)

    part = OneDPartition(N, grid, q.dim, provider=provider, name="pulled-back outputs")
    return part


def _output_at(B: OneDPartition, pos: int) -> MatAlgebra:
    pos %= 4 * B.N
    if pos not in B.sites:
        raise PreconditionFailed(f"no output site at quarter position {pos}")
    return B.site_algebra(pos)


def vertex_split(P: OneDPartition, B: OneDPartition, n: int, ctx: SplitContext) -> VertexSplit:
    """Split site ``n`` of ``P`` against the pulled-back outputs ``B``.

    The left quarter keeps what commutes with the rightmost output reached
    from ``n``; the right quarter is what commutes with the seed, the part of
    the half ring ending at ``n`` that commutes with that output.
    """
    if ctx.l_A and P.N < 4 * ctx.l_A + 1:
        raise SizeTooSmall("vertex splitting requires N ≥ 4·l + 1")
    o = _output_at(B, n + to_quarters(ctx.r_current))
    if ctx.l_B:
        extra = [_output_at(B, n + to_quarters(ctx.r_current) + 4 * k) for k in range(1, int(ctx.l_B) + 1)]
        o = cstar.join_all([o] + extra, P.dim)
    left_region = P.interval_sites(P.step(n, ctx.p_minus), P.step(n, -1))
    if left_region and not cstar.commute(P.algebra(left_region), o):
        raise PreconditionFailed("the output algebra reaches the half ring left of the split site")
    half = P.interval_algebra(P.step(n, ctx.p_minus), n)
    o_comm = cstar.commutant(o)
    seed = cstar.intersect(half, o_comm)
    site = P.site_algebra(n)
    left = cstar.intersect(site, o_comm)
    right = cstar.intersect(site, cstar.commutant(seed))
    if not cstar.commute(left, right):
        raise PreconditionFailed("the two quarter algebras do not commute")
    return VertexSplit(n, left, right, seed)


def fine_grain(P: OneDPartition, B: OneDPartition, r_current, l_A=0, l_B=0) -> OneDPartition:
    """Split every site of ``P``; the result lives on the quarter grid.

    A short fine interval is the coarse interval it touches, intersected
    with the seed of a site whose left quarter it ends on and with the
    seed's commutant for a site whose right quarter it starts on. Long
    intervals are commutants of their complements.
    """
    r_current = Fraction(r_current)
    N = P.N
    if N < 4 * r_current + 2 * (Fraction(l_A) + Fraction(l_B)) + 1:
        raise SizeTooSmall("requires N > 4r")
    splits = {}
    for s in P.sites:
        ctx = SplitContext(s, N, r_current, Fraction(l_A), Fraction(l_B))
        splits[s] = vertex_split(P, B, s, ctx)
    quarter = {}
    for s, sp in splits.items():
        quarter[(s - 1) % (4 * N)] = sp.left
        quarter[(s + 1) % (4 * N)] = sp.right

    ring = 4 * N
    h_max = math.ceil((N - 1) / 2) + 1

    def coarse_of(f):
        return (f + 1) % ring if (f + 1) % ring in splits else (f - 1) % ring

    def provider(start, end):
        if start == end:
            return quarter[start]
        hull = []
        for f in F.interval_sites(start, end):
            c = coarse_of(f)
            if c not in hull:
                hull.append(c)
        if len(hull) > h_max:
            # long intervals are fixed by their (short) complement
            return cstar.commutant(F.interval_algebra(F.step(end, 1), F.step(start, -1)))
        alg = P.interval_algebra(hull[0], hull[-1])
        if (start - hull[0]) % ring == 1:
            alg = cstar.intersect(alg, cstar.commutant(splits[hull[0]].seed))
        if (hull[-1] - end) % ring == 1:
            alg = cstar.intersect(alg, splits[hull[-1]].seed)
        return alg

    F = OneDPartition(N, "fine", P.dim, provider=provider, name=f"fine({P.name})")
    F.splits = splits
    return F


def coarse_grain(F: OneDPartition, target: str) -> OneDPartition:
    """Merge quarter sites pairwise onto the integer or half grid."""
    if F.grid != "fine":
        raise ValueError("coarse_grain expects a quarter-grid partition")
    N = F.N

    def provider(start, end):
        return F.interval_algebra((start - 1) % (4 * N), (end + 1) % (4 * N))

    return OneDPartition(N, target, F.dim, provider=provider, name=f"coarse({F.name})")


def decompose_dense(q, r=None) -> list:
    """Alternating fine/coarse partitions of the input frame, computed densely."""
    r = Fraction(q.radius if r is None else r)
    B = pulled_back_outputs(q)
    from ..partition import from_factorisation

    P = from_factorisation(q.in_dims)
    out = []
    for i in range(int(2 * r)):
        F = fine_grain(P, B, r - Fraction(i, 2))
        P = coarse_grain(F, "half" if P.grid == "int" else "int")
        out += [F, P]
    return out


# ----------------------------------------------------------------------
# inner-local automorphisms


@dataclass
class DephasingRecord:
    separable: bool | None
    interaction: float
    sector_phases: dict = field(default_factory=dict)


@dataclass
class InnerLocalCorrection:
    site_unitaries: dict  # quarter position -> unitary in that site algebra
    global_phase: complex
    dephasing: DephasingRecord

    def product(self) -> np.ndarray:
        out = None
        for u in self.site_unitaries.values():
            out = u if out is None else out @ u
        return self.global_phase * out


def _block_unitary(v: np.ndarray, block) -> np.ndarray:
    """Site factor v_k with  W V W† = v_k ⊗ w_k  on one central block."""
    m = block.isometry @ v @ dagger(block.isometry)
    p, q = block.p, block.q
    t = m.reshape(p, q, p, q).transpose(0, 2, 1, 3).reshape(p * p, q * q)
    u, s, _ = np.linalg.svd(t, full_matrices=False)
    if s.size > 1 and s[1] > 1e-6 * s[0]:
        raise NotInnerLocal("the map is not a product on a central block of a site algebra")
    x = u[:, 0].reshape(p, p)
    uu, _, vh = np.linalg.svd(x)
    return uu @ vh


def inner_local_to_product(v: np.ndarray, part: OneDPartition, strict: bool = False) -> InnerLocalCorrection:
    """Write conjugation by ``v`` as a product of site unitaries, if possible.

    Each site contributes the unitary that implements the map on its central
    blocks. What is left over is a phase on the joint edge sectors; it is
    split into nearest-neighbour pieces when it has no longer-range
    interaction, and reported otherwise.
    """
    d = part.dim
    tol = 1e-7
    for s in part.sites:
        z = part.centre_of([s])
        for x in z.generators(2):
            if np.linalg.norm(v @ x @ dagger(v) - x) > tol * max(1.0, np.linalg.norm(x)):
                raise NotInnerLocal(f"the centre of site {s} is not fixed")
        a = part.site_algebra(s)
        for x in a.generators(1):
            if not a.contains(v @ x @ dagger(v)):
                raise NotInnerLocal(f"site {s} is not mapped into itself")
    units = {}
    for s in part.sites:
        a = part.site_algebra(s)
        u = np.zeros((d, d), dtype=complex)
        for blk in a.blocks:
            vk = _block_unitary(v, blk)
            u += dagger(blk.isometry) @ np.kron(vk, np.eye(blk.q)) @ blk.isometry
        units[s] = u
    prod = np.eye(d, dtype=complex)
    for u in units.values():
        prod = prod @ u
    resid = v @ dagger(prod)
    edges = [(s + 2) % (4 * part.N) for s in part.sites]
    atoms = {e: list(cstar.atomic_projectors(edge_centre(part, e))) for e in edges}
    sector_phase = {}
    product_set = True
    for labs in itertools.product(*[range(len(atoms[e])) for e in edges]):
        proj = np.eye(d, dtype=complex)
        for e, k in zip(edges, labs):
            proj = proj @ atoms[e][k]
        rank = int(round(np.trace(proj).real))
        if rank == 0:
            product_set = False
            continue
        blk = resid @ proj
        val = np.trace(blk) / rank
        if np.linalg.norm(blk - val * proj) > 1e-6 * np.sqrt(rank) or abs(abs(val) - 1) > 1e-6:
            raise NotInnerLocal("the residual is not a phase on joint edge sectors")
        sector_phase[labs] = complex(val)
    if not product_set:
        record = DephasingRecord(None, float("nan"), sector_phase)
        if strict:
            raise DephasingObstruction("edge sectors do not form a product set")
        return InnerLocalCorrection(units, 1.0, record)
    n_e = len(edges)
    ref = (0,) * n_e

    def f(labs):
        return sector_phase[labs]

    # Möbius terms F_S over edge subsets S (other edges at the reference label)
    terms: dict = {}
    worst = 0.0
    for size in range(n_e + 1):
        for S in itertools.combinations(range(n_e), size):
            table = {}
            for vals in itertools.product(*[range(len(atoms[edges[e]])) for e in S]):
                acc = 1.0 + 0j
                for sub in range(size + 1):
                    for T in itertools.combinations(range(size), sub):
                        labs = list(ref)
                        for t in T:
                            labs[S[t]] = vals[t]
                        val = f(tuple(labs))
                        acc *= val if (size - sub) % 2 == 0 else np.conj(val)
                table[vals] = acc
            terms[S] = table
            if not _local_subset(S, n_e):
                worst = max(worst, max(abs(x - 1) for x in table.values()))
    separable = bool(worst <= 1e-6)
    record = DephasingRecord(separable, float(worst), sector_phase)
    if not separable:
        if strict:
            raise DephasingObstruction("the residual phase couples non-adjacent edges")
        return InnerLocalCorrection(units, 1.0, record)
    phase = terms[()][()]
    for S, table in terms.items():
        if not S:
            continue
        # edge e sits right of site e: singletons go left, adjacent pairs to the shared site
        if len(S) == 1:
            site = part.sites[S[0]]
        elif S[1] - S[0] == 1:
            site = part.sites[S[1]]
        else:
            site = part.sites[0]
        op = np.zeros((d, d), dtype=complex)
        for vals, val in table.items():
            proj = np.eye(d, dtype=complex)
            for e, k in zip(S, vals):
                proj = proj @ atoms[edges[e]][k]
            op += val * proj
        # outside the sectors touched by S the factor is 1
        units[site] = op @ units[site]
    return InnerLocalCorrection(units, complex(phase), record)


def _local_subset(S, n_e: int) -> bool:
    """Subsets of edges touching a single site: at most two cyclically adjacent edges."""
    if len(S) <= 1:
        return True
    if len(S) > 2:
        return False
    a, b = S
    return b - a == 1 or (a == 0 and b == n_e - 1)
