"""The layer-peeling loop in explicit lattice coordinates.

State after ``i`` steps: a sectorised lattice ``P_i`` and a unitary ``T_i``
from the physical output space into ``P_i`` coordinates whose remaining
radius is ``r − i/2``. One step splits every site ``x`` of ``P_i`` into the
part that commutes with the rightmost output it can reach and the rest, then
regroups neighbouring halves into the sites of ``P_{i+1}``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..cstar import MatAlgebra
from ..errors import FactorSplitFailed, RadiusCheckFailed
from ..linalg import clock_and_shift, dagger, embed_site, permute_tensor_factors
from .lattice import SectorLattice


@dataclass
class SiteGate:
    """Splitting gate of one site: site coordinates → (left wire) ⊗ (right wire).

    ``left_dims[a, t]`` is the dimension of the left wire when the incoming
    left edge has label ``a`` and the new inner label is ``t``;
    ``right_dims[t, b]`` likewise for the right wire.
    """

    site: int
    left_dims: np.ndarray
    right_dims: np.ndarray
    matrix: np.ndarray
    inner_name: str | None = None

    @property
    def n_inner(self) -> int:
        return self.left_dims.shape[1]

    def wire_offsets(self, which: str) -> dict:
        dims = self.left_dims if which == "L" else self.right_dims
        out, pos = {}, 0
        for key in np.ndindex(*dims.shape):
            out[key] = pos
            pos += int(dims[key])
        return out

    def wire_dim(self, which: str) -> int:
        return int((self.left_dims if which == "L" else self.right_dims).sum())


@dataclass
class Step:
    index: int
    lattice: SectorLattice  # P_i
    gates: list  # SiteGate per site
    layer: np.ndarray = field(repr=False)  # L_i, P_i coords -> P_{i+1} coords
    next_lattice: SectorLattice | None = None


def output_generators(out_dims, site: int) -> list:
    clock, shift = clock_and_shift(out_dims[site])
    return [embed_site(clock, site, out_dims), embed_site(shift, site, out_dims)]


def _pulled_back(T: np.ndarray, out_dims, site: int) -> list:
    return [T @ g @ dagger(T) for g in output_generators(out_dims, site)]


def split_algebras(lat: SectorLattice, T: np.ndarray, out_dims, x: int, c: int):
    """Left and right halves of site ``x`` in site coordinates, plus the seed.

    The left half is the part of the site commuting with the rightmost output
    ``x + c`` it reaches; the right half is the part commuting with the seed,
    i.e. with everything on the two-site interval ending at ``x`` that
    commutes with that output.
    """
    N = lat.M
    bo = _pulled_back(T, out_dims, (x + c) % N)
    left = lat.local_commutant(x, 1, bo)
    seed = lat.local_commutant(x - 1, 2, bo)
    iv = lat.interval(x - 1, 2)
    seed_gens = [iv.to_global(g) for g in seed.generators(2)]
    right = lat.local_commutant(x, 1, seed_gens)
    return left, right, seed_gens


def _components(left_projs, right_projs):
    """Connected components of the overlap graph between two projector families."""
    nl = len(left_projs)
    parent = list(range(nl + len(right_projs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, p in enumerate(left_projs):
        for j, q in enumerate(right_projs):
            if np.linalg.norm(p @ q) > 1e-6:
                parent[find(i)] = find(nl + j)
    groups: dict = {}
    for i in range(len(parent)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def build_site_gate(lat: SectorLattice, x: int, left: MatAlgebra, right: MatAlgebra, name: str | None) -> SiteGate:
    """Routed splitter of site ``x`` from commuting left/right subalgebras."""
    iv = lat.site(x)
    D = iv.local_dim
    K_left, K_right = lat.K[(x - 1) % lat.M], lat.K[x]
    block_of = np.empty(D, dtype=int)
    for k, lo in enumerate(iv.local_offsets):
        block_of[lo:lo + iv.dim_in[k]] = k
    lb, rb = left.blocks, right.blocks
    lp = [b.projector for b in lb]
    rp = [b.projector for b in rb]
    comps = _components(lp, rp)
    nl = len(lb)

    def comp_key(members):
        proj = sum(lp[i] for i in members if i < nl)
        diag = np.real(np.diag(proj))
        return (-int(round(diag.sum())), tuple(-np.round(diag, 6)))

    comps.sort(key=comp_key)
    inner_of_left, inner_of_right = {}, {}
    for t, members in enumerate(comps):
        for i in members:
            if i < nl:
                inner_of_left[i] = t
            else:
                inner_of_right[i - nl] = t
    n_inner = len(comps)

    def edge_label(proj, side):
        weights = np.zeros(K_left if side == "L" else K_right)
        diag = np.real(np.diag(proj))
        for k, (a, b) in enumerate(iv.blocks):
            lo = iv.local_offsets[k]
            weights[a if side == "L" else b] += diag[lo:lo + iv.dim_in[k]].sum()
        labs = np.flatnonzero(weights > 1e-6)
        if len(labs) != 1:
            raise FactorSplitFailed(f"site {x}: a half-site block straddles several edge labels")
        return int(labs[0])

    left_index, right_index = {}, {}
    left_dims = np.zeros((K_left, n_inner), dtype=int)
    right_dims = np.zeros((n_inner, K_right), dtype=int)
    for i, b in enumerate(lb):
        key = (edge_label(lp[i], "L"), inner_of_left[i])
        if key in left_index:
            raise FactorSplitFailed(f"site {x}: two left blocks share labels {key}")
        left_index[key] = i
        left_dims[key] = b.p
    for j, b in enumerate(rb):
        key = (inner_of_right[j], edge_label(rp[j], "R"))
        if key in right_index:
            raise FactorSplitFailed(f"site {x}: two right blocks share labels {key}")
        right_index[key] = j
        right_dims[key] = b.p
    for k, (a, b) in enumerate(iv.blocks):
        if int(left_dims[a] @ right_dims[:, b]) != iv.dim_in[k]:
            raise FactorSplitFailed(f"site {x}: block ({a},{b}) does not split as a sum of products")

    gate = SiteGate(x, left_dims, right_dims, np.zeros((0, 0)), name)
    off_l, off_r = gate.wire_offsets("L"), gate.wire_offsets("R")
    dim_r = gate.wire_dim("R")
    mat = np.zeros((gate.wire_dim("L") * dim_r, D), dtype=complex)

    def unit(block, i):
        w = block.isometry
        e = np.zeros((block.p, block.p))
        e[i, 0] = 1
        return dagger(w) @ np.kron(e, np.eye(block.q)) @ w

    for (a, t), i in left_index.items():
        bl = lb[i]
        el = [unit(bl, s) for s in range(bl.p)]
        for (t2, b), j in right_index.items():
            if t2 != t:
                continue
            br = rb[j]
            er = [unit(br, s) for s in range(br.p)]
            m = el[0] @ er[0]
            u, s, _ = np.linalg.svd(m)
            rank = int(np.sum(s > 0.5))
            if rank == 0:
                continue
            if rank != 1:
                raise FactorSplitFailed(f"site {x}: vacuum for labels {(a, t, b)} has rank {rank}")
            v = u[:, 0]
            for s_l in range(bl.p):
                for s_r in range(br.p):
                    w = el[s_l] @ er[s_r] @ v
                    row = (off_l[(a, t)] + s_l) * dim_r + off_r[(t, b)] + s_r
                    mat[row] = np.conj(w)
    gate.matrix = mat
    if np.linalg.norm(dagger(mat) @ mat - np.eye(D)) > 1e-6:
        raise FactorSplitFailed(f"site {x}: splitter is not an isometry")
    return gate


def next_lattice(lat: SectorLattice, gates) -> SectorLattice:
    """Lattice whose site j pairs the right wire of j with the left wire of j+1."""
    N = lat.M
    dims = []
    for j in range(N):
        g, h = gates[j], gates[(j + 1) % N]
        dims.append(g.right_dims @ h.left_dims)
    names = [gates[(j + 1) % N].inner_name if gates[(j + 1) % N].n_inner > 1 else None for j in range(N)]
    return SectorLattice(dims, names)


def pair_offsets(g: SiteGate, h: SiteGate, t: int, t2: int) -> dict:
    """Offset of label ``c`` inside block (t, t2) of the paired site (R of g, L of h)."""
    out, pos = {}, 0
    for c in range(g.right_dims.shape[1]):
        out[c] = pos
        pos += int(g.right_dims[t, c]) * int(h.left_dims[c, t2])
    return out


def pair_isometry(lat_next: SectorLattice, j: int, g: SiteGate, h: SiteGate) -> np.ndarray:
    """Site coordinates of paired site ``j`` → unconstrained (R wire) ⊗ (L wire)."""
    iv = lat_next.site(j)
    off_r, off_l = g.wire_offsets("R"), h.wire_offsets("L")
    dim_l = h.wire_dim("L")
    s = np.zeros((g.wire_dim("R") * dim_l, iv.local_dim))
    for k, (t, t2) in enumerate(iv.blocks):
        lo = iv.local_offsets[k]
        offs = pair_offsets(g, h, t, t2)
        for c, oc in offs.items():
            nr, nl = int(g.right_dims[t, c]), int(h.left_dims[c, t2])
            for a in range(nr):
                for b in range(nl):
                    s[(off_r[(t, c)] + a) * dim_l + off_l[(c, t2)] + b, lo + oc + a * nl + b] = 1
    return s


def gate_blocks(lat: SectorLattice, g: SiteGate) -> dict:
    """Blocks ``(a, t, b) -> matrix`` from input block (a, b) to wires (a, t) ⊗ (t, b)."""
    iv = lat.site(g.site)
    off_l, off_r = g.wire_offsets("L"), g.wire_offsets("R")
    dim_r = g.wire_dim("R")
    out = {}
    for k, (a, b) in enumerate(iv.blocks):
        lo, n = iv.local_offsets[k], iv.dim_in[k]
        for t in range(g.n_inner):
            nl, nr = int(g.left_dims[a, t]), int(g.right_dims[t, b])
            if nl * nr == 0:
                continue
            rows = [(off_l[(a, t)] + i) * dim_r + off_r[(t, b)] + j for i in range(nl) for j in range(nr)]
            out[(a, t, b)] = g.matrix[rows, lo:lo + n]
    return out


def assemble_layer(lat: SectorLattice, gates, lat_next: SectorLattice) -> np.ndarray:
    """Dense L_i: P_i coordinates → P_{i+1} coordinates."""
    N = lat.M
    blocks = [gate_blocks(lat, g) for g in gates]
    d = lat.dim
    if lat_next.dim != d:
        raise FactorSplitFailed("split lattice changed the total dimension")
    out = np.zeros((d, d), dtype=complex)
    next_offsets = {}
    pos = 0
    for labs, dims in lat_next.sectors:
        next_offsets[labs] = (pos, dims)
        pos += int(np.prod(dims))
    col = 0
    for labs, dims in lat.sectors:
        size = int(np.prod(dims))
        choices = [[t for t in range(gates[x].n_inner) if (labs[x - 1], t, labs[x]) in blocks[x]] for x in range(N)]
        for inner in _product(choices):
            mats = [blocks[x][(labs[x - 1], inner[x], labs[x])] for x in range(N)]
            kron = mats[0]
            for m in mats[1:]:
                kron = np.kron(kron, m)
            shape = []
            for x in range(N):
                shape += [int(gates[x].left_dims[labs[x - 1], inner[x]]), int(gates[x].right_dims[inner[x], labs[x]])]
            tens = kron.reshape(shape + [size])
            order = [(1 + k) % (2 * N) for k in range(2 * N)]
            tens = np.transpose(tens, order + [2 * N])
            nlabs = tuple(inner[(j + 1) % N] for j in range(N))
            base, ndims = next_offsets[nlabs]
            idx = np.array([base])
            stride = [int(np.prod(ndims[j + 1:])) for j in range(N)]
            for j in range(N):
                g, h = gates[j], gates[(j + 1) % N]
                t, t2, c = inner[j], inner[(j + 1) % N], labs[j]
                oc = pair_offsets(g, h, t, t2)[c]
                n = int(g.right_dims[t, c]) * int(h.left_dims[c, t2])
                idx = np.add.outer(idx, (oc + np.arange(n)) * stride[j]).reshape(-1)
            out[idx, col:col + size] += tens.reshape(-1, size)
        col += size
    return out


def _product(choices):
    return itertools.product(*choices)


# ----------------------------------------------------------------------
# vacuum phase alignment


def _pair_decoder(lat_next: SectorLattice, gates, j: int) -> dict:
    """For paired site j: (t, t2, coord) -> c, the label hidden inside the site."""
    g, h = gates[j], gates[(j + 1) % lat_next.M]
    out = {}
    K = lat_next.p[j].shape
    for t in range(K[0]):
        for t2 in range(K[1]):
            for c, oc in pair_offsets(g, h, t, t2).items():
                n = int(g.right_dims[t, c]) * int(h.left_dims[c, t2])
                for s in range(n):
                    out[(t, t2, oc + s)] = c
    return out


def align_vacuum_phases(lat, lat_next, gates, T, out_dims, c, seeds, layer, sites=None):
    """Remove three-label vacuum phases so that paired sites carry the true algebras.

    For each site x, generic elements of the true paired-site algebra between
    x and x+1 are pushed into the new coordinates; their matrix elements must
    not depend on the hidden label of the paired site to the left. Differences
    across that label are absorbed into the vacuum phases of gate x.
    Returns the per-site corrections ``{x: {(a, t, b): phase}}``.
    """
    N = lat.M
    sites = range(N) if sites is None else sites
    labels, coords = lat_next.index_table
    decoders = [_pair_decoder(lat_next, gates, j) for j in range(N)]
    hidden = np.array([[decoders[j][(lab[j - 1], lab[j], co[j])] for j in range(N)] for lab, co in zip(labels, coords)])
    corrections = {}
    for x in sites:
        if lat.K[(x - 1) % N] == 1 or lat.K[x] == 1:
            continue
        bo1 = _pulled_back(T, out_dims, (x + c + 1) % N)
        t_alg = lat.local_commutant(x, 2, bo1 + seeds[x])
        iv = lat.interval(x, 2)
        y = x  # paired site index in P_{i+1}
        left = (y - 1) % N
        right = (y + 1) % N
        phases: dict = {}
        for gen in t_alg.generators(2):
            tp = layer @ iv.to_global(gen) @ dagger(layer)
            scale = np.abs(tp).max()
            rows, cols = np.nonzero(np.abs(tp) > 1e-6 * scale)
            for r_, c_ in zip(rows, cols):
                key = (
                    labels[r_][y - 1], labels[r_][y], coords[r_][y], coords[c_][y], hidden[r_][right],
                )
                u = hidden[r_][left]
                a, b = hidden[c_][y], hidden[r_][y]
                phases.setdefault((key, a, b), {})[u] = np.angle(tp[r_, c_])
        corr: dict = {}
        by_inner: dict = {}
        for (key, a, b), per_u in phases.items():
            by_inner.setdefault(key[0], []).append((a, b, per_u))
        for t, edges in by_inner.items():
            us = sorted({u for _, _, pu in edges for u in pu})
            u0 = us[0]
            for u in us:
                adj: dict = {}
                for a, b, pu in edges:
                    if u in pu and u0 in pu and a != b:
                        delta = pu[u] - pu[u0]
                        adj.setdefault(a, []).append((b, delta))
                        adj.setdefault(b, []).append((a, -delta))
                seen = {}
                for root in sorted(adj):
                    if root in seen:
                        continue
                    seen[root] = 0.0
                    queue = deque([root])
                    while queue:
                        a = queue.popleft()
                        for b, delta in adj[a]:
                            if b not in seen:
                                seen[b] = seen[a] + delta
                                queue.append(b)
                for b, val in seen.items():
                    corr[(u, t, b)] = val
        corrections[x] = corr
    return corrections


def apply_phase_corrections(lat, gates, corrections):
    for x, corr in corrections.items():
        g = gates[x]
        off_l, off_r = g.wire_offsets("L"), g.wire_offsets("R")
        dim_r = g.wire_dim("R")
        for (a, t, b), val in corr.items():
            if (a, t) not in off_l or (t, b) not in off_r:
                continue
            nl, nr = int(g.left_dims[a, t]), int(g.right_dims[t, b])
            for i in range(nl):
                for j in range(nr):
                    g.matrix[(off_l[(a, t)] + i) * dim_r + off_r[(t, b)] + j] *= np.exp(-1j * val)


# ----------------------------------------------------------------------
# the loop


@dataclass
class EngineResult:
    steps: list
    final_lattice: SectorLattice
    closing: list  # per final site j: unitary from P_final site j to output site (j + c) % N
    global_phase: complex
    shift: int  # c: final site j feeds output j + c
    radius: object
    frames: list = field(repr=False, default_factory=list)  # R_i: P_0 coords -> P_i coords


def run(q, r, c: int, ti: bool = False) -> EngineResult:
    """Peel ``2r`` layers off the map; ``c`` is the index offset of the rightmost output."""
    N = q.N
    out_dims = list(q.out_dims)
    lat = SectorLattice.tensor(q.in_dims)
    T = dagger(q.unitary)
    frame = np.eye(lat.dim, dtype=complex)
    steps, frames = [], [frame]
    n_steps = int(2 * r)
    for i in range(n_steps):
        gates, seeds = [None] * N, [None] * N
        sites = [0] if ti else range(N)
        for x in sites:
            left, right, seed_gens = split_algebras(lat, T, out_dims, x, c)
            gates[x] = build_site_gate(lat, x, left, right, f"k{i}_{x}")
            seeds[x] = seed_gens
        if ti:
            for x in range(1, N):
                g0 = gates[0]
                gates[x] = SiteGate(x, g0.left_dims.copy(), g0.right_dims.copy(), g0.matrix.copy(), f"k{i}_{x}")
        nxt = next_lattice(lat, gates)
        layer = assemble_layer(lat, gates, nxt)
        if any(k > 1 for k in lat.K):
            fix_sites = [0] if ti else None
            corr = align_vacuum_phases(lat, nxt, gates, T, out_dims, c, seeds, layer, fix_sites)
            if ti and 0 in corr:
                corr = {x: corr[0] for x in range(N)}
            apply_phase_corrections(lat, gates, corr)
            layer = assemble_layer(lat, gates, nxt)
        if np.linalg.norm(dagger(layer) @ layer - np.eye(lat.dim)) > 1e-6:
            raise FactorSplitFailed(f"layer {i} is not unitary")
        steps.append(Step(i, lat, gates, layer, nxt))
        T = layer @ T
        frame = layer @ frame
        frames.append(frame)
        lat = nxt
    if not lat.trivial_edges:
        raise FactorSplitFailed("final lattice still carries edge labels")
    closing, phase = extract_product(T, lat, out_dims, c, ti)
    return EngineResult(steps, lat, closing, phase, c, r, frames)


def extract_product(T, lat, out_dims, c, ti=False):
    """Write T (outputs → final lattice) as phase · ⊗_j t_j and return (t_j†, phase)."""
    N = lat.M
    dims = [int(p[0, 0]) for p in lat.p]
    for j in range(N):
        if dims[j] != out_dims[(j + c) % N]:
            raise RadiusCheckFailed(f"final site {j} has dimension {dims[j]} but output {(j + c) % N} has {out_dims[(j + c) % N]}")
    perm = [(j + c) % N for j in range(N)]
    Tp = permute_tensor_factors(T, out_dims, perm, side="in")
    d = Tp.shape[0]
    ts = []
    tens = Tp.reshape(dims + dims)
    for j in range(N):
        moved = np.moveaxis(tens, [j, N + j], [0, 1])
        m = moved.reshape(dims[j] * dims[j], -1)
        u, s, _ = np.linalg.svd(m, full_matrices=False)
        if s.size > 1 and s[1] > 1e-6 * s[0]:
            raise RadiusCheckFailed(f"remaining map is not a product at site {j}")
        t = u[:, 0].reshape(dims[j], dims[j]) * np.sqrt(dims[j])
        ts.append(t)
    if ti:
        for j in range(1, N):
            ov = np.trace(dagger(ts[0]) @ ts[j]) / dims[0]
            if abs(abs(ov) - 1) > 1e-6:
                raise RadiusCheckFailed("final site unitaries differ beyond a phase")
            ts[j] = ts[0].copy()
    prod = ts[0]
    for t in ts[1:]:
        prod = np.kron(prod, t)
    phase = np.trace(dagger(prod) @ Tp) / d
    if abs(abs(phase) - 1) > 1e-6:
        raise RadiusCheckFailed("remaining map is not a product of site unitaries")
    phase = phase / abs(phase)
    closing = [dagger(t) for t in ts]
    # U = conj(phase) · (⊗ closing) · L_{2r-1} ⋯ L_0, with outputs permuted back
    return closing, complex(np.conj(phase))


def reconstruct(res: EngineResult, in_dims, out_dims) -> np.ndarray:
    """Dense unitary represented by an engine result."""
    N = len(in_dims)
    u = np.eye(int(np.prod(in_dims)), dtype=complex)
    for st in res.steps:
        u = st.layer @ u
    close = res.closing[0]
    for t in res.closing[1:]:
        close = np.kron(close, t)
    dims_by_j = [out_dims[(j + res.shift) % N] for j in range(N)]
    u = close @ u
    u = permute_tensor_factors(u, dims_by_j, [(m - res.shift) % N for m in range(N)], side="out")
    return res.global_phase * u
