"""Sectorised spaces, routed maps and index-matching circuits.

A wire is a direct sum of sectors labelled by named indices. Gates only
connect sectors whose shared index names carry equal values (a delta
pattern). Sectors are ordered lexicographically over their index tuples and
zero-dimensional sectors are kept so that shapes stay regular.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .config import get_settings
from .errors import Inconsistent, RouteViolation
from .linalg import dagger


@dataclass
class SectorisedSpace:
    """⊕ over index tuples k of C^{sector_dims[k]}."""

    axes: list  # list of (name, size)
    sector_dims: np.ndarray

    def __post_init__(self):
        self.axes = [(str(n), int(s)) for n, s in self.axes]
        self.sector_dims = np.asarray(self.sector_dims, dtype=int).reshape([s for _, s in self.axes])

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.axes]

    @property
    def dim(self) -> int:
        return int(self.sector_dims.sum())

    def sectors(self):
        return list(np.ndindex(*[s for _, s in self.axes]))

    def offsets(self) -> dict:
        out, pos = {}, 0
        for k in self.sectors():
            out[k] = pos
            pos += int(self.sector_dims[k])
        return out

    def block(self, key) -> slice:
        off = self.offsets()[key]
        return slice(off, off + int(self.sector_dims[key]))


def plain_space(dim: int) -> SectorisedSpace:
    return SectorisedSpace([], np.array(dim))


@dataclass
class Route:
    """Allowed (input sector, output sector) pairs of a delta-pattern gate."""

    in_spaces: list
    out_spaces: list

    def allowed(self, in_keys, out_keys) -> bool:
        values = {}
        for space, key in itertools.chain(zip(self.in_spaces, in_keys), zip(self.out_spaces, out_keys)):
            for name, v in zip(space.names, key):
                if values.setdefault(name, v) != v:
                    return False
        return True

    def relation(self) -> np.ndarray:
        ins = list(itertools.product(*[s.sectors() for s in self.in_spaces]))
        outs = list(itertools.product(*[s.sectors() for s in self.out_spaces]))
        return np.array([[self.allowed(i, o) for i in ins] for o in outs], dtype=bool)


@dataclass
class RoutedMap:
    """A matrix from ⊗ in_spaces to ⊗ out_spaces together with its route."""

    in_spaces: list
    out_spaces: list
    matrix: np.ndarray

    @property
    def route(self) -> Route:
        return Route(self.in_spaces, self.out_spaces)

    def consistent_projector(self, side: str) -> np.ndarray:
        spaces = self.in_spaces if side == "in" else self.out_spaces
        return np.diag(consistent_mask(spaces)).astype(complex)


def consistent_mask(spaces) -> np.ndarray:
    """Indicator over the unconstrained tensor product of the label-consistent basis vectors."""
    dims = [s.dim for s in spaces]
    mask = np.ones(dims if dims else [], dtype=bool)
    labels_per_space = []
    for s in spaces:
        lab = np.zeros((s.dim, len(s.axes)), dtype=int)
        for key, off in s.offsets().items():
            lab[off:off + int(s.sector_dims[key])] = key
        labels_per_space.append(lab)
    names = sorted({n for s in spaces for n in s.names})
    for name in names:
        occ = [(i, s.names.index(name)) for i, s in enumerate(spaces) if name in s.names]
        if len(occ) < 2:
            continue
        i0, a0 = occ[0]
        for i1, a1 in occ[1:]:
            v0 = labels_per_space[i0][:, a0]
            v1 = labels_per_space[i1][:, a1]
            eq = v0[:, None] == v1[None, :]
            shape = [1] * len(spaces)
            shape[i0], shape[i1] = len(v0), len(v1)
            if i0 == i1:
                eq = np.diag(eq)
                shape = [1] * len(spaces)
                shape[i0] = len(v0)
            mask = mask & eq.reshape(shape)
    return mask.reshape(-1)


def is_routed_unitary(m: RoutedMap, tol: float | None = None) -> bool:
    """Whether the matrix is unitary between the label-consistent subspaces.

    Raises
    ------
    RouteViolation
        If the matrix has weight outside its route; that is a malformed
        gate rather than a non-unitary one.
    """
    tol = get_settings().tol if tol is None else tol
    check_route(m, tol)
    p_in = consistent_mask(m.in_spaces)
    p_out = consistent_mask(m.out_spaces)
    u = m.matrix
    lhs = dagger(u) @ u
    rhs = u @ dagger(u)
    bound = 1e3 * tol * max(1.0, np.sqrt(u.shape[0]))
    return bool(np.linalg.norm(lhs - np.diag(p_in)) <= bound and np.linalg.norm(rhs - np.diag(p_out)) <= bound)


def route_mask(in_spaces, out_spaces) -> np.ndarray:
    """Boolean (rows, cols) mask of matrix entries allowed by the delta pattern."""
    in_lab = _labels(in_spaces)
    out_lab = _labels(out_spaces)
    rows = int(np.prod([s.dim for s in out_spaces])) if out_spaces else 1
    cols = int(np.prod([s.dim for s in in_spaces])) if in_spaces else 1
    allowed = np.ones((rows, cols), dtype=bool)
    for name in set(in_lab) | set(out_lab):
        vals = [("in", v) for v in in_lab.get(name, [])] + [("out", v) for v in out_lab.get(name, [])]
        ref_side, ref = vals[0]
        for side, v in vals[1:]:
            if ref_side == "in" and side == "in":
                allowed &= (ref == v)[None, :]
            elif ref_side == "out" and side == "out":
                allowed &= (ref == v)[:, None]
            elif ref_side == "in":
                allowed &= v[:, None] == ref[None, :]
            else:
                allowed &= ref[:, None] == v[None, :]
    return allowed


def respects_route(m: RoutedMap, tol: float | None = None) -> bool:
    tol = get_settings().tol if tol is None else tol
    allowed = route_mask(m.in_spaces, m.out_spaces)
    leak = np.linalg.norm(m.matrix[~allowed]) if np.any(~allowed) else 0.0
    return bool(leak <= 1e3 * tol * max(1.0, np.linalg.norm(m.matrix)))


def _labels(spaces) -> dict:
    """For each index name, per-basis-vector label arrays on the combined tensor space."""
    dims = [s.dim for s in spaces]
    total = int(np.prod(dims)) if dims else 1
    out: dict = {}
    for i, s in enumerate(spaces):
        lab = np.zeros((s.dim, len(s.axes)), dtype=int)
        for key, off in s.offsets().items():
            lab[off:off + int(s.sector_dims[key])] = key
        for a, name in enumerate(s.names):
            shape = [1] * len(spaces)
            shape[i] = s.dim
            out.setdefault(name, []).append(np.broadcast_to(lab[:, a].reshape(shape), dims).reshape(total))
    return out


# ----------------------------------------------------------------------
# circuits


@dataclass
class Gate:
    layer: int
    position: int
    inputs: list  # wire ids
    outputs: list
    matrix: np.ndarray = field(repr=False)
    kind: str = "gate"


@dataclass
class IndexMatchingCircuit:
    wires: list  # SectorisedSpace per wire id
    gates: list
    inputs: list  # boundary input wire ids, in site order
    outputs: list
    boundary_groups: list = field(default_factory=list)

    def routed_map(self, gate: Gate) -> RoutedMap:
        return RoutedMap([self.wires[w] for w in gate.inputs], [self.wires[w] for w in gate.outputs], gate.matrix)

    def ordered_gates(self) -> list:
        return sorted(self.gates, key=lambda g: (g.layer, g.position))


def check_consistency(c: IndexMatchingCircuit) -> bool:
    """Every wire is produced once and consumed at most once, and every repeated
    index has exactly one starting point and one end point (boundaries count)."""
    produced = {w: 0 for w in range(len(c.wires))}
    consumed = {w: 0 for w in range(len(c.wires))}
    for w in c.inputs:
        produced[w] += 1
    for w in c.outputs:
        consumed[w] += 1
    for g in c.gates:
        for w in g.outputs:
            produced[w] += 1
        for w in g.inputs:
            consumed[w] += 1
    if any(v != 1 for v in produced.values()) or any(v != 1 for v in consumed.values()):
        return False
    grouped = {n for grp in c.boundary_groups for n in grp}
    starts: dict = {}
    ends: dict = {}
    for name in {n for s in c.wires for n in s.names}:
        starts[name] = ends[name] = 0
    for w in c.inputs:
        for n in c.wires[w].names:
            starts[n] = 1
    for w in c.outputs:
        for n in c.wires[w].names:
            ends[n] = 1
    for g in c.gates:
        ins = {n for w in g.inputs for n in c.wires[w].names}
        outs = {n for w in g.outputs for n in c.wires[w].names}
        for n in outs - ins:
            starts[n] += 1
        for n in ins - outs:
            ends[n] += 1
    for name in starts:
        if name in grouped:
            continue
        if starts[name] != 1 or ends[name] != 1:
            return False
    return True


def constrained_basis(spaces) -> list:
    """Label-consistent basis of ⊗ spaces as (sector keys, tensor index) in canonical order."""
    out = []
    for keys in itertools.product(*[s.sectors() for s in spaces]):
        if not Route(spaces, []).allowed(keys, []):
            continue
        dims = [int(s.sector_dims[k]) for s, k in zip(spaces, keys)]
        if 0 in dims:
            continue
        out.append((keys, dims))
    return out


def constrained_dim(spaces) -> int:
    return sum(int(np.prod(d)) for _, d in constrained_basis(spaces))


def evaluate(c: IndexMatchingCircuit) -> np.ndarray:
    """Matrix of the circuit between the label-consistent boundary spaces.

    The state is propagated sector by sector, so only label-consistent blocks
    are ever stored.
    """
    if not check_consistency(c):
        raise Inconsistent("circuit fails the index-matching consistency check")
    in_spaces = [c.wires[w] for w in c.inputs]
    basis = constrained_basis(in_spaces)
    ncols = sum(int(np.prod(d)) for _, d in basis)
    # state: key = tuple of sector keys of open wires (ordered by `open_wires`)
    open_wires = list(c.inputs)
    state = {}
    col = 0
    for keys, dims in basis:
        size = int(np.prod(dims))
        arr = np.zeros(dims + [ncols], dtype=complex)
        arr.reshape(size, ncols)[:, col:col + size] = np.eye(size)
        state[tuple(keys)] = arr
        col += size
    for g in c.ordered_gates():
        state, open_wires = _apply_gate(c, g, state, open_wires)
    out_spaces = [c.wires[w] for w in c.outputs]
    perm = [open_wires.index(w) for w in c.outputs]
    rows = []
    for keys, dims in constrained_basis(out_spaces):
        size = int(np.prod(dims))
        found = None
        for skey, arr in state.items():
            if tuple(skey[p] for p in perm) == tuple(keys):
                t = np.transpose(arr, perm + [len(perm)]).reshape(size, ncols)
                found = t if found is None else found + t
        rows.append(found if found is not None else np.zeros((size, ncols), dtype=complex))
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, ncols), dtype=complex)


def _apply_gate(c, g, state, open_wires):
    in_pos = [open_wires.index(w) for w in g.inputs]
    keep = [i for i in range(len(open_wires)) if i not in in_pos]
    new_open = list(g.outputs) + [open_wires[i] for i in keep]
    in_spaces = [c.wires[w] for w in g.inputs]
    out_spaces = [c.wires[w] for w in g.outputs]
    tensor = g.matrix.reshape([s.dim for s in out_spaces] + [s.dim for s in in_spaces])
    in_offsets = [s.offsets() for s in in_spaces]
    out_offsets = [s.offsets() for s in out_spaces]
    out_sectors = list(itertools.product(*[s.sectors() for s in out_spaces]))
    route = Route(in_spaces, out_spaces)
    new_state = {}
    nout = len(out_spaces)
    for skey, arr in state.items():
        in_keys = tuple(skey[p] for p in in_pos)
        if any(int(s.sector_dims[k]) == 0 for s, k in zip(in_spaces, in_keys)):
            continue
        # bring gate inputs to the front
        a = np.transpose(arr, in_pos + keep + [arr.ndim - 1])
        in_slices = tuple(slice(o[k], o[k] + int(s.sector_dims[k])) for o, s, k in zip(in_offsets, in_spaces, in_keys))
        for out_keys in out_sectors:
            if not route.allowed(in_keys, out_keys):
                continue
            if any(int(s.sector_dims[k]) == 0 for s, k in zip(out_spaces, out_keys)):
                continue
            out_slices = tuple(slice(o[k], o[k] + int(s.sector_dims[k])) for o, s, k in zip(out_offsets, out_spaces, out_keys))
            blk = tensor[out_slices + in_slices]
            if not np.any(blk):
                continue
            res = np.tensordot(blk, a, axes=(list(range(nout, nout + len(in_pos))), list(range(len(in_pos)))))
            nkey = tuple(out_keys) + tuple(skey[i] for i in keep)
            if nkey in new_state:
                new_state[nkey] = new_state[nkey] + res
            else:
                new_state[nkey] = res
    return new_state, new_open


def evaluate_dense(c: IndexMatchingCircuit) -> np.ndarray:
    """Reference evaluation on the full unconstrained tensor spaces.

    Each gate acts densely on all open wires; the label-consistency
    projections are applied only at the boundaries. Exponential in the number
    of open wires, so meant for small circuits.
    """
    if not check_consistency(c):
        raise Inconsistent("circuit fails the index-matching consistency check")
    in_spaces = [c.wires[w] for w in c.inputs]
    in_mask = consistent_mask(in_spaces)
    dims = [s.dim for s in in_spaces]
    total = int(np.prod(dims)) if dims else 1
    cols = np.flatnonzero(in_mask)
    embed = np.zeros((total, len(cols)), dtype=complex)
    embed[cols, np.arange(len(cols))] = 1
    # reorder columns into the canonical constrained order
    embed = embed[:, _canonical_order(in_spaces)]
    state = embed.reshape(dims + [len(cols)])
    open_wires = list(c.inputs)
    for g in c.ordered_gates():
        in_pos = [open_wires.index(w) for w in g.inputs]
        keep = [i for i in range(len(open_wires)) if i not in in_pos]
        out_dims = [c.wires[w].dim for w in g.outputs]
        in_dims = [c.wires[w].dim for w in g.inputs]
        t = g.matrix.reshape(out_dims + in_dims)
        state = np.tensordot(t, state, axes=(list(range(len(out_dims), len(out_dims) + len(in_dims))), in_pos))
        open_wires = list(g.outputs) + [open_wires[i] for i in keep]
    perm = [open_wires.index(w) for w in c.outputs]
    state = np.transpose(state, perm + [state.ndim - 1])
    out_spaces = [c.wires[w] for w in c.outputs]
    flat = state.reshape(-1, len(cols))
    rows = np.flatnonzero(consistent_mask(out_spaces))
    return flat[rows][_canonical_order(out_spaces)]


def _canonical_order(spaces) -> np.ndarray:
    """Permutation from raster order of consistent vectors to canonical sector order."""
    mask = consistent_mask(spaces)
    raster = np.flatnonzero(mask)
    dims = [s.dim for s in spaces]
    pos = {int(v): i for i, v in enumerate(raster)}
    order = []
    offs = [s.offsets() for s in spaces]
    for keys, sdims in constrained_basis(spaces):
        for idx in np.ndindex(*sdims):
            flat = 0
            for s_i, (k, j) in enumerate(zip(keys, idx)):
                flat = flat * dims[s_i] + offs[s_i][k] + j
            order.append(pos[flat])
    return np.array(order, dtype=int)


def has_forward_path(c: IndexMatchingCircuit, input_site: int, output_site: int) -> bool:
    """Whether a chain of wires and gates leads from the input wire to the output wire."""
    start = c.inputs[input_site]
    target = c.outputs[output_site]
    by_input = {}
    for g in c.gates:
        for w in g.inputs:
            by_input[w] = g
    frontier, seen = [start], {start}
    while frontier:
        w = frontier.pop()
        if w == target:
            return True
        g = by_input.get(w)
        if g is None:
            continue
        for o in g.outputs:
            if o not in seen:
                seen.add(o)
                frontier.append(o)
    return False


def check_route(m: RoutedMap, tol: float | None = None) -> None:
    if not respects_route(m, tol):
        raise RouteViolation("matrix has weight outside its route")


# ----------------------------------------------------------------------
# operators on constrained spaces


def wire_index_table(spaces) -> np.ndarray:
    """Per constrained basis vector (canonical order), the index on every wire."""
    offs = [s.offsets() for s in spaces]
    rows = []
    for keys, dims in constrained_basis(spaces):
        base = [o[k] for o, k in zip(offs, keys)]
        for idx in np.ndindex(*dims):
            rows.append([b + i for b, i in zip(base, idx)])
    return np.array(rows, dtype=int).reshape(-1, len(spaces))


def local_operator_mask(spaces, members) -> np.ndarray:
    """Allowed entries of an operator on the wires ``members`` of ``spaces``.

    Index names shared with wires outside ``members`` must be preserved; names
    internal to ``members`` only need to stay consistent on each side.
    """
    inside = [spaces[i] for i in members]
    outside = {n for i, s in enumerate(spaces) if i not in members for n in s.names}
    lab = _labels(inside)
    dim = int(np.prod([s.dim for s in inside]))
    ok = np.ones(dim, dtype=bool)
    for arrs in lab.values():
        for a in arrs[1:]:
            ok &= a == arrs[0]
    mask = np.outer(ok, ok)
    for name, arrs in lab.items():
        if name in outside:
            mask &= arrs[0][:, None] == arrs[0][None, :]
    return mask


def lift_local_operator(spaces, members, x: np.ndarray, table: np.ndarray | None = None) -> np.ndarray:
    """``x`` on the wires ``members`` tensored with the identity, on the constrained space."""
    table = wire_index_table(spaces) if table is None else table
    dims = [s.dim for s in spaces]
    rest = [i for i in range(len(spaces)) if i not in members]
    local = np.ravel_multi_index(table[:, members].T, [dims[i] for i in members])
    groups: dict = {}
    for v, key in enumerate(map(tuple, table[:, rest])):
        groups.setdefault(key, []).append(v)
    out = np.zeros((len(table), len(table)), dtype=complex)
    for vs in groups.values():
        vs = np.array(vs)
        out[np.ix_(vs, vs)] = x[np.ix_(local[vs], local[vs])]
    return out


def local_generators(spaces, members, rng, count: int = 2, table=None) -> list:
    """Generic elements (and adjoints) of the algebra of the wires ``members``."""
    mask = local_operator_mask(spaces, members)
    out = []
    for _ in range(count):
        x = (rng.normal(size=mask.shape) + 1j * rng.normal(size=mask.shape)) * mask
        g = lift_local_operator(spaces, members, x, table)
        out += [g, dagger(g)]
    return out
