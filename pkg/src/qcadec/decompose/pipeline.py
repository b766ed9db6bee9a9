"""Public decomposition pipeline: intermediate partitions, layers, circuits, checks."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable

import numpy as np

from .. import qca as qca_mod
from ..config import get_settings
from ..cstar import Block, MatAlgebra
from ..errors import (
    DimensionMismatch,
    FactorSplitFailed,
    NotTranslationInvariant,
    PreconditionFailed,
    RadiusCheckFailed,
    RouteViolation,
    SizeTooSmall,
)
from ..linalg import max_deviation_up_to_phase, phase_fidelity
from ..partition import OneDPartition
from ..qca import QcaMap
from ..routed import (
    Gate,
    IndexMatchingCircuit,
    SectorisedSpace,
    evaluate,
    has_forward_path,
    is_routed_unitary,
    local_generators,
    plain_space,
    wire_index_table,
)
from . import dense, engine
from .engine import EngineResult, pair_isometry
from .lattice import SectorLattice


# ----------------------------------------------------------------------
# geometry helpers


def effective_radius(q: QcaMap) -> tuple[Fraction, int]:
    """Radius actually peeled and the index offset ``c`` of the rightmost output.

    The rightmost output reached from input ``x`` is ``x + c``. When the
    declared radius puts that output between two sites, the radius is
    rounded up by one half.
    """
    r = Fraction(q.radius)
    c = r + q.in_offset + q.out_offset
    if c.denominator != 1:
        r += Fraction(1, 2)
        c += Fraction(1, 2)
    if c.denominator != 1:
        raise PreconditionFailed(f"offsets {q.in_offset}, {q.out_offset} are not on the half-integer grid")
    return r, int(c)


def source_hash(q: QcaMap) -> str:
    h = hashlib.sha256()
    meta = {
        "in_dims": q.in_dims,
        "out_dims": q.out_dims,
        "out_offset": str(q.out_offset),
        "in_offset": str(q.in_offset),
        "radius": str(q.radius),
    }
    h.update(json.dumps(meta, sort_keys=True).encode())
    h.update(np.ascontiguousarray(q.unitary, dtype=np.complex128).tobytes())
    return h.hexdigest()


def lattice_partition(lat: SectorLattice, frame: np.ndarray, step: int, name: str = "") -> OneDPartition:
    """The sites of an engine lattice as a partition of the input frame.

    Lattice site ``j`` sits at quarter position ``4j + 2·step``.
    """
    N = lat.M
    d = lat.dim
    grid = "int" if step % 2 == 0 else "half"

    def provider(start, end):
        j0 = ((start - 2 * step) // 4) % N
        length = len(part.interval_sites(start, end))
        if length == N:
            return MatAlgebra.full(d)
        iv = lat.interval(j0, length)
        blocks = []
        for off, a, b in zip(iv.block_offsets, iv.dim_in, iv.dim_out):
            rows = iv.inverse[off:off + a * b]
            blocks.append(Block(frame[rows], a, b))
        return MatAlgebra(d, blocks=blocks)

    part = OneDPartition(N, grid, d, provider=provider, name=name)
    return part


# ----------------------------------------------------------------------
# intermediate partitions


@dataclass
class IntermediatePartition:
    """One partition of the input frame met while peeling layers.

    ``kind`` is ``"fine"`` for the quarter-grid partition obtained by
    splitting every site, ``"coarse"`` for the regrouped one. The algebras
    are built on first access.
    """

    kind: str
    step: int
    r_remaining: Fraction
    provenance: str
    result: EngineResult = field(repr=False)
    _build: Callable[[], OneDPartition] = field(repr=False)

    @cached_property
    def partition(self) -> OneDPartition:
        return self._build()


def _check_preconditions(q: QcaMap) -> tuple[Fraction, int]:
    qca_mod.check_dimensions(q)
    if q.dim > get_settings().max_dim:
        raise PreconditionFailed(f"dimension {q.dim} exceeds max_dim {get_settings().max_dim}")
    r, c = effective_radius(q)
    if q.N <= 4 * r:
        raise SizeTooSmall(f"requires N > 4r (N = {q.N}, r = {r})")
    ok, pairs = qca_mod.radius_check_algebraic(q, q.radius)
    if not ok:
        bad = next(p for p in pairs if p.violated)
        raise RadiusCheckFailed(
            f"input {bad.input_site} influences output {bad.output_site} beyond radius {q.radius}"
        )
    return r, c


def _intermediates(q: QcaMap, res: EngineResult) -> list:
    B = dense.pulled_back_outputs(q)
    coarse = [
        (lambda i=i: lattice_partition(
            res.steps[i].lattice if i < len(res.steps) else res.final_lattice, res.frames[i], i, f"P{i}"))
        for i in range(len(res.steps) + 1)
    ]
    cache: dict = {}

    def coarse_at(i):
        if i not in cache:
            cache[i] = coarse[i]()
        return cache[i]

    out = []
    for i in range(len(res.steps)):
        r_i = res.radius - Fraction(i, 2)
        out.append(IntermediatePartition(
            "fine", i, r_i - Fraction(1, 4), f"split of every site of P{i} (remaining radius {r_i})", res,
            lambda i=i, r_i=r_i: dense.fine_grain(coarse_at(i), B, r_i),
        ))
        out.append(IntermediatePartition(
            "coarse", i + 1, r_i - Fraction(1, 2), f"regrouped halves after step {i}", res,
            lambda i=i: coarse_at(i + 1),
        ))
    return out


def decompose_qca(q: QcaMap, ti: bool = False) -> list:
    """Peel the map into ``2r`` steps and return the partitions met on the way.

    The list alternates fine and coarse partitions; the last one coincides
    with the output factorisation pulled back through the map. A map of
    radius zero yields an empty list.

    Raises
    ------
    SizeTooSmall
        If ``N <= 4r``.
    RadiusCheckFailed
        If the map does not have its declared radius.
    """
    r, c = _check_preconditions(q)
    res = engine.run(q, r, c, ti=ti)
    return _intermediates(q, res)


# ----------------------------------------------------------------------
# layered decompositions


def _wire_space(dims: np.ndarray, first: str | None, second: str | None) -> SectorisedSpace:
    axes, shape = [], []
    for name, size in ((first, dims.shape[0]), (second, dims.shape[1])):
        if size > 1:
            axes.append((name, size))
            shape.append(size)
    return SectorisedSpace(axes, dims.reshape(shape) if shape else dims.reshape(()))


@dataclass
class LayeredDecomposition:
    """``2r`` layers of routed two-wire gates plus one closing column of site unitaries.

    The closing column has layer index ``2r``; it only relabels final sites
    as physical outputs and is merged into the last layer by
    :meth:`layer_qca`.
    """

    layers: list  # per layer: list of Gate
    closing: list
    global_phase: complex
    circuit: IndexMatchingCircuit
    in_dims: list
    out_dims: list
    radius: Fraction
    shift: int
    in_offset: Fraction = Fraction(0)
    out_offset: Fraction = Fraction(0)
    site_wires: list = field(default_factory=list, repr=False)  # per layer boundary: wires of each site
    source_hash: str = ""
    result: EngineResult | None = field(default=None, repr=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def unitary(self) -> np.ndarray:
        return self.global_phase * evaluate(self.circuit)

    def gates(self) -> list:
        return self.circuit.ordered_gates()

    def layer_circuit(self, i: int, with_closing: bool | None = None) -> tuple:
        """Sub-circuit of layer ``i`` and the wire positions of each boundary site."""
        last = i == self.n_layers - 1
        with_closing = last if with_closing is None else with_closing
        gates = list(self.layers[i]) + (list(self.closing) if with_closing else [])
        ins = self.site_wires[i]
        outs = [[w] for w in self.circuit.outputs] if with_closing else self.site_wires[i + 1]
        flat_in = [w for s in ins for w in s]
        flat_out = [w for s in outs for w in s]
        used = sorted(set(flat_in) | {w for g in gates for w in g.inputs + g.outputs})
        new = {w: k for k, w in enumerate(used)}
        sub = IndexMatchingCircuit(
            [self.circuit.wires[w] for w in used],
            [Gate(g.layer, g.position, [new[w] for w in g.inputs], [new[w] for w in g.outputs], g.matrix, g.kind)
             for g in gates],
            [new[w] for w in flat_in],
            [new[w] for w in flat_out],
        )
        return sub, _groups(ins), _groups(outs)

    def layer_qca(self, i: int, seed: int | None = None) -> QcaMap:
        """Layer ``i`` as a radius-1/2 map between its boundary partitions."""
        sub, gin, gout = self.layer_circuit(i)
        u = evaluate(sub)
        rng = np.random.default_rng(get_settings().seed if seed is None else seed)
        sp_in = [sub.wires[w] for w in sub.inputs]
        sp_out = [sub.wires[w] for w in sub.outputs]
        t_in, t_out = wire_index_table(sp_in), wire_index_table(sp_out)
        in_gens = [local_generators(sp_in, g, rng, table=t_in) for g in gin]
        out_gens = [local_generators(sp_out, g, rng, table=t_out) for g in gout]
        in_off = self.in_offset + Fraction(i, 2)
        if i == self.n_layers - 1:
            out_off = self.out_offset
        else:
            out_off = -(self.in_offset + Fraction(i + 1, 2))
        n = len(gin)
        return QcaMap(u, [1] * n, [1] * n, out_off, Fraction(1, 2), in_off, in_gens, out_gens)


def _groups(sites) -> list:
    out, pos = [], 0
    for s in sites:
        out.append(list(range(pos, pos + len(s))))
        pos += len(s)
    return out


def build_circuit(res: EngineResult, in_dims, out_dims) -> tuple:
    """Index-matching circuit of an engine result.

    Returns ``(circuit, layers, closing, site_wires)``.
    """
    N = len(in_dims)
    wires: list = []

    def add(space):
        wires.append(space)
        return len(wires) - 1

    inputs = [add(plain_space(int(d))) for d in in_dims]
    site_wires = [[[w] for w in inputs]]
    layers = []
    prev = None
    for i, st in enumerate(res.steps):
        lat = st.lattice
        lw, rw = [], []
        for x, g in enumerate(st.gates):
            lw.append(add(_wire_space(g.left_dims, lat.edge_names[(x - 1) % N], g.inner_name)))
            rw.append(add(_wire_space(g.right_dims, g.inner_name, lat.edge_names[x])))
        layer = []
        for x, g in enumerate(st.gates):
            m = g.matrix
            if prev is not None:
                m = m @ pair_isometry(lat, x, prev[x], prev[(x + 1) % N]).T
            layer.append(Gate(i, x, list(site_wires[-1][x]), [lw[x], rw[x]], m))
        layers.append(layer)
        site_wires.append([[rw[x], lw[(x + 1) % N]] for x in range(N)])
        prev = st.gates
    c = res.shift
    out_wire = {}
    closing = []
    for j in range(N):
        m_out = (j + c) % N
        w = add(plain_space(int(out_dims[m_out])))
        out_wire[m_out] = w
        mat = res.closing[j]
        if prev is not None:
            mat = mat @ pair_isometry(res.final_lattice, j, prev[j], prev[(j + 1) % N]).T
        closing.append(Gate(len(res.steps), j, list(site_wires[-1][j]), [w], mat, kind="closing"))
    outputs = [out_wire[m] for m in range(N)]
    gates = [g for layer in layers for g in layer] + closing
    circuit = IndexMatchingCircuit(wires, gates, inputs, outputs)
    return circuit, layers, closing, site_wires


def _assemble(res: EngineResult, q: QcaMap) -> LayeredDecomposition:
    circuit, layers, closing, site_wires = build_circuit(res, q.in_dims, q.out_dims)
    return LayeredDecomposition(
        layers, closing, res.global_phase, circuit, list(q.in_dims), list(q.out_dims),
        Fraction(res.radius), res.shift, q.in_offset, q.out_offset, site_wires, source_hash(q), res,
    )


def extract_layers(intermediates: list, q: QcaMap) -> LayeredDecomposition:
    """Routed gates of every peeled layer, assembled into one circuit.

    Raises
    ------
    FactorSplitFailed
        If the intermediates do not belong to ``q``.
    """
    if intermediates:
        res = intermediates[0].result
        if res.frames[0].shape[0] != q.dim:
            raise FactorSplitFailed("intermediate partitions belong to a different map")
    else:
        r, c = _check_preconditions(q)
        res = engine.run(q, r, c)
    return _assemble(res, q)


def decompose_ti(q: QcaMap) -> LayeredDecomposition:
    """Decomposition whose gates are identical within each layer.

    Raises
    ------
    NotTranslationInvariant
        If the map does not commute with the cyclic shift.
    """
    if not qca_mod.is_translation_invariant(q):
        raise NotTranslationInvariant("the map does not commute with the cyclic shift")
    r, c = _check_preconditions(q)
    return _assemble(engine.run(q, r, c, ti=True), q)


def decompose(q: QcaMap, ti: bool = False) -> LayeredDecomposition:
    """Shortcut for ``extract_layers(decompose_qca(q), q)``."""
    if ti:
        return decompose_ti(q)
    return extract_layers(decompose_qca(q), q)


# ----------------------------------------------------------------------
# verification


@dataclass
class GateCheck:
    layer: int
    position: int
    status: str  # "ok", "not-unitary" or "route-violation"

    @property
    def gate_id(self) -> str:
        return f"L{self.layer}.{self.position}"


@dataclass
class VerificationReport:
    max_deviation: float
    fidelity: float
    gate_checks: list
    causal_ok: bool
    causal_failures: list = field(default_factory=list)

    @property
    def bad_gates(self) -> list:
        return [g for g in self.gate_checks if g.status != "ok"]

    @property
    def ok(self) -> bool:
        tol = 1e-8
        return self.max_deviation <= tol and not self.bad_gates and self.causal_ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_deviation": self.max_deviation,
            "fidelity": self.fidelity,
            "bad_gates": [{"gate": g.gate_id, "status": g.status} for g in self.bad_gates],
            "causal_ok": self.causal_ok,
            "causal_failures": [list(p) for p in self.causal_failures],
        }


def verify_reconstruction(q: QcaMap, dec: LayeredDecomposition) -> VerificationReport:
    """Compare a decomposition with its source map.

    Checks the evaluated circuit against ``U`` up to a global phase, every
    gate's routed unitarity, and that the wire graph only connects inputs to
    outputs inside the light cone of the decomposition's radius, with no
    influence where there is no path.

    Raises
    ------
    DimensionMismatch
        If the decomposition and the map have different site dimensions.
    """
    if list(dec.in_dims) != list(q.in_dims) or list(dec.out_dims) != list(q.out_dims):
        raise DimensionMismatch("decomposition and map have different site dimensions")
    checks = []
    for g in dec.circuit.ordered_gates():
        try:
            ok = is_routed_unitary(dec.circuit.routed_map(g))
            status = "ok" if ok else "not-unitary"
        except RouteViolation:
            status = "route-violation"
        checks.append(GateCheck(g.layer, g.position, status))
    try:
        v = dec.unitary()
        dev = max_deviation_up_to_phase(v, q.unitary) if v.shape == q.unitary.shape else float("inf")
        fid = phase_fidelity(v, q.unitary) if v.shape == q.unitary.shape else 0.0
    except Exception:  # an inconsistent or malformed circuit has no value to compare
        dev, fid = float("inf"), 0.0
    failures = []
    N = q.N
    # a negative radius makes every pair subject to the commutation test
    _, pairs = qca_mod.radius_check_algebraic(q, -1)
    influence = {(p.input_site, p.output_site): p.violated for p in pairs}
    for n in range(N):
        for m in range(N):
            path = has_forward_path(dec.circuit, n, m)
            inside = q.allowed(n, m, dec.radius)
            if path and not inside:
                failures.append((n, m, "path outside light cone"))
            if not path and influence.get((n, m), True):
                failures.append((n, m, "influence without path"))
    return VerificationReport(float(dev), float(fid), checks, not failures, failures)
