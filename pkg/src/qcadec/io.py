"""JSON file formats for maps, partitions, circuits and decompositions.

Matrices are row-major lists of rows, each entry a ``[re, im]`` pair.
Positions of partition sites are stored in quarter units. Output is
deterministic: the same object always serialises to the same bytes.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cstar import MatAlgebra
from .partition import OneDPartition
from .qca import QcaMap
from .routed import Gate, IndexMatchingCircuit, SectorisedSpace

FORMAT_VERSION = 1


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        return np.zeros((len(data), 0), dtype=complex)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("a matrix must be a list of rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _number(x: Fraction):
    x = Fraction(x)
    return int(x) if x.denominator == 1 else float(x)


def _fraction(x) -> Fraction:
    return Fraction(str(x)).limit_denominator(8)


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def save(obj: dict, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load(path) -> dict:
    return json.loads(Path(path).read_text())


# ----------------------------------------------------------------------
# maps


def qca_to_json(q: QcaMap) -> dict:
    out = {
        "in_dims": list(q.in_dims),
        "out_dims": list(q.out_dims),
        "out_offset": _number(q.out_offset),
        "radius": _number(q.radius),
        "unitary": matrix_to_json(q.unitary),
    }
    if q.in_offset:
        out["in_offset"] = _number(q.in_offset)
    return out


def qca_from_json(data: dict) -> QcaMap:
    return QcaMap(
        matrix_from_json(data["unitary"]),
        data["in_dims"],
        data["out_dims"],
        _fraction(data.get("out_offset", 0)),
        _fraction(data.get("radius", 0)),
        _fraction(data.get("in_offset", 0)),
    )


# ----------------------------------------------------------------------
# partitions


def partition_to_json(part: OneDPartition, max_length: int | None = None) -> dict:
    """Serialise ``part``; positions are quarter units.

    With ``max_length`` only intervals up to that many sites are written.
    Keep it at least ``size // 2`` so the loader can recover every longer
    interval as the commutant of its complement.
    """
    intervals = []
    for start, end in part.intervals():
        if max_length is not None and len(part.interval_sites(start, end)) > max_length:
            continue
        alg = part.interval_algebra(start, end)
        intervals.append({"start": start, "end": end, "basis": [matrix_to_json(b) for b in alg.basis]})
    out = {"N": part.N, "grid": part.grid, "ambient_dim": part.dim, "intervals": intervals}
    if part.shift is not None:
        out["shift"] = matrix_to_json(part.shift)
    return out


def partition_from_json(data: dict) -> OneDPartition:
    dim = int(data["ambient_dim"])
    algs = {}
    for item in data["intervals"]:
        basis = np.stack([matrix_from_json(b) for b in item["basis"]]) if item["basis"] else np.zeros((0, dim, dim))
        algs[(int(item["start"]), int(item["end"]))] = MatAlgebra(dim, basis=basis)
    shift = matrix_from_json(data["shift"]) if data.get("shift") is not None else None
    return OneDPartition(int(data["N"]), data["grid"], dim, algs, shift=shift)


# ----------------------------------------------------------------------
# circuits


def space_to_json(s: SectorisedSpace) -> dict:
    return {"axes": [[n, k] for n, k in s.axes], "sector_dims": s.sector_dims.tolist()}


def space_from_json(data: dict) -> SectorisedSpace:
    return SectorisedSpace([(n, k) for n, k in data["axes"]], np.asarray(data["sector_dims"], dtype=int))


def circuit_to_json(c: IndexMatchingCircuit, first_gate_factor: complex = 1.0) -> dict:
    gates = []
    ordered = c.ordered_gates()
    for i, g in enumerate(ordered):
        m = g.matrix * first_gate_factor if i == 0 else g.matrix
        gates.append({
            "layer": g.layer,
            "position": g.position,
            "kind": g.kind,
            "inputs": list(g.inputs),
            "outputs": list(g.outputs),
            "route": "delta-pattern",
            "matrix": matrix_to_json(m),
        })
    return {
        "spaces": [space_to_json(s) for s in c.wires],
        "inputs": list(c.inputs),
        "outputs": list(c.outputs),
        "gates": gates,
        "boundary_groups": [list(g) for g in c.boundary_groups],
    }


def circuit_from_json(data: dict) -> IndexMatchingCircuit:
    wires = [space_from_json(s) for s in data["spaces"]]
    gates = []
    for g in data["gates"]:
        if g.get("route", "delta-pattern") != "delta-pattern":
            raise ValueError(f"unsupported route kind {g['route']!r}")
        gates.append(Gate(int(g["layer"]), int(g["position"]), list(g["inputs"]), list(g["outputs"]),
                          matrix_from_json(g["matrix"]), g.get("kind", "gate")))
    return IndexMatchingCircuit(wires, gates, list(data["inputs"]), list(data["outputs"]),
                                [list(x) for x in data.get("boundary_groups", [])])


# ----------------------------------------------------------------------
# decompositions


def decomposition_to_json(dec) -> dict:
    """The circuit with the global phase folded into its first gate, plus metadata."""
    phase = complex(dec.global_phase)
    out = circuit_to_json(dec.circuit, first_gate_factor=phase)
    out.update({
        "format_version": FORMAT_VERSION,
        "global_phase": [phase.real, phase.imag],
        "layer_radius": 0.5,
        "source_hash": dec.source_hash,
        "n_layers": dec.n_layers,
        "in_dims": list(dec.in_dims),
        "out_dims": list(dec.out_dims),
        "radius": _number(dec.radius),
        "shift": dec.shift,
        "in_offset": _number(dec.in_offset),
        "out_offset": _number(dec.out_offset),
        "site_wires": dec.site_wires,
    })
    return out


def decomposition_from_json(data: dict):
    from .decompose.pipeline import LayeredDecomposition

    circuit = circuit_from_json(data)
    phase = complex(*data.get("global_phase", [1.0, 0.0]))
    ordered = circuit.ordered_gates()
    if ordered and abs(phase) > 0:
        ordered[0].matrix = ordered[0].matrix / phase
    n_layers = int(data["n_layers"])
    layers = [[] for _ in range(n_layers)]
    closing = []
    for g in ordered:
        if g.kind == "closing":
            closing.append(g)
        elif 0 <= g.layer < n_layers:
            layers[g.layer].append(g)
        else:
            raise ValueError(f"gate in layer {g.layer} outside 0..{n_layers - 1}")
    return LayeredDecomposition(
        layers, closing, phase, circuit, list(data["in_dims"]), list(data["out_dims"]),
        _fraction(data["radius"]), int(data["shift"]), _fraction(data.get("in_offset", 0)),
        _fraction(data.get("out_offset", 0)), data.get("site_wires", []), data.get("source_hash", ""),
    )
