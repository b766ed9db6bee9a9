"""Decompose a random two-layer brick circuit and inspect the result.

Run with ``python demos/decompose_brick.py``.
"""

import numpy as np

from qcadec import qca
from qcadec.decompose import decompose, verify_reconstruction

rng = np.random.default_rng(7)
q, _ = qca.random_brick(6, 2, 2, rng, qubit_output=True)
print(f"map on {q.N} qubits, declared radius {q.radius}")

ok, pairs = qca.radius_check_algebraic(q, q.radius)
print(f"radius {q.radius} holds: {ok}; radius 1/2 holds: {qca.radius_check_algebraic(q, 0.5)[0]}")

dec = decompose(q)
print(f"{dec.n_layers} layers, {len(dec.gates())} gates in total")
for i, layer in enumerate(dec.layers):
    shapes = sorted({g.matrix.shape for g in layer})
    print(f"  layer {i}: {len(layer)} gates, shapes {shapes}")

report = verify_reconstruction(q, dec)
print(f"max deviation {report.max_deviation:.2e}, fidelity {report.fidelity:.12f}")
