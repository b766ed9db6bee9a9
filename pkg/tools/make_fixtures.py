"""Regenerate the bundled fixture files.

Run from the repository root: ``python3 tools/make_fixtures.py``.
Every file is a pure function of the seeds below, so rerunning is a no-op.
"""

from pathlib import Path

import numpy as np

from qcadec import io, partition, qca

OUT = Path(__file__).resolve().parents[1] / "src" / "qcadec" / "fixtures"


def brick(N, layers, seed, qubit_output=False):
    q, _ = qca.random_brick(N, 2, layers, np.random.default_rng(seed), qubit_output=qubit_output)
    return q


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    maps = {
        "brick_r05_N5_seed7": brick(5, 1, 7),
        "brick_r1_N6_seed11": brick(6, 2, 11, qubit_output=True),
        "brick_r1_N4_seed3": brick(4, 2, 3),
        "ti_brick_r05_N5_seed5": qca.random_ti_brick(5, 2, 1, np.random.default_rng(5))[0],
        "shift_N4_d2": qca.shift_qca(4, 2),
        "identity_N5": qca.product_qca([np.eye(2, dtype=complex)] * 5),
        "cz_ring_N6": qca.controlled_phase_ring(6),
    }
    for name, q in maps.items():
        io.save(io.qca_to_json(q), OUT / f"{name}.json")
    parts = {
        "connected_not_strong_partition": partition.connected_not_strong_partition(),
        "product_obstruction_partition": partition.product_obstruction_partition(),
        "nonlocal_dephasing_partition": partition.nonlocal_dephasing_partition(),
        "factorisation_N3_d2": partition.from_factorisation([2, 2, 2]),
    }
    for name, p in parts.items():
        io.save(io.partition_to_json(p), OUT / f"{name}.json")
    io.save({"unitary": io.matrix_to_json(partition.product_obstruction_unitary())}, OUT / "product_obstruction_unitary.json")
    io.save({"unitary": io.matrix_to_json(partition.nonlocal_dephasing_unitary())}, OUT / "nonlocal_dephasing_unitary.json")


if __name__ == "__main__":
    main()
