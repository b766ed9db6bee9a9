"""Structural checks on three small partitions.

A tensor factorisation, a partition with a classical label on every edge,
and a four-dimensional ring whose sites are relabelled diagonal algebras.
"""

from qcadec import partition as P

examples = {
    "factorisation [2, 3, 2]": P.from_factorisation([2, 3, 2]),
    "relabelled 4-dim ring": P.connected_not_strong_partition(),
}

try:
    import sys
    from pathlib import Path

    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
    import builders

    examples["edge labels on 5 sites"] = builders.edge_label_partition([1, 2, 1, 1, 1], [2, 1, 2, 1, 2])
except ImportError:
    pass

for name, p in examples.items():
    print(name)
    print(f"  valid partition:       {P.validate_partition(p).ok}")
    print(f"  correlation length 0:  {P.correlation_length_at_most(p, 0)}")
    print(f"  correlation length 1:  {P.correlation_length_at_most(p, 1)}")
    print(f"  connected:             {P.is_connected(p)}")
    print(f"  strongly connected:    {P.is_strongly_connected(p)}")
    sizes = [P.edge_centre(p, s + 2).dimension for s in p.sites]
    print(f"  edge centre sizes:     {sizes}")
