from fractions import Fraction

import numpy as np
import pytest

import builders
import oracles
from qcadec import cstar
from qcadec import partition as P
from qcadec.cstar import MatAlgebra
from qcadec.errors import NoShift


def test_quarter_units_and_distance():
    assert P.to_quarters(Fraction(1, 2)) == 2
    assert P.to_quarters(Fraction(3, 4)) == 3
    with pytest.raises(ValueError):
        P.to_quarters(Fraction(1, 3))
    assert P.cyclic_distance(0, 4 * 4, 5) == 1
    assert P.cyclic_distance(0, 2, 5) == Fraction(1, 2)


def test_grids():
    assert P.grid_sites(3, "int") == [0, 4, 8]
    assert P.grid_sites(2, "half") == [2, 6]
    assert P.grid_sites(2, "fine") == [1, 3, 5, 7]


def test_interval_wraps_around():
    p = P.from_factorisation([2, 2, 2, 2])
    assert p.interval_sites(12, 4) == [12, 0, 4]
    assert len(p.intervals()) == 4 * 3


# -- factorisations -----------------------------------------------------


def test_two_qubit_factorisation():
    p = P.from_factorisation([2, 2])
    i2 = np.eye(2)
    x = np.array([[0, 1], [1, 0]])
    assert p.site_algebra(0).contains(np.kron(x, i2))
    assert not p.site_algebra(0).contains(np.kron(i2, x))
    assert p.site_algebra(4).contains(np.kron(i2, x))


def test_single_site_factorisation_is_everything():
    p = P.from_factorisation([2])
    assert p.algebra([0]).dimension == 4


def test_mixed_dims_interval_dimension():
    p = P.from_factorisation([2, 3, 2])
    assert p.interval_algebra(0, 4).dimension == 36


# -- bipartitions -------------------------------------------------------


def test_tensor_factors_form_a_bipartition():
    a1 = P.factor_algebra([2, 2], [0])
    a2 = P.factor_algebra([2, 2], [1])
    assert P.validate_bipartition(a1, a2, MatAlgebra.full(4))


def test_full_with_full_is_not_a_bipartition():
    assert not P.validate_bipartition(MatAlgebra.full(4), MatAlgebra.full(4), MatAlgebra.full(4))


def test_relabelled_ring_site_and_its_commutant():
    a0 = cstar.diagonal_algebra("aabb")
    assert P.validate_bipartition(a0, cstar.commutant(a0), MatAlgebra.full(4))


# -- validate_partition -------------------------------------------------


@pytest.mark.parametrize("dims", [[2, 2], [2, 3, 2], [2, 2, 2, 2]])
def test_factorisations_validate(dims):
    assert P.validate_partition(P.from_factorisation(dims)).ok


def test_relabelled_ring_validates():
    assert P.validate_partition(P.connected_not_strong_partition()).ok


def test_corrupted_partition_is_rejected():
    p = P.connected_not_strong_partition()
    bad = p.with_algebra(4, 4, MatAlgebra.full(4))
    report = P.validate_partition(bad)
    assert not report.ok
    assert any(4 in s or 4 in t for s, t in report.failures)


# -- correlation length -------------------------------------------------


def test_factorisation_has_zero_correlation_length():
    assert P.correlation_length_at_most(P.from_factorisation([2, 3, 2]), 0)


def test_relabelled_ring_correlation_length():
    p = P.connected_not_strong_partition()
    assert not P.correlation_length_at_most(p, 0)
    assert P.correlation_length_at_most(p, 1)


def test_single_site_correlation_length():
    assert P.correlation_length_at_most(P.from_factorisation([3]), 0)


# -- connectedness ------------------------------------------------------


def test_factorisation_is_connected_and_strongly_connected():
    p = P.from_factorisation([2, 2, 2])
    assert P.is_connected(p)
    assert P.is_strongly_connected(p)


def test_relabelled_ring_connected_but_not_strongly():
    p = P.connected_not_strong_partition()
    assert P.is_connected(p)
    assert not P.is_strongly_connected(p)


def test_far_correlation_is_not_connected():
    assert not P.is_connected(P.disconnected_partition())


def test_edge_labels_give_strong_connectedness():
    p = builders.edge_label_partition([1, 2, 1, 1, 1], [2, 1, 2, 1, 2])
    assert P.is_connected(p)
    assert P.is_strongly_connected(p)
    assert P.correlation_length_at_most(p, 1)
    assert not P.correlation_length_at_most(p, 0)


# -- edge centres -------------------------------------------------------


def test_factorisation_edge_centres_are_trivial():
    p = P.from_factorisation([2, 2, 2])
    for s in p.sites:
        assert P.edge_centre(p, s + 2).dimension == 1


def test_relabelled_ring_edge_centre_is_trivial():
    p = P.connected_not_strong_partition()
    z = P.edge_centre(p, 2)
    # diagonal vectors constant on the classes of both patterns
    constraints = []
    for pat in ("aabb", "abab"):
        for i in range(4):
            for j in range(i + 1, 4):
                if pat[i] == pat[j]:
                    row = np.zeros(4)
                    row[i], row[j] = 1, -1
                    constraints.append(row)
    ref = oracles.nullspace(np.array(constraints))
    assert z.dimension == ref.shape[1] == 1


def test_edge_label_centre_counts_labels():
    p = builders.edge_label_partition([1, 1, 1, 1, 1], [3, 1, 2, 1, 1])
    assert P.edge_centre(p, 2).dimension == 3
    assert P.edge_centre(p, 6).dimension == 1
    assert P.edge_centre(p, 10).dimension == 2


# -- shifts -------------------------------------------------------------


def test_uniform_factorisation_has_a_shift():
    assert P.check_shift(P.from_factorisation([2, 2, 2]))


def test_non_uniform_dims_have_no_shift():
    with pytest.raises(NoShift):
        P.cyclic_shift_unitary([2, 3])


def _relabelling_shifts(patterns):
    """Permutations of basis vectors carrying each pattern to the next (oracle)."""
    import itertools

    def classes(pat):
        return {frozenset(i for i, c in enumerate(pat) if c == a) for a in set(pat)}

    d = len(patterns[0])
    found = []
    for perm in itertools.permutations(range(d)):
        ok = all(
            {frozenset(perm[i] for i in c) for c in classes(patterns[k])} == classes(patterns[(k + 1) % len(patterns)])
            for k in range(len(patterns))
        )
        m = np.zeros((d, d), dtype=complex)
        for i, j in enumerate(perm):
            m[j, i] = 1
        found.append((m, ok))
    return found


def test_relabelled_ring_relabelling_shift_matches_oracle():
    patterns = ["aabb", "abab", "abba"]
    verdicts = set()
    for m, expected in _relabelling_shifts(patterns):
        p = P.connected_not_strong_partition()
        p.shift = m
        order_ok = np.allclose(np.linalg.matrix_power(m, 3), np.eye(4))
        assert P.check_shift(p) == (expected and order_ok)
        verdicts.add(expected and order_ok)
    assert verdicts == {True, False}


def test_missing_shift_fails():
    assert not P.check_shift(P.connected_not_strong_partition())


# -- structural identities ----------------------------------------------


@pytest.mark.parametrize("make", [
    lambda: P.from_factorisation([2, 3, 2]),
    P.connected_not_strong_partition,
    lambda: builders.edge_label_partition([1, 2, 1, 2], [2, 1, 2, 1]),
])
def test_complement_is_commutant_and_centres_agree(make):
    p = make()
    for start, end in p.intervals():
        s = p.interval_sites(start, end)
        comp = [x for x in p.sites if x not in s]
        a, b = p.algebra(s), p.algebra(comp)
        assert cstar.span_distance(cstar.commutant(a), b) < 1e-8
        assert cstar.span_distance(cstar.centre(a), cstar.centre(b)) < 1e-8
        assert p.components(comp) == [(p.step(end, 1), p.step(start, -1))]
