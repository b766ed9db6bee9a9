import numpy as np
import pytest

import oracles
from qcadec import cstar
from qcadec.cstar import MatAlgebra
from qcadec.errors import NotCommutative, NotCommuting, NotFactor
from qcadec.partition import factor_algebra

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
I2 = np.eye(2)


def same(a: MatAlgebra, b: MatAlgebra, tol=1e-9) -> bool:
    return a.dimension == b.dimension and oracles.span_distance(a.basis, b.basis) <= tol


# -- span_closure -------------------------------------------------------


def test_closure_of_nothing_is_scalars():
    a = cstar.span_closure([], 3)
    assert a.dimension == 1
    np.testing.assert_allclose(np.abs(a.basis[0]), np.eye(3) / np.sqrt(3), atol=1e-12)


def test_closure_of_one_projector():
    a = cstar.span_closure([np.diag([1, 1, 0, 0])], 4)
    assert a.dimension == 2
    assert same(a, cstar.diagonal_algebra("aabb"))


def test_closure_of_paulis_on_first_qubit():
    a = cstar.span_closure([np.kron(X, I2), np.kron(Z, I2)], 4)
    assert a.dimension == 4
    ref = oracles.closure([np.kron(X, I2), np.kron(Z, I2)], 4)
    assert oracles.span_distance(a.basis, ref) < 1e-9


# -- commutant ----------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3, 5])
def test_commutant_of_full_is_scalars(d):
    assert cstar.commutant(MatAlgebra.full(d)).dimension == 1


def test_commutant_of_scalars_is_full():
    assert cstar.commutant(MatAlgebra.scalars(4)).dimension == 16


def test_commutant_of_two_block_diagonal():
    a = cstar.diagonal_algebra("aabb")
    c = cstar.commutant(a)
    assert c.dimension == 8
    ref = oracles.commutant(a.basis, 4)
    assert oracles.span_distance(c.basis, ref) < 1e-9


# -- centre -------------------------------------------------------------


def test_centre_of_factor_is_trivial():
    assert cstar.centre(MatAlgebra.full(3)).dimension == 1


def test_commutative_algebra_is_its_own_centre():
    a = cstar.diagonal_algebra("aabb")
    assert same(cstar.centre(a), a)


def test_centre_of_repeated_block_algebra():
    # {M ⊕ M} is a factor: its centre is the scalars
    a = factor_algebra([2, 2], [1])
    z = cstar.centre(a)
    assert z.dimension == 1
    assert oracles.span_distance(z.basis, oracles.centre(a.basis, 4)) < 1e-9


# -- atomic projectors --------------------------------------------------


def test_atoms_of_scalars():
    p = cstar.atomic_projectors(MatAlgebra.scalars(3))
    assert len(p) == 1
    np.testing.assert_allclose(p.projectors[0], np.eye(3), atol=1e-12)


def test_atoms_of_two_blocks():
    p = cstar.atomic_projectors(cstar.diagonal_algebra("aabb"))
    got = sorted(tuple(np.round(np.diag(x).real, 9)) for x in p)
    assert got == [(0, 0, 1, 1), (1, 1, 0, 0)]


def test_atoms_need_commutative_input():
    with pytest.raises(NotCommutative):
        cstar.atomic_projectors(MatAlgebra.full(2))


def test_atoms_form_a_resolution_of_identity(rng):
    mats, _ = oracles.random_block_algebra(6, rng)
    z = cstar.centre(MatAlgebra.from_spanning_set(mats, 6))
    projs = list(cstar.atomic_projectors(z))
    np.testing.assert_allclose(sum(projs), np.eye(6), atol=1e-9)
    for i, p in enumerate(projs):
        np.testing.assert_allclose(p @ p, p, atol=1e-9)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-9)
        for q in projs[i + 1:]:
            assert np.linalg.norm(p @ q) < 1e-9
    assert len(projs) == z.dimension


# -- intersect and join -------------------------------------------------


def test_intersect_with_itself(rng):
    mats, _ = oracles.random_block_algebra(5, rng)
    a = MatAlgebra.from_spanning_set(mats, 5)
    assert same(cstar.intersect(a, a), a)


def test_intersect_full_and_scalars():
    assert cstar.intersect(MatAlgebra.full(3), MatAlgebra.scalars(3)).dimension == 1


def test_intersect_of_two_diagonal_patterns_is_trivial():
    a0 = cstar.diagonal_algebra("aabb")
    a1 = cstar.diagonal_algebra("abab")
    assert cstar.intersect(a0, a1).dimension == 1


def test_join_with_scalars(rng):
    mats, _ = oracles.random_block_algebra(4, rng)
    a = MatAlgebra.from_spanning_set(mats, 4)
    assert same(cstar.join(a, MatAlgebra.scalars(4)), a)


def test_join_of_three_diagonal_patterns_is_all_diagonals():
    sites = [cstar.diagonal_algebra(p) for p in ("aabb", "abab", "abba")]
    j = cstar.join_all(sites, 4)
    assert j.dimension == 4
    assert same(j, cstar.diagonal_algebra("abcd"))


def test_join_of_tensor_factors_is_everything():
    j = cstar.join(factor_algebra([2, 2], [0]), factor_algebra([2, 2], [1]))
    assert j.dimension == 16


# -- uncorrelated -------------------------------------------------------


def test_tensor_factors_are_uncorrelated():
    assert cstar.is_uncorrelated(factor_algebra([2, 2], [0]), factor_algebra([2, 2], [1]))


def test_algebra_is_correlated_with_itself():
    a = cstar.diagonal_algebra("aabb")
    assert not cstar.is_uncorrelated(a, a)


def test_relabelled_ring_neighbours_are_uncorrelated():
    assert cstar.is_uncorrelated(cstar.diagonal_algebra("aabb"), cstar.diagonal_algebra("abab"))


def test_uncorrelated_needs_commuting_algebras():
    with pytest.raises(NotCommuting):
        cstar.is_uncorrelated(MatAlgebra.full(2), MatAlgebra.full(2))


# -- screening projector ------------------------------------------------


def test_identity_screens_to_identity():
    g = cstar.diagonal_algebra("aabb")
    np.testing.assert_allclose(cstar.screening_projector(np.eye(4), g), np.eye(4), atol=1e-12)


def test_atomic_projector_screens_to_itself():
    g = cstar.diagonal_algebra("aabb")
    pi = np.diag([0, 0, 1, 1]).astype(complex)
    np.testing.assert_allclose(cstar.screening_projector(pi, g), pi, atol=1e-12)


def test_rank_one_projector_screens_to_its_block():
    g = cstar.diagonal_algebra("aabb")
    mu = cstar.screening_projector(np.diag([1, 0, 0, 0]).astype(complex), g)
    np.testing.assert_allclose(mu, np.diag([1, 1, 0, 0]), atol=1e-12)


def test_screening_rejects_non_commuting_projector():
    g = cstar.diagonal_algebra("aabb")
    v = np.array([1, 0, 1, 0]) / np.sqrt(2)
    with pytest.raises(NotCommuting):
        cstar.screening_projector(np.outer(v, v).astype(complex), g)


# -- homomorphism kernels -----------------------------------------------


def test_kernel_of_identity_map():
    f = cstar.diagonal_algebra("aabb")
    mu, rest = cstar.homomorphism_kernel_blocks(lambda x: x, f)
    np.testing.assert_allclose(mu, np.eye(4), atol=1e-12)
    assert np.linalg.norm(rest) == 0


def test_kernel_of_zero_map():
    f = cstar.diagonal_algebra("aabb")
    mu, rest = cstar.homomorphism_kernel_blocks(lambda x: 0 * x, f)
    assert np.linalg.norm(mu) == 0
    np.testing.assert_allclose(rest, np.eye(4), atol=1e-12)


def test_kernel_of_compression_to_a_block():
    f = cstar.diagonal_algebra("aabb")
    p = np.diag([1, 1, 0, 0]).astype(complex)
    mu, rest = cstar.homomorphism_kernel_blocks(lambda x: p @ x, f)
    np.testing.assert_allclose(mu, p, atol=1e-12)
    np.testing.assert_allclose(rest, np.eye(4) - p, atol=1e-12)


# -- factor split -------------------------------------------------------


def _split_pattern_ok(a: MatAlgebra, fs) -> bool:
    w = fs.isometry
    for x in a.basis:
        y = (w @ x @ w.conj().T).reshape(fs.p, fs.q, fs.p, fs.q)
        red = np.einsum("ajbj->ab", y) / fs.q
        if np.linalg.norm(y - np.einsum("ab,jk->ajbk", red, np.eye(fs.q))) > 1e-9:
            return False
    return True


def test_factor_split_of_full_algebra():
    a = MatAlgebra.full(4)
    fs = cstar.factor_split(a)
    assert (fs.p, fs.q) == (4, 1)
    np.testing.assert_allclose(fs.isometry @ fs.isometry.conj().T, np.eye(4), atol=1e-12)


def test_factor_split_of_left_factor():
    a = factor_algebra([2, 2], [0])
    fs = cstar.factor_split(a)
    assert (fs.p, fs.q) == (2, 2)
    assert _split_pattern_ok(a, fs)


def test_factor_split_of_right_factor():
    a = factor_algebra([2, 2], [1])
    fs = cstar.factor_split(a)
    assert (fs.p, fs.q) == (2, 2)
    assert _split_pattern_ok(a, fs)
    np.testing.assert_allclose(fs.isometry.conj().T @ fs.isometry, fs.block_projector, atol=1e-12)


def test_factor_split_of_non_factor_fails():
    with pytest.raises(NotFactor):
        cstar.factor_split(cstar.diagonal_algebra("aabb"))


def test_factor_split_on_a_block():
    a = cstar.commutant(cstar.diagonal_algebra("aabb"))
    p = np.diag([1, 1, 0, 0]).astype(complex)
    fs = cstar.factor_split(a, p)
    assert (fs.p, fs.q) == (2, 1)
    np.testing.assert_allclose(fs.block_projector, p, atol=1e-12)


# -- conjugate ----------------------------------------------------------


def test_conjugate_by_identity(rng):
    mats, _ = oracles.random_block_algebra(4, rng)
    a = MatAlgebra.from_spanning_set(mats, 4)
    assert same(cstar.conjugate(a, np.eye(4)), a)


def test_conjugate_round_trip(rng):
    mats, _ = oracles.random_block_algebra(4, rng)
    a = MatAlgebra.from_spanning_set(mats, 4)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    assert same(cstar.conjugate(cstar.conjugate(a, q), q.conj().T), a)


def test_sign_flip_moves_a_two_site_algebra():
    a = factor_algebra([2, 2], [1])
    u = np.diag([1, 1, 1, -1]).astype(complex)
    assert cstar.span_distance(cstar.conjugate(a, u), a) > 0.1
