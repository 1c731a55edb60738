import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solgeo.algebra import (PAULI, CoefficientTriple, CurvatureTriple, commutator, gram, metric,
                            plane_generator, so3_from_triple, spin_matrix, spin_vector,
                            su2_from_triple, triple_from_so3)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_so3_frenet_pattern():
    m = so3_from_triple(CurvatureTriple(1, 0, 0, 1))
    np.testing.assert_array_equal(m, [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])


@pytest.mark.parametrize("beta", [1, -1])
def test_so3_zero(beta):
    np.testing.assert_array_equal(so3_from_triple(CurvatureTriple(0, 0, 0, beta)), np.zeros((3, 3)))


def test_so3_indefinite_substitution():
    m = so3_from_triple(CurvatureTriple(2, 1, 3, -1))
    np.testing.assert_array_equal(m, [[0, 2, -1], [2, 0, 3], [-1, -3, 0]])


def test_coefficient_triple_slots():
    # (c1, c2, c3) occupy the (tau, sigma, k) slots
    a = so3_from_triple(CoefficientTriple(3.0, 1.0, 2.0))
    b = so3_from_triple(CurvatureTriple(2.0, 1.0, 3.0))
    np.testing.assert_array_equal(a, b)


def test_bad_beta():
    with pytest.raises(ValueError):
        CurvatureTriple(1, 0, 0, 2)
    with pytest.raises(ValueError):
        so3_from_triple((1, 0, 0), beta=0)


@given(finite, finite, finite)
def test_so3_antisymmetric(k, s, t):
    m = so3_from_triple(CurvatureTriple(k, s, t))
    np.testing.assert_array_equal(m.T, -m)
    back = triple_from_so3(m)
    assert (back.k, back.sigma, back.tau) == (k, s, t)


def test_so3_broadcasts():
    k = np.linspace(0, 1, 5)
    m = so3_from_triple(CurvatureTriple(k, 0.0, 2.0))
    assert m.shape == (5, 3, 3)
    np.testing.assert_array_equal(m[:, 0, 1], k)
    np.testing.assert_array_equal(m[:, 1, 2], 2.0)


def test_su2_examples():
    np.testing.assert_allclose(su2_from_triple(1, 0, 0), [[0, -0.5j], [-0.5j, 0]], atol=0)
    np.testing.assert_array_equal(su2_from_triple(0, 0, 0), np.zeros((2, 2)))
    np.testing.assert_allclose(su2_from_triple(0, 1, 0), [[0, -0.5], [0.5, 0]], atol=0)


@given(finite, finite, finite)
def test_su2_traceless_antihermitian(a1, a2, a3):
    m = su2_from_triple(a1, a2, a3)
    assert np.trace(m) == 0
    np.testing.assert_allclose(m.conj().T, -m, atol=1e-12 * (1 + abs(a1) + abs(a2) + abs(a3)))


def test_spin_matrix_examples():
    np.testing.assert_array_equal(spin_matrix(0, 0, 1), [[1, 0], [0, -1]])
    np.testing.assert_array_equal(spin_matrix(1, 0, 0), [[0, 1], [1, 0]])


@given(finite, finite, finite)
def test_spin_matrix_square(s1, s2, s3):
    S = spin_matrix(s1, s2, s3)
    assert np.trace(S) == 0
    n2 = s1 * s1 + s2 * s2 + s3 * s3
    np.testing.assert_allclose(S @ S, n2 * np.eye(2), atol=1e-12 * (1 + n2))
    np.testing.assert_allclose(spin_vector(S).real, [s1, s2, s3], atol=1e-12 * (1 + n2))


def test_spin_matrix_unit_vectors(rng):
    v = rng.normal(size=(200, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    S = spin_matrix(v[:, 0], v[:, 1], v[:, 2])
    np.testing.assert_allclose(S @ S, np.broadcast_to(np.eye(2), S.shape), atol=1e-14)


def test_spin_matrix_is_pauli_sum(rng):
    v = rng.normal(size=3)
    np.testing.assert_allclose(spin_matrix(*v), np.einsum("i,ijk->jk", v, PAULI), atol=1e-15)


def test_commutator_examples():
    B = np.array([[1, 2], [3, 4]], dtype=complex)
    np.testing.assert_array_equal(commutator(B, B), np.zeros((2, 2)))
    np.testing.assert_array_equal(commutator(np.eye(2), B), np.zeros((2, 2)))
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    np.testing.assert_array_equal(commutator(sx, sy), 2j * np.array([[1, 0], [0, -1]]))


def test_commutator_dim_mismatch():
    with pytest.raises(ValueError):
        commutator(np.eye(2), np.eye(3))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_commutator_jacobi_bilinear(seed, d):
    r = np.random.default_rng(seed)
    A, B, C = (r.normal(size=(d, d)) + 1j * r.normal(size=(d, d)) for _ in range(3))
    a, b = r.normal(size=2)
    jac = commutator(A, commutator(B, C)) + commutator(B, commutator(C, A)) + commutator(C, commutator(A, B))
    np.testing.assert_allclose(jac, 0, atol=1e-12)
    np.testing.assert_allclose(commutator(a * A + b * B, C), a * commutator(A, C) + b * commutator(B, C), atol=1e-12)
    np.testing.assert_allclose(commutator(A, B), -commutator(B, A), atol=0)
    assert abs(np.trace(commutator(A, B))) < 1e-12


def test_plane_generator_and_metric():
    np.testing.assert_array_equal(plane_generator(2.0), [[0, 2], [-2, 0]])
    np.testing.assert_array_equal(plane_generator(2.0, -1), [[0, 2], [2, 0]])
    np.testing.assert_array_equal(metric(3, -1), np.diag([-1, 1, 1]))
    np.testing.assert_array_equal(gram(np.eye(3), -1), np.diag([-1, 1, 1]))
