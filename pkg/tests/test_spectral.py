import numpy as np
import pytest

from Spectral import sym_matrix, sym_eigen, inertia, nullspace_basis, pencil_real_eigs, pencil_eigs, \
    restricted_form, orthogonal_complement, aggregate, lambda_min


FIX_A_A0 = np.diag([1.0, 1.0, 1.0, -1.0])
FIX_A_A1 = np.array([[-1, 0, 0, -0.5], [0, -1, 0, -0.25], [0, 0, 0.5, 0], [-0.5, -0.25, 0, 0]])
FIX_A_AS = np.array([[0, 0, 0, -2], [0, 0, 0, -1], [0, 0, 6, 0], [-2, -1, 0, -4]]) / 8


def test_sym_matrix_symmetrizes():
    S = sym_matrix([[1, 2], [0, 1]])
    np.testing.assert_allclose(S, [[1, 1], [1, 1]])


@pytest.mark.parametrize('S', [[1, 2, 3], [[1, 2, 3], [4, 5, 6]], [[1, np.nan], [0, 1]]])
def test_sym_matrix_rejects_bad_input(S):
    with pytest.raises(ValueError):
        sym_matrix(S)


def test_sym_eigen_is_ascending_and_orthonormal(rng):
    M = rng.standard_normal((5, 5))
    spectrum = sym_eigen(M + M.T)
    assert np.all(np.diff(spectrum.eigvals) >= 0)
    np.testing.assert_allclose(spectrum.eigvecs.T @ spectrum.eigvecs, np.eye(5), atol=1e-12)


def test_fix_a_smallest_eigenpair():
    lam, q = sym_eigen(FIX_A_AS).min_pair
    assert lam == pytest.approx(-5 / 8, abs=1e-12)
    expected = np.array([2.0, 1.0, 0.0, 5.0])
    assert abs(q @ expected) / np.linalg.norm(expected) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize('S, counts', [
    (FIX_A_A0, (1, 0, 3)),
    (FIX_A_AS, (1, 1, 2)),
    (np.zeros((3, 3)), (0, 3, 0)),
    (np.diag([1e-12, -1.0, 2.0]), (1, 1, 1)),
])
def test_inertia(S, counts):
    assert inertia(S).as_tuple() == counts


def test_inertia_rejects_nonpositive_tolerance():
    with pytest.raises(ValueError):
        inertia(np.eye(2), tol=0)


def test_nullspace_of_fix_a_cut_matrix():
    Z = nullspace_basis(FIX_A_AS)
    assert Z.shape == (4, 1)
    d = np.array([1.0, -2.0, 0.0, 0.0]) / np.sqrt(5)
    assert abs(Z[:, 0] @ d) == pytest.approx(1.0, abs=1e-10)


def test_nullspace_of_nonsingular_matrix_is_empty():
    assert nullspace_basis(np.eye(3)).shape == (3, 0)


def test_pencil_contains_fix_a_eigenvalue():
    eigs = pencil_real_eigs(FIX_A_A0, FIX_A_A1)
    assert np.min(np.abs(eigs + 1.0)) < 1e-9


def test_pencil_of_shifted_split_matrices():
    epsilon = 1 / 8
    A_eps = np.diag([1 - 2 * epsilon, 1 - epsilon, -1 + epsilon, epsilon])
    A1 = np.diag([-1.0, 0.0, 0.0, 1.0])
    np.testing.assert_allclose(pencil_real_eigs(A_eps, A1), [-4 / 3, 0, 0, 8], atol=1e-10)


def test_pencil_rejects_singular_a0():
    with pytest.raises(ValueError):
        pencil_eigs(np.diag([1.0, -1.0, 0.0]), np.eye(3))


def test_pencil_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        pencil_eigs(np.eye(2), np.eye(3))


def test_pencil_drops_complex_pairs():
    A0 = np.diag([1.0, -1.0])
    A1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert pencil_eigs(A0, A1).size == 2
    assert pencil_real_eigs(A0, A1).size == 0


def test_restricted_form_on_null_space():
    Z = np.array([[0.0], [0.0], [0.0], [1.0]])
    np.testing.assert_allclose(restricted_form(np.diag([-1.0, 0.0, 0.0, 1.0]), Z), [[1.0]])
    with pytest.raises(ValueError):
        restricted_form(np.eye(3), np.ones((4, 1)))


def test_orthogonal_complement():
    h = np.array([0.0, 0.0, 1.0])
    W = orthogonal_complement(h)
    assert W.shape == (3, 2)
    np.testing.assert_allclose(h @ W, 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        orthogonal_complement(np.zeros(3))


def test_lambda_min_is_concave_along_the_pencil():
    t = np.linspace(0, 1, 11)
    values = np.array([lambda_min(aggregate(FIX_A_A0, FIX_A_A1, s)) for s in t])
    assert np.all(values[1:-1] >= (values[:-2] + values[2:]) / 2 - 1e-12)
