import numpy as np
import pytest

from SOCr import Region, SocrCone, socr_from_A, socr_from_Bb, halfspace_from_A, membership, quad_value, \
    quad_values, second_order_cone, lorentz_matrix


FIX_A_AS = np.array([[0, 0, 0, -2], [0, 0, 0, -1], [0, 0, 6, 0], [-2, -1, 0, -4]]) / 8


def test_second_order_cone_matrix():
    cone = second_order_cone(3)
    np.testing.assert_allclose(cone.A, lorentz_matrix(3))
    assert cone.contains([0.0, 0.0, 1.0])
    assert not cone.contains([0.0, 0.0, -1.0])


def test_from_A_recovers_matrix(rng):
    for _ in range(20):
        n = rng.integers(2, 7)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        eigvals = np.append(-rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0, n - 1))
        A = Q @ np.diag(eigvals) @ Q.T
        cone = socr_from_A(A)
        np.testing.assert_allclose(cone.A, (A + A.T) / 2, atol=1e-10)


def test_fix_a_cut_orientation():
    xbar = np.array([0.5, 0.0, 0.0, 1.0])
    cone = socr_from_A(FIX_A_AS, orient=xbar)
    expected = np.array([2.0, 1.0, 0.0, 5.0])
    cosine = cone.b @ expected / (np.linalg.norm(cone.b) * np.linalg.norm(expected))
    assert cosine == pytest.approx(1.0, abs=1e-10)
    assert cone.b @ xbar > 0


def test_from_A_rejects_wrong_inertia():
    with pytest.raises(ValueError):
        socr_from_A(np.diag([1.0, -1.0, -1.0]))
    with pytest.raises(ValueError):
        socr_from_A(np.diag([-1.0, 0.0]))


def test_from_Bb_validation():
    with pytest.raises(ValueError):
        socr_from_Bb(np.eye(3), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        socr_from_Bb(np.array([[1.0], [0.0], [0.0]]), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        socr_from_Bb(np.zeros((3, 1)), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        socr_from_Bb(np.eye(2, 1), np.zeros(2))


def test_zero_columns_are_allowed():
    B = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    cone = socr_from_Bb(B, np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(cone.A, np.diag([1.0, 0.0, -1.0]))


def test_halfspace_branch():
    A = -np.outer([1.0, -1.0], [1.0, -1.0]) / 2
    cone = halfspace_from_A(A, orient=np.array([-1.0, 1.0]))
    assert cone.is_halfspace
    assert cone.contains([0.0, 1.0])
    assert not cone.contains([1.0, 0.0])


@pytest.mark.parametrize('x, region', [
    ([0.5, 0.0, 0.0, 1.0], Region.INTERIOR_PLUS),
    ([1.0, 0.0, 0.0, 1.0], Region.BOUNDARY_PLUS),
    ([0.0, 0.0, 0.0, 0.0], Region.APEX),
    ([0.0, 0.0, 0.0, -1.0], Region.INTERIOR_MINUS),
    ([0.0, 1.0, 0.0, -1.0], Region.BOUNDARY_MINUS),
    ([2.0, 0.0, 0.0, 1.0], Region.OUTSIDE),
])
def test_membership_regions(x, region):
    cone = second_order_cone(4)
    assert membership(cone, x).region is region


def test_membership_dimension_mismatch():
    with pytest.raises(ValueError):
        membership(second_order_cone(3), [1.0, 1.0])


def test_flipped_cone_swaps_branches():
    cone = second_order_cone(3)
    flipped = cone.flipped()
    assert flipped.contains([0.0, 0.0, -1.0])
    np.testing.assert_allclose(flipped.A, cone.A)


def test_quadratic_values(rng):
    A = np.diag([1.0, -2.0])
    X = rng.standard_normal((5, 2))
    np.testing.assert_allclose(quad_values(A, X), [quad_value(A, x) for x in X])
    with pytest.raises(ValueError):
        quad_value(A, np.ones(3))


def test_slacks_match_slack(rng):
    cone = socr_from_A(FIX_A_AS, orient=np.array([0.5, 0.0, 0.0, 1.0]))
    X = rng.standard_normal((10, 4))
    np.testing.assert_allclose(cone.slacks(X), [cone.slack(x) for x in X])


def test_cone_is_scale_invariant():
    cone = SocrCone(np.array([[1.0], [0.0]]), np.array([0.0, 1.0]))
    for rho in (1e-3, 1.0, 1e3):
        assert cone.contains(rho * np.array([0.5, 1.0]))
