import numpy as np
import pytest

from applications import DEGENERATE_CONCENTRIC, TrsProblem, quad_homogenize, ball_deletion_hull, \
    concentric_ellipsoid_hull, paraboloid_hull, trs_lift, trs_solve, solve_convex_trs
from conditions import Status
from errors import PreconditionUnmet, TrivialHull, WitnessError

from helpers import trs_oracle


def test_quad_homogenize():
    A = quad_homogenize(np.eye(2), [1.0, 2.0], 3.0)
    np.testing.assert_allclose(A, [[1.0, 0.0, 1.0], [0.0, 1.0, 2.0], [1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        quad_homogenize(np.eye(2), [1.0], 0.0)


def test_concentric_ellipsoid():
    cut = concentric_ellipsoid_hull(np.diag([4.0, 1.0, 1.0]), 1.0)
    assert cut.s == pytest.approx(0.2, abs=1e-10)
    assert 'closed-form s' in cut.flags
    np.testing.assert_allclose(cut.As, np.diag([0.0, 0.6, 0.6, -0.6]), atol=1e-9)
    assert cut.describe() == '‖(x2;x3)‖ ≤ x4'
    assert cut.report.cond5.status in (Status.VERIFIED_APEX, Status.VERIFIED_CONTAINMENT)


def test_concentric_ellipsoid_covering_the_ball():
    with pytest.raises(TrivialHull) as error:
        concentric_ellipsoid_hull(np.eye(2), 2.0)
    assert error.value.hull == 'empty'


def test_concentric_ellipsoid_degenerate():
    cut = concentric_ellipsoid_hull(np.eye(2), 1.0)
    assert cut.s == pytest.approx(0.5)
    assert cut.cone_s is None
    assert DEGENERATE_CONCENTRIC in cut.flags
    assert cut.describe() == DEGENERATE_CONCENTRIC


def test_concentric_ellipsoid_validation():
    with pytest.raises(ValueError):
        concentric_ellipsoid_hull(np.diag([1.0, -1.0]), 1.0)
    with pytest.raises(ValueError):
        concentric_ellipsoid_hull(np.eye(2), 0.0)


def test_ball_deletion_halfplane(rng):
    cut = ball_deletion_hull([1.0, 0.0], 1.0)
    assert cut.s == pytest.approx(0.5, abs=1e-8)
    assert cut.report.cond4.status is Status.VERIFIED

    # on the section the hull of the unit disk minus the unit disk around e1 is y1 <= 1/2
    checked = 0
    for _ in range(2000):
        y = rng.uniform(-1, 1, 2)
        if y @ y >= 1 or abs(y[0] - 0.5) < 1e-3:
            continue
        assert cut.contains(np.append(y, 1.0)) == (y[0] <= 0.5)
        checked += 1
    assert checked > 1000


@pytest.mark.parametrize('c, r, hull', [
    ([3.0, 0.0], 1.0, 'unit ball'),
    ([0.1, 0.0], 3.0, 'empty'),
    ([0.2, 0.0], 0.5, 'unit ball'),
])
def test_ball_deletion_trivial_cases(c, r, hull):
    with pytest.raises(TrivialHull) as error:
        ball_deletion_hull(c, r)
    assert error.value.hull == hull


def test_ball_deletion_validation():
    with pytest.raises(ValueError):
        ball_deletion_hull([1.0], 1.0)
    with pytest.raises(ValueError):
        ball_deletion_hull([1.0, 0.0], -1.0)


def test_paraboloid():
    cut = paraboloid_hull(np.diag([-1.0, 1.0]), np.zeros(3), 0.0)
    assert cut.s == pytest.approx(0.5, abs=1e-10)
    assert cut.report.cond5.status is Status.VERIFIED_APEX


def test_paraboloid_boundary_linear_term():
    cut = paraboloid_hull(np.diag([-3.0, 1.0]), [0.0, 0.0, 1.5], -1.0)
    assert cut.s == pytest.approx(0.25, abs=1e-6)
    assert cut.contains(np.array([1.0, 0.0, 1.1, 1.0]))


@pytest.mark.parametrize('Qt, g', [
    (np.eye(2), np.zeros(3)),
    (np.diag([-1.0, 1.0]), [0.0, 0.0, 1.0]),
])
def test_paraboloid_preconditions(Qt, g):
    with pytest.raises(PreconditionUnmet):
        paraboloid_hull(Qt, g, 0.0)


def test_paraboloid_linear_term_size():
    with pytest.raises(ValueError):
        paraboloid_hull(np.diag([-1.0, 1.0]), np.zeros(2), 0.0)


def test_trs_lift_repeats_lambda_min():
    lifted = trs_lift(TrsProblem(np.diag([-1.0, 2.0]), [1.0, 1.0]))
    np.testing.assert_allclose(lifted.Q, np.diag([-1.0, 2.0, -1.0]))
    np.testing.assert_allclose(np.abs(lifted.g), [1.0, 1.0, 0.0])
    assert lifted.lam_min == -1.0

    with pytest.raises(PreconditionUnmet):
        trs_lift(TrsProblem(np.eye(2), [1.0, 0.0]))
    with pytest.raises(TypeError):
        trs_lift((np.eye(2), np.zeros(2)))


def test_trs_problem_validation():
    with pytest.raises(ValueError):
        TrsProblem(np.eye(2), [1.0, 2.0, 3.0])


@pytest.mark.parametrize('Qt, gt, value', [
    (np.diag([2.0, 3.0]), [-1.0, 0.0], -0.5),
    (np.eye(2), [-2.0, 0.0], -3.0),
])
def test_convex_route(Qt, gt, value):
    solution = trs_solve(TrsProblem(Qt, gt))
    assert solution.route == 'secular'
    assert solution.value == pytest.approx(value, abs=1e-10)
    assert solution.value == pytest.approx(solve_convex_trs(TrsProblem(Qt, gt)).value)


def test_trs_hard_case():
    solution = trs_solve(TrsProblem(-np.eye(2), np.zeros(2)))
    assert solution.value == pytest.approx(-1.0, abs=1e-6)
    assert np.linalg.norm(solution.y) == pytest.approx(1.0, abs=1e-5)


def test_trs_boundary_minimizer():
    problem = TrsProblem(np.diag([-1.0, 1.0]), [0.5, 0.0])
    solution = trs_solve(problem)
    assert solution.value == pytest.approx(-2.0, abs=1e-6)
    np.testing.assert_allclose(solution.y, [-1.0, 0.0], atol=1e-4)
    assert 0 < solution.s <= 1
    assert solution.to_dict()['route'] == 'cut'


def _random_trs(rng, low=1):
    n = int(rng.integers(low, 6))
    M = rng.standard_normal((n, n))
    Qt = (M + M.T) / 2
    if np.linalg.eigvalsh(Qt)[0] >= 0:
        Qt -= (np.linalg.eigvalsh(Qt)[0] + 0.5) * np.eye(n)
    return TrsProblem(Qt, rng.standard_normal(n))


def _check_against_oracle(problem):
    solution = trs_solve(problem)
    expected = trs_oracle(problem.Qt, problem.gt)
    assert solution.value == pytest.approx(expected, abs=1e-5 * max(1.0, abs(expected)))
    assert np.linalg.norm(solution.y) <= 1 + 1e-6
    assert problem.objective(solution.y) == pytest.approx(solution.value, abs=1e-5 * max(1.0, abs(expected)))


def test_trs_matches_oracle(rng):
    for _ in range(5):
        _check_against_oracle(_random_trs(rng))


@pytest.mark.slow
def test_trs_matches_oracle_suite():
    rng = np.random.default_rng(99)
    for _ in range(100):
        _check_against_oracle(_random_trs(rng))


@pytest.mark.parametrize('Qt, gt', [([[-1.0]], [0.3]), ([[-2.0]], [0.0]), ([[-0.5]], [-4.0])])
def test_trs_one_dimensional(Qt, gt):
    problem = TrsProblem(Qt, gt)
    solution = trs_solve(problem)
    # on [-1, 1] a concave quadratic is minimized at an endpoint
    expected = min(problem.objective([1.0]), problem.objective([-1.0]))
    assert solution.value == pytest.approx(expected, abs=1e-6)
    assert problem.objective(solution.y) == pytest.approx(expected, abs=1e-6)
    assert abs(solution.y[0]) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize('index', [7, 15, 44])
def test_trs_long_central_paths(index):
    # seeded draws over n in [2, 6) whose central paths take more than 200 Newton steps in total
    rng = np.random.default_rng(99)
    for _ in range(index):
        _random_trs(rng, low=2)
    _check_against_oracle(_random_trs(rng, low=2))


def test_trs_minimizer_matches_value_when_recovery_fails(monkeypatch):
    import applications

    def refuse(*args):
        raise WitnessError('no apex direction of F_s+ inside H0')

    monkeypatch.setattr(applications, '_recover_minimizer', refuse)
    problem = TrsProblem(np.diag([-1.0, 1.0]), [0.5, 0.0])
    solution = trs_solve(problem)
    assert solution.certificates['recovery_error']['code'] == 'invalid_witness'
    assert solution.certificates['recovery_fallback']['route'] == 'secular'
    assert problem.objective(solution.y) == pytest.approx(solution.value, abs=1e-6)
    np.testing.assert_allclose(solution.y, [-1.0, 0.0], atol=1e-6)
