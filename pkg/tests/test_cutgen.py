import time
import numpy as np
import pytest

from conditions import Cond3Kind, Status, check_cond3
from cutgen import ConeInstance, CutResult, build_cut, compute_T, compute_s, epsilon_probe, validate_cut, \
    is_oriented, snap_rational, describe_cone
from errors import Cond1Failed, Cond2Infeasible, Cond3Failed, PreconditionUnmet
import hullcert

from helpers import parallel


FIX_A_8AS = np.array([[0, 0, 0, -2], [0, 0, 0, -1], [0, 0, 6, 0], [-2, -1, 0, -4]])


def random_instance(rng, n):
    """Nonsingular SOCr A0 and a random A1 sharing a strictly negative direction"""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigvals = np.append(-rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0, n - 1))
    A0 = Q @ np.diag(eigvals) @ Q.T
    xbar = Q[:, 0] + 0.3 * Q[:, 1:] @ rng.uniform(-1, 1, n - 1) / np.sqrt(n)
    M = rng.standard_normal((n, n))
    A1 = (M + M.T) / 2
    A1 -= (xbar @ A1 @ xbar + rng.uniform(0.1, 1.0)) / (xbar @ xbar) ** 2 * np.outer(xbar, xbar)
    return ConeInstance(A1, A0=A0, seed=int(rng.integers(1 << 30)))


def test_fix_a_golden(fix_a):
    started = time.perf_counter()
    cut = build_cut(fix_a)
    elapsed = time.perf_counter() - started

    assert cut.s == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(8 * cut.As, FIX_A_8AS, atol=1e-7)
    assert parallel(cut.cone_s.b, [2, 1, 0, 5]) == pytest.approx(1.0, abs=1e-12)
    assert abs(parallel(cut.report.cond4.witness, [1, -2, 0, 0])) == pytest.approx(1.0, abs=1e-9)
    assert cut.report.cond4.status is Status.VERIFIED
    assert cut.report.cond5.status is Status.VERIFIED_APEX
    assert cut.report.cond3.kind is Cond3Kind.NONSINGULAR
    assert not cut.report.has_failure() and not cut.report.has_undecided()
    assert is_oriented(cut)
    assert elapsed < 1.0


def test_fix_a_xbar_is_a_strict_interior_point(fix_a):
    cut = build_cut(fix_a)
    x = cut.xbar
    assert x @ fix_a.A0 @ x < 0 and x @ fix_a.A1 @ x < 0
    assert cut.contains(np.array([0.5, 0.0, 0.0, 1.0]))


def test_fix_b_golden(fix_b, rng):
    cut = build_cut(fix_b)
    assert cut.s == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(cut.As, np.diag([0.0, 0.5, -0.5, 0.5]), atol=1e-8)
    assert cut.report.cond3.kind is Cond3Kind.POSDEF_ON_NULL
    assert cut.epsilon_used == 2.0 ** -4
    assert cut.describe() == '‖(x2;x4)‖ ≤ x3'
    assert abs(cut.report.cond4.witness[0]) == pytest.approx(1.0)

    X = rng.standard_normal((10000, 4))
    expected = np.hypot(X[:, 1], X[:, 3]) <= X[:, 2]
    observed = cut.cone_s.slacks(X) >= 0
    assert np.count_nonzero(expected != observed) == 0


def test_fix_b_singularity_parameters(fix_b):
    variant = check_cond3(fix_b.A0, fix_b.A1)
    T = compute_T(fix_b.A0, fix_b.A1, variant)
    window = T[(T > 1e-9) & (T <= 1 + 1e-9)]
    np.testing.assert_allclose(window, [0.5, 1.0], atol=1e-8)
    assert epsilon_probe(fix_b.A0, fix_b.A1) == 2.0 ** -4


def test_fix_c_golden(fix_c):
    cut = build_cut(fix_c)
    assert cut.s == pytest.approx(0.5, abs=1e-8)
    assert parallel(cut.cone_s.b, [0, 0, np.sqrt(2) - 1, 1]) == pytest.approx(1.0, abs=1e-12)
    lam = np.linalg.eigvalsh(cut.As)[0]
    assert lam == pytest.approx((1 - np.sqrt(2)) / 4, abs=1e-10)
    assert abs(cut.report.cond4.witness[1]) == pytest.approx(1.0, abs=1e-9)
    assert cut.report.cond5.status is Status.VERIFIED_APEX


def test_fix_d_cut_survives_violated_cond4(fix_d):
    cut = build_cut(fix_d)
    assert cut.s == pytest.approx(0.5, abs=1e-6)
    np.testing.assert_allclose(cut.As, 0.5 * np.array([[-1, 1], [1, -1]]), atol=1e-6)
    assert cut.report.cond4.status is Status.VIOLATED
    assert np.max(np.abs(cut.report.cond4.data['restricted'])) <= 1e-9
    assert cut.trivial and cut.cone_s.is_halfspace
    assert parallel(cut.cone_s.b, [-1, 1]) == pytest.approx(1.0, abs=1e-6)
    assert any('Condition 4 violated' in warning for warning in cut.report.warnings)

    validation = validate_cut(fix_d, cut, n_samples=10000, seed=1)
    assert validation['n_samples'] > 0
    assert validation['n_violations'] == 0


def test_fix_e_halts_on_cond3(fix_e):
    with pytest.raises(Cond3Failed) as error:
        build_cut(fix_e)
    assert error.value.code == 'cond3_failed'
    assert error.value.report.cond1 is True
    assert error.value.report.cond2 is not None


def test_fix_f_zero_aggregation(fix_f):
    cut = build_cut(fix_f)
    assert cut.s == 0.0
    assert cut.report.cond3.kind is Cond3Kind.NEGDEF_ON_NULL
    np.testing.assert_allclose(cut.As, fix_f.A0)
    assert cut.report.cond5.status in (Status.FALSIFIED_BY_SAMPLE, Status.UNKNOWN)
    assert cut.report.has_failure() or cut.report.has_undecided()


def test_cond1_failure_is_reported():
    instance = ConeInstance(np.eye(3), A0=np.diag([1.0, -1.0, -1.0]))
    with pytest.raises(Cond1Failed) as error:
        build_cut(instance)
    assert error.value.report.cond1 is False


def test_cond2_infeasible_carries_certificate():
    instance = ConeInstance(np.diag([-1.0, 1.0]), A0=np.diag([1.0, -1.0]))
    with pytest.raises(Cond2Infeasible) as error:
        build_cut(instance)
    assert error.value.t_star == pytest.approx(0.5, abs=1e-6)


def test_epsilon_probe_needs_posdef_restriction(fix_c):
    with pytest.raises(PreconditionUnmet):
        epsilon_probe(fix_c.A0, fix_c.A1)


def test_compute_s_branches(fix_f):
    variant = check_cond3(fix_f.A0, fix_f.A1)
    assert compute_s(np.array([0.3]), variant) == 0.0
    nonsingular = check_cond3(np.diag([1.0, -1.0]), np.eye(2))
    assert compute_s(np.array([-0.5, 1.5]), nonsingular) == 1.0
    assert compute_s(np.array([0.0, 0.25, 0.75]), nonsingular) == 0.25


def test_known_s_is_cross_checked(fix_a):
    cut = build_cut(fix_a, known_s=0.5)
    assert cut.s == 0.5
    assert 'closed-form s' in cut.flags

    cut = build_cut(fix_a, known_s=0.4)
    assert cut.s == pytest.approx(0.5)
    assert any('disagrees' in warning for warning in cut.report.warnings)


def test_instance_validation():
    with pytest.raises(ValueError):
        ConeInstance(np.eye(2))
    with pytest.raises(ValueError):
        ConeInstance(np.eye(2), A0=np.eye(3))
    with pytest.raises(ValueError):
        ConeInstance(np.eye(2), A0=np.diag([1.0, -1.0]), h=np.zeros(2))
    with pytest.raises(ValueError):
        ConeInstance(np.eye(2), A0=np.eye(2), B0=np.array([[1.0], [0.0]]), b0=np.array([0.0, 1.0]))


def test_cut_serialization(fix_a):
    payload = build_cut(fix_a).to_dict()
    assert payload['s_display'] == '1/2'
    assert len(payload['As']) == 4
    assert payload['report']['cond4']['status'] == 'VERIFIED'
    assert payload['inequality']


def test_degenerate_cut_has_no_membership():
    cut = CutResult(s=0.5, T=np.array([0.5]), As=np.zeros((2, 2)), cone_s=None, xbar=None, report=None,
                    cone0=None, flags=['degenerate'])
    assert cut.describe() == 'degenerate'
    with pytest.raises(ValueError):
        cut.contains(np.ones(2))


@pytest.mark.parametrize('value, text', [(0.5, '1/2'), (0.2, '1/5'), (1.0, '1'), (0.123456789, '0.123456789')])
def test_snap_rational(value, text):
    assert snap_rational(value) == text


def test_describe_diagonal_cone(fix_b):
    cut = build_cut(fix_b)
    assert describe_cone(cut.cone_s) == '‖(x2;x4)‖ ≤ x3'


def test_build_cut_is_deterministic(fix_a):
    first, second = build_cut(fix_a), build_cut(fix_a)
    assert first.s == second.s
    np.testing.assert_array_equal(first.As, second.As)
    np.testing.assert_array_equal(first.cone_s.b, second.cone_s.b)


def _validity_suite(rng, count, n_samples):
    checked = 0
    for _ in range(count):
        instance = random_instance(rng, int(rng.integers(3, 7)))
        cut = build_cut(instance)
        validation = validate_cut(instance, cut, n_samples=n_samples, seed=instance.seed)
        assert validation['n_violations'] == 0, f'instance seed {instance.seed}'
        checked += 1
    return checked


def test_validity_on_random_instances(rng):
    assert _validity_suite(rng, 20, 2000) == 20


@pytest.mark.slow
def test_validity_property_suite():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    assert _validity_suite(rng, 200, 10000) == 200
    assert time.perf_counter() - started < 120


@pytest.mark.slow
def test_tightness_certificates():
    rng = np.random.default_rng(7)
    certified = 0
    for _ in range(50):
        instance = random_instance(rng, int(rng.integers(3, 7)))
        cut = build_cut(instance)
        if cut.report.cond4.status is not Status.VERIFIED:
            continue
        certificate = hullcert.certify_hull(instance, cut, n_samples=1000, seed=instance.seed)
        assert certificate['n_failed'] == 0, certificate['failures'][:1]
        certified += 1
    assert certified > 0
