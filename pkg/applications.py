import time
import logging
import numpy as np
import scipy.optimize
import humanfriendly

from dataclasses import dataclass, field

from Spectral import DEFAULT_TOL, sym_matrix, sym_eigen, aggregate
from SOCr import second_order_cone
from conditions import DEFAULT_BUDGET, SectionKind, SectionHint, ConditionReport, check_cond1, \
    hyperplane_apex_witness
from cutgen import ConeInstance, CutResult, build_cut, snap_rational
from errors import CutError, PreconditionUnmet, TrivialHull, WitnessError
from socp_mini import SocpProblem, solve
from Barrier import SolveStatus
import hullcert


DEGENERATE_CONCENTRIC = 'boundary-only feasible set; hull is the unit ball of the top eigenspace of E'

# Objective mismatch tolerated between the staged value and the recovered minimizer, relative
RECOVERY_TOL = 1e-6


def quad_homogenize(Q, g, f):
    """[[Q, g], [g^T, f]]: y^T Q y + 2 g^T y + f as a form in (y, 1)"""
    Q = sym_matrix(Q)
    g = np.asarray(g, dtype=float).ravel()
    if g.size != Q.shape[0]:
        raise ValueError(f'g has size {g.size}, expecting {Q.shape[0]}')
    n = g.size
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = Q
    A[:n, n] = A[n, :n] = g
    A[n, n] = float(f)
    return A


def _unit_ball_instance(A1, **options):
    n = A1.shape[0] - 1
    cone = second_order_cone(n + 1)
    h = np.zeros(n + 1)
    h[-1] = 1.0
    return ConeInstance(A1, B0=cone.B, b0=cone.b, h=h, hint=SectionHint(SectionKind.ELLIPSOID), **options)


def ball_deletion_hull(c, r, tol=DEFAULT_TOL, **options):
    """Cut for the unit ball with the open ball ||y - c|| < r removed

    Args:
        c ([ndarray]): Center of the deleted ball
        r ([float]): Radius of the deleted ball

    Raises:
        TrivialHull: Deleted ball disjoint from, inside of, or covering the unit ball

    Returns:
        [CutResult]: Cut on the homogenized space, section x_(n+1) = 1
    """
    c = np.asarray(c, dtype=float).ravel()
    if c.size < 2:
        raise ValueError('ball deletion needs n >= 2')
    if r <= 0:
        raise ValueError(f'radius must be positive, got {r}')

    distance = np.linalg.norm(c)
    if distance >= 1 + r:
        raise TrivialHull('deleted ball is disjoint from the unit ball', hull='unit ball')
    if r >= distance + 1:
        raise TrivialHull('deleted ball covers the unit ball', hull='empty')
    if distance == 0:
        return concentric_ellipsoid_hull(np.eye(c.size), r, tol=tol, **options)
    if distance + r <= 1:
        raise TrivialHull('deleted ball lies inside the unit ball, the sphere survives', hull='unit ball')

    A1 = quad_homogenize(-np.eye(c.size), c, r * r - c @ c)
    return build_cut(_unit_ball_instance(A1, tol=tol, name='ball-deletion', **options))


def _degenerate_concentric(instance, s, tol):
    report = ConditionReport(cond1=check_cond1(instance.A0, tol))
    report.warn(f'Degenerate concentric case: {DEGENERATE_CONCENTRIC}')
    As = sym_matrix(aggregate(instance.A0, instance.A1, s))
    return CutResult(s=s, T=np.array([s]), As=As, cone_s=None, xbar=None, report=report,
                     cone0=instance.cone0(), trivial=True, flags=[DEGENERATE_CONCENTRIC])


def concentric_ellipsoid_hull(E, r, tol=DEFAULT_TOL, **options):
    """Cut for the unit ball with the open ellipsoid y^T E y < r^2 removed

    The aggregation parameter has the closed form 1 / (1 + lambda_max(E)),
    which is cross-checked against the pencil computation.

    Raises:
        TrivialHull: lambda_max(E) < r^2, the ellipsoid covers the ball
    """
    E = sym_matrix(E)
    spectrum = sym_eigen(E)
    if spectrum.eigvals[0] <= 0:
        raise ValueError('E must be positive definite')
    if r <= 0:
        raise ValueError(f'radius must be positive, got {r}')

    lam_max = spectrum.eigvals[-1]
    band = tol * max(1.0, lam_max)
    if lam_max < r * r - band:
        raise TrivialHull('deleted ellipsoid covers the unit ball', hull='empty')

    A1 = quad_homogenize(-E, np.zeros(E.shape[0]), r * r)
    instance = _unit_ball_instance(A1, tol=tol, name='concentric-ellipsoid', **options)
    known_s = 1.0 / (1.0 + lam_max)
    if abs(lam_max - r * r) <= band:
        return _degenerate_concentric(instance, known_s, tol)
    return build_cut(instance, known_s=known_s)


def paraboloid_hull(Qt, g, f, tol=DEFAULT_TOL, **options):
    """Cut for the paraboloid ||y~||^2 <= y_n intersected with y~^T Q~ y~ + 2 g^T y + f <= 0

    Args:
        Qt ([ndarray]): Q~ of size m, lambda_min(Q~) < 0
        g ([ndarray]): (g~; g_n) of size m + 1 with 2 g_n <= -lambda_min(Q~)
        f ([float]): Constant term

    Raises:
        PreconditionUnmet: lambda_min(Q~) >= 0 or 2 g_n > -lambda_min(Q~)

    Returns:
        [CutResult]: Cut in R^(m+2), section x_(m+2) = 1
    """
    Qt = sym_matrix(Qt)
    g = np.asarray(g, dtype=float).ravel()
    m = Qt.shape[0]
    if g.size != m + 1:
        raise ValueError(f'g has size {g.size}, expecting {m + 1}')

    lam = sym_eigen(Qt).eigvals[0]
    if lam >= -tol * max(1.0, abs(lam)):
        raise PreconditionUnmet(f'lambda_min(Q~) = {lam:.6g} must be negative')
    if 2 * g[-1] > -lam + tol * max(1.0, abs(lam)):
        raise PreconditionUnmet(f'2 g_n = {2 * g[-1]:.6g} exceeds -lambda_min(Q~) = {-lam:.6g}')

    N = m + 2
    B0 = np.zeros((N, m + 1))
    B0[:m, :m] = np.eye(m)
    B0[m, m], B0[m + 1, m] = 0.5, -0.5
    b0 = np.zeros(N)
    b0[m] = b0[m + 1] = 0.5

    A1 = np.zeros((N, N))
    A1[:m, :m] = Qt
    A1[:m, m + 1] = A1[m + 1, :m] = g[:m]
    A1[m, m + 1] = A1[m + 1, m] = g[m]
    A1[m + 1, m + 1] = float(f)

    h = np.zeros(N)
    h[-1] = 1.0
    instance = ConeInstance(A1, B0=B0, b0=b0, h=h, tol=tol, hint=SectionHint(SectionKind.PARABOLOID),
                            name='paraboloid', **options)
    return build_cut(instance, known_s=1.0 / (1.0 - lam))


@dataclass
class TrsProblem:
    Qt: np.ndarray
    gt: np.ndarray

    def __post_init__(self):
        self.Qt = sym_matrix(self.Qt)
        self.gt = np.asarray(self.gt, dtype=float).ravel()
        if self.gt.size != self.Qt.shape[0]:
            raise ValueError(f'g~ has size {self.gt.size}, expecting {self.Qt.shape[0]}')

    @property
    def dim(self):
        return self.gt.size

    def objective(self, y):
        y = np.asarray(y, dtype=float)
        return float(y @ self.Qt @ y + 2 * self.gt @ y)


@dataclass
class TrsSolution:
    value: float
    y: np.ndarray
    l: float = None
    u: float = None
    s: float = None
    route: str = 'cut'
    lifted: np.ndarray = None
    certificates: dict = field(default_factory=dict)

    def to_dict(self):
        return {'value': self.value, 'y': None if self.y is None else self.y.tolist(), 'l': self.l, 'u': self.u,
                's': self.s, 's_display': None if self.s is None else snap_rational(self.s), 'route': self.route,
                'lifted': None if self.lifted is None else self.lifted.tolist(),
                'certificates': self.certificates}


@dataclass
class LiftedTrs:
    Q: np.ndarray
    g: np.ndarray
    basis: np.ndarray
    lam_min: float


def trs_lift(p):
    """Diagonalize Q~ and append a copy of lambda_min so it has multiplicity >= 2

    Eigenvalues come in ascending order, so the lambda_min coordinate of the
    eigenbasis is the first one and the appended coordinate is the last.

    Raises:
        PreconditionUnmet: Q~ is positive semidefinite, solve the convex problem instead
    """
    if not isinstance(p, TrsProblem):
        raise TypeError('expecting TrsProblem object')
    spectrum = sym_eigen(p.Qt)
    lam_min = float(spectrum.eigvals[0])
    if lam_min >= 0:
        raise PreconditionUnmet('Q~ is positive semidefinite: the trust-region problem is convex')
    Q = np.diag(np.append(spectrum.eigvals, lam_min))
    g = np.append(spectrum.eigvecs.T @ p.gt, 0.0)
    return LiftedTrs(Q, g, spectrum.eigvecs, lam_min)


def _secular_solution(lam, g_hat, tol):
    """Global minimizer of w^T diag(lam) w + 2 g_hat^T w over ||w|| <= 1 in the eigenbasis"""
    if lam[0] > 0:
        w = -g_hat / lam
        if w @ w <= 1.0:
            return w, 0.0

    def norm_excess(mu):
        return np.sum((g_hat / (lam + mu)) ** 2) - 1.0

    mu_low = max(0.0, -lam[0])
    lowest = np.abs(lam - lam[0]) <= tol * max(1.0, np.abs(lam).max())
    if np.all(np.abs(g_hat[lowest]) <= tol * max(1.0, np.linalg.norm(g_hat))):
        rest = ~lowest
        w = np.zeros_like(g_hat)
        w[rest] = -g_hat[rest] / (lam[rest] + mu_low)
        if w @ w <= 1.0:
            # hard case: fill up the lambda_min eigenspace to reach the sphere
            w[np.flatnonzero(lowest)[0]] = np.sqrt(1.0 - w @ w)
            return w, mu_low

    mu_high = mu_low + np.linalg.norm(g_hat) + 1.0
    start = mu_low + 1e-14 * max(1.0, mu_low)
    while norm_excess(start) < 0:
        start = mu_low + (start - mu_low) / 16
        if start == mu_low:
            break
    mu = scipy.optimize.brentq(norm_excess, start, mu_high, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return -g_hat / (lam + mu), mu


def solve_convex_trs(p, tol=DEFAULT_TOL):
    """Trust-region subproblem through the eigendecomposition and the secular equation"""
    spectrum = sym_eigen(p.Qt)
    w, mu = _secular_solution(spectrum.eigvals, spectrum.eigvecs.T @ p.gt, tol)
    y = spectrum.eigvecs @ w
    return TrsSolution(p.objective(y), y, route='secular', certificates={'mu': float(mu)})


def _recover_minimizer(lifted, instance, cut, x_star, tol):
    """Decompose the relaxation optimum onto F0+ ∩ F1 and undo the lifting"""
    n = lifted.g.size
    d = hyperplane_apex_witness(cut.As, instance.A1, instance.h, tol)
    if d is None:
        raise WitnessError('no apex direction of F_s+ inside H0')
    decomposition = hullcert.decompose_point(x_star, instance, cut, d, tol)

    def lifted_objective(x):
        y = x[:n] / x[n]
        return float(y @ lifted.Q @ y + 2 * lifted.g @ y)

    endpoint = min((decomposition.x_l, decomposition.x_u), key=lifted_objective)
    y_lifted = endpoint[:n] / endpoint[n]

    # fold the appended coordinate into the lambda_min coordinate, keeping ||w|| and not increasing the objective
    w = y_lifted[:-1].copy()
    g_hat = lifted.g[0]
    sign = -np.sign(g_hat) if g_hat != 0 else (np.sign(w[0]) or 1.0)
    w[0] = sign * np.hypot(w[0], y_lifted[-1])
    certificate = {'weight': decomposition.weight, 'eps': [decomposition.eps_l, decomposition.eps_u],
                   'trivial': decomposition.trivial, 'appended_coordinate': float(y_lifted[-1])}
    return lifted.basis @ w, np.append(w, 0.0), certificate


def trs_solve(p, tol=DEFAULT_TOL, seed=0, budget=DEFAULT_BUDGET):
    """min y~^T Q~ y~ + 2 g~^T y~ over the unit ball through the hull cut and two SOCP stages

    The lifted problem lives in R^(n+2) with x = (y, x_(n+1), x_(n+2)); on
    x_(n+1) = 1 the cut hull bounds x_(n+2)^2 by minus the objective, so the
    optimal value is min(-l^2, -u^2) for l, u the extreme values of x_(n+2).

    Args:
        p ([TrsProblem]): Problem data

    Returns:
        [TrsSolution]: Value, minimizer and staging data
    """
    if not isinstance(p, TrsProblem):
        raise TypeError('expecting TrsProblem object')
    if sym_eigen(p.Qt).eigvals[0] >= 0:
        logging.info('Q~ is positive semidefinite, solving the convex trust-region problem directly')
        return solve_convex_trs(p, tol)

    started = time.perf_counter()
    lifted = trs_lift(p)
    n = lifted.g.size
    N = n + 2

    A1 = np.zeros((N, N))
    A1[:n, :n] = lifted.Q
    A1[:n, n] = A1[n, :n] = lifted.g
    A1[n + 1, n + 1] = 1.0
    B0 = np.zeros((N, n))
    B0[:n, :n] = np.eye(n)
    b0 = np.zeros(N)
    b0[n] = 1.0
    h = b0.copy()
    instance = ConeInstance(A1, B0=B0, b0=b0, h=h, tol=tol, seed=seed, budget=budget, name='trs')
    cut = build_cut(instance)

    x0 = None
    if cut.xbar is not None and h @ cut.xbar > tol:
        x0 = cut.xbar / (h @ cut.xbar)
    e_last = np.zeros(N)
    e_last[-1] = 1.0
    stages = {}
    for name, sign in (('l', 1.0), ('u', -1.0)):
        problem = SocpProblem(sign * e_last, [cut.cone0, cut.cone_s], h)
        solution = solve(problem, x0=x0)
        if solution.status is SolveStatus.MAX_ITER and x0 is not None:
            logging.info(f'SOCP stage {name} ran out of Newton steps from x_bar, retrying from phase 1')
            solution = solve(problem)
        if solution.status is not SolveStatus.OPTIMAL:
            raise CutError(f'SOCP stage {name} ended with {solution.status.name}: {solution.message}')
        stages[name] = solution
    l, u = stages['l'].x[-1], stages['u'].x[-1]
    value = min(-l * l, -u * u)
    x_star = stages['l'].x if l * l >= u * u else stages['u'].x

    certificates = {'kkt_residual': [stages['l'].kkt_residual, stages['u'].kkt_residual]}
    try:
        y, w_lifted, certificates['decomposition'] = _recover_minimizer(lifted, instance, cut, x_star, tol)
        mismatch = abs(p.objective(y) - value)
        if mismatch > RECOVERY_TOL * max(1.0, abs(value)):
            logging.warning(f'Recovered minimizer misses the staged value by {mismatch:.3e}')
            certificates['objective_mismatch'] = mismatch
            y = None
    except CutError as e:
        logging.warning(f'Minimizer recovery failed: {e}')
        certificates['recovery_error'] = e.to_dict()
        y = None
    if y is None:
        # secular equation in the eigenbasis, the value stays the staged one
        w, mu = _secular_solution(np.diag(lifted.Q)[:-1], lifted.g[:-1], tol)
        certificates['recovery_fallback'] = {'route': 'secular', 'mu': float(mu)}
        w_lifted = np.append(w, 0.0)
        y = lifted.basis @ w

    elapsed = humanfriendly.format_timespan(time.perf_counter() - started, detailed=True)
    logging.info(f'TRS of size {p.dim}: value {value:.10g} (s = {snap_rational(cut.s, tol)}) in {elapsed}')
    return TrsSolution(float(value), y, float(l), float(u), cut.s, 'cut', w_lifted, certificates)
