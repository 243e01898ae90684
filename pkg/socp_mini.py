import logging
import numpy as np

from dataclasses import dataclass, field

from Barrier import PathFollowing, SolveStatus
from SOCr import SocrCone
from Spectral import DEFAULT_TOL, orthogonal_complement


# Phase 1 keeps iterates inside a box of this radius around the hyperplane foot point
PHASE1_BOX = 1e4

MAX_RESTARTS = 3


@dataclass
class SocpProblem:
    c: np.ndarray
    cones: list
    h: np.ndarray
    linears: list = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.h = np.asarray(self.h, dtype=float).ravel()
        if not self.cones:
            raise ValueError('expecting at least one cone')
        n = self.c.size
        if self.h.size != n or any(cone.dim != n for cone in self.cones):
            raise ValueError('objective, hyperplane and cones must share one dimension')
        self.linears = [(np.asarray(a, dtype=float).ravel(), float(beta)) for a, beta in self.linears]
        if any(a.size != n for a, _ in self.linears):
            raise ValueError(f'linear constraints must have size {n}')

    @property
    def dim(self):
        return self.c.size


@dataclass
class SocpSolution:
    status: SolveStatus
    x: np.ndarray
    value: float
    kkt_residual: float
    newton_steps: int = 0
    message: str = ''


class SocpBarrier(PathFollowing):
    """Logarithmic barrier of SOCr cones and halfspaces on the slice h^T x = 1

    x = x_p + N z with N an orthonormal basis of h^perp, so the Newton systems
    stay small and positive definite.
    """

    def __init__(self, problem, **kwargs):
        super().__init__(**kwargs)
        self.problem = problem
        self.N = orthogonal_complement(problem.h)
        self.x_p = problem.h / (problem.h @ problem.h)
        self.c_z = self.N.T @ problem.c
        self.stop_rule = None

    def point(self, z):
        return self.x_p + self.N @ z

    def reduce(self, x):
        return self.N.T @ (np.asarray(x, dtype=float) - self.x_p)

    def objective(self, z):
        return float(self.problem.c @ self.point(z)), self.c_z

    def complexity(self):
        return 2 * len(self.problem.cones) + len(self.problem.linears)

    def barrier(self, z):
        x = self.point(z)
        n = x.size
        value, gradient, hessian = 0.0, np.zeros(n), np.zeros((n, n))
        for cone in self.problem.cones:
            if cone.b @ x <= 0:
                return None
            Ax = cone.A @ x
            f = -(x @ Ax)
            if f <= 0:
                return None
            value -= np.log(f)
            gradient += 2 * Ax / f
            hessian += 2 * cone.A / f + 4 * np.outer(Ax, Ax) / f ** 2
        for a, beta in self.problem.linears:
            r = a @ x - beta
            if r <= 0:
                return None
            value -= np.log(r)
            gradient -= a / r
            hessian += np.outer(a, a) / r ** 2
        return value, self.N.T @ gradient, self.N.T @ hessian @ self.N

    def should_stop(self, z):
        return self.stop_rule is not None and self.stop_rule(self.point(z))

    def kkt_residual(self, z, t):
        _, gradient, _ = self.barrier(z)
        return float(np.linalg.norm(self.c_z + gradient / t) / (1 + np.linalg.norm(self.c_z)))


def strictly_feasible(problem, x, tol=DEFAULT_TOL):
    x = np.asarray(x, dtype=float)
    if abs(problem.h @ x - 1) > 1e-10 * max(1.0, np.linalg.norm(x)):
        return False
    if any(cone.slack(x) <= tol * cone.scale * max(1.0, np.linalg.norm(x)) for cone in problem.cones):
        return False
    return all(a @ x - beta > 0 for a, beta in problem.linears)


def _augment(cone):
    B = np.vstack([cone.B, np.zeros((1, cone.B.shape[1]))])
    return SocrCone(B, np.append(cone.b, 1.0), allow_halfspace=cone.is_halfspace)


def phase_one(problem):
    """Strictly feasible point via min sigma s.t. ||B_i^T x|| <= b_i^T x + sigma on H1

    Returns:
        [ndarray]: Strictly feasible x, or None when sigma cannot go negative
    """
    n = problem.dim
    x_p = problem.h / (problem.h @ problem.h)
    sigma0 = 1.0 + max([-cone.slack(x_p) for cone in problem.cones] +
                       [beta - a @ x_p for a, beta in problem.linears] + [0.0])

    e_sigma = np.zeros(n + 1)
    e_sigma[-1] = 1.0
    box = PHASE1_BOX * (1 + np.linalg.norm(x_p))
    linears = [(e_sigma, -1.0)]
    linears += [(np.append(a, 1.0), beta) for a, beta in problem.linears]
    for i in range(n):
        unit = np.zeros(n + 1)
        unit[i] = 1.0
        linears += [(unit, x_p[i] - box), (-unit, -x_p[i] - box)]

    auxiliary = SocpProblem(e_sigma, [_augment(cone) for cone in problem.cones], np.append(problem.h, 0.0),
                            linears)
    solver = SocpBarrier(auxiliary)
    solver.stop_rule = lambda y: y[-1] < -1e-6
    result = solver.minimize(solver.reduce(np.append(x_p, sigma0)))
    y = solver.point(result.z)
    logging.debug(f'Phase 1 finished with sigma = {y[-1]:.3e} after {result.newton_steps} Newton steps')
    if y[-1] < 0 and strictly_feasible(problem, y[:-1]):
        return y[:-1]
    return None


def solve(problem, x0=None, restarts=MAX_RESTARTS, **options):
    """Minimize c^T x over the cones, the linear inequalities and h^T x = 1

    A path that runs out of Newton steps is resumed from its last iterate
    with twice the step limit, up to `restarts` times.

    Args:
        problem ([SocpProblem]): Problem data
        x0 ([ndarray], optional): Strictly feasible start, e.g. a rescaled x_bar. Defaults to None.
        restarts ([int], optional): Warm restarts after MAX_ITER. Defaults to MAX_RESTARTS.
        options: Keyword arguments for SocpBarrier, e.g. max_newton_steps

    Returns:
        [SocpSolution]: Status, minimizer, value and KKT residual
    """
    if x0 is not None and not strictly_feasible(problem, x0):
        logging.debug('Provided start is not strictly feasible, running phase 1')
        x0 = None
    if x0 is None:
        x0 = phase_one(problem)
        if x0 is None:
            return SocpSolution(SolveStatus.INFEASIBLE, None, np.nan, np.nan, message='no strictly feasible point')

    solver = SocpBarrier(problem, **options)
    result = solver.minimize(solver.reduce(x0))
    steps = result.newton_steps
    for attempt in range(restarts):
        if result.status is not SolveStatus.MAX_ITER or solver.barrier(result.z) is None:
            break
        solver.max_newton_steps *= 2
        logging.debug(f'Warm restart {attempt + 1} at t = {result.t:.3e} with {solver.max_newton_steps} Newton steps')
        result = solver.minimize(result.z, t0=result.t)
        steps += result.newton_steps

    x = solver.point(result.z)
    residual = solver.kkt_residual(result.z, result.t)
    if result.status is not SolveStatus.OPTIMAL:
        logging.warning(f'SOCP solve ended with {result.status.name}: {result.message}')
    return SocpSolution(result.status, x, float(problem.c @ x), residual, steps, result.message)
