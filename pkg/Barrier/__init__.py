import logging
import numpy as np
import scipy.linalg

from enum import Enum, auto
from dataclasses import dataclass, field


MU_0 = 1.0
SIGMA = 0.2
ARMIJO = 1e-4
BACKTRACK = 0.5
MAX_NEWTON_STEPS = 200
GAP_TOL = 1e-8
DIVERGENCE_NORM = 1e8

# Centering stops when half the squared Newton decrement falls below this
CENTERING_TOL = 1e-12
# Looser decrement accepted once a centering has used up its Newton steps
RELAXED_CENTERING_TOL = 1e-6

MIN_STEP = 1e-20


class SolveStatus(Enum):
    OPTIMAL = auto()
    INFEASIBLE = auto()
    UNBOUNDED = auto()
    MAX_ITER = auto()


@dataclass
class PathResult:
    status: SolveStatus
    z: np.ndarray
    value: float
    t: float
    newton_steps: int
    history: list = field(default_factory=list)
    message: str = ''


class PathFollowing:
    """Barrier path-following for min c(z) subject to a self-concordant barrier domain

    Subclasses provide the objective, the barrier with its derivatives, the
    barrier parameter and the map back to the original space. The central
    path is followed with damped Newton steps and a fixed mu-reduction.
    """

    def __init__(self, mu0=MU_0, sigma=SIGMA, armijo=ARMIJO, backtrack=BACKTRACK,
                 max_newton_steps=MAX_NEWTON_STEPS, gap_tol=GAP_TOL, divergence_norm=DIVERGENCE_NORM):
        self.mu0 = mu0
        self.sigma = sigma
        self.armijo = armijo
        self.backtrack = backtrack
        self.max_newton_steps = max_newton_steps
        self.gap_tol = gap_tol
        self.divergence_norm = divergence_norm

    def objective(self, z):
        """Linear objective

        Args:
            z ([ndarray]): Reduced variables

        Returns:
            [tuple]: (value, gradient)
        """
        raise NotImplementedError

    def barrier(self, z):
        """Barrier value, gradient and Hessian

        Args:
            z ([ndarray]): Reduced variables

        Returns:
            [tuple]: (value, gradient, hessian), or None outside the domain
        """
        raise NotImplementedError

    def complexity(self):
        """Barrier parameter: the duality gap on the central path is complexity / t"""
        raise NotImplementedError

    def point(self, z):
        """Map reduced variables back to the original space"""
        raise NotImplementedError

    def should_stop(self, z):
        return False

    def minimize(self, z0, t0=None):
        """Follow the central path from a strictly feasible z0

        The Newton step limit applies to each centering separately.

        Args:
            z0 ([ndarray]): Point in the barrier domain
            t0 ([float], optional): Path parameter to resume from. Defaults to 1 / mu0.

        Returns:
            [PathResult]: Final iterate and status
        """
        z = np.asarray(z0, dtype=float).copy()
        if self.barrier(z) is None:
            raise ValueError('starting point is not strictly feasible')

        t = 1.0 / self.mu0 if t0 is None else float(t0)
        total = 0
        history = []
        while True:
            z, steps, status = self._center(z, t)
            total += steps
            value = self.objective(z)[0]
            history.append(value)

            if status is not None:
                return PathResult(status, z, value, t, total, history, self._status_message(status, history))
            if self.should_stop(z):
                return PathResult(SolveStatus.OPTIMAL, z, value, t, total, history, 'stopping condition met')
            if self.complexity() / t <= self.gap_tol:
                logging.debug(f'Path following converged in {total} Newton steps (gap {self.complexity() / t:.1e})')
                return PathResult(SolveStatus.OPTIMAL, z, value, t, total, history)
            t /= self.sigma

    def _status_message(self, status, history):
        if status is SolveStatus.UNBOUNDED:
            return f'iterate norm exceeded {self.divergence_norm:g}'
        if status is SolveStatus.MAX_ITER:
            return f'Newton step limit {self.max_newton_steps} reached in one centering'
        return ''

    def _merit(self, z, t):
        barrier = self.barrier(z)
        if barrier is None:
            return None
        value, gradient = self.objective(z)
        return t * value + barrier[0], t * gradient + barrier[1], barrier[2]

    def _center(self, z, t):
        start_value = self.objective(z)[0]
        steps = 0
        while True:
            merit, gradient, hessian = self._merit(z, t)
            direction = self._newton_direction(gradient, hessian)
            decrement = -gradient @ direction
            if decrement / 2 <= CENTERING_TOL:
                return z, steps, None
            if steps >= self.max_newton_steps:
                if decrement / 2 <= RELAXED_CENTERING_TOL:
                    logging.debug(f'Accepting centering with decrement {decrement:.1e} after {steps} Newton steps')
                    return z, steps, None
                return z, steps, SolveStatus.MAX_ITER

            alpha = 1.0
            while True:
                candidate = z + alpha * direction
                trial = self._merit(candidate, t)
                if trial is not None and trial[0] <= merit - self.armijo * alpha * decrement:
                    break
                alpha *= self.backtrack
                if alpha < MIN_STEP:
                    logging.debug(f'Line search stalled after {steps} Newton steps')
                    return z, steps, None
            z = candidate
            steps += 1

            if np.linalg.norm(self.point(z)) > self.divergence_norm:
                if self.objective(z)[0] < start_value:
                    return z, steps, SolveStatus.UNBOUNDED
                return z, steps, SolveStatus.MAX_ITER

    @staticmethod
    def _newton_direction(gradient, hessian):
        try:
            factor = scipy.linalg.cho_factor(hessian)
            return -scipy.linalg.cho_solve(factor, gradient)
        except (np.linalg.LinAlgError, ValueError):
            return -np.linalg.lstsq(hessian, gradient, rcond=None)[0]
