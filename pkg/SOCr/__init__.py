import numpy as np

from enum import Enum, auto
from dataclasses import dataclass

from Spectral import DEFAULT_TOL, sym_matrix, sym_eigen, inertia


class Region(Enum):
    INTERIOR_PLUS = auto()
    BOUNDARY_PLUS = auto()
    APEX = auto()
    INTERIOR_MINUS = auto()
    BOUNDARY_MINUS = auto()
    OUTSIDE = auto()

    @property
    def is_plus(self):
        return self in (Region.INTERIOR_PLUS, Region.BOUNDARY_PLUS, Region.APEX)

    @property
    def is_minus(self):
        return self in (Region.INTERIOR_MINUS, Region.BOUNDARY_MINUS, Region.APEX)


@dataclass(frozen=True)
class ConeMembership:
    region: Region
    slack: float


def quad_value(A, x):
    """x^T A x accumulated in double precision"""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.shape != (x.size, x.size):
        raise ValueError(f'dimension mismatch {A.shape} vs vector of size {x.size}')
    return float(x @ A @ x)


def quad_values(A, X):
    """Row-wise x^T A x for a batch of points"""
    X = np.atleast_2d(X)
    return np.einsum('ij,jk,ik->i', X, A, X)


class SocrCone:
    """Second-order-cone representable set {x : ||B^T x|| <= b^T x}

    The negative branch {x : ||B^T x|| <= -b^T x} shares A = B B^T - b b^T.
    """

    def __init__(self, B, b, orientation=None, tol=DEFAULT_TOL, allow_halfspace=False):
        B = np.array(B, dtype=float)
        b = np.array(b, dtype=float).ravel()
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.shape[0] != b.size:
            raise ValueError(f'B has {B.shape[0]} rows but b has size {b.size}')
        if B.shape[1] > b.size - 1:
            raise ValueError(f'B must have at most {b.size - 1} columns')
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(b))):
            raise ValueError('cone data has non-finite entries')

        nonzero = B[:, np.linalg.norm(B, axis=0) > 0]
        if not np.any(b):
            raise ValueError('b must be nonzero')
        if nonzero.shape[1] == 0:
            # B = 0 degenerates the plus branch to the halfspace b^T x >= 0
            if not allow_halfspace:
                raise ValueError('B is identically zero')
        else:
            rank_B = np.linalg.matrix_rank(nonzero, tol=tol * max(1.0, np.abs(nonzero).max()))
            if rank_B < nonzero.shape[1]:
                raise ValueError('nonzero columns of B are linearly dependent')
            stacked = np.column_stack([nonzero, b])
            if np.linalg.matrix_rank(stacked, tol=tol * max(1.0, np.abs(stacked).max())) != rank_B + 1:
                raise ValueError('b lies in Range(B)')
        self.is_halfspace = nonzero.shape[1] == 0

        self._B = B
        self._b = b
        self._A = sym_matrix(B @ B.T - np.outer(b, b))
        self.orientation = None if orientation is None else np.asarray(orientation, dtype=float)
        self._scale = sym_eigen(self._A).scale

    @property
    def B(self):
        return self._B

    @property
    def b(self):
        return self._b

    @property
    def A(self):
        return self._A

    @property
    def dim(self):
        return self._b.size

    @property
    def scale(self):
        return self._scale

    def slack(self, x):
        x = np.asarray(x, dtype=float)
        return float(self._b @ x - np.linalg.norm(self._B.T @ x))

    def slacks(self, X):
        X = np.atleast_2d(X)
        return X @ self._b - np.linalg.norm(X @ self._B, axis=1)

    def contains(self, x, tol=DEFAULT_TOL):
        return membership(self, x, tol).region.is_plus

    def band(self, x, tol=DEFAULT_TOL):
        return tol * self._scale * max(1.0, float(np.linalg.norm(x)))

    def flipped(self):
        return SocrCone(self._B, -self._b, orientation=self.orientation, allow_halfspace=self.is_halfspace)

    def __repr__(self):
        return f'SocrCone(dim={self.dim}, b={np.array2string(self._b, precision=6)})'


def socr_from_Bb(B, b, tol=DEFAULT_TOL):
    """Build a cone from explicit (B, b) data

    Args:
        B ([ndarray]): n x k matrix, k <= n - 1, zero columns allowed
        b ([ndarray]): n-vector outside Range(B)

    Returns:
        [SocrCone]: Validated cone with cached A = B B^T - b b^T
    """
    return SocrCone(B, b, tol=tol)


def socr_from_A(A, orient=None, tol=DEFAULT_TOL):
    """Recover (B, b) from a symmetric matrix with exactly one negative eigenvalue

    Columns of B are sqrt(lambda_j) q_j over the nonnegative eigenvalues and
    b = sqrt(-lambda_1) q_1. Given an orientation point x_bar the sign of b is
    chosen so that b^T x_bar >= 0, otherwise the largest-magnitude entry of b
    is made positive.

    Args:
        A ([ndarray]): Symmetric matrix
        orient ([ndarray], optional): Orientation point x_bar. Defaults to None.
        tol ([float]): Relative zero tolerance

    Returns:
        [SocrCone]: Cone whose plus branch contains x_bar
    """
    A = sym_matrix(A)
    counts = inertia(A, tol)
    if counts.n_neg != 1 or counts.n_pos < 1:
        raise ValueError(f'expecting exactly one negative and at least one positive eigenvalue, '
                         f'got inertia {counts.as_tuple()}')

    spectrum = sym_eigen(A)
    threshold = tol * spectrum.scale
    lambdas = spectrum.eigvals[1:].copy()
    lambdas[lambdas <= threshold] = 0.0
    B = spectrum.eigvecs[:, 1:] * np.sqrt(lambdas)
    b = np.sqrt(-spectrum.eigvals[0]) * spectrum.eigvecs[:, 0]

    if orient is not None:
        orient = np.asarray(orient, dtype=float)
        if b @ orient < 0:
            b = -b
    elif b[np.argmax(np.abs(b))] < 0:
        b = -b

    return SocrCone(B, b, orientation=orient, tol=tol)


def membership(cone, x, tol=DEFAULT_TOL):
    """Classify a point against the plus and minus branches

    Args:
        cone ([SocrCone]): Cone
        x ([ndarray]): Point of matching dimension
        tol ([float]): Relative tolerance

    Returns:
        [ConeMembership]: Region and slack b^T x - ||B^T x||
    """
    x = np.asarray(x, dtype=float)
    if x.size != cone.dim:
        raise ValueError(f'expecting a vector of size {cone.dim}, got {x.size}')

    norm_Bx = float(np.linalg.norm(cone.B.T @ x))
    bx = float(cone.b @ x)
    band = cone.band(x, tol)
    slack = bx - norm_Bx

    if norm_Bx <= band and abs(bx) <= band:
        region = Region.APEX
    elif slack > band:
        region = Region.INTERIOR_PLUS
    elif slack >= -band:
        region = Region.BOUNDARY_PLUS
    elif -bx - norm_Bx > band:
        region = Region.INTERIOR_MINUS
    elif -bx - norm_Bx >= -band:
        region = Region.BOUNDARY_MINUS
    else:
        region = Region.OUTSIDE
    return ConeMembership(region, slack)


def second_order_cone(n):
    """Standard Lorentz cone ||x[:-1]|| <= x[-1] in R^n"""
    B = np.vstack([np.eye(n - 1), np.zeros((1, n - 1))])
    b = np.zeros(n)
    b[-1] = 1.0
    return SocrCone(B, b)


def lorentz_matrix(n):
    """J = diag(1, ..., 1, -1)"""
    J = np.eye(n)
    J[-1, -1] = -1.0
    return J


def halfspace_from_A(A, orient=None, tol=DEFAULT_TOL):
    """Plus branch of a matrix with one negative and no positive eigenvalue

    A = -b b^T up to the zero band, so F+ is the halfspace b^T x >= 0.
    """
    A = sym_matrix(A)
    counts = inertia(A, tol)
    if counts.n_neg != 1 or counts.n_pos != 0:
        raise ValueError(f'expecting inertia (1, n - 1, 0), got {counts.as_tuple()}')
    spectrum = sym_eigen(A)
    b = np.sqrt(-spectrum.eigvals[0]) * spectrum.eigvecs[:, 0]
    if orient is not None:
        orient = np.asarray(orient, dtype=float)
        if b @ orient < 0:
            b = -b
    elif b[np.argmax(np.abs(b))] < 0:
        b = -b
    B = np.zeros((b.size, b.size - 1))
    return SocrCone(B, b, orientation=orient, tol=tol, allow_halfspace=True)
