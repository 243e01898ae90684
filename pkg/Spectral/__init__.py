import numpy as np
import scipy.linalg

from dataclasses import dataclass


# Relative zero tolerance, always scaled by max(1, spectral radius)
DEFAULT_TOL = 1e-9

# An eigenvalue of the pencil is real when |Im| <= IMAG_TOL * (1 + |Re|)
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class Inertia:
    n_neg: int
    n_zero: int
    n_pos: int

    @property
    def dim(self):
        return self.n_neg + self.n_zero + self.n_pos

    def as_tuple(self):
        return self.n_neg, self.n_zero, self.n_pos


@dataclass(frozen=True)
class Spectrum:
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def scale(self):
        """Zero tolerance scale: max(1, spectral radius)"""
        if self.eigvals.size == 0:
            return 1.0
        return max(1.0, float(np.max(np.abs(self.eigvals))))

    @property
    def min_pair(self):
        return float(self.eigvals[0]), self.eigvecs[:, 0]


def sym_matrix(S):
    """Validate and symmetrize a square matrix

    Args:
        S ([array_like]): Square real matrix

    Returns:
        [ndarray]: (S + S^T) / 2 as a fresh float array
    """
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f'expecting a square matrix, got shape {S.shape}')
    if not np.all(np.isfinite(S)):
        raise ValueError('matrix has non-finite entries')
    return (S + S.T) / 2


def aggregate(A0, A1, t):
    """A_t = (1 - t) A0 + t A1"""
    return (1 - t) * A0 + t * A1


def sym_eigen(S):
    """Dense symmetric eigendecomposition (LAPACK, deterministic)

    Args:
        S ([ndarray]): Symmetric matrix

    Returns:
        [Spectrum]: Ascending eigenvalues with orthonormal eigenvectors
    """
    S = sym_matrix(S)
    eigvals, eigvecs = scipy.linalg.eigh(S)
    return Spectrum(eigvals, eigvecs)


def spectral_scale(S):
    return sym_eigen(S).scale


def lambda_min(S):
    return float(scipy.linalg.eigh(sym_matrix(S), eigvals_only=True)[0])


def inertia(S, tol=DEFAULT_TOL):
    """Count negative, zero and positive eigenvalues

    Args:
        S ([ndarray]): Symmetric matrix
        tol ([float]): Relative zero tolerance

    Returns:
        [Inertia]: Eigenvalue sign counts
    """
    if tol <= 0:
        raise ValueError('tolerance must be positive')
    spectrum = sym_eigen(S)
    threshold = tol * spectrum.scale
    eigvals = spectrum.eigvals
    n_neg = int(np.count_nonzero(eigvals < -threshold))
    n_pos = int(np.count_nonzero(eigvals > threshold))
    return Inertia(n_neg, eigvals.size - n_neg - n_pos, n_pos)


def nullspace_basis(S, tol=DEFAULT_TOL):
    """Orthonormal basis of the numerical null space

    Args:
        S ([ndarray]): Symmetric matrix
        tol ([float]): Relative zero tolerance

    Returns:
        [ndarray]: n x k matrix, k = number of eigenvalues within tol * scale of zero
    """
    if tol <= 0:
        raise ValueError('tolerance must be positive')
    spectrum = sym_eigen(S)
    mask = np.abs(spectrum.eigvals) <= tol * spectrum.scale
    return spectrum.eigvecs[:, mask]


def pencil_eigs(A0, A1, tol=DEFAULT_TOL):
    """All finite eigenvalues of A0^-1 A1 (complex)"""
    A0, A1 = sym_matrix(A0), sym_matrix(A1)
    if A0.shape != A1.shape:
        raise ValueError(f'dimension mismatch {A0.shape} vs {A1.shape}')
    spectrum = sym_eigen(A0)
    if np.min(np.abs(spectrum.eigvals)) <= tol * spectrum.scale:
        raise ValueError('A0 is numerically singular')
    eigs = scipy.linalg.eigvals(A1, A0)
    return eigs[np.isfinite(eigs)]


def pencil_real_eigs(A0, A1, tol=DEFAULT_TOL):
    """Real eigenvalues of A0^-1 A1, multiplicities kept

    Solved as the generalized problem A1 v = e A0 v, which has the same
    spectrum and avoids forming the inverse.

    Args:
        A0 ([ndarray]): Nonsingular symmetric matrix
        A1 ([ndarray]): Symmetric matrix
        tol ([float]): Relative zero tolerance used for the singularity test

    Returns:
        [ndarray]: Ascending real eigenvalues
    """
    eigs = pencil_eigs(A0, A1, tol)
    real = np.abs(eigs.imag) <= IMAG_TOL * (1 + np.abs(eigs.real))
    return np.sort(eigs.real[real])


def restricted_form(S, Z):
    """Z^T S Z, symmetrized

    Args:
        S ([ndarray]): Symmetric n x n matrix
        Z ([ndarray]): n x k matrix with orthonormal columns

    Returns:
        [ndarray]: k x k symmetric matrix
    """
    S = np.asarray(S, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != S.shape[0]:
        raise ValueError(f'cannot restrict {S.shape} matrix to basis of shape {Z.shape}')
    M = Z.T @ S @ Z
    return (M + M.T) / 2


def orthogonal_complement(h):
    """Orthonormal basis (n x (n-1)) of the hyperplane h^T x = 0"""
    h = np.asarray(h, dtype=float).reshape(1, -1)
    if not np.any(h):
        raise ValueError('normal vector must be nonzero')
    return scipy.linalg.null_space(h)
