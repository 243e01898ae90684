import logging
import numpy as np

from enum import Enum
from dataclasses import dataclass, field

from Spectral import DEFAULT_TOL, nullspace_basis, spectral_scale
from SOCr import quad_value, quad_values, membership
from conditions import hyperplane_apex_witness, find_interior_point
from errors import WitnessError, HullExactnessFailure
from workers import WorkType, run_tasks


CHUNK_SIZE = 256

# Rays are truncated at this multiple of the center norm in unbounded directions
RAY_CAP = 10.0

MAX_BATCHES = 64

RECONSTRUCTION_TOL = 1e-7

MAX_REPORTED_FAILURES = 20


class SampleSet(Enum):
    F0F1 = 'F0F1'
    F0FS = 'F0Fs'
    F0FSH1 = 'F0FsH1'
    F0F1H1 = 'F0F1H1'
    FSH1 = 'FsH1'

    @property
    def on_section(self):
        return self in (SampleSet.F0FSH1, SampleSet.F0F1H1, SampleSet.FSH1)

    @property
    def uses_cut(self):
        return self in (SampleSet.F0FS, SampleSet.F0FSH1, SampleSet.FSH1)


@dataclass
class Decomposition:
    x_l: np.ndarray
    x_u: np.ndarray
    eps_l: float
    eps_u: float
    weight: float
    trivial: bool = False
    heuristic: bool = False
    crossings: list = field(default_factory=list)

    def reconstruct(self):
        return self.weight * self.x_l + (1 - self.weight) * self.x_u


def _band(scale, x, tol):
    return tol * scale * max(1.0, float(x @ x))


def decompose_point(x, instance, cut, d, tol=DEFAULT_TOL):
    """Write x in F0+ ∩ F_s+ as a convex combination of two points of F0+ ∩ F1

    Moving along an apex direction d of F_s+ with d^T A1 d < 0, the quadratic
    (x + eps d)^T A1 (x + eps d) has one negative and one positive root; the
    corresponding points are the endpoints.

    Args:
        x ([ndarray]): Point of F0+ ∩ F_s+
        instance ([ConeInstance]): Problem data
        cut ([CutResult]): Cut whose apex contains d
        d ([ndarray]): Condition 4 witness
        tol ([float]): Relative tolerance

    Raises:
        WitnessError: d^T A1 d is not negative
        HullExactnessFailure: an endpoint falls outside F0+

    Returns:
        [Decomposition]: Endpoints, roots and weight
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    A1 = instance.A1
    scale1 = spectral_scale(A1)

    q = quad_value(A1, x)
    if q <= _band(scale1, x, tol):
        return Decomposition(x.copy(), x.copy(), 0.0, 0.0, 1.0, trivial=True)

    dd = quad_value(A1, d)
    if dd >= -tol * scale1 * float(d @ d):
        raise WitnessError(f'witness has d^T A1 d = {dd:.3e}, expecting a negative value')

    dx = float(d @ A1 @ x)
    discriminant = max(dx * dx - q * dd, 0.0)
    root = np.sqrt(discriminant)
    # stable pair of roots of dd eps^2 + 2 dx eps + q
    pivot = -(dx + np.copysign(root, dx))
    roots = sorted((pivot / dd, q / pivot))
    eps_l, eps_u = roots
    x_l, x_u = x + eps_l * d, x + eps_u * d

    for endpoint in (x_l, x_u):
        if not membership(cut.cone0, endpoint, tol).region.is_plus:
            raise HullExactnessFailure('decomposition endpoint left F0+', point=endpoint.tolist())

    return Decomposition(x_l, x_u, eps_l, eps_u, eps_u / (eps_u - eps_l))


def _crossing_check(x, decomposition, instance, cut, tol):
    """Renormalize endpoints onto H1, routing those with h^T x_j < 0 through H0

    For such an endpoint the positive combination y = (h^T x) x_j - (h^T x_j) x
    lies in F0+ ∩ H0; the certificate needs y in F1 as well.
    """
    h, A1 = instance.h, instance.A1
    scale1 = spectral_scale(A1)
    hx = float(h @ x)
    for endpoint in (decomposition.x_l, decomposition.x_u):
        h_end = float(h @ endpoint)
        if h_end >= -tol * max(1.0, np.linalg.norm(endpoint)):
            continue
        y = hx * endpoint - h_end * x
        decomposition.crossings.append(y)
        decomposition.heuristic = True
        if quad_value(A1, y) > _band(scale1, y, tol) or not membership(cut.cone0, y, tol).region.is_plus:
            return False
    return True


def _exit_times(cone, c, U, cap):
    """Largest step along c + tau u staying in the plus branch, capped"""
    if cone.is_halfspace:
        bc, bu = cone.b @ c, U @ cone.b
        with np.errstate(divide='ignore', invalid='ignore'):
            tau = np.where(bu < 0, -bc / bu, np.inf)
        return np.minimum(tau, cap)

    A = cone.A
    a = np.einsum('ij,jk,ik->i', U, A, U)
    beta = U @ (A @ c)
    gamma = float(c @ A @ c)
    tau = np.full(len(U), np.inf)
    with np.errstate(divide='ignore', invalid='ignore'):
        discriminant = beta ** 2 - a * gamma
        root = np.sqrt(np.maximum(discriminant, 0.0))
        for candidate in ((-beta - root) / a, (-beta + root) / a):
            valid = (discriminant >= 0) & (a != 0) & (candidate > 0)
            tau = np.where(valid, np.minimum(tau, candidate), tau)
        linear = -gamma / (2 * beta)
        tau = np.where((a == 0) & (beta > 0), np.minimum(tau, linear), tau)
    return np.minimum(tau, cap)


def _quadratic_roots(A, c, U, upper):
    """Points where c + tau u crosses x^T A x = 0 with 0 < tau < upper"""
    a = np.einsum('ij,jk,ik->i', U, A, U)
    beta = U @ (A @ c)
    gamma = float(c @ A @ c)
    hits = []
    with np.errstate(divide='ignore', invalid='ignore'):
        discriminant = beta ** 2 - a * gamma
        root = np.sqrt(np.maximum(discriminant, 0.0))
        for candidate in ((-beta - root) / a, (-beta + root) / a):
            valid = (discriminant >= 0) & (a != 0) & (candidate > 0) & (candidate < upper)
            hits.append(c + candidate[valid, None] * U[valid])
    return np.vstack(hits) if hits else np.empty((0, c.size))


def _directions(rng, size, dim, h, extra):
    U = rng.standard_normal((size, dim))
    if extra is not None and len(extra):
        U = np.vstack([extra, U])[:size]
    if h is not None:
        U = U - np.outer(U @ h, h) / (h @ h)
    norms = np.linalg.norm(U, axis=1)
    U = U[norms > 1e-12]
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _sample_chunk(which, instance, cut, center, n, seed_sequence, tol):
    rng = np.random.default_rng(seed_sequence)
    h = instance.h if which.on_section else None
    cap = RAY_CAP * max(1.0, float(np.linalg.norm(center)))

    cones = []
    if which is not SampleSet.FSH1:
        cones.append(cut.cone0 if cut is not None else instance.cone0(orient=center))
    if which.uses_cut:
        cones.append(cut.cone_s)

    extra = None
    if cut is not None and not which.on_section:
        apex = nullspace_basis(cut.As, tol).T
        extra = np.vstack([apex, -apex]) if apex.size else None

    points = []
    total = 0
    for batch in range(MAX_BATCHES):
        if total >= n:
            break
        U = _directions(rng, max(n, 16), instance.dim, h, extra if batch == 0 else None)
        upper = np.min([_exit_times(cone, center, U, cap) for cone in cones], axis=0)

        if which in (SampleSet.F0F1, SampleSet.F0F1H1):
            tau = upper * rng.random(len(U))
            candidates = np.vstack([center + tau[:, None] * U,
                                    center + upper[:, None] * U,
                                    _quadratic_roots(instance.A1, center, U, upper)])
        else:
            boundary = rng.random(len(U)) < 0.25
            tau = np.where(boundary, upper, upper * rng.random(len(U)) ** (1.0 / instance.dim))
            candidates = center + tau[:, None] * U

        keep = _inside(which, instance, cut, cones, candidates, tol)
        accepted = candidates[keep]
        points.append(accepted)
        total += len(accepted)

    points = np.vstack(points) if points else np.empty((0, instance.dim))
    if len(points) > n:
        points = points[rng.permutation(len(points))[:n]]
    return points


def _inside(which, instance, cut, cones, X, tol):
    keep = np.ones(len(X), dtype=bool)
    norms = np.maximum(1.0, np.einsum('ij,ij->i', X, X))
    for cone in cones:
        keep &= cone.slacks(X) >= -tol * cone.scale * np.sqrt(norms)
    if which in (SampleSet.F0F1, SampleSet.F0F1H1):
        keep &= quad_values(instance.A1, X) <= tol * spectral_scale(instance.A1) * norms
    return keep


def _center(instance, cut, which, tol):
    if cut is not None:
        xbar = cut.xbar
    else:
        search = find_interior_point(instance.A0, instance.A1, instance.budget, instance.seed, tol)
        if not search.found:
            raise ValueError('set looks empty: no interior point of F0+ ∩ F1')
        cone0 = instance.cone0()
        xbar = search.xbar if cone0.b @ search.xbar >= 0 else -search.xbar

    if not which.on_section:
        return xbar / np.linalg.norm(xbar)

    h = instance.h
    if h is None:
        raise ValueError(f'{which.value} needs a hyperplane h')
    if h @ xbar > tol * np.linalg.norm(xbar):
        return xbar / (h @ xbar)

    rng = np.random.default_rng(instance.seed)
    cones = [cut.cone0 if cut is not None else instance.cone0(orient=xbar)]
    if cut is not None:
        cones.append(cut.cone_s)
    for _ in range(instance.budget):
        x = xbar + 0.5 * rng.standard_normal(xbar.size)
        if h @ x <= tol:
            continue
        x = x / (h @ x)
        inside = all(cone.slack(x) > tol * cone.scale for cone in cones)
        if inside and quad_value(instance.A1, x) < 0:
            return x
    raise ValueError('set looks empty: no interior point on H1 within budget')


def sample_set(instance, which, n, seed=0, cut=None, manager=None, tol=DEFAULT_TOL):
    """Sample points of F0+ ∩ F1, F0+ ∩ F_s+ or F_s+, optionally on H1

    Rays leave an interior center in random directions (plus apex directions
    of F_s+); convex sets mix interior and boundary points, F1 sets add the
    crossings of the F1 boundary.

    Args:
        instance ([ConeInstance]): Problem data
        which ([SampleSet]): Requested set
        n ([int]): Number of points
        seed ([int]): Random seed
        cut ([CutResult], optional): Needed when the set references F_s
        manager ([WorkerManager], optional): Samples chunks in parallel

    Returns:
        [ndarray]: n x dim array of points
    """
    which = SampleSet(which)
    if n <= 0:
        return np.empty((0, instance.dim))
    if which.uses_cut and cut is None:
        raise ValueError(f'{which.value} needs a cut')

    center = _center(instance, cut, which, tol)
    sizes = [CHUNK_SIZE] * (n // CHUNK_SIZE) + ([n % CHUNK_SIZE] if n % CHUNK_SIZE else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    tasks = [(which, instance, cut, center, size, chunk_seed, tol) for size, chunk_seed in zip(sizes, seeds)]
    chunks = run_tasks(manager, WorkType.SAMPLE, _sample_chunk, tasks)

    points = np.vstack(chunks)
    if len(points) == 0:
        raise ValueError(f'set {which.value} looks empty after the sampling budget')
    if len(points) < n:
        logging.warning(f'Sampled {len(points)}/{n} points of {which.value}')
    return points


def _certify_chunk(instance, cut, d, crossing, X, offset, tol):
    certified, heuristic, failures = 0, 0, []
    for i, x in enumerate(X):
        try:
            decomposition = decompose_point(x, instance, cut, d, tol)
            error = np.linalg.norm(decomposition.reconstruct() - x)
            if error > RECONSTRUCTION_TOL * max(1.0, np.linalg.norm(x)):
                raise HullExactnessFailure(f'reconstruction error {error:.3e}')
            if crossing and not decomposition.trivial and not _crossing_check(x, decomposition, instance, cut, tol):
                failures.append({'index': offset + i, 'point': x.tolist(),
                                 'reason': 'H0 crossing point lies outside F1'})
                continue
        except HullExactnessFailure as e:
            failures.append({'index': offset + i, 'point': x.tolist(), 'reason': str(e)})
            continue
        certified += 1
        heuristic += decomposition.heuristic
    return certified, heuristic, failures


def certify_hull(instance, cut, n_samples=1000, seed=0, manager=None, tol=DEFAULT_TOL):
    """Decompose sampled points of F0+ ∩ F_s+ [∩ H1] onto F0+ ∩ F1

    Without a hyperplane the Condition 4 witness is used. On H1 an apex
    direction inside H0 keeps endpoints on the section; otherwise the H0
    crossing route is taken and successes are flagged as heuristic.

    Args:
        instance ([ConeInstance]): Problem data
        cut ([CutResult]): Cut to certify
        n_samples ([int]): Number of sampled points
        seed ([int]): Random seed
        manager ([WorkerManager], optional): Certifies chunks in parallel

    Raises:
        WitnessError: no usable witness

    Returns:
        [dict]: n_samples, n_certified, n_failed, n_heuristic, mode, failures
    """
    crossing = False
    if instance.h is None:
        d, which, mode = cut.witness, SampleSet.F0FS, 'apex'
        if d is None:
            raise WitnessError('Condition 4 witness missing: hull certification needs one')
    else:
        which = SampleSet.F0FSH1
        d, mode = hyperplane_apex_witness(cut.As, instance.A1, instance.h, tol), 'apex-on-H0'
        if d is None:
            d, crossing, mode = cut.witness, True, 'heuristic-crossing'
            if d is None:
                raise WitnessError('Condition 4 witness missing: hull certification needs one')
            logging.warning('No apex witness inside H0: certifying through H0 crossings (heuristic certificate)')

    X = sample_set(instance, which, n_samples, seed, cut=cut, manager=manager, tol=tol)
    tasks = [(instance, cut, d, crossing, X[i:i + CHUNK_SIZE], i, tol) for i in range(0, len(X), CHUNK_SIZE)]
    results = run_tasks(manager, WorkType.CERTIFY, _certify_chunk, tasks)

    certified = sum(result[0] for result in results)
    heuristic = sum(result[1] for result in results)
    failures = [failure for result in results for failure in result[2]]
    if failures:
        logging.warning(f'Hull certification: {len(failures)}/{len(X)} sampled points failed')

    return {'n_samples': len(X), 'n_certified': certified, 'n_failed': len(failures),
            'n_heuristic': heuristic, 'mode': mode, 'witness': np.asarray(d).tolist(),
            'failures': failures[:MAX_REPORTED_FAILURES]}
