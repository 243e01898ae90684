import logging
import numpy as np
import scipy.linalg
import scipy.optimize

from enum import Enum, auto
from dataclasses import dataclass, field

from Spectral import DEFAULT_TOL, aggregate, sym_eigen, inertia, lambda_min, nullspace_basis, \
    restricted_form, orthogonal_complement, spectral_scale
from SOCr import quad_value, quad_values
from errors import DegenerateNumerics


DEFAULT_BUDGET = 2000

# t-grid used to seed the interior point search and to guard the dual sweep
T_GRID = np.linspace(0.0, 1.0, 17)

SUBGRADIENT_STEPS = 200


class Cond3Kind(Enum):
    NONSINGULAR = auto()
    POSDEF_ON_NULL = auto()
    NEGDEF_ON_NULL = auto()
    FAILS = auto()


class Status(Enum):
    NOT_APPLICABLE = auto()
    VERIFIED = auto()
    VIOLATED = auto()
    INDETERMINATE = auto()
    VERIFIED_APEX = auto()
    VERIFIED_CONTAINMENT = auto()
    FALSIFIED_BY_SAMPLE = auto()
    UNKNOWN = auto()
    HOLDS = auto()
    FAILS = auto()

    @property
    def failed(self):
        return self in (Status.VIOLATED, Status.FALSIFIED_BY_SAMPLE, Status.FAILS)

    @property
    def undecided(self):
        return self in (Status.INDETERMINATE, Status.UNKNOWN)


class SectionKind(Enum):
    ELLIPSOID = auto()
    PARABOLOID = auto()
    HYPERBOLOID = auto()
    BETA = auto()


@dataclass(frozen=True)
class SectionHint:
    """Known structure of the section K ∩ H that selects the Condition 5 strategy

    ``beta_holds`` is precomputed by the disjunction builders for HYPERBOLOID
    and BETA sections.
    """
    kind: SectionKind
    beta_holds: bool = None


@dataclass
class Cond3Variant:
    kind: Cond3Kind
    null_basis: np.ndarray
    restricted: np.ndarray = None


@dataclass
class Verdict:
    status: Status
    witness: np.ndarray = None
    detail: str = ''
    data: dict = field(default_factory=dict)

    def to_dict(self):
        result = {'status': self.status.name, 'detail': self.detail}
        if self.witness is not None:
            result['witness'] = np.asarray(self.witness).tolist()
        for key, value in self.data.items():
            result[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return result


@dataclass
class InteriorSearch:
    xbar: np.ndarray = None
    t_star: float = None
    lam_max: float = None

    @property
    def found(self):
        return self.xbar is not None

    @property
    def infeasible(self):
        return self.xbar is None and self.t_star is not None


@dataclass
class ConditionReport:
    cond1: bool = None
    cond2: np.ndarray = None
    cond2_certificate: float = None
    cond2_indeterminate: bool = False
    cond3: Cond3Variant = None
    cond4: Verdict = None
    cond5: Verdict = None
    cond6: Verdict = None
    warnings: list = field(default_factory=list)

    def verdicts(self):
        return [v for v in (self.cond4, self.cond5, self.cond6) if v is not None]

    def has_failure(self):
        if self.cond1 is False:
            return True
        if self.cond2_certificate is not None and self.cond2 is None:
            return True
        if self.cond3 is not None and self.cond3.kind is Cond3Kind.FAILS:
            return True
        return any(v.status.failed for v in self.verdicts())

    def has_undecided(self):
        return self.cond2_indeterminate or any(v.status.undecided for v in self.verdicts())

    def warn(self, message):
        logging.warning(message)
        self.warnings.append(message)

    def to_dict(self):
        result = {'cond1': self.cond1,
                  'cond2': None if self.cond2 is None else self.cond2.tolist(),
                  'cond2_certificate': self.cond2_certificate,
                  'cond2_indeterminate': self.cond2_indeterminate}
        if self.cond3 is not None:
            result['cond3'] = {'variant': self.cond3.kind.name,
                               'restricted': None if self.cond3.restricted is None
                               else self.cond3.restricted.tolist()}
        for name in ('cond4', 'cond5', 'cond6'):
            verdict = getattr(self, name)
            result[name] = None if verdict is None else verdict.to_dict()
        result['warnings'] = list(self.warnings)
        return result


def check_cond1(A0, tol=DEFAULT_TOL):
    """Exactly one negative and at least one positive eigenvalue"""
    counts = inertia(A0, tol)
    return counts.n_neg == 1 and counts.n_pos >= 1


def _interior_margin(A0, A1, x, scale, tol):
    x = x / np.linalg.norm(x)
    return max(quad_value(A0, x), quad_value(A1, x)) < -tol * scale


def _balanced_candidates(A0, A1, t):
    """Unit vectors in the negative eigenspace of A_t on which both forms agree

    At a maximizer t of lambda_min(A_t) the superdifferential contains zero, so
    some combination of the negative eigenvectors has x^T (A1 - A0) x = 0 and
    hence x^T A0 x = x^T A1 x = x^T A_t x < 0.
    """
    spectrum = sym_eigen(aggregate(A0, A1, t))
    lam = spectrum.eigvals[0]
    if lam >= 0:
        return []
    V = spectrum.eigvecs[:, spectrum.eigvals <= lam / 2]
    M = sym_eigen(restricted_form(A1 - A0, V))
    low, high = M.eigvecs[:, 0], M.eigvecs[:, -1]
    m_low, m_high = M.eigvals[0], M.eigvals[-1]

    candidates = [V @ M.eigvecs[:, np.argmin(np.abs(M.eigvals))]]
    if m_low < 0 < m_high:
        # cos^2 m_high + sin^2 m_low = 0
        theta = np.arctan(np.sqrt(m_high / -m_low))
        candidates.append(V @ (np.cos(theta) * high + np.sin(theta) * low))
    return candidates


def _descend(A0, A1, x, scale):
    """Projected subgradient descent on max(x^T A0 x, x^T A1 x) over the unit sphere"""
    x = x / np.linalg.norm(x)
    best_x, best_value = x, max(quad_value(A0, x), quad_value(A1, x))
    for k in range(SUBGRADIENT_STEPS):
        values = quad_value(A0, x), quad_value(A1, x)
        A = A0 if values[0] >= values[1] else A1
        step = 0.5 / (scale * np.sqrt(k + 1))
        x = x - step * 2 * (A @ x)
        x /= np.linalg.norm(x)
        value = max(quad_value(A0, x), quad_value(A1, x))
        if value < best_value:
            best_x, best_value = x, value
    return best_x, best_value


def find_interior_point(A0, A1, budget=DEFAULT_BUDGET, seed=0, tol=DEFAULT_TOL):
    """Search x with x^T A0 x < 0 and x^T A1 x < 0

    Dual sweep first: t -> lambda_min(A_t) is concave, and when its maximum on
    [0, 1] is nonnegative the PSD combination certifies that no such x exists.
    Otherwise candidates are extracted from the eigenspaces of A_t and refined
    by projected subgradient descent.

    Args:
        A0 ([ndarray]): Symmetric matrix
        A1 ([ndarray]): Symmetric matrix
        budget ([int]): Number of random starts added to the eigenvector seeds
        seed ([int]): Random seed
        tol ([float]): Relative zero tolerance

    Returns:
        [InteriorSearch]: Unit-norm x_bar, or the certificate t*, or neither (indeterminate)
    """
    scale = max(spectral_scale(A0), spectral_scale(A1))

    result = scipy.optimize.minimize_scalar(lambda t: -lambda_min(aggregate(A0, A1, t)),
                                            bounds=(0.0, 1.0), method='bounded',
                                            options={'xatol': 1e-12})
    probes = [(float(result.x), -float(result.fun))]
    probes += [(float(t), lambda_min(aggregate(A0, A1, t))) for t in T_GRID]
    t_star, lam_max = max(probes, key=lambda probe: probe[1])

    if lam_max >= -tol * scale:
        logging.debug(f'Dual sweep: lambda_min(A_t) = {lam_max:.3e} at t* = {t_star:.6f}, infeasible')
        return InteriorSearch(t_star=t_star, lam_max=lam_max)

    seeds = _balanced_candidates(A0, A1, t_star)
    for t in T_GRID:
        seeds.append(sym_eigen(aggregate(A0, A1, t)).eigvecs[:, 0])
    rng = np.random.default_rng(seed)
    n = A0.shape[0]
    seeds.extend(rng.standard_normal((max(1, budget // 100), n)))

    seeds = [x / np.linalg.norm(x) for x in seeds if np.any(x)]
    scored = [(x, max(quad_value(A0, x), quad_value(A1, x)), index) for index, x in enumerate(seeds)]
    if not any(_interior_margin(A0, A1, x, scale, tol) for x in seeds):
        scored = [(*_descend(A0, A1, x, scale), index) for index, x in enumerate(seeds)]
    best = min(scored, key=lambda item: (item[1], item[2]), default=None)

    if best is not None and best[1] < -tol * scale:
        logging.debug(f'Interior point found from seed {best[2]} with margin {best[1]:.3e}')
        return InteriorSearch(xbar=best[0], t_star=None, lam_max=lam_max)

    logging.warning(f'Interior point search exhausted its budget (max lambda_min = {lam_max:.3e})')
    return InteriorSearch(lam_max=lam_max)


def check_cond3(A0, A1, tol=DEFAULT_TOL):
    """Classify A0's null space: nonsingular, A1 positive definite on it, negative definite, or fails"""
    Z0 = nullspace_basis(A0, tol)
    if Z0.shape[1] == 0:
        return Cond3Variant(Cond3Kind.NONSINGULAR, Z0)

    M = restricted_form(A1, Z0)
    counts = inertia(M, tol)
    if counts.n_pos == counts.dim:
        kind = Cond3Kind.POSDEF_ON_NULL
    elif counts.n_neg == counts.dim:
        kind = Cond3Kind.NEGDEF_ON_NULL
    else:
        kind = Cond3Kind.FAILS
    return Cond3Variant(kind, Z0, M)


def check_cond4(As, A1, s, tol=DEFAULT_TOL):
    """Search apex(F_s+) for a direction strictly inside F1

    Args:
        As ([ndarray]): Aggregated matrix A_s
        A1 ([ndarray]): Quadratic of F1
        s ([float]): Aggregation parameter
        tol ([float]): Relative zero tolerance

    Returns:
        [Verdict]: NOT_APPLICABLE, VERIFIED with witness d, VIOLATED or INDETERMINATE
    """
    if abs(s - 1.0) <= tol:
        return Verdict(Status.NOT_APPLICABLE, detail='s = 1')

    Zs = nullspace_basis(As, tol)
    if Zs.shape[1] == 0:
        raise DegenerateNumerics(f'A_s is nonsingular at s = {s}')

    scale = spectral_scale(A1)
    M = restricted_form(A1, Zs)
    spectrum = sym_eigen(M)
    lam, v = spectrum.min_pair
    if lam < -tol * scale:
        d = Zs @ v
        return Verdict(Status.VERIFIED, witness=d / np.linalg.norm(d),
                       detail=f'd^T A1 d = {lam:.6g}')
    if np.max(np.abs(M)) <= tol * scale:
        return Verdict(Status.VIOLATED, detail='A1 vanishes on Null(A_s)', data={'restricted': M})
    return Verdict(Status.INDETERMINATE, detail=f'lambda_min(Z_s^T A1 Z_s) = {lam:.3e}',
                   data={'restricted': M})


def hyperplane_apex_witness(As, A1, h, tol=DEFAULT_TOL):
    """Direction d in Null(A_s) with h^T d = 0 and d^T A1 d < 0, or None"""
    Zs = nullspace_basis(As, tol)
    if Zs.shape[1] == 0:
        return None
    hz = Zs.T @ np.asarray(h, dtype=float)
    if np.linalg.norm(hz) <= tol * np.linalg.norm(h):
        W = Zs
    else:
        W = Zs @ scipy.linalg.null_space(hz.reshape(1, -1))
    if W.shape[1] == 0:
        return None

    lam, v = sym_eigen(restricted_form(A1, W)).min_pair
    if lam < -tol * spectral_scale(A1):
        d = W @ v
        return d / np.linalg.norm(d)
    return None


def _containment(A0, A1, h, s, cone0, hint, tol):
    """Recognized structures where F0+ ∩ F_s+ ∩ H0 ⊆ F1 holds

    Returns:
        [tuple]: (verified, reason, counterexample)
    """
    if hint is not None and hint.kind in (SectionKind.HYPERBOLOID, SectionKind.BETA) and hint.beta_holds:
        return True, 'beta-sufficiency holds', None

    W = orthogonal_complement(h)
    restricted = restricted_form(A0, W)
    counts = inertia(restricted, tol)
    if counts.n_pos == counts.dim:
        return True, 'bounded section: F0+ ∩ H0 = {0}', None

    if counts.n_neg == 0 and counts.n_zero == 1:
        ray = W @ nullspace_basis(restricted, tol)[:, 0]
        if cone0 is not None and cone0.b @ ray < 0:
            ray = -ray
        if s > tol:
            return True, 'single recession ray of F0+ ∩ H0, contained since s > 0', None
        value = quad_value(A1, ray)
        if value <= tol * spectral_scale(A1):
            return True, 'single recession ray of F0+ ∩ H0 lies in F1', None
        return False, 'recession ray leaves F1', ray

    return False, '', None


def _falsify(A1, h, cone0, cone_s, budget, seed, tol):
    W = orthogonal_complement(h)
    rng = np.random.default_rng(seed)
    restricted = sym_eigen(restricted_form(cone0.A, W))
    X = np.vstack([restricted.eigvecs.T @ W.T, rng.standard_normal((budget, W.shape[1])) @ W.T])
    X = np.vstack([X, -X])
    X /= np.linalg.norm(X, axis=1, keepdims=True)

    band = tol * cone0.scale
    inside = cone0.slacks(X) >= -band
    if cone_s is not None:
        inside &= cone_s.slacks(X) >= -tol * cone_s.scale
    values = quad_values(A1, X)
    offending = np.flatnonzero(inside & (values > tol * spectral_scale(A1)))
    if offending.size:
        return X[offending[np.argmax(values[offending])]]
    return None


def check_cond5(As, A1, A0, h, s, structure_hint=None, cone0=None, cone_s=None,
                budget=DEFAULT_BUDGET, seed=0, tol=DEFAULT_TOL):
    """Condition 5: apex branch, recognized containment, or sampling falsification

    Args:
        As ([ndarray]): Aggregated matrix A_s
        A1 ([ndarray]): Quadratic of F1
        A0 ([ndarray]): Quadratic of F0
        h ([ndarray]): Hyperplane normal
        s ([float]): Aggregation parameter
        structure_hint ([SectionHint], optional): Known section structure
        cone0 ([SocrCone], optional): Oriented F0+, needed for sampling
        cone_s ([SocrCone], optional): Oriented F_s+, None for a trivial cut
        budget ([int]): Number of sampled directions
        seed ([int]): Random seed
        tol ([float]): Relative zero tolerance

    Returns:
        [Verdict]: Condition 5 verdict
    """
    h = np.asarray(h, dtype=float)
    if not np.any(h):
        raise ValueError('hyperplane normal must be nonzero')
    if abs(s - 1.0) <= tol:
        return Verdict(Status.NOT_APPLICABLE, detail='s = 1')

    containment_first = structure_hint is not None and structure_hint.kind is SectionKind.ELLIPSOID
    counterexample = None
    for branch in (('containment', 'apex') if containment_first else ('apex', 'containment')):
        if branch == 'apex':
            d = hyperplane_apex_witness(As, A1, h, tol)
            if d is not None:
                return Verdict(Status.VERIFIED_APEX, witness=d, detail='apex direction inside H0 and int(F1)')
        else:
            verified, reason, counterexample = _containment(A0, A1, h, s, cone0, structure_hint, tol)
            if verified:
                return Verdict(Status.VERIFIED_CONTAINMENT, detail=reason)

    if counterexample is None and cone0 is not None:
        counterexample = _falsify(A1, h, cone0, cone_s, budget, seed, tol)
    if counterexample is not None:
        return Verdict(Status.FALSIFIED_BY_SAMPLE, witness=counterexample,
                       detail=f'x^T A1 x = {quad_value(A1, counterexample):.6g} > 0 on F0+ ∩ F_s+ ∩ H0')
    return Verdict(Status.UNKNOWN, detail='no recognized structure and no counterexample found')


def _is_split(c1, c2, tol):
    norm = c1 @ c1
    if norm == 0:
        return None
    alpha = -(c1 @ c2) / norm
    if alpha <= 0 or np.linalg.norm(c2 + alpha * c1) > tol * max(1.0, np.linalg.norm(c2)):
        return None
    return alpha


def _interior_point_with_value(c, value):
    """Point of int(K) with c^T x = value, K the standard second-order cone"""
    n = c.size
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    candidates = [e_n]
    tilde = c[:-1]
    if np.any(tilde):
        direction = np.append(0.9 * tilde / np.linalg.norm(tilde), 0.0)
        candidates += [e_n + direction, e_n - direction]
    slopes = [c @ w for w in candidates]

    if value == 0:
        positive = [(w, sl) for w, sl in zip(candidates, slopes) if sl > 0]
        negative = [(w, sl) for w, sl in zip(candidates, slopes) if sl < 0]
        if not positive or not negative:
            return None
        (wp, sp), (wn, sn) = positive[0], negative[0]
        return -sn * wp + sp * wn
    for w, slope in zip(candidates, slopes):
        if slope * value > 0:
            return (value / slope) * w
    return None


def _split_cond6(c1, d1, d2, alpha, tol):
    lo, hi = d1, -d2 / alpha
    tilde, last = np.linalg.norm(c1[:-1]), c1[-1]
    if tilde <= last:
        reach = (0.0, np.inf)
    elif tilde <= -last:
        reach = (-np.inf, 0.0)
    else:
        reach = (-np.inf, np.inf)

    a, b = max(lo, reach[0]), min(hi, reach[1])
    if b - a <= tol * max(1.0, abs(a), abs(b)):
        return Verdict(Status.HOLDS, detail='split pieces meet at most on their boundaries',
                       data={'alpha': alpha})
    if np.isinf(a) and np.isinf(b):
        value = 0.0
    elif np.isinf(a):
        value = b - 1.0
    elif np.isinf(b):
        value = a + 1.0
    else:
        value = (a + b) / 2
    x = _interior_point_with_value(c1, value)
    if x is None:
        return Verdict(Status.UNKNOWN, detail='could not build an interior witness')
    return Verdict(Status.FAILS, witness=x, detail='split pieces overlap in int(K)', data={'alpha': alpha})


def check_cond6(n, c1, d1, c2, d2, budget=DEFAULT_BUDGET, seed=0, h=None, tol=DEFAULT_TOL):
    """Condition 6: the two disjunctive pieces of K meet only on their boundaries

    With h given the test runs on the section K ∩ H1. Split disjunctions on K
    get an exact interval test; otherwise min(c1^T x - d1, c2^T x - d2,
    x_n - ||x~||) is maximized from several starts, and a positive value is a
    witness of failure.

    Args:
        n ([int]): Dimension of K
        c1, c2 ([ndarray]): Normals of the disjunction terms
        d1, d2 ([float]): Right-hand sides
        budget ([int]): Controls the number of starts
        seed ([int]): Random seed
        h ([ndarray], optional): Hyperplane normal of the section

    Returns:
        [Verdict]: HOLDS, FAILS with witness, or UNKNOWN
    """
    c1, c2 = np.asarray(c1, dtype=float), np.asarray(c2, dtype=float)
    if c1.size != n or c2.size != n:
        raise ValueError(f'disjunction normals must have size {n}')

    if h is None:
        alpha = _is_split(c1, c2, tol)
        if alpha is not None:
            return _split_cond6(c1, d1, d2, alpha, tol)

    radius = 10.0

    def objective(y):
        return -y[-1]

    constraints = [
        {'type': 'ineq', 'fun': lambda y: c1 @ y[:n] - d1 - y[-1]},
        {'type': 'ineq', 'fun': lambda y: c2 @ y[:n] - d2 - y[-1]},
        {'type': 'ineq', 'fun': lambda y: y[n - 1] - np.sqrt(y[:n - 1] @ y[:n - 1] + 1e-16) - y[-1]},
    ]
    if h is not None:
        h = np.asarray(h, dtype=float)
        constraints.append({'type': 'eq', 'fun': lambda y: h @ y[:n] - 1.0})
    bounds = [(-radius, radius)] * n + [(-radius, 1.0)]

    rng = np.random.default_rng(seed)
    best = None
    for start in range(max(4, budget // 200)):
        x0 = rng.standard_normal(n)
        x0[-1] = np.linalg.norm(x0[:-1]) + 1.0
        y0 = np.append(x0, -1.0)
        with np.errstate(all='ignore'):
            result = scipy.optimize.minimize(objective, y0, method='SLSQP', bounds=bounds,
                                             constraints=constraints, options={'maxiter': 200})
        x, u = result.x[:n], result.x[-1]
        slack = min(c1 @ x - d1, c2 @ x - d2, x[-1] - np.linalg.norm(x[:-1]))
        if h is not None and abs(h @ x - 1.0) > 1e-9:
            continue
        if best is None or slack > best[1]:
            best = (x, slack, start)

    if best is not None and best[1] > tol:
        return Verdict(Status.FAILS, witness=best[0],
                       detail=f'both terms strictly satisfied in int(K) (margin {best[1]:.3g})')
    return Verdict(Status.UNKNOWN, detail='no overlapping interior point found')
