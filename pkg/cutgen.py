import time
import logging
import numpy as np
import scipy.optimize
import humanfriendly

from fractions import Fraction
from dataclasses import dataclass, field

from Spectral import DEFAULT_TOL, sym_matrix, aggregate, inertia, sym_eigen, pencil_eigs, \
    pencil_real_eigs
from SOCr import socr_from_A, socr_from_Bb, halfspace_from_A, membership
from conditions import DEFAULT_BUDGET, Cond3Kind, Status, ConditionReport, check_cond1, \
    find_interior_point, check_cond3, check_cond4, check_cond5
from errors import Cond1Failed, Cond2Infeasible, Cond2Indeterminate, Cond3Failed, \
    DegenerateNumerics, PreconditionUnmet
import hullcert


EPSILON_LADDER = [2.0 ** -k for k in range(4, 41)]

# Closed-form s is trusted when it agrees with the pencil computation; defective
# pencils only resolve s to about the square root of machine precision
KNOWN_S_TOL = 1e-6

# Complex pencil eigenvalues this close to the real axis are kept when A_t is
# numerically singular there (defective double roots split into complex pairs)
NEAR_REAL_TOL = 1e-5

# Half width of the bracket searched around a pencil root when polishing it
POLISH_WINDOW = 1e-6

DEFAULT_SAMPLES = 1000


@dataclass
class ConeInstance:
    A1: np.ndarray
    A0: np.ndarray = None
    B0: np.ndarray = None
    b0: np.ndarray = None
    h: np.ndarray = None
    tol: float = DEFAULT_TOL
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    samples: int = DEFAULT_SAMPLES
    hint: object = None
    name: str = ''
    cond6: object = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.A1 = sym_matrix(self.A1)
        if self.B0 is not None and self.b0 is not None:
            cone = socr_from_Bb(self.B0, self.b0, tol=self.tol)
            self.B0, self.b0 = cone.B, cone.b
            if self.A0 is not None and not np.allclose(sym_matrix(self.A0), cone.A, atol=1e-10):
                raise ValueError('A0 disagrees with B0 B0^T - b0 b0^T')
            self.A0 = cone.A
        elif self.A0 is None:
            raise ValueError('expecting A0 or the pair (B0, b0)')
        self.A0 = sym_matrix(self.A0)
        if self.A0.shape != self.A1.shape:
            raise ValueError(f'dimension mismatch: A0 {self.A0.shape}, A1 {self.A1.shape}')
        if self.h is not None:
            self.h = np.asarray(self.h, dtype=float).ravel()
            if self.h.size != self.dim or not np.any(self.h):
                raise ValueError(f'h must be a nonzero vector of size {self.dim}')

    @property
    def dim(self):
        return self.A0.shape[0]

    def cone0(self, orient=None):
        """Oriented F0+; explicit (B0, b0) data fixes the orientation"""
        if self.b0 is not None:
            return socr_from_Bb(self.B0, self.b0, tol=self.tol)
        return socr_from_A(self.A0, orient=orient, tol=self.tol)


@dataclass
class CutResult:
    s: float
    T: np.ndarray
    As: np.ndarray
    cone_s: object
    xbar: np.ndarray
    report: ConditionReport
    cone0: object
    epsilon_used: float = None
    trivial: bool = False
    flags: list = field(default_factory=list)

    def contains(self, x, tol=DEFAULT_TOL):
        """Membership in F0+ ∩ F_s+"""
        if self.cone_s is None:
            raise ValueError(f"no cut cone: {'; '.join(self.flags)}")
        return self.cone0.contains(x, tol) and self.cone_s.contains(x, tol)

    @property
    def witness(self):
        if self.report.cond4 is not None and self.report.cond4.status is Status.VERIFIED:
            return self.report.cond4.witness
        return None

    def describe(self):
        if self.cone_s is None:
            return self.flags[0] if self.flags else ''
        return describe_cone(self.cone_s, self.As)

    def to_dict(self):
        return {
            's': self.s,
            's_display': snap_rational(self.s),
            'T': np.asarray(self.T).tolist(),
            'As': self.As.tolist(),
            'Bs': None if self.cone_s is None else self.cone_s.B.tolist(),
            'bs': None if self.cone_s is None else self.cone_s.b.tolist(),
            'xbar': None if self.xbar is None else self.xbar.tolist(),
            'epsilon_used': self.epsilon_used,
            'trivial': self.trivial,
            'inequality': self.describe(),
            'flags': list(self.flags),
            'report': self.report.to_dict(),
        }


def snap_rational(value, tol=DEFAULT_TOL, max_denominator=8):
    """Render value as k/d (d <= 8) when within tol, otherwise as a float string"""
    fraction = Fraction(value).limit_denominator(max_denominator)
    if abs(float(fraction) - value) <= tol:
        return str(fraction)
    return repr(value)


def _linear_form(v, tol=1e-12):
    text = ''
    for i, coefficient in enumerate(v):
        if abs(coefficient) <= tol * max(1.0, np.abs(v).max()):
            continue
        magnitude = abs(coefficient)
        term = f'x{i + 1}' if np.isclose(magnitude, 1.0) else f'{magnitude:.6g} x{i + 1}'
        if not text:
            text = f'-{term}' if coefficient < 0 else term
        else:
            text += f' - {term}' if coefficient < 0 else f' + {term}'
    return text or '0'


def describe_cone(cone, A=None):
    """Human-readable form of the plus branch

    Diagonal matrices render as a norm inequality, e.g. '‖(x2;x4)‖ ≤ x3'.
    """
    A = cone.A if A is None else A
    if cone.is_halfspace:
        return f'{_linear_form(cone.b)} ≥ 0'

    if np.allclose(A, np.diag(np.diag(A)), atol=1e-12):
        diagonal = np.diag(A)
        band = DEFAULT_TOL * max(1.0, np.abs(diagonal).max())
        negative = int(np.argmin(diagonal))
        weight = np.sqrt(-diagonal[negative])
        sign = '' if cone.b[negative] > 0 else '-'
        parts = []
        for i in np.flatnonzero(diagonal > band):
            ratio = np.sqrt(diagonal[i]) / weight
            parts.append(f'x{i + 1}' if np.isclose(ratio, 1.0) else f'{ratio:.6g} x{i + 1}')
        return f'‖({";".join(parts)})‖ ≤ {sign}x{negative + 1}'
    return f'x^T A x ≤ 0, {_linear_form(cone.b)} ≥ 0'


def epsilon_probe(A0, A1, tol=DEFAULT_TOL):
    """First epsilon on the 2^-4 ... 2^-40 ladder with A_eps nonsingular and one negative eigenvalue"""
    variant = check_cond3(A0, A1, tol)
    if variant.kind is not Cond3Kind.POSDEF_ON_NULL:
        raise PreconditionUnmet(f'epsilon shift needs A1 positive definite on Null(A0), got {variant.kind.name}')
    for epsilon in EPSILON_LADDER:
        counts = inertia(aggregate(A0, A1, epsilon), tol)
        if counts.n_zero == 0 and counts.n_neg == 1:
            return epsilon
    raise DegenerateNumerics('epsilon ladder exhausted')


def _singularity_parameters(A0, A1, tol):
    scale = sym_eigen(A0).scale
    eigs = pencil_eigs(A0, A1, tol)
    real = list(pencil_real_eigs(A0, A1, tol))
    # defective real roots come back as tight complex pairs; keep one copy of each when A_t is singular
    for e in eigs[np.abs(eigs.imag) > 0]:
        if abs(e.imag) <= NEAR_REAL_TOL * (1 + abs(e.real)) and e.imag > 0 and abs(1 - e.real) > tol:
            t = 1.0 / (1.0 - e.real)
            if np.min(np.abs(sym_eigen(aggregate(A0, A1, t)).eigvals)) <= 1e-6 * scale:
                real.append(e.real)

    T = [1.0 / (1.0 - e) for e in real if abs(1.0 - e) > tol * max(1.0, abs(e))]
    return T


def _merge(values, tol):
    merged = []
    for value in sorted(values):
        if not merged or value - merged[-1] > 10 * tol:
            merged.append(value)
    return np.array(merged)


def _polish(A0, A1, t):
    """Refine a tangential singularity of A_t

    There the eigenvalue nearest zero touches zero without crossing, so the
    pencil only resolves t to about sqrt(machine precision). Its slope
    v^T (A1 - A0) v changes sign instead and has a simple root.
    """
    D = A1 - A0

    def slope(u):
        spectrum = sym_eigen(aggregate(A0, A1, u))
        v = spectrum.eigvecs[:, np.argmin(np.abs(spectrum.eigvals))]
        return float(v @ D @ v)

    width = POLISH_WINDOW * max(1.0, abs(t))
    low, high = slope(t - width), slope(t + width)
    if low * high >= 0:
        return t
    return float(scipy.optimize.brentq(slope, t - width, t + width, xtol=1e-16))


def _compute_T(A0, A1, variant, tol):
    if variant.kind is Cond3Kind.NONSINGULAR:
        T, epsilon = _singularity_parameters(A0, A1, tol), None
    elif variant.kind is Cond3Kind.POSDEF_ON_NULL:
        epsilon = epsilon_probe(A0, A1, tol)
        T_bar = _singularity_parameters(aggregate(A0, A1, epsilon), A1, tol)
        T = [(1 - epsilon) * t + epsilon for t in T_bar]
    else:
        raise PreconditionUnmet(f'singularity parameters undefined for Condition 3 variant {variant.kind.name}')
    T = [_polish(A0, A1, t) if tol < t <= 1 + tol else t for t in T]
    return _merge(T, tol), epsilon


def compute_T(A0, A1, variant, tol=DEFAULT_TOL):
    """Ascending parameters t at which A_t = (1 - t) A0 + t A1 is singular

    Args:
        A0 ([ndarray]): Quadratic of F0
        A1 ([ndarray]): Quadratic of F1
        variant ([Cond3Variant]): NONSINGULAR or POSDEF_ON_NULL

    Returns:
        [ndarray]: Merged singularity parameters
    """
    return _compute_T(A0, A1, variant, tol)[0]


def compute_s(T, variant, tol=DEFAULT_TOL):
    if variant.kind is Cond3Kind.NEGDEF_ON_NULL:
        return 0.0
    T = np.asarray(T, dtype=float)
    window = T[(T > tol) & (T <= 1.0 + tol)]
    if window.size == 0:
        return 1.0
    return float(min(window.min(), 1.0))


def build_cut(instance, known_s=None):
    """Calculate the aggregation cut F_s+ for F0+ ∩ F1 [∩ H1]

    Runs the Condition 1-3 gate, computes s and A_s, orients the cut with the
    interior point x_bar and evaluates Conditions 4 and 5.

    Args:
        instance ([ConeInstance]): Problem data
        known_s ([float], optional): Closed-form s, cross-checked against the pencil. Defaults to None.

    Raises:
        Cond1Failed, Cond2Infeasible, Cond2Indeterminate, Cond3Failed, DegenerateNumerics

    Returns:
        [CutResult]: Cut with its condition report
    """
    started = time.perf_counter()
    A0, A1, tol = instance.A0, instance.A1, instance.tol
    report = ConditionReport(cond6=instance.cond6, warnings=list(instance.notes))

    report.cond1 = check_cond1(A0, tol)
    if not report.cond1:
        raise Cond1Failed(f'A0 has inertia {inertia(A0, tol).as_tuple()}', report=report)

    search = find_interior_point(A0, A1, instance.budget, instance.seed, tol)
    if search.infeasible:
        report.cond2_certificate = search.t_star
        raise Cond2Infeasible(f'lambda_min(A_t) >= 0 at t* = {search.t_star:.6g}', report=report,
                              t_star=search.t_star)
    if not search.found:
        report.cond2_indeterminate = True
        raise Cond2Indeterminate('no interior point found within budget', report=report)

    cone0 = instance.cone0()
    xbar = search.xbar if cone0.b @ search.xbar >= 0 else -search.xbar
    if instance.b0 is None:
        cone0 = instance.cone0(orient=xbar)
    report.cond2 = xbar

    report.cond3 = check_cond3(A0, A1, tol)
    if report.cond3.kind is Cond3Kind.FAILS:
        raise Cond3Failed('A1 is neither positive nor negative definite on Null(A0)', report=report)

    epsilon = None
    if report.cond3.kind is Cond3Kind.NEGDEF_ON_NULL:
        T = np.array([])
    else:
        T, epsilon = _compute_T(A0, A1, report.cond3, tol)
    s = compute_s(T, report.cond3, tol)

    flags = []
    if known_s is not None:
        if abs(known_s - s) <= KNOWN_S_TOL:
            s = float(known_s)
            flags.append('closed-form s')
        else:
            report.warn(f'closed-form s = {known_s:.12g} disagrees with pencil s = {s:.12g}; keeping the latter')

    As = sym_matrix(aggregate(A0, A1, s))
    counts = inertia(As, tol)
    if counts.n_neg != 1:
        raise DegenerateNumerics(f'A_s has inertia {counts.as_tuple()} at s = {s:.12g}', report=report)

    trivial = counts.n_pos == 0
    if trivial:
        cone_s = halfspace_from_A(As, orient=xbar, tol=tol)
        flags.append('F_s is the whole space; its plus branch is the halfspace b_s^T x >= 0')
    else:
        cone_s = socr_from_A(As, orient=xbar, tol=tol)

    report.cond4 = check_cond4(As, A1, s, tol)
    if report.cond4.status is Status.VIOLATED:
        report.warn('Condition 4 violated: the cut is valid but hull exactness is not guaranteed')
    elif report.cond4.status is Status.INDETERMINATE:
        report.warn('Condition 4 indeterminate: the cut is reported without an exactness claim')

    if instance.h is not None:
        report.cond5 = check_cond5(As, A1, A0, instance.h, s, instance.hint, cone0, cone_s,
                                   instance.budget, instance.seed, tol)
        if report.cond5.status in (Status.UNKNOWN, Status.FALSIFIED_BY_SAMPLE):
            report.warn(f'Condition 5 {report.cond5.status.name.lower()}: the section hull may be larger than the cut')

    elapsed = humanfriendly.format_timespan(time.perf_counter() - started, detailed=True)
    logging.info(f'Cut {instance.name or "instance"}: s = {snap_rational(s, tol)}, '
                 f'inertia(A_s) = {counts.as_tuple()}, computed in {elapsed}')

    return CutResult(s=s, T=T, As=As, cone_s=cone_s, xbar=xbar, report=report, cone0=cone0,
                     epsilon_used=epsilon, trivial=trivial, flags=flags)


def validate_cut(instance, cut, n_samples=10000, seed=0, manager=None):
    """Count sampled points of F0+ ∩ F1 that violate the cut

    Args:
        instance ([ConeInstance]): Problem data
        cut ([CutResult]): Cut to validate
        n_samples ([int]): Number of sampled points
        seed ([int]): Random seed
        manager ([WorkerManager], optional): Runs sampling chunks in parallel

    Returns:
        [dict]: {'n_samples', 'n_violations', 'worst_slack'}
    """
    X = hullcert.sample_set(instance, hullcert.SampleSet.F0F1, n_samples, seed, cut=cut, manager=manager)
    if len(X) == 0:
        return {'n_samples': 0, 'n_violations': 0, 'worst_slack': None}
    slacks = cut.cone_s.slacks(X)
    bands = DEFAULT_TOL * cut.cone_s.scale * np.maximum(1.0, np.linalg.norm(X, axis=1))
    violations = int(np.count_nonzero(slacks < -bands))
    if violations:
        logging.warning(f'{violations}/{len(X)} sampled points of F0+ ∩ F1 violate the cut')
    return {'n_samples': len(X), 'n_violations': violations, 'worst_slack': float(slacks.min())}


def is_oriented(cut, tol=DEFAULT_TOL):
    """x_bar lies in the plus branch of the cut"""
    return membership(cut.cone_s, cut.xbar, tol).region.is_plus
