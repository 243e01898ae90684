import logging
import numpy as np

from dataclasses import dataclass, field

from Spectral import DEFAULT_TOL
from SOCr import second_order_cone, lorentz_matrix
from conditions import DEFAULT_BUDGET, Status, SectionKind, SectionHint, Verdict, check_cond6
from cutgen import ConeInstance, build_cut
from errors import PreconditionUnmet, TrivialHull


CASE_A = 'a'
CASE_B = 'b'
CASE_C = 'c'

CASE_C_WARNING = 'case (c) disjunction: the hull of the section cannot in general be captured ' \
                 'by two conic inequalities, exactness is not guaranteed'


@dataclass
class Disjunction:
    """c1^T x >= d1 or c2^T x >= d2 on the second-order cone of R^n

    Right-hand sides are scaled to {0, +1, -1} with d1 >= d2.
    """
    n: int
    c1: np.ndarray
    d1: float
    c2: np.ndarray
    d2: float
    case: str
    relaxation: bool = False
    scales: tuple = (1.0, 1.0)

    @property
    def terms(self):
        return (self.c1, self.d1), (self.c2, self.d2)

    def to_dict(self):
        return {'n': self.n, 'c1': self.c1.tolist(), 'd1': self.d1, 'c2': self.c2.tolist(),
                'd2': self.d2, 'case': self.case, 'relaxation': self.relaxation}


@dataclass
class GPlusSet:
    c1: np.ndarray
    c2: np.ndarray
    d1: float
    d2: float
    s: float
    b_s: np.ndarray = None
    # x^T A1 x = product_scale (c1^T x - d1)(c2^T x - d2) in the lift the cut was built from
    product_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.s <= 1:
            raise ValueError(f'G_s+ needs s in (0, 1], got {self.s}')
        if self.product_scale <= 0:
            raise ValueError(f'product scale must be positive, got {self.product_scale}')

    def to_dict(self):
        return {'c1': self.c1.tolist(), 'c2': self.c2.tolist(), 'd1': self.d1, 'd2': self.d2, 's': self.s,
                'b_s': None if self.b_s is None else self.b_s.tolist(), 'product_scale': self.product_scale}


@dataclass
class DisjunctionResult:
    disjunction: Disjunction
    instance: ConeInstance = None
    cut: object = None
    cond6: Verdict = None
    gplus: GPlusSet = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        result = {'disjunction': self.disjunction.to_dict(),
                  'cond6': None if self.cond6 is None else self.cond6.to_dict(),
                  'warnings': list(self.warnings)}
        if self.gplus is not None:
            result['gplus'] = self.gplus.to_dict()
        if self.cut is not None:
            result['cut'] = self.cut.to_dict()
        return result


def _case(d1, d2):
    if d1 == d2 == 0:
        return CASE_A
    if d1 == d2:
        return CASE_B
    return CASE_C


def normalize(c1, d1, c2, d2, tol=DEFAULT_TOL):
    """Scale each term by 1/|d_i| when d_i != 0, then order so that d1 >= d2"""
    c1, c2 = np.asarray(c1, dtype=float).ravel(), np.asarray(c2, dtype=float).ravel()
    if c1.size != c2.size:
        raise ValueError(f'c1 and c2 differ in size: {c1.size} vs {c2.size}')
    if c1.size < 2:
        raise ValueError('the second-order cone needs n >= 2')

    terms, scales = [], []
    for c, d in ((c1, float(d1)), (c2, float(d2))):
        if not np.any(c):
            raise ValueError('disjunction normals must be nonzero')
        if abs(d) > tol:
            scales.append(1.0 / abs(d))
            terms.append((c / abs(d), float(np.sign(d))))
        else:
            scales.append(1.0)
            terms.append((c.copy(), 0.0))
    if terms[0][1] < terms[1][1]:
        terms.reverse()
        scales.reverse()

    (c1, d1), (c2, d2) = terms
    return Disjunction(c1.size, c1, d1, c2, d2, _case(d1, d2), scales=tuple(scales))


def _soc_side(c, tol):
    """+1 when c in K, -1 when c in int(-K), -2 on bd(-K), 0 otherwise"""
    tilde, last = np.linalg.norm(c[:-1]), c[-1]
    band = tol * max(1.0, np.linalg.norm(c))
    if tilde <= last + band:
        return 1
    if tilde < -last - band:
        return -1
    if tilde <= -last + band:
        return -2
    return 0


def _check_trivial(c1, c2, tol, rhs=('0', '0')):
    for i, (c, other) in enumerate(((c1, 2), (c2, 1)), 1):
        side = _soc_side(c, tol)
        if side == 1:
            raise TrivialHull(f'c{i} lies in K, so its side of the disjunction is all of K', hull='K')
        if side == -1:
            hull = f'K ∩ {{c{other}^T x >= {rhs[other - 1]}}}'
            raise TrivialHull(f'c{i} lies in int(-K), so its side reduces to the apex', hull=hull)
        if side == -2:
            logging.warning(f'c{i} lies on the boundary of -K: its side of the disjunction is a single ray')


def build_homogeneous(c1, c2, tol=DEFAULT_TOL, **options):
    """Instance for c1^T x >= 0 or c2^T x >= 0 on K

    Args:
        c1, c2 ([ndarray]): Normals, neither in K nor in int(-K)
        options: Forwarded to ConeInstance (seed, budget, hint, h, ...)

    Raises:
        TrivialHull: When one side of the disjunction is K or the apex

    Returns:
        [ConeInstance]: A0 = J, A1 = c1 c2^T + c2 c1^T
    """
    c1, c2 = np.asarray(c1, dtype=float).ravel(), np.asarray(c2, dtype=float).ravel()
    if c1.size != c2.size:
        raise ValueError(f'c1 and c2 differ in size: {c1.size} vs {c2.size}')
    _check_trivial(c1, c2, tol)

    cone = second_order_cone(c1.size)
    A1 = np.outer(c1, c2) + np.outer(c2, c1)
    return ConeInstance(A1, B0=cone.B, b0=cone.b, tol=tol, **options)


def lift_disjunction(disj):
    """Homogenized (A0, A1) in R^(n+1): x^T A1 x = (c1^T y - d1)(c2^T y - d2) for x = (y, 1)"""
    n = disj.n
    A0 = np.zeros((n + 1, n + 1))
    A0[:n, :n] = lorentz_matrix(n)
    A1 = np.zeros((n + 1, n + 1))
    A1[:n, :n] = (np.outer(disj.c1, disj.c2) + np.outer(disj.c2, disj.c1)) / 2
    A1[:n, n] = A1[n, :n] = -(disj.d2 * disj.c1 + disj.d1 * disj.c2) / 2
    A1[n, n] = disj.d1 * disj.d2
    return A0, A1


def build_nonhomogeneous(disj, tol=DEFAULT_TOL, **options):
    """Instance for a case (b) or (c) disjunction on K, sectioned at x_(n+1) = 1

    Raises:
        TrivialHull: Case (b) with c1 - c2 in K or in -K
        PreconditionUnmet: Case (a), or case (c) with d1 d2 = 0

    Returns:
        [ConeInstance]: (n+1)-dimensional instance with h = e_(n+1)
    """
    if not isinstance(disj, Disjunction):
        raise TypeError('expecting Disjunction object')
    if disj.case == CASE_A:
        raise PreconditionUnmet('case (a) disjunctions are homogeneous, use build_homogeneous')
    if disj.case == CASE_C and disj.d1 * disj.d2 == 0:
        raise PreconditionUnmet('case (c) with d1 d2 = 0 fails Condition 3, use weaken_case_c')

    notes = list(options.pop('notes', []))
    if disj.case == CASE_B:
        difference = disj.c1 - disj.c2
        side = _soc_side(difference, tol)
        if side == 1:
            raise TrivialHull('c1 - c2 lies in K: the second piece is contained in the first',
                              hull=f'K ∩ {{c1^T y >= {disj.d1:g}}}')
        if _soc_side(-difference, tol) == 1:
            raise TrivialHull('c2 - c1 lies in K: the first piece is contained in the second',
                              hull=f'K ∩ {{c2^T y >= {disj.d2:g}}}')
    else:
        logging.warning(CASE_C_WARNING)
        notes.append(CASE_C_WARNING)

    A0, A1 = lift_disjunction(disj)
    h = np.zeros(disj.n + 1)
    h[-1] = 1.0
    return ConeInstance(A1, A0=A0, h=h, tol=tol, notes=notes, **options)


def weaken_case_c(disj):
    """Relax c1^T x >= d1 to c1^T x >= d2 so both terms share the right-hand side d2"""
    if not isinstance(disj, Disjunction):
        raise TypeError('expecting Disjunction object')
    if disj.case != CASE_C:
        raise PreconditionUnmet(f'weakening applies to case (c) only, got case ({disj.case})')
    logging.warning(f'Weakening d1 = {disj.d1:g} to {disj.d2:g}: the result is a relaxation only')
    return Disjunction(disj.n, disj.c1.copy(), disj.d2, disj.c2.copy(), disj.d2, _case(disj.d2, disj.d2),
                       relaxation=True, scales=disj.scales)


def gplus_membership(g, x, strict=False, absolute=False, tol=DEFAULT_TOL):
    """Evaluate sqrt([(c1 - c2)^T x - (d1 - d2)]^2 - 4 (1 - s)/(k s) x^T J x) >= (d1 + d2) - (c1 + c2)^T x

    k is the product scale of the lift, 1 for the non-homogeneous lift and 2
    for c1 c2^T + c2 c1^T.

    With ``absolute`` the right-hand side is taken in absolute value, which on K
    is exactly x^T A_s x <= 0. With ``strict`` the orientation b_s^T x >= 0 is
    also required.

    Args:
        g ([GPlusSet]): Inequality parameters
        x ([ndarray]): Point of R^n

    Returns:
        [tuple]: (member, slack)
    """
    if not isinstance(g, GPlusSet):
        raise TypeError('expecting GPlusSet object')
    x = np.asarray(x, dtype=float).ravel()
    if x.size != g.c1.size:
        raise ValueError(f'expecting a vector of size {g.c1.size}, got {x.size}')

    lhs = (g.c1 - g.c2) @ x - (g.d1 - g.d2)
    xJx = x[:-1] @ x[:-1] - x[-1] ** 2
    radicand = lhs ** 2 - 4 * (1 - g.s) / (g.product_scale * g.s) * xJx
    scale = max(1.0, lhs ** 2, abs(xJx))
    if radicand < 0:
        if radicand < -tol * scale and (xJx > tol * scale or x[-1] < 0):
            logging.warning(f'G_s+ radicand {radicand:.3e} is negative at a point outside K')
        radicand = 0.0

    rhs = (g.d1 + g.d2) - (g.c1 + g.c2) @ x
    slack = float(np.sqrt(radicand) - (abs(rhs) if absolute else rhs))
    member = slack >= -tol * np.sqrt(scale)
    if strict and g.b_s is not None:
        point = np.append(x, 1.0) if g.b_s.size == x.size + 1 else x
        member = member and g.b_s @ point >= -tol * np.linalg.norm(g.b_s) * max(1.0, np.linalg.norm(point))
    return bool(member), slack


def _beta_candidates(c1, c2):
    a = c1[:-1] @ c1[:-1] - c1[-1] ** 2
    b = c1[:-1] @ c2[:-1] - c1[-1] * c2[-1]
    c = c2[:-1] @ c2[:-1] - c2[-1] ** 2
    points = [0.0]
    if abs(a) > 0:
        disc = b * b - a * c
        if disc >= 0:
            points += [(-b - np.sqrt(disc)) / a, (-b + np.sqrt(disc)) / a]
    elif abs(b) > 0:
        points.append(-c / (2 * b))
    if c1[-1] != 0:
        points.append(-c2[-1] / c1[-1])
    points = sorted({p for p in points if p >= 0})
    midpoints = [(p + q) / 2 for p, q in zip(points, points[1:])]
    return sorted(points + midpoints + [points[-1] + 1.0])


def _in_cone(v, sign, tol):
    band = tol * max(1.0, np.linalg.norm(v))
    return np.linalg.norm(v[:-1]) <= sign * v[-1] + band


def beta_sufficiency(c1, c2, tol=DEFAULT_TOL):
    """Search beta1, beta2 >= 0 with beta1 c1 + c2 in -K and beta2 c1 + c2 in K

    Membership of beta c1 + c2 in +-K is a quadratic inequality in beta plus a
    sign condition, so feasible betas form intervals whose endpoints are roots
    of either; probing the roots, midpoints and one point past them is exact.

    Returns:
        [Verdict]: HOLDS with data beta1, beta2 (smallest feasible), or FAILS
    """
    c1, c2 = np.asarray(c1, dtype=float).ravel(), np.asarray(c2, dtype=float).ravel()
    candidates = _beta_candidates(c1, c2)
    found = {}
    for name, sign in (('beta1', -1), ('beta2', 1)):
        feasible = [beta for beta in candidates if _in_cone(beta * c1 + c2, sign, tol)]
        if feasible:
            found[name] = float(feasible[0])
    if len(found) == 2:
        return Verdict(Status.HOLDS, detail='beta1 c1 + c2 in -K and beta2 c1 + c2 in K', data=found)
    missing = 'K' if 'beta2' not in found else '-K'
    return Verdict(Status.FAILS, detail=f'no beta >= 0 puts beta c1 + c2 in {missing}', data=found)


def classify_section(h, tol=DEFAULT_TOL):
    """Shape of K ∩ {h^T x = 1}

    Returns:
        [SectionKind]: ELLIPSOID for h in int(K), PARABOLOID on bd(K), HYPERBOLOID otherwise
    """
    h = np.asarray(h, dtype=float).ravel()
    if not np.any(h):
        raise ValueError('hyperplane normal must be nonzero')
    tilde, last = np.linalg.norm(h[:-1]), h[-1]
    band = tol * max(1.0, np.linalg.norm(h))
    if last < 0 and tilde <= -last + band:
        raise ValueError('h lies in -K: the section of K is empty')
    if abs(tilde - last) <= band:
        return SectionKind.PARABOLOID
    if tilde < last:
        return SectionKind.ELLIPSOID
    return SectionKind.HYPERBOLOID


def build_section_disjunction(h, rho1, d1, rho2, d2, budget=DEFAULT_BUDGET, seed=0, tol=DEFAULT_TOL, **options):
    """Instance for rho1^T x >= d1 or rho2^T x >= d2 on the section K ∩ {h^T x = 1}

    On the section the disjunction becomes homogeneous with c_i = rho_i - d_i h.
    The non-intersecting check runs on the section and is recorded; the section
    shape selects the Condition 5 strategy.

    Returns:
        [ConeInstance]: Homogeneous instance with h attached
    """
    h = np.asarray(h, dtype=float).ravel()
    rho1, rho2 = np.asarray(rho1, dtype=float).ravel(), np.asarray(rho2, dtype=float).ravel()
    if not (h.size == rho1.size == rho2.size):
        raise ValueError('h, rho1 and rho2 must share one dimension')

    kind = classify_section(h, tol)
    c1, c2 = rho1 - d1 * h, rho2 - d2 * h
    _check_trivial(c1, c2, tol, rhs=(f'{d1:g}', f'{d2:g}'))

    beta_holds = None
    if kind is SectionKind.HYPERBOLOID:
        beta_holds = beta_sufficiency(c1, c2, tol).status is Status.HOLDS
    cond7 = check_cond6(h.size, rho1, d1, rho2, d2, budget=budget, seed=seed, h=h, tol=tol)
    logging.debug(f'Section {kind.name.lower()}: non-intersecting check {cond7.status.name}')

    return build_homogeneous(c1, c2, tol=tol, h=h, hint=SectionHint(kind, beta_holds), cond6=cond7,
                             budget=budget, seed=seed, **options)


def run_disjunction(c1, d1, c2, d2, h=None, budget=DEFAULT_BUDGET, seed=0, tol=DEFAULT_TOL, **options):
    """Normalize, gate on the non-intersecting condition and build the cut or its G_s+ fallback

    Raises:
        TrivialHull: When the hull is one side of the disjunction or K itself
        CutError: Propagated from build_cut

    Returns:
        [DisjunctionResult]: Cut, condition verdicts and G_s+ parameters when the pieces overlap
    """
    warnings = []
    if h is not None:
        c1, c2 = np.asarray(c1, dtype=float).ravel(), np.asarray(c2, dtype=float).ravel()
        disj = Disjunction(c1.size, c1, float(d1), c2, float(d2), _case(d1, d2))
        instance = build_section_disjunction(h, c1, d1, c2, d2, budget=budget, seed=seed, tol=tol, **options)
        cond6 = instance.cond6
    else:
        disj = normalize(c1, d1, c2, d2, tol)
        if disj.case == CASE_C and disj.d1 * disj.d2 == 0:
            message = f'case (c) with (d1, d2) = ({disj.d1:g}, {disj.d2:g}) fails Condition 3; using the weakened disjunction'
            logging.warning(message)
            warnings.append(message)
            disj = weaken_case_c(disj)

        cond6 = check_cond6(disj.n, disj.c1, disj.d1, disj.c2, disj.d2, budget=budget, seed=seed, tol=tol)
        if disj.case == CASE_A:
            instance = build_homogeneous(disj.c1, disj.c2, tol=tol, cond6=cond6, budget=budget, seed=seed,
                                         notes=warnings, **options)
        else:
            holds = beta_sufficiency(disj.c1, disj.c2, tol).status is Status.HOLDS
            instance = build_nonhomogeneous(disj, tol=tol, cond6=cond6, hint=SectionHint(SectionKind.BETA, holds),
                                            budget=budget, seed=seed, notes=warnings, **options)

    cut = build_cut(instance)
    result = DisjunctionResult(disj, instance, cut, cond6, warnings=cut.report.warnings)

    if cond6.status is Status.FAILS:
        if cut.s > 0:
            scale = 2.0 if h is not None or disj.case == CASE_A else 1.0
            result.gplus = GPlusSet(disj.c1, disj.c2, disj.d1, disj.d2, cut.s, cut.cone_s.b, scale)
            cut.report.warn('pieces overlap in int(K): the SOC cut is replaced by the G_s+ relaxation')
        else:
            cut.report.warn('pieces overlap in int(K) and s = 0: no G_s+ relaxation is available')
    return result
