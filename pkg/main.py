import os
import re
import csv
import sys
import json
import logging
import argparse
import numpy as np

from Spectral import DEFAULT_TOL
from conditions import DEFAULT_BUDGET
from cutgen import DEFAULT_SAMPLES, ConeInstance, build_cut, validate_cut
from errors import CutError, TrivialHull, Cond2Indeterminate
from workers import WorkerManager
import applications
import disjunction
import hullcert


LOG_FORMAT = '[%(threadName)s] %(asctime)s %(levelname)s: %(message)s'

INSTANCE_VERSION = '1'
SEED_ENV = 'SOCDC_SEED'

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_FAILED = 2
EXIT_UNDECIDED = 3

# Options taking a vector or matrix, whose values may start with a minus sign
VECTOR_OPTIONS = ('--c1', '--c2', '--h', '--g', '--c', '--Q', '--E')
NEGATIVE_VALUE = re.compile(r'^-\.?\d')


def attach_negative_values(argv):
    """Rewrite '--c1 -1,0,0' as '--c1=-1,0,0', argparse reads a lone -1,0,0 as an option"""
    attached = []
    for token in argv:
        if attached and attached[-1] in VECTOR_OPTIONS and NEGATIVE_VALUE.match(token):
            attached[-1] = f'{attached[-1]}={token}'
        else:
            attached.append(token)
    return attached


class CliParser(argparse.ArgumentParser):
    def parse_args(self, args=None, namespace=None):
        args = sys.argv[1:] if args is None else list(args)
        return super().parse_args(attach_negative_values(args), namespace)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f'{self.prog}: error: {message}\n')


class InstanceError(ValueError):
    pass


def exit_code(report):
    """0 when everything verified, 2 on any failed verdict, 3 on undecided ones"""
    if report is None:
        return EXIT_OK
    if report.has_failure():
        return EXIT_FAILED
    if report.has_undecided():
        return EXIT_UNDECIDED
    return EXIT_OK


def _matrix(value, name):
    matrix = np.asarray(value, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InstanceError(f'{name} must be a square matrix')
    return matrix


def _vector(value, name):
    vector = np.asarray(value, dtype=float)
    if vector.ndim != 1:
        raise InstanceError(f'{name} must be a vector')
    return vector


def parse_instance(data, tol=DEFAULT_TOL, seed=0, budget=DEFAULT_BUDGET, samples=DEFAULT_SAMPLES, name=''):
    """Instance file content to ConeInstance; file options override the given defaults"""
    if not isinstance(data, dict):
        raise InstanceError('instance file must hold a JSON object')
    if str(data.get('version')) != INSTANCE_VERSION:
        raise InstanceError(f'unsupported instance version {data.get("version")!r}, expecting "{INSTANCE_VERSION}"')
    if 'A1' not in data:
        raise InstanceError('instance file needs A1')

    options = {'tol': tol, 'seed': seed, 'budget': budget, 'samples': samples}
    for key, value in (data.get('options') or {}).items():
        if key not in options:
            raise InstanceError(f'unknown option {key!r}')
        options[key] = type(options[key])(value)
    seed_override = os.environ.get(SEED_ENV)
    if seed_override is not None:
        options['seed'] = int(seed_override)

    A0 = _matrix(data['A0'], 'A0') if 'A0' in data else None
    B0 = np.asarray(data['B0'], dtype=float) if 'B0' in data else None
    b0 = _vector(data['b0'], 'b0') if 'b0' in data else None
    if A0 is None and (B0 is None or b0 is None):
        raise InstanceError('instance file needs A0 or both B0 and b0')
    h = _vector(data['h'], 'h') if data.get('h') is not None else None
    try:
        return ConeInstance(_matrix(data['A1'], 'A1'), A0=A0, B0=B0, b0=b0, h=h,
                            name=data.get('name', name), **options)
    except ValueError as e:
        raise InstanceError(str(e)) from e


def load_instance(path, args):
    with open(path) as input_file:
        try:
            data = json.load(input_file)
        except json.JSONDecodeError as e:
            raise InstanceError(f'malformed JSON in {path}: {e}') from e
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_instance(data, tol=args.tol, seed=args.seed, budget=args.budget, name=name)


def write_output(payload, out=None):
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if out:
        with open(out, 'w') as output:
            output.write(text + '\n')
    else:
        print(text)


def _error_payload(e):
    payload = {'error': e.to_dict()}
    if e.report is not None:
        payload['report'] = e.report.to_dict()
    return payload


def _error_code(e):
    if isinstance(e, TrivialHull):
        return EXIT_OK
    if isinstance(e, Cond2Indeterminate):
        return EXIT_UNDECIDED
    return EXIT_FAILED


def _manager(args):
    return WorkerManager.with_threads(args.thread_workers) if args.thread_workers > 1 else None


def cmd_check(args):
    instance = load_instance(args.instance, args)
    try:
        report = build_cut(instance).report
    except CutError as e:
        if e.report is None:
            raise
        report = e.report
        report.warnings.append(f'{e.code}: {e}')
        write_output(report.to_dict(), args.out)
        return _error_code(e)
    write_output(report.to_dict(), args.out)
    return exit_code(report)


def cmd_cut(args):
    instance = load_instance(args.instance, args)
    cut = build_cut(instance)
    payload = cut.to_dict()
    if args.validate:
        payload['validation'] = validate_cut(instance, cut, args.validate, instance.seed, _manager(args))
    write_output(payload, args.out)
    return exit_code(cut.report)


def cmd_disjunction(args):
    c1, c2 = _vector(args.c1, 'c1'), _vector(args.c2, 'c2')
    if args.n is not None and (c1.size != args.n or c2.size != args.n):
        raise InstanceError(f'c1 and c2 must have size n = {args.n}')
    h = _vector(args.h, 'h') if args.h is not None else None
    result = disjunction.run_disjunction(c1, args.d1, c2, args.d2, h=h, budget=args.budget, seed=args.seed,
                                         tol=args.tol)
    payload = result.to_dict()
    if result.gplus is not None:
        payload.pop('cut', None)
        payload['cut_report'] = result.cut.report.to_dict()
    write_output(payload, args.out)
    return exit_code(result.cut.report)


def cmd_trs(args):
    problem = applications.TrsProblem(_matrix(args.Q, 'Q'), _vector(args.g, 'g'))
    solution = applications.trs_solve(problem, tol=args.tol, seed=args.seed, budget=args.budget)
    write_output(solution.to_dict(), args.out)
    return EXIT_OK


def _hull_output(cut, args):
    write_output(cut.to_dict(), args.out)
    return exit_code(cut.report)


def cmd_hull_ball(args):
    cut = applications.ball_deletion_hull(_vector(args.c, 'c'), args.r, tol=args.tol, seed=args.seed,
                                          budget=args.budget)
    return _hull_output(cut, args)


def cmd_hull_ellipsoid(args):
    cut = applications.concentric_ellipsoid_hull(_matrix(args.E, 'E'), args.r, tol=args.tol, seed=args.seed,
                                                 budget=args.budget)
    return _hull_output(cut, args)


def cmd_hull_paraboloid(args):
    cut = applications.paraboloid_hull(_matrix(args.Q, 'Q'), _vector(args.g, 'g'), args.f, tol=args.tol,
                                       seed=args.seed, budget=args.budget)
    return _hull_output(cut, args)


def write_points(points, dim, out=None, fmt='csv'):
    header = [f'x{i + 1}' for i in range(dim)]
    if fmt == 'json':
        return write_output({'columns': header, 'points': np.asarray(points).tolist()}, out)
    output = open(out, 'w', newline='') if out else sys.stdout
    try:
        writer = csv.writer(output)
        writer.writerow(header)
        writer.writerows([repr(float(value)) for value in row] for row in points)
    finally:
        if out:
            output.close()


def cmd_sample(args):
    instance = load_instance(args.instance, args)
    which = hullcert.SampleSet(args.set)
    points = np.empty((0, instance.dim))
    if args.n > 0:
        cut = build_cut(instance) if which.uses_cut else None
        points = hullcert.sample_set(instance, which, args.n, instance.seed, cut=cut, manager=_manager(args),
                                     tol=instance.tol)
    write_points(points, instance.dim, args.out, args.format)
    return EXIT_OK


def cmd_certify(args):
    instance = load_instance(args.instance, args)
    cut = build_cut(instance)
    certificate = hullcert.certify_hull(instance, cut, args.n, instance.seed, _manager(args), instance.tol)
    certificate['certified'] = certificate['n_failed'] == 0
    write_output(certificate, args.out)
    return EXIT_OK if certificate['certified'] else EXIT_FAILED


def _json_argument(value):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return [float(item) for item in value.split(',')]


def build_parser():
    parser = CliParser(prog='socdc', formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                       description='SOC cuts for the intersection of an SOCr cone with a nonconvex quadratic cone')
    parser.add_argument('--tol', default=DEFAULT_TOL, type=float, help='Relative zero tolerance')
    parser.add_argument('--seed', default=0, type=int, help=f'Random seed, overridden by ${SEED_ENV}')
    parser.add_argument('--budget', default=DEFAULT_BUDGET, type=int, help='Search and sampling budget')
    parser.add_argument('--out', default=None, help='Output file, standard output when omitted')
    parser.add_argument('-tw', '--thread-workers', default=1, type=int, help='Number of Thread workers for sampling')
    parser.add_argument('-l', '--log-level', default='INFO', choices=('INFO', 'DEBUG', 'WARNING', 'ERROR'),
                        help='Logging level')
    subparsers = parser.add_subparsers(dest='command', required=True)

    def subcommand(name, handler, help_):
        subparser = subparsers.add_parser(name, help=help_, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        subparser.set_defaults(handler=handler)
        return subparser

    subcommand('check', cmd_check, 'Evaluate Conditions 1-5').add_argument('instance', help='Instance JSON file')

    cut = subcommand('cut', cmd_cut, 'Calculate the cut')
    cut.add_argument('instance', help='Instance JSON file')
    cut.add_argument('--validate', default=0, type=int, help='Validity samples of F0+ ∩ F1, 0 disables')

    disj = subcommand('disjunction', cmd_disjunction, 'Cut for a two-term disjunction on the second-order cone')
    disj.add_argument('--c1', required=True, type=_json_argument, help='First normal, JSON list or comma separated')
    disj.add_argument('--d1', required=True, type=float, help='First right-hand side')
    disj.add_argument('--c2', required=True, type=_json_argument, help='Second normal')
    disj.add_argument('--d2', required=True, type=float, help='Second right-hand side')
    disj.add_argument('--n', default=None, type=int, help='Dimension of the cone, checked against c1 and c2')
    disj.add_argument('--h', default=None, type=_json_argument, help='Section normal for K ∩ {h^T x = 1}')

    trs = subcommand('trs', cmd_trs, 'Solve a trust-region subproblem through the hull cut')
    trs.add_argument('--Q', required=True, type=json.loads, help='Symmetric matrix Q~ as JSON')
    trs.add_argument('--g', required=True, type=_json_argument, help='Linear term g~')

    ball = subcommand('hull-ball', cmd_hull_ball, 'Unit ball minus an open ball')
    ball.add_argument('--c', required=True, type=_json_argument, help='Center of the deleted ball')
    ball.add_argument('--r', required=True, type=float, help='Radius of the deleted ball')

    ellipsoid = subcommand('hull-ellipsoid', cmd_hull_ellipsoid, 'Unit ball minus a concentric open ellipsoid')
    ellipsoid.add_argument('--E', required=True, type=json.loads, help='Positive definite matrix as JSON')
    ellipsoid.add_argument('--r', required=True, type=float, help='Ellipsoid level')

    paraboloid = subcommand('hull-paraboloid', cmd_hull_paraboloid, 'Paraboloid intersected with a quadratic')
    paraboloid.add_argument('--Q', required=True, type=json.loads, help='Matrix Q~ as JSON')
    paraboloid.add_argument('--g', required=True, type=_json_argument, help='Linear term (g~; g_n)')
    paraboloid.add_argument('--f', default=0.0, type=float, help='Constant term')

    sample = subcommand('sample', cmd_sample, 'Point cloud of one of the sets')
    sample.add_argument('instance', help='Instance JSON file')
    sample.add_argument('--set', default=hullcert.SampleSet.F0FSH1.value,
                        choices=[which.value for which in hullcert.SampleSet], help='Set to sample')
    sample.add_argument('--n', default=DEFAULT_SAMPLES, type=int, help='Number of points')
    sample.add_argument('--format', default='csv', choices=('csv', 'json'), help='Output format')

    certify = subcommand('certify', cmd_certify, 'Decompose sampled relaxation points onto F0+ ∩ F1')
    certify.add_argument('instance', help='Instance JSON file')
    certify.add_argument('--n', default=DEFAULT_SAMPLES, type=int, help='Number of sampled points')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level, None), format=LOG_FORMAT)
    if os.environ.get(SEED_ENV) is not None:
        args.seed = int(os.environ[SEED_ENV])

    try:
        return args.handler(args)
    except (InstanceError, OSError) as e:
        logging.error(f'Invalid input: {e}')
        return EXIT_PARSE
    except CutError as e:
        write_output(_error_payload(e), args.out)
        return _error_code(e)
    except ValueError as e:
        logging.error(f'{args.command}: {e}')
        return EXIT_PARSE


if __name__ == '__main__':
    sys.exit(main())
