class CutError(RuntimeError):
    """Pipeline verdict that stops cut generation

    Every subclass carries a machine-readable ``code`` and, when available,
    the partial ConditionReport gathered before stopping.
    """
    code = 'cut_error'

    def __init__(self, message, report=None, **details):
        super().__init__(message)
        self.report = report
        self.details = details

    def to_dict(self):
        return {'code': self.code, 'message': str(self), **self.details}


class Cond1Failed(CutError):
    code = 'cond1_failed'


class Cond2Infeasible(CutError):
    code = 'cond2_infeasible'

    @property
    def t_star(self):
        return self.details.get('t_star')


class Cond2Indeterminate(CutError):
    code = 'cond2_indeterminate'


class Cond3Failed(CutError):
    code = 'cond3_failed'


class DegenerateNumerics(CutError):
    code = 'degenerate_numerics'


class PreconditionUnmet(CutError):
    code = 'precondition_unmet'


class TrivialHull(CutError):
    code = 'trivial_hull'

    @property
    def hull(self):
        return self.details.get('hull')


class WitnessError(CutError):
    code = 'invalid_witness'


class HullExactnessFailure(CutError):
    code = 'hull_exactness_failure'
