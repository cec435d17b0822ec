"""
Exceptions raised by sfakit

Every exception carries the process exit code the command line uses for it.
"""


class SFAError(Exception):
    """Base class for all sfakit errors"""

    exit_code = 1


class DomainError(SFAError, ValueError):
    """An argument lies outside the domain of the operation"""

    exit_code = 2


class UnboundTargetError(DomainError):
    """The separable coupling is too weak to bind a state

    :param float gamma: The requested coupling
    :param float gamma_critical: The smallest coupling with a bound state

    """
    def __init__(self, gamma, gamma_critical):
        self.gamma = gamma
        self.gamma_critical = gamma_critical
        super().__init__(f'No bound state for gamma = {gamma:.6g}; '
                         f'the coupling must exceed gamma_c = {gamma_critical:.6g}')


class ConfigError(SFAError, ValueError):
    """The run configuration is invalid

    :param list errors: All problems found while validating

    """
    exit_code = 2

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        msg = f'{len(self.errors)} configuration error(s):\n' + '\n'.join(f'  - {e}' for e in self.errors)
        super().__init__(msg)


class GridMismatchError(SFAError, ValueError):
    """Two grids that must coincide do not"""

    exit_code = 2


class GridSizeError(DomainError):
    """A tensor momentum grid holds more nodes than a run can store

    :param str what: The grid being built
    :param int n_points: Nodes requested
    :param int limit: Largest allowed node count

    """
    def __init__(self, what, n_points, limit):
        self.n_points = int(n_points)
        self.limit = int(limit)
        super().__init__(f'{what} needs {self.n_points} grid nodes; the limit is {self.limit}')


class RefinementError(SFAError, RuntimeError):
    """The discretization is too coarse for the requested accuracy

    :param str message: The description
    :param dict diagnostics: Diagnostic values (phase_per_step, suggested_dt, ...)

    """
    exit_code = 3

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            message += ' (' + ', '.join(f'{k} = {v:.6g}' if isinstance(v, float) else f'{k} = {v}'
                                         for k, v in diagnostics.items()) + ')'
        super().__init__(message)


class StepCriterionError(RefinementError):
    """The time step does not resolve the fastest period"""

    @property
    def suggested_dt(self):
        return self.diagnostics.get('suggested_dt')


class NonConvergenceError(SFAError, RuntimeError):
    """An iterative solver failed

    :param str message: The description
    :param dict diagnostics: Diagnostic values

    """
    exit_code = 3

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        super().__init__(message)


class NoClassicalReturnError(NonConvergenceError):
    """No classical trajectory returns to the parent ion"""


class OutputError(SFAError, OSError):
    """Writing or reading a result file failed"""

    exit_code = 4
