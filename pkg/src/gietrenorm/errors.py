"""Exception hierarchy shared by all modules.

Each error carries an ``exit_code`` used by the command-line driver:
2 for configuration problems, 3 for numerical failures and 4 for
exhausted budgets.
"""


class GietError(Exception):
    exit_code = 3


class ConfigError(GietError):
    exit_code = 2


class NumericError(GietError):
    exit_code = 3


class BudgetError(GietError):
    exit_code = 4


class InconsistentGenus(NumericError):
    pass


class DomainError(NumericError):
    pass


class QuadratureNotConverged(NumericError):
    pass


class MonotonicityError(NumericError):
    pass


class SingularityHit(NumericError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class NotPrimitive(NumericError):
    pass


class ConeEmpty(NumericError):
    pass


class ConnectionDetected(NumericError):
    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class RunawayStep(NumericError):
    pass


class FloorBudgetExceeded(BudgetError):
    pass


class NoPositiveWindow(NumericError):
    pass


class DegenerateFrame(NumericError):
    pass


class WindowTooShort(NumericError):
    pass


class MissingSplitting(NumericError):
    pass


class NoContraction(NumericError):
    pass


class NotRecurrent(NumericError):
    pass
