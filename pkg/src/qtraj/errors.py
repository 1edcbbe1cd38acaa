class QTrajError(Exception):
    """Base class for physics-stage failures (CLI exit status 1)."""


class ConfigError(ValueError):
    """Invalid scenario or grid configuration (CLI exit status 2)."""


class GridBudgetError(ConfigError):
    pass


class NonFiniteFieldError(QTrajError, FloatingPointError):
    pass


class SolverError(QTrajError):
    pass


class ConvergenceError(QTrajError):
    pass


class NodeError(QTrajError):
    """The wavefield vanishes where a pilot quantity is requested."""


class DegenerateMetricError(QTrajError):
    pass


class OutOfBoxError(QTrajError, ValueError):
    pass


class ObserverError(QTrajError):
    pass
