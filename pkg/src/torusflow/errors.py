"""Exception hierarchy.

``NumericalFailure`` subclasses map to CLI exit code 3; everything else
derived from ``TorusFlowError`` is a usage/configuration problem.
"""


class TorusFlowError(Exception):
    pass


class ConfigError(TorusFlowError, ValueError):
    pass


class GridMismatch(TorusFlowError, ValueError):
    pass


class UnsupportedNorm(TorusFlowError, ValueError):
    pass


class InsufficientData(TorusFlowError, ValueError):
    pass


class NumericalFailure(TorusFlowError, ArithmeticError):
    pass


class TubularViolation(NumericalFailure):
    pass


class DegenerateFactor(NumericalFailure):
    pass


class MetricDegenerate(NumericalFailure):
    pass


class FoldOver(NumericalFailure):
    pass


class StepFailed(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class Divergence(NumericalFailure):
    pass


class BadSeries(TorusFlowError, ValueError):
    pass
