"""Exception hierarchy shared by every cvci module."""

from __future__ import annotations


class CvciError(ValueError):
    """Base class for all errors raised by cvci."""

    #: short machine-readable tag used by the CLI on failure
    code = "error"


class LengthMismatch(CvciError):
    code = "length_mismatch"


class NonBinaryTreatment(CvciError):
    code = "non_binary_treatment"


class NonFiniteValue(CvciError):
    code = "non_finite_value"


class EmptyArm(CvciError):
    code = "empty_arm"


class SingularDesign(CvciError):
    code = "singular_design"


class SingularSystem(CvciError):
    code = "singular_system"


class DegeneratePropensity(CvciError):
    code = "degenerate_propensity"


class LambdaOutOfRange(CvciError):
    code = "lambda_out_of_range"


class NoConvergence(CvciError):
    code = "no_convergence"

    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm


class TooFewUnits(CvciError):
    code = "too_few_units"


class TooFewPerArm(CvciError):
    code = "too_few_per_arm"


class ColumnMismatch(CvciError):
    code = "column_mismatch"


class DegenerateVariance(CvciError):
    code = "degenerate_variance"


class ParseError(CvciError):
    code = "parse_error"


class ConfigError(CvciError):
    code = "config_error"


class ReplicateFailure(CvciError):
    """A Monte Carlo replicate or bootstrap draw failed; carries the seed for replay."""

    code = "replicate_failure"

    def __init__(self, message: str, run: int, seed: int):
        super().__init__(message)
        self.run = run
        self.seed = seed


class IoError(CvciError):
    code = "io_error"
