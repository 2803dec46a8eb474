"""Exception hierarchy.

Each error carries a short ``category`` used by the command line front end
to print ``ERROR <category>: <detail>`` and pick an exit code.
"""


class ReinfectionError(Exception):
    category = "error"
    exit_code = 1


class ModelMismatchError(ReinfectionError, ValueError):
    category = "model-mismatch"
    exit_code = 3


class InstabilityError(ReinfectionError, ArithmeticError):
    """Raised when a compartment undershoots below the tolerated floor."""

    category = "instability"
    exit_code = 4

    def __init__(self, day, compartment, value, message=None):
        self.day = day
        self.compartment = compartment
        self.value = value
        super().__init__(
            message or f"compartment {compartment} reached {value:.6g} on day {day:.4g}"
        )


class InputError(ReinfectionError, ValueError):
    category = "input"
    exit_code = 5


class SchemaError(InputError):
    category = "schema"
    exit_code = 6


class ParseError(InputError):
    category = "parse"
    exit_code = 7


class ValidationError(InputError):
    category = "validation"
    exit_code = 8


class ConfigError(InputError):
    category = "config"
    exit_code = 9


class InitializationError(ReinfectionError):
    category = "initialization"
    exit_code = 10


class UndefinedStatisticError(ReinfectionError, ArithmeticError):
    category = "undefined-statistic"
    exit_code = 11


class DegenerateSampleError(ReinfectionError, ValueError):
    category = "degenerate-sample"
    exit_code = 12


class GridAlignmentError(ReinfectionError, ValueError):
    category = "grid-alignment"
    exit_code = 13


class EvidenceUnderflowError(ReinfectionError, ArithmeticError):
    category = "evidence-underflow"
    exit_code = 14

    def __init__(self, message, n_draws=0, n_failed=0):
        self.n_draws = n_draws
        self.n_failed = n_failed
        super().__init__(message)
