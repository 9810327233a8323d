"""Exception hierarchy shared by all modules."""


class PlmError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgument(PlmError, ValueError):
    pass


class SingularArgument(InvalidArgument):
    pass


class PreconditionViolation(PlmError):
    pass


class InvalidConfig(PlmError, ValueError):
    pass


class InvalidTimeline(InvalidConfig):
    pass


class NumericalFailure(PlmError, ArithmeticError):
    pass


class NotFound(PlmError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class InsufficientData(PlmError):
    pass
