"""Exception types shared by the simulator modules and the command line front end."""


class AutomatonError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1


class InvariantViolation(AutomatonError):
    """A checked identity or conservation law failed."""

    exit_code = 1


class ConfigurationError(AutomatonError):
    """The run configuration is malformed or inconsistent."""

    exit_code = 2


class BudgetExceededError(AutomatonError):
    """A requested computation exceeds a configured resource cap."""

    exit_code = 3


class SignObstructionError(InvariantViolation):
    """A signed permutation cannot be brought to all +1 entries by a diagonal sign gauge."""

    def __init__(self, message: str, obstructions=None):
        super().__init__(message)
        self.obstructions = list(obstructions or [])
