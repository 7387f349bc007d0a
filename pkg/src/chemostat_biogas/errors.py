"""Exception hierarchy. Each class carries the CLI exit status it maps to."""


class BiogasError(Exception):
    exit_code = 1


class ConfigError(BiogasError):
    exit_code = 2


class DomainError(BiogasError, ValueError):
    """Argument outside the domain of a model function."""

    exit_code = 2


class AssumptionError(BiogasError):
    """A standing modelling assumption does not hold for the given inputs."""

    exit_code = 3


class ControlError(AssumptionError):
    """Control value not admissible (outside [0, u_max] or unreachable target)."""


class NumericError(BiogasError):
    exit_code = 4


class IntegrationError(NumericError):
    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConsistencyError(NumericError):
    """A proven inequality failed numerically; signals integration or assumption failure."""


class BudgetError(NumericError):
    pass
