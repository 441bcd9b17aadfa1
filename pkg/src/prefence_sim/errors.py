class SimError(Exception):
    """Base class for simulator errors."""


class ConfigError(SimError, ValueError):
    pass


class InvariantViolation(SimError):
    pass


class SchedulerError(SimError):
    pass
