"""Exception hierarchy shared across the engine."""


class BanditPromptError(Exception):
    """Base class for all engine errors."""


class ConfigError(BanditPromptError, ValueError):
    """Invalid or unparsable experiment configuration."""

    def __init__(self, message, field=None, value=None):
        super().__init__(message)
        self.field = field
        self.value = value


class DataError(BanditPromptError, ValueError):
    """Malformed profile or scoring input."""

    def __init__(self, message, index=None, field=None):
        super().__init__(message)
        self.index = index
        self.field = field


class ServiceError(BanditPromptError):
    """Failure talking to the generation service.

    ``iteration`` is filled in by the simulation loop when the error
    escapes a profile run.
    """

    iteration = None


class ServiceConnectionError(ServiceError):
    pass


class ServiceTimeoutError(ServiceError):
    pass


class ServiceStatusError(ServiceError):
    def __init__(self, message, status):
        super().__init__(message)
        self.status = status


class MalformedResponseError(ServiceError):
    pass
