class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ProtocolAbort(RuntimeError):
    """A protocol round could not complete; the task yields no outcome."""


class ConfigError(ValueError):
    """A scenario configuration is malformed or out of range."""
