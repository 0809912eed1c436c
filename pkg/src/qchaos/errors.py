"""Exception types shared across the package."""


class MemoryGuardError(RuntimeError):
    """A requested object would exceed the configured dimension cap."""


class NumericalInvariantError(RuntimeError):
    """A numeric contract (density validity, stochasticity, ...) broke at runtime."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
