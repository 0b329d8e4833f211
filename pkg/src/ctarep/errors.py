class InputError(ValueError):
    """Malformed, missing or inconsistent input data or configuration."""


class ModelError(RuntimeError):
    """A numerical routine hit a state it cannot recover from."""
