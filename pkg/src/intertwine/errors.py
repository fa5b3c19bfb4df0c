"""Error types carrying a short machine-readable code."""


class IntertwineError(Exception):
    """Base error. ``code`` is a stable identifier such as ``"too-few-points"``."""

    exit_code = 3

    def __init__(self, code, message=""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)


class ConfigError(IntertwineError):
    """Invalid input or configuration (CLI exit code 2)."""

    exit_code = 2


class DomainError(IntertwineError):
    """Runtime failure: window violations, blow-up, unstable steps (exit code 3)."""

    exit_code = 3
