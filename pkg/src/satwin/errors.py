"""Error taxonomy shared across modules.

ConfigError -> CLI exit code 2 (bad scenario/arguments).
SimError and subclasses (see kernel) -> exit code 3 (internal invariant).
"""


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.key = key


class ProtocolViolation(Exception):
    """A simulated endpoint observed an impossible input (simulation bug)."""
