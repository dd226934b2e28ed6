"""Error types shared across modules. Module-specific errors live next to their code."""


class ConfigError(ValueError):
    """Invalid configuration value. The CLI maps it to exit code 2."""


class CorruptLogError(ValueError):
    """A run-directory file could not be parsed."""

    def __init__(self, path, lineno: int, reason: str):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {reason}")
