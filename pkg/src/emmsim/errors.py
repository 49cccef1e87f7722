class EmmError(Exception):
    pass


class ConfigError(EmmError, ValueError):
    """Invalid or inconsistent run configuration."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CoverageError(EmmError):
    """A user location is not covered by any BS."""


class RealizationMismatch(EmmError):
    """Oracle and policy results refer to different sample paths."""
