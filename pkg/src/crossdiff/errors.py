class ConfigError(ValueError):
    """Invalid grid, model, scenario or certificate parameters."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""
