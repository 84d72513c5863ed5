class ScenarioError(ValueError):
    """Invalid or inconsistent configuration input."""

    def __init__(self, message, *, section=None, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"[{section}]")
        if key is not None:
            where.append(key)
        prefix = " ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.section = section
        self.key = key
        self.line = line


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class QuadratureError(NumericalError):
    def __init__(self, message, *, achieved=None, where=None):
        detail = message
        if where is not None:
            detail += f" ({where})"
        if achieved is not None:
            detail += f"; achieved relative change {achieved:.3g}"
        super().__init__(detail)
        self.achieved = achieved
        self.where = where
