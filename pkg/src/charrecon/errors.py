class DimensionError(ValueError):
    """Operands disagree in shape."""


class DegenerateInputError(ValueError):
    """Input for which the quantity is undefined, e.g. cosine of a zero vector."""


class SingularMatrixError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    pass


class CorruptCheckpointError(ValueError):
    pass


class ParseError(ValueError):
    """Malformed line in a text data file. ``lineno`` is 1-based."""

    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")
