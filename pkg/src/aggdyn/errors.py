"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """An array does not have the shape its role requires."""

    def __init__(self, field, expected, got):
        self.field = field
        self.expected = expected
        self.got = got
        super().__init__(f"{field}: expected shape {expected}, got {got}")


class GameValidationError(ValueError):
    """A game instance violates one or more structural invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid game:\n  - " + "\n  - ".join(self.problems))


class ScenarioParseError(ValueError):
    """A scenario or state file could not be parsed."""


class InfeasiblePointError(ValueError):
    """A point that must belong to a set lies outside it."""


class ProjectionError(RuntimeError):
    """An iterative projector failed to converge."""

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (final residual {residual:.3e})")


class MissingModulusError(ValueError):
    """A certificate needs a strong-convexity modulus that was not declared."""


class OracleError(RuntimeError):
    """The reference VI solver did not produce a trustworthy solution."""
