class DegenerateStrategyError(ValueError):
    """Raised when a strategy deters nobody or everybody by construction."""


class NoRootError(ValueError):
    """Raised when a targeting equation has no solution in the admissible range."""


class NonMonotoneError(ValueError):
    """Raised when the weighting function cannot be inverted for the given gamma."""
