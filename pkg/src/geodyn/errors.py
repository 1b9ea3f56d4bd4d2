"""Exception hierarchy shared by every geodyn module."""

from __future__ import annotations


class GeodynError(Exception):
    """Base class for all errors raised by geodyn."""


class LexError(GeodynError):
    def __init__(self, position: int, character: str):
        self.position = position
        self.character = character
        super().__init__(f"unexpected character {character!r} at byte {position}")


class ParseError(GeodynError):
    def __init__(self, position: int, expected: str, found: str | None = None):
        self.position = position
        self.expected = expected
        self.found = found
        msg = f"expected {expected} at byte {position}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnknownVariable(GeodynError):
    def __init__(self, name: str, position: int, dim: int):
        self.name = name
        self.position = position
        self.dim = dim
        super().__init__(f"unknown variable {name!r} at byte {position} (chart dimension {dim})")


class DomainError(GeodynError, ArithmeticError):
    """Real-valued evaluation left the domain of an operation."""


class UnknownMetric(GeodynError):
    pass


class BadParam(GeodynError):
    pass


class SchemaError(GeodynError):
    """A metric or connection file does not match the documented schema."""


class OutOfDomain(GeodynError):
    def __init__(self, point, guard: str, value: float):
        self.point = tuple(float(p) for p in point)
        self.guard = guard
        self.value = value
        super().__init__(f"point {self.point} violates guard '{guard} > 0' (value {value!r})")


class DegenerateMetric(GeodynError):
    def __init__(self, det: float, threshold: float):
        self.det = det
        self.threshold = threshold
        super().__init__(f"degenerate metric: |det g| = {abs(det):.3e} < {threshold:.3e}")


class DimensionMismatch(GeodynError, ValueError):
    pass


class StencilOutOfDomain(GeodynError):
    def __init__(self, point, direction: int, step: float, cause: OutOfDomain):
        self.point = tuple(float(p) for p in point)
        self.direction = direction
        self.step = step
        self.cause = cause
        super().__init__(
            f"finite-difference stencil at {self.point} leaves the chart "
            f"along x{direction + 1} (h={step:.3e}): {cause}"
        )


class MaxStepsExceeded(GeodynError):
    def __init__(self, max_steps: int, t: float):
        self.max_steps = max_steps
        self.t = t
        super().__init__(f"integration stopped after {max_steps} steps at t={t!r}")


class DomainExit(GeodynError):
    """Raised only under the 'raise' exit policy; carries the last valid state."""

    def __init__(self, state, cause: GeodynError):
        self.state = state
        self.cause = cause
        super().__init__(f"trajectory left the chart domain at t={state.t!r}: {cause}")


class SeriesNotConverged(GeodynError):
    pass


class ExpmOverflow(GeodynError, OverflowError):
    pass
