"""Exception types shared across the library."""


class CayleyLabError(Exception):
    """Base class for all library errors."""


class BudgetExceededError(CayleyLabError):
    """An enumeration (ball, geodesic family, BFS) hit its element budget."""

    def __init__(self, message, budget=None, reached=None):
        super().__init__(message)
        self.budget = budget
        self.reached = reached


class OutOfRangeError(CayleyLabError):
    """A query needs data beyond the enumerated radius, so an exact answer is impossible."""


class WindowError(CayleyLabError):
    """A point fell outside the finite window a cocycle or table is defined on."""


class WindowRimError(CayleyLabError):
    """Gradient descent reached the rim of a window cocycle with no descending neighbor."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class HorizonExhaustedError(CayleyLabError):
    """A limit/stabilization probe ran out of terms before certifying anything."""


class InvalidConfigError(CayleyLabError):
    """An experiment configuration failed validation."""
