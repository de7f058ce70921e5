"""Exception hierarchy shared by all modules."""


class CommBoundError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(CommBoundError, ValueError):
    pass


class NegativeProbability(InvalidInput):
    def __init__(self, a, b, s, value):
        self.a, self.b, self.s, self.value = a, b, s, value
        super().__init__(f"negative probability {value!r} at (a={a}, b={b}, s={s})")


class RowNotNormalized(InvalidInput):
    def __init__(self, a, b, deficit):
        self.a, self.b, self.deficit = a, b, deficit
        super().__init__(f"row (a={a}, b={b}) does not sum to 1 (deficit {deficit:.3g})")


class ShapeMismatch(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class EmptyInput(InvalidInput):
    pass


class DomainError(InvalidInput):
    pass


class UnsupportedMoment(InvalidInput):
    pass


class NonStochasticInput(InvalidInput):
    pass


class RegionViolation(CommBoundError):
    """A computed parameter left the region where the bound is meaningful."""


class UnsupportedDimension(InvalidInput):
    pass


class IndexOutOfRange(CommBoundError, IndexError):
    pass


class SizeOverflow(CommBoundError):
    def __init__(self, required, cap):
        self.required, self.cap = required, cap
        super().__init__(
            f"enumeration of {required} outcome tuples exceeds the cap {cap}; "
            f"raise the cap to at least {required}"
        )


class NonConvergence(CommBoundError):
    def __init__(self, iterations, best_gap, result=None):
        self.iterations, self.best_gap, self.result = iterations, best_gap, result
        super().__init__(f"no convergence after {iterations} iterations (best gap {best_gap:.3g})")


class DigestMismatch(CommBoundError):
    pass


class Infeasible(CommBoundError):
    def __init__(self, violation, witness):
        self.violation, self.witness = violation, tuple(witness)
        super().__init__(
            f"dual point violates the constraint for s={self.witness} (log-sum {violation:.6g} > 0)"
        )
