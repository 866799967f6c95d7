"""Exception hierarchy shared by all modules."""


class MPMDError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MPMDError, ValueError):
    """Input violates a structural contract (metric axioms, parity, ...)."""


class AsymmetricDistance(ValidationError):
    def __init__(self, i, j, dij, dji):
        super().__init__(f"d[{i}][{j}]={dij!r} != d[{j}][{i}]={dji!r}")
        self.i, self.j = i, j


class TriangleViolation(ValidationError):
    def __init__(self, i, j, k, excess):
        super().__init__(
            f"triangle inequality violated: d[{i}][{k}] exceeds "
            f"d[{i}][{j}] + d[{j}][{k}] by {excess:.3g}")
        self.i, self.j, self.k = i, j, k


class NonPositiveRate(ValidationError):
    def __init__(self, x, rate):
        super().__init__(f"rate of point {x} must be > 0, got {rate!r}")
        self.x = x


class NegativeDuration(ValidationError):
    pass


class OddSequence(ValidationError):
    pass


class NonPositivePenalty(ValidationError):
    pass


class UncoveredRequest(ValidationError):
    pass


class DoubleCoveredRequest(ValidationError):
    pass


class Unreachable(MPMDError):
    """Bounded delay function can never pay for the distance."""


class DivergentIntegral(MPMDError):
    pass


class TooLarge(MPMDError):
    pass


class Infeasible(MPMDError):
    pass


class InvariantViolation(MPMDError, AssertionError):
    """An algorithmic invariant that must hold on every run was broken."""


class BoundViolation(MPMDError):
    def __init__(self, quantity, observed, bound):
        super().__init__(
            f"{quantity}: observed {observed:.6g} violates bound {bound:.6g}")
        self.quantity = quantity
        self.observed = observed
        self.bound = bound


class InsufficientRange(MPMDError):
    pass
