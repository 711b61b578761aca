"""Exception hierarchy shared by all omegalab modules."""


class OmegaLabError(Exception):
    """Base class for every error raised by omegalab."""


class CapacityError(OmegaLabError):
    """A resource guard was hit (table or interval larger than allowed)."""


class InsufficientPrimesError(OmegaLabError):
    """The supplied prime table does not reach the required limit."""


class DegenerateFormsError(OmegaLabError):
    """Two linear forms have zero determinant a1*b2 - a2*b1."""


class DomainError(OmegaLabError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class PoleError(DomainError):
    """Evaluation at a pole (Gamma at a nonpositive integer)."""


class CutoffError(OmegaLabError):
    """A truncation bound exceeds the requested tolerance."""


class ToleranceError(OmegaLabError):
    """An iterative solver could not reach its tolerance."""


class InfeasibleConfigError(OmegaLabError):
    """A parameter configuration violates one or more constraints."""

    def __init__(self, violations, config=None):
        self.violations = list(violations)
        self.config = config
        super().__init__("infeasible configuration: " + "; ".join(self.violations))
