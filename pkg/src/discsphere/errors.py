"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A computation would exceed a configured memory or work cap."""


class ToleranceError(ArithmeticError):
    """A numerical self-check exceeded its stated tolerance."""


class EmptyAnnulusError(ValueError):
    """An annulus contains no lattice points."""


class RecursionDepthError(RuntimeError):
    """The stopping-cube recursion went deeper than log2 of the top side."""
