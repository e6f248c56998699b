"""Package-specific exception types."""


class TorusPpcaError(Exception):
    """Base class for failures raised by this package."""


class LatticeBudgetError(TorusPpcaError):
    """Winding-lattice enumeration would exceed the configured term budget."""


class DegenerateComponentError(TorusPpcaError):
    """A retained eigenvalue does not exceed the estimated noise floor."""
