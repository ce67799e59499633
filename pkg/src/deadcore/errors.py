"""Exception hierarchy shared across the package."""


class DeadcoreError(Exception):
    """Base class for every error raised by this package."""


# grids and fields

class BadCornersError(DeadcoreError):
    """Domain corners are not ordered lower < upper on some axis."""


class TooFewNodesError(DeadcoreError):
    """Fewer than 3 nodes on an axis; no interior stencil exists."""


class NonuniformSpacingError(DeadcoreError):
    """Requested corners/nodes give unequal spacings across axes."""


class NonFiniteSampleError(DeadcoreError):
    """A sampled field value is NaN or infinite."""


class CenterOutsideDomainError(DeadcoreError):
    """Ball center lies outside the grid bounding box."""


# elliptic operators

class BadEllipticityConstantsError(DeadcoreError):
    """Ellipticity constants violate 0 < lambda <= Lambda."""


class BoundaryNodeError(DeadcoreError):
    """Stencil application requested at a boundary node."""


class StencilOutOfRangeError(DeadcoreError):
    """No stencil direction pair fits inside the grid at this node."""


# solvers

class NonFiniteIterateError(DeadcoreError):
    """An iterate picked up NaN or infinite values."""


class DivergingIterationError(DeadcoreError):
    """Fixed-point iteration kept growing even at the smallest damping."""


# radial closed forms

class ExponentOutOfRangeError(DeadcoreError):
    """Exponents must satisfy p, q >= 0 and p*q < 1."""


# free boundary and experiments

class NegativeInputError(DeadcoreError):
    """Field is more negative than the allowed tolerance."""


class NotAFreeBoundaryPointError(DeadcoreError):
    """Profile center is not within one node of the detected free boundary."""


class BallLeavesDomainError(DeadcoreError):
    """Requested ball radius reaches outside the usable domain."""


class BoundaryOrderingViolatedError(DeadcoreError):
    """Comparison pairs are not ordered on the boundary."""


class EmptyFreeBoundaryError(DeadcoreError):
    """Measure estimate requested on a decomposition with no free boundary."""


class RangeViolationError(DeadcoreError):
    """A solve left the admissible value range for the experiment."""


# configuration

class UnknownKeyError(DeadcoreError):
    """Config contains a key outside the documented schema."""


class MissingKeyError(DeadcoreError):
    """Config lacks a required key."""


class ConstraintViolationError(DeadcoreError):
    """Config values violate a documented invariant."""
