"""Exceptions used in the fullstab package."""

from typing import Sequence


class FullStabilityError(Exception):
    """Base exception for fullstab errors."""


class InstanceSchemaError(FullStabilityError):
    """Instance file does not follow the expected schema."""

    def __init__(self, field: str, reason: str):
        """Instance file does not follow the expected schema."""
        self.field = field
        super().__init__(f"Invalid instance field '{field}': {reason}")


class ShapeMismatchError(FullStabilityError):
    """Array does not have the expected shape."""

    def __init__(self, name: str, expected: Sequence[int], found: Sequence[int]):
        """Array does not have the expected shape."""
        super().__init__(
            f"Shape mismatch for '{name}': expected {tuple(expected)}, found {tuple(found)}"
        )


class ReferenceResidualError(FullStabilityError):
    """The reference quadruple does not solve the variational system."""

    def __init__(self, residual: float, tolerance: float):
        """The reference quadruple does not solve the variational system."""
        self.residual = residual
        super().__init__(
            f"Reference point violates the inclusion: residual {residual:.3e} "
            f"exceeds tolerance {tolerance:.1e}"
        )


class InfeasiblePolyhedron(FullStabilityError):
    """The polyhedron has no point."""

    def __init__(self, reason: str = "linear feasibility problem has no solution"):
        """The polyhedron has no point."""
        super().__init__(f"Infeasible polyhedron: {reason}")


class PointNotInSet(FullStabilityError):
    """The point does not belong to the set."""

    def __init__(self, violation: float):
        """The point does not belong to the set."""
        self.violation = violation
        super().__init__(f"Point violates the set constraints by {violation:.3e}")


class NotANormalVector(FullStabilityError):
    """The vector is not normal to the set at the point."""

    def __init__(self, distance: float):
        """The vector is not normal to the set at the point."""
        super().__init__(
            f"Vector is not in the normal cone: distance {distance:.3e} to the cone"
        )


class QPIterationLimit(FullStabilityError):
    """The active-set QP solver ran out of iterations."""

    def __init__(self, iterations: int):
        """The active-set QP solver ran out of iterations."""
        super().__init__(f"Active-set QP did not terminate within {iterations} iterations")


class SizeLimitExceeded(FullStabilityError):
    """A combinatorial enumeration exceeded its size limit."""

    def __init__(self, what: str, size: int, limit: int):
        """A combinatorial enumeration exceeded its size limit."""
        super().__init__(f"{what} has size {size}, the enumeration limit is {limit}")


class EmptyIntersection(FullStabilityError):
    """The set does not meet the ball."""

    def __init__(self, distance: float, radius: float):
        """The set does not meet the ball."""
        super().__init__(
            f"Set is at distance {distance:.3e} from the ball center, beyond radius {radius:.3e}"
        )


class ProxParameterError(FullStabilityError):
    """The proximal parameter is outside the admissible range."""

    def __init__(self, reason: str):
        """The proximal parameter is outside the admissible range."""
        super().__init__(f"Invalid proximal parameter: {reason}")


class InsufficientSamples(FullStabilityError):
    """Not enough usable samples were produced."""

    def __init__(self, found: int, required: int):
        """Not enough usable samples were produced."""
        super().__init__(f"Only {found} usable samples, at least {required} are required")


class UnsupportedPotential(FullStabilityError):
    """The operation is not available for the potential class."""

    def __init__(self, kind: str, operation: str):
        """The operation is not available for the potential class."""
        super().__init__(f"Operation '{operation}' does not support potential kind '{kind}'")


class NonContractiveRegime(FullStabilityError):
    """Strong monotonicity does not dominate the prox-parameter."""

    def __init__(self, sigma: float, r: float):
        """Strong monotonicity does not dominate the prox-parameter."""
        self.sigma = sigma
        self.r = r
        super().__init__(
            f"Strong monotonicity modulus {sigma:.6g} does not exceed the "
            f"prox-parameter {r:.6g}: the fixed-point map is not a contraction"
        )


class ContractionViolation(FullStabilityError):
    """The measured step ratio exceeds the theoretical contraction factor."""

    def __init__(self, ratio: float, alpha: float, steps: int):
        """The measured step ratio exceeds the theoretical contraction factor."""
        self.ratio = ratio
        super().__init__(
            f"Measured step ratio {ratio:.6g} exceeded alpha {alpha:.6g} + 0.01 "
            f"for {steps} consecutive iterations"
        )


class MaxIterationsExceeded(FullStabilityError):
    """The fixed-point iteration did not converge."""

    def __init__(self, max_iter: int, step: float):
        """The fixed-point iteration did not converge."""
        super().__init__(
            f"No convergence within {max_iter} iterations, last step norm {step:.3e}"
        )


class SolutionResidualError(FullStabilityError):
    """The converged point does not satisfy the inclusion."""

    def __init__(self, residual: float):
        """The converged point does not satisfy the inclusion."""
        super().__init__(f"Converged point has inclusion residual {residual:.3e}")


class InfeasiblePoint(FullStabilityError):
    """The point violates the inequality system."""

    def __init__(self, index: int, value: float):
        """The point violates the inequality system."""
        super().__init__(f"Constraint {index} is violated: value {value:.3e} > 0")


class LPFailure(FullStabilityError):
    """A linear program could not be solved."""

    def __init__(self, message: str):
        """A linear program could not be solved."""
        super().__init__(f"Linear program failed: {message}")


class EmptyMultiplierSet(FullStabilityError):
    """No Lagrange multiplier exists at the point."""

    def __init__(self, residual: float):
        """No Lagrange multiplier exists at the point."""
        super().__init__(
            f"Multiplier set is empty: stationarity residual {residual:.3e}"
        )


class UnboundedMultiplierSet(FullStabilityError):
    """The multiplier set is unbounded."""

    def __init__(self):
        """The multiplier set is unbounded."""
        super().__init__("Multiplier set is unbounded (MFCQ fails at the point)")


class MFCQFailure(FullStabilityError):
    """The Mangasarian-Fromovitz qualification fails where it is required."""

    def __init__(self, margin: float):
        """The Mangasarian-Fromovitz qualification fails where it is required."""
        super().__init__(f"MFCQ fails at the reference point: margin {margin:.3e}")


class NoIndependentSubset(FullStabilityError):
    """No nonempty linearly independent subset of active gradients exists."""

    def __init__(self):
        """No nonempty linearly independent subset of active gradients exists."""
        super().__init__("No linearly independent subset of positive-multiplier gradients")


class TableValidationError(FullStabilityError):
    """The coderivative table disagrees with the graph normal cone oracle."""

    def __init__(self, piece: str, kind: str, w: float):
        """The coderivative table disagrees with the graph normal cone oracle."""
        super().__init__(
            f"Coderivative table mismatch on piece '{piece}' ({kind}) at w={w:.3g}"
        )


class PairSolveError(FullStabilityError):
    """Solving the system failed for a sampled perturbation pair."""

    def __init__(self, index: int, reason: str):
        """Solving the system failed for a sampled perturbation pair."""
        self.index = index
        super().__init__(f"Solve failed on sampled pair {index}: {reason}")
