"""Error hierarchy for ftcl.

All errors are ``ValueError`` subclasses so callers can keep catching the
plain ``ValueError`` for invalid input.
"""


class FtclError(ValueError):
    """Base class for every ftcl error."""


class HypothesisFailure(FtclError):
    """The curve/m pair violates a standing hypothesis.

    ``conditions`` lists the names of the failed conditions.
    """

    def __init__(self, message: str, conditions: list[str] | None = None):
        super().__init__(message)
        self.conditions = list(conditions or [])


class ComputationFailure(FtclError):
    """A computation could not be completed."""


class NotOrdinary(ComputationFailure):
    """3 divides a_3: the curve is not ordinary at 3."""


class SingularCurve(ComputationFailure):
    """The Weierstrass equation has zero discriminant."""


class NoRecognition(ComputationFailure):
    """No exact value within the height bound matches the float."""


class RecognitionFailure(ComputationFailure):
    """An exact measure value could not be embedded for comparison."""


class PrecisionExhausted(ComputationFailure):
    """A 3-adic computation consumed all available digits."""


class RingMismatch(ComputationFailure):
    """Operands live in different coefficient rings."""


class BadReduction(ComputationFailure):
    """The prime divides the conductor."""


class BadPrime(ComputationFailure):
    """The prime is not admissible for the requested operation."""


class SignUnknown(ComputationFailure):
    """The functional equation sign is unset and cannot be solved."""


class CoefficientShortfall(ComputationFailure):
    """Fewer Dirichlet coefficients than the engine needs."""


class AmbiguousSign(ComputationFailure):
    """Neither or both candidate signs satisfy the functional equation."""


class MissingLocalFactor(ComputationFailure):
    """An Euler factor to be removed is not in the table."""


class EvaluationDegenerate(ComputationFailure):
    """A q-expansion evaluated too close to zero."""


class SlowConvergence(ComputationFailure):
    """A q-series does not converge with the available coefficients."""


class InseparableBlock(ComputationFailure):
    """Two eigen-systems in the block cannot be told apart."""


class ParityViolation(ComputationFailure):
    """Character parity does not match the Eisenstein weight."""


class KrylovUnstable(ComputationFailure):
    """The U_3 Krylov span did not stabilise within the truncation."""
