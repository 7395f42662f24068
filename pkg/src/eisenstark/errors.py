"""Exception hierarchy used across the package."""


class EisenstarkError(Exception):
    """Base class for all package errors."""


class NonInvertible(EisenstarkError):
    """A modular inverse was requested for a non-unit."""


class ZeroArgument(EisenstarkError):
    """Discrete logarithm of 0 requested."""


class IncompatiblePrimes(EisenstarkError):
    """p does not divide q - 1, so (Z/q)* has no quotient of order p."""


class InvalidPrime(EisenstarkError):
    """Argument required to be prime (or odd prime) is not."""


class RingMismatch(EisenstarkError):
    """Binary operation on truncated series over different coefficient rings."""


class NotPositiveDefinite(EisenstarkError):
    """Binary quadratic form is not positive definite."""


class UnsupportedDiscriminant(EisenstarkError):
    """Only the two built-in cubic fields (-23, -31) are supported."""


class BadIndex(EisenstarkError):
    """Hecke index n is composite and shares a factor with the level."""


class NotExactDivisor(EisenstarkError):
    """Atkin-Lehner N must exactly divide the level."""


class PrimeDividesLevel(EisenstarkError):
    """q-expansion basis requires p coprime to the level."""


class NotInSpan(EisenstarkError):
    """Series does not lie in the span of the q-expansion basis."""


class RankDeficient(EisenstarkError):
    """A single pairing functional fails to see the whole cusp space."""


class TraceNotOldform(EisenstarkError):
    """Neither operator order produced a trace embeddable at the lower level."""


class EisensteinRankNotOne(EisenstarkError):
    """Eisenstein projector image never stabilized at dimension 1."""


class RamifiedPrime(EisenstarkError):
    """q divides the field discriminant."""


class NotTransposition(EisenstarkError):
    """Cubic polynomial does not have exactly one root mod q."""


class PipelineInconsistency(EisenstarkError):
    """Internal cross-check failed; indicates a bug, not bad input."""
