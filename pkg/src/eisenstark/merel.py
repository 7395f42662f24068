"""The Merel unit in (Z/q)* and Mazur's nonvanishing criterion.

The unit is zeta^2 * prod_{i=1}^{(q-1)/2} i^(-8i) mod q, with zeta = 1 for
q = 2 mod 3 and zeta = 2^((q-1)/3) otherwise.  Its projection to the order-p
quotient of (Z/q)* is nonzero exactly when the Eisenstein component of the
level-q cusp space has Z_p-rank 1, which gates the whole eta computation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidPrime
from .ffarith import PLogClass, Residue, is_prime, plog, pow_mod


@dataclass(frozen=True)
class MerelUnit:
    q: int
    value: Residue
    zeta: Residue


def merel_unit(q: int) -> MerelUnit:
    """Compute the Merel unit mod q.

    Exponents -8i are reduced mod q-1 before exponentiation so intermediates
    stay machine-word sized.
    """
    if q == 2 or not is_prime(q):
        raise InvalidPrime(f"q = {q} must be an odd prime")
    if q % 3 == 2:
        zeta = Residue(1, q)
    else:
        zeta = pow_mod(2, (q - 1) // 3, q)
    acc = (zeta.value * zeta.value) % q
    for i in range(1, (q - 1) // 2 + 1):
        e = (-8 * i) % (q - 1)
        acc = (acc * pow(i, e, q)) % q
    return MerelUnit(q, Residue(acc, q), zeta)


def merel_class(q: int, p: int) -> PLogClass:
    """Projection of the Merel unit to the order-p quotient of (Z/q)*."""
    if p < 5:
        raise InvalidPrime(f"p = {p} must be at least 5")
    return plog(q, p, merel_unit(q).value)


def mazur_nonvanishing(q: int, p: int) -> bool:
    """True iff the Merel unit is nontrivial in the order-p quotient.

    This is the gate under which the Eisenstein component is one-dimensional
    and the eta invariant is meaningful; gated rows are reported as infinite
    rather than errors.
    """
    return not merel_class(q, p).is_zero()
