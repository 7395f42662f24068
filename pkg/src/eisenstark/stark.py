"""Cubic-field side: defining polynomials, unit reduction, and its p-log class.

For the two built-in fields the fundamental norm-one unit is the polynomial
root itself, so reduction modulo the degree-one prime above an admissible q
is just a root of the cubic mod q.  Admissible means exactly one root, which
happens exactly when (-D/q) = -1 (transposition Frobenius).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NotTransposition, RamifiedPrime, UnsupportedDiscriminant
from .ffarith import PLogClass, Residue, plog

# monic cubics x^3 + a2 x^2 + a1 x + a0 as coefficient tuples (a2, a1, a0)
_CUBICS = {
    -23: (0, -1, -1),  # x^3 - x - 1
    -31: (0, 1, -1),   # x^3 + x - 1
}


@dataclass(frozen=True)
class CubicField:
    disc: int
    coeffs: tuple[int, int, int]  # (a2, a1, a0)

    def evaluate(self, x: int, q: int) -> int:
        a2, a1, a0 = self.coeffs
        return (((x + a2) * x + a1) * x + a0) % q


def cubic_poly(disc: int) -> CubicField:
    """Built-in defining polynomial for the field of the given discriminant.

    The depressed-cubic discriminant identity -4p^3 - 27q^2 is asserted at
    construction.
    """
    if disc not in _CUBICS:
        raise UnsupportedDiscriminant(f"disc = {disc} not supported")
    a2, a1, a0 = _CUBICS[disc]
    assert a2 == 0
    computed = -4 * a1**3 - 27 * a0**2
    assert computed == disc, f"discriminant mismatch: {computed} != {disc}"
    return CubicField(disc, (a2, a1, a0))


def roots_mod_q(field: CubicField, q: int) -> list[Residue]:
    """All roots of the cubic mod prime q, by exhaustive scan."""
    if field.disc % q == 0:
        raise RamifiedPrime(f"q = {q} divides disc {field.disc}")
    return [Residue(x, q) for x in range(q) if field.evaluate(x, q) == 0]


def unit_reduction(field: CubicField, q: int) -> Residue:
    """Reduction of the norm-one unit modulo the degree-one prime above q.

    The unit is the polynomial root, so this is the unique root mod q;
    raises NotTransposition if the root count differs from one.
    """
    roots = roots_mod_q(field, q)
    if len(roots) != 1:
        raise NotTransposition(
            f"cubic has {len(roots)} roots mod {q}; Frobenius is not a transposition"
        )
    r = roots[0]
    assert r.value != 0, "a unit cannot reduce to 0"
    return r


def stark_class(field: CubicField, q: int, p: int) -> PLogClass:
    """p-log class of the reduced unit in the order-p quotient of (Z/q)*."""
    return plog(q, p, unit_reduction(field, q))
