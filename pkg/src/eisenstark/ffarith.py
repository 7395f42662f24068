"""Exact arithmetic in (Z/m)* : powers, primitive roots, discrete logs.

The map ``plog`` projects (Z/q)* onto its unique quotient of prime order p
(for p | q-1), represented as a residue of the discrete log modulo p with
respect to a fixed primitive root.  Individual values depend on the chosen
root; ratios of values do not.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, isqrt

from .errors import IncompatiblePrimes, NonInvertible, ZeroArgument

# dlog switches from a linear scan to baby-step/giant-step above this bound
_DLOG_SCAN_LIMIT = 10**4


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def factorize(n: int) -> dict[int, int]:
    """Prime factorization by trial division (fine for desk-scale n)."""
    out: dict[int, int] = {}
    while n % 2 == 0:
        out[2] = out.get(2, 0) + 1
        n //= 2
    f = 3
    while f * f <= n:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class Residue:
    """An element of Z/m, stored in canonical range [0, m)."""

    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be positive")
        object.__setattr__(self, "value", self.value % self.modulus)

    def __mul__(self, other: "Residue") -> "Residue":
        if self.modulus != other.modulus:
            raise ValueError("mixed moduli")
        return Residue(self.value * other.value, self.modulus)

    def __int__(self) -> int:
        return self.value


def pow_mod(base: Residue | int, exp: int, modulus: int) -> Residue:
    """base**exp mod modulus; negative exponents via the modular inverse.

    Raises NonInvertible if exp < 0 and base is not a unit.
    """
    if modulus < 2:
        raise ValueError("modulus must be >= 2")
    b = int(base) % modulus
    if exp < 0:
        if gcd(b, modulus) != 1:
            raise NonInvertible(f"{b} is not invertible mod {modulus}")
        b = pow(b, -1, modulus)
        exp = -exp
    return Residue(pow(b, exp, modulus), modulus)


def multiplicative_order(a: int, q: int) -> int:
    """Order of a unit a in (Z/q)* for prime q."""
    order = q - 1
    for ell in factorize(q - 1):
        while order % ell == 0 and pow(a, order // ell, q) == 1:
            order //= ell
    return order


def primitive_root(q: int) -> Residue:
    """Smallest positive primitive root mod prime q (deterministic)."""
    if not is_prime(q):
        raise ValueError(f"{q} is not prime")
    if q == 2:
        return Residue(1, 2)
    ells = list(factorize(q - 1))
    for g in range(2, q):
        if all(pow(g, (q - 1) // ell, q) != 1 for ell in ells):
            return Residue(g, q)
    raise AssertionError("unreachable: every prime has a primitive root")


def _second_primitive_root(q: int) -> Residue:
    """Second-smallest primitive root; used to test generator independence."""
    first = primitive_root(q).value
    ells = list(factorize(q - 1))
    for g in range(first + 1, q):
        if all(pow(g, (q - 1) // ell, q) != 1 for ell in ells):
            return Residue(g, q)
    raise ValueError(f"no second primitive root below {q}")


def dlog(q: int, x: Residue | int, generator: Residue | None = None) -> int:
    """Discrete log of x mod prime q to the base primitive_root(q).

    Scans exhaustively for small q, baby-step/giant-step otherwise.
    """
    xv = int(x) % q
    if xv == 0:
        raise ZeroArgument("dlog of 0 is undefined")
    g = int(generator) if generator is not None else primitive_root(q).value
    if q <= _DLOG_SCAN_LIMIT:
        acc = 1
        for e in range(q - 1):
            if acc == xv:
                return e
            acc = (acc * g) % q
        raise AssertionError("unreachable for a primitive root")
    # baby-step / giant-step
    m = isqrt(q - 1) + 1
    baby = {}
    acc = 1
    for j in range(m):
        baby.setdefault(acc, j)
        acc = (acc * g) % q
    step = pow(g, -m, q)
    gamma = xv
    for i in range(m):
        if gamma in baby:
            return (i * m + baby[gamma]) % (q - 1)
        gamma = (gamma * step) % q
    raise AssertionError("unreachable for a primitive root")


@dataclass(frozen=True)
class PLogClass:
    """Image of a unit in the order-p quotient of (Z/q)*.

    ``exponent`` is the discrete log of the represented unit, reduced mod p,
    relative to ``generator``.  Only ratios of exponents are independent of
    the generator choice.
    """

    exponent: int
    p: int
    q: int
    generator: Residue

    def __post_init__(self):
        if (self.q - 1) % self.p != 0:
            raise IncompatiblePrimes(f"{self.p} does not divide {self.q} - 1")
        object.__setattr__(self, "exponent", self.exponent % self.p)

    def __add__(self, other: "PLogClass") -> "PLogClass":
        if (self.p, self.q) != (other.p, other.q):
            raise ValueError("mixed quotient groups")
        return PLogClass(self.exponent + other.exponent, self.p, self.q, self.generator)

    def is_zero(self) -> bool:
        return self.exponent == 0


def plog(q: int, p: int, x: Residue | int, generator: Residue | None = None) -> PLogClass:
    """Project the unit x onto the order-p quotient of (Z/q)*."""
    if (q - 1) % p != 0:
        raise IncompatiblePrimes(f"{p} does not divide {q} - 1")
    gen = generator if generator is not None else primitive_root(q)
    e = dlog(q, x, gen)
    return PLogClass(e % p, p, q, gen)


def legendre(a: int, q: int) -> int:
    """Legendre symbol (a/q) for odd prime q, in {-1, 0, 1}."""
    a %= q
    if a == 0:
        return 0
    s = pow(a, (q - 1) // 2, q)
    return 1 if s == 1 else -1
