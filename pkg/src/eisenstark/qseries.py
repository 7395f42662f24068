"""Truncated q-expansions and the concrete modular forms the pipeline needs.

A TruncatedSeries holds coefficients a_0 .. a_{prec-1} over Z (p=None) or
over F_p.  Constructors: Dedekind eta factors via the pentagonal number
theorem, theta series of positive-definite binary quadratic forms, the
weight-one forms for discriminants -23 and -31 as half-differences of
thetas, V_m / U_m, and the weight-2 Eisenstein series at prime level q
reduced mod p.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

from .errors import (
    IncompatiblePrimes,
    NotPositiveDefinite,
    RingMismatch,
    UnsupportedDiscriminant,
)

SUPPORTED_DISCRIMINANTS = (-23, -31)

# (a, b, c) coefficients of the principal and non-principal reduced forms
_THETA_PAIRS = {
    -23: ((1, 1, 6), (2, 1, 3)),
    -31: ((1, 1, 8), (2, 1, 4)),
}


@dataclass(frozen=True)
class TruncatedSeries:
    """q-expansion known through q^(prec-1), over Z or F_p."""

    coeffs: tuple[int, ...]
    p: int | None = None

    def __post_init__(self):
        if self.p is not None:
            object.__setattr__(self, "coeffs", tuple(c % self.p for c in self.coeffs))

    @property
    def prec(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, n: int) -> int:
        return self.coeffs[n]

    def _check_ring(self, other: "TruncatedSeries") -> None:
        if self.p != other.p:
            raise RingMismatch(f"coefficient rings differ: {self.p} vs {other.p}")

    def add(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check_ring(other)
        n = min(self.prec, other.prec)
        return TruncatedSeries(
            tuple(self.coeffs[i] + other.coeffs[i] for i in range(n)), self.p
        )

    def sub(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check_ring(other)
        n = min(self.prec, other.prec)
        return TruncatedSeries(
            tuple(self.coeffs[i] - other.coeffs[i] for i in range(n)), self.p
        )

    def scale(self, c: int) -> "TruncatedSeries":
        return TruncatedSeries(tuple(c * a for a in self.coeffs), self.p)

    def mul(self, other: "TruncatedSeries") -> "TruncatedSeries":
        """Cauchy product truncated to the smaller precision."""
        self._check_ring(other)
        n = min(self.prec, other.prec)
        out = [0] * n
        for i, a in enumerate(self.coeffs[:n]):
            if a == 0:
                continue
            for j in range(n - i):
                b = other.coeffs[j]
                if b:
                    out[i + j] += a * b
        if self.p is not None:
            out = [c % self.p for c in out]
        return TruncatedSeries(tuple(out), self.p)

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return self.mul(other)

    def truncate(self, prec: int) -> "TruncatedSeries":
        if prec > self.prec:
            raise ValueError("cannot extend a truncated series")
        return TruncatedSeries(self.coeffs[:prec], self.p)

    def reduce(self, p: int) -> "TruncatedSeries":
        if self.p is not None and self.p != p:
            raise RingMismatch("series already reduced at a different prime")
        return TruncatedSeries(tuple(c % p for c in self.coeffs), p)


def mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return a.mul(b)


def eta_factor(d: int, prec: int) -> TruncatedSeries:
    """prod_{n>=1} (1 - q^(d n)) truncated to prec terms.

    Euler's pentagonal number theorem for d = 1, substitution q -> q^d
    otherwise.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    out = [0] * prec
    out[0] = 1 if prec > 0 else 0
    k = 1
    while True:
        e1 = d * k * (3 * k - 1) // 2
        e2 = d * k * (3 * k + 1) // 2
        if e1 >= prec and e2 >= prec:
            break
        sign = -1 if k % 2 == 1 else 1
        if e1 < prec:
            out[e1] += sign
        if e2 < prec:
            out[e2] += sign
        k += 1
    return TruncatedSeries(tuple(out))


def theta_bqf(a: int, b: int, c: int, prec: int) -> TruncatedSeries:
    """Theta series of a x^2 + b x y + c y^2 over Z^2, truncated.

    Lattice points are enumerated directly; the form must be positive
    definite (a > 0 and 4ac - b^2 > 0).
    """
    disc = 4 * a * c - b * b
    if a <= 0 or disc <= 0:
        raise NotPositiveDefinite(f"({a}, {b}, {c}) is not positive definite")
    out = [0] * prec
    if prec == 0:
        return TruncatedSeries(())
    nmax = prec - 1
    ymax = isqrt(4 * a * nmax // disc) + 1
    for y in range(-ymax, ymax + 1):
        # a x^2 + (b y) x + (c y^2 - n) <= 0 for some n <= nmax
        rad = b * b * y * y - 4 * a * (c * y * y - nmax)
        if rad < 0:
            continue
        r = isqrt(rad)
        lo = (-b * y - r - 2 * a + 1) // (2 * a)
        hi = (-b * y + r) // (2 * a)
        for x in range(lo, hi + 1):
            n = a * x * x + b * x * y + c * y * y
            if 0 <= n <= nmax:
                out[n] += 1
    return TruncatedSeries(tuple(out))


def v_operator(s: TruncatedSeries, m: int) -> TruncatedSeries:
    """V_m: a_n -> a_{n/m} when m | n, else 0; precision preserved."""
    if m < 1:
        raise ValueError("m must be >= 1")
    out = [0] * s.prec
    for i in range(0, s.prec, m):
        out[i] = s.coeffs[i // m]
    return TruncatedSeries(tuple(out), s.p)


def u_operator(s: TruncatedSeries, m: int) -> TruncatedSeries:
    """U_m: a_n -> a_{n m}; resulting precision floor(prec/m)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    n = s.prec // m
    return TruncatedSeries(tuple(s.coeffs[i * m] for i in range(n)), s.p)


def weight_one_form(disc: int, prec: int) -> TruncatedSeries:
    """The integral weight-one newform of level |disc|, normalized a_1 = 1.

    Constructed as half the difference of the theta series of the two
    reduced form classes of the discriminant.  Integrality of the halved
    coefficients is asserted; failure would indicate a wrong form pair.
    """
    if disc not in _THETA_PAIRS:
        raise UnsupportedDiscriminant(f"disc = {disc} not in {SUPPORTED_DISCRIMINANTS}")
    (a1, b1, c1), (a2, b2, c2) = _THETA_PAIRS[disc]
    diff = theta_bqf(a1, b1, c1, prec).sub(theta_bqf(a2, b2, c2, prec))
    half = []
    for n, v in enumerate(diff.coeffs):
        if v % 2 != 0:
            raise AssertionError(f"theta difference odd at q^{n}; wrong form pair")
        half.append(v // 2)
    if prec > 1 and half[1] != 1:
        raise AssertionError("weight-one form not normalized: a_1 != 1")
    return TruncatedSeries(tuple(half))


def eisenstein_series_level_q(q: int, p: int, prec: int) -> TruncatedSeries:
    """Weight-2 Eisenstein series at level q, reduced mod p.

    a_0 = (q-1)/24 mod p (zero since p | q-1 and p >= 5), a_n the sum of
    divisors of n prime to q.  Its reduction is a cusp form mod p.
    """
    if (q - 1) % p != 0 or p < 5:
        raise IncompatiblePrimes(f"need p >= 5 and p | q - 1; got p={p}, q={q}")
    out = [0] * prec
    if prec > 0:
        a0 = ((q - 1) * pow(24, -1, p)) % p
        assert a0 == 0, "Eisenstein constant term must vanish mod p"
        out[0] = 0
    for d in range(1, prec):
        if d % q == 0:
            continue
        for n in range(d, prec, d):
            out[n] += d
    return TruncatedSeries(tuple(c % p for c in out), p)
