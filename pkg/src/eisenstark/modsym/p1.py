"""The projective line P^1(Z/MZ) with fast vectorized index lookup.

Normalization follows Stein, Algorithm 8.29; the full list is produced by
canonicalizing the candidates (1, v) and (g, v) for divisors g of M, which
covers every class.  For vectorized Heilbronn application an M x M lookup
table (class index of each coprime pair, -1 elsewhere) is built by writing
each unit orbit at once.
"""

from __future__ import annotations

from math import gcd

import numpy as np


def _gcdex(a: int, b: int) -> tuple[int, int, int]:
    """(x, y, g) with a x + b y = g = gcd(a, b)."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -x0, -y0, -a
    return x0, y0, a


def _lift_unit(n: int, d: int, a: int) -> int:
    """Lift a unit a mod d (d | n) to a unit mod n."""
    u, v = 1, n
    g = gcd(v, d)
    while g > 1:
        u *= g
        v //= g
        g = gcd(v, g)
    x, y, _ = _gcdex(u, v)
    return (u * x + a * y * v) % n


class P1List:
    """Normalized representatives of P^1(Z/MZ) with index lookup."""

    def __init__(self, M: int):
        if M < 1:
            raise ValueError("level must be >= 1")
        self.M = M
        if M == 1:
            self._list = [(0, 0)]
        else:
            cands = set()
            for v in range(M):
                cands.add(self.reduce(1, v))
            g = 2
            while g * g <= M:
                if M % g == 0:
                    for v in range(M):
                        r = self.reduce(g, v)
                        if r is not None:
                            cands.add(r)
                    for v in range(M):
                        r = self.reduce(M // g, v)
                        if r is not None:
                            cands.add(r)
                g += 1
            r = self.reduce(0, 1)
            if r is not None:
                cands.add(r)
            cands.discard(None)
            self._list = sorted(cands)
        self._table = None
        self._cvec = np.array([c for c, _ in self._list], dtype=np.int64)
        self._dvec = np.array([d for _, d in self._list], dtype=np.int64)
        self._index_small = {cd: i for i, cd in enumerate(self._list)}

    def __len__(self) -> int:
        return len(self._list)

    def __getitem__(self, i: int) -> tuple[int, int]:
        return self._list[i]

    def __iter__(self):
        return iter(self._list)

    def reduce(self, u: int, v: int) -> tuple[int, int] | None:
        """Canonical form of (u : v), or None if gcd(u, v, M) > 1."""
        M = self.M
        if M == 1:
            return (0, 0)
        u %= M
        v %= M
        if u == 0:
            return (0, 1) if gcd(v, M) == 1 else None
        _, s, g = _gcdex(M, u)
        if gcd(g, v) > 1:
            return None
        s = _lift_unit(M, M // g, s % (M // g))
        u, v = g, (s * v) % M
        if g == 1:
            return (1, v)
        v = min((v * t) % M for t in range(1, M, M // g) if gcd(t, M) == 1)
        return (g, v)

    def index(self, u: int, v: int) -> int:
        r = self.reduce(u, v)
        if r is None:
            raise ValueError(f"({u}:{v}) is not a point of P^1(Z/{self.M})")
        return self._index_small[r]

    @property
    def table(self) -> np.ndarray:
        """M*M flat int32 array: table[c*M + d] = index of (c:d), -1 if not coprime."""
        if self._table is None:
            M = self.M
            t = np.full(M * M, -1, dtype=np.int32)
            if M == 1:
                t[0] = 0
            else:
                units = np.array(
                    [u for u in range(1, M) if gcd(u, M) == 1], dtype=np.int64
                )
                for i, (c, d) in enumerate(self._list):
                    cc = (units * c) % M
                    dd = (units * d) % M
                    t[cc * M + dd] = i
            self._table = t
        return self._table

    def index_vec(self, c: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Vectorized index lookup for arrays of residues mod M."""
        return self.table[(c % self.M) * self.M + (d % self.M)]
