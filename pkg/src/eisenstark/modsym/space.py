"""Weight-2 modular symbols for Gamma_0(M) over exact rationals.

The space is presented by Manin symbols (points of P^1(Z/M)) modulo the
2-term and 3-term relations; the quotient is computed by exact sparse
elimination.  The boundary map to cusp classes cuts out the cuspidal
subspace, whose dimension is checked against 2 * genus(X_0(M)) at
construction.  Operators (Hecke via Merel's matrices, U_n via cosets,
Atkin-Lehner via an integral matrix of determinant N) act on quotient
coordinates through a single projection matrix P_num / P_den.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

import numpy as np

from ..errors import BadIndex, NotExactDivisor
from ..ffarith import is_prime
from .arith import genus_x0, nu_inf
from .heilbronn import merel_matrices
from .p1 import P1List, _gcdex
from .relations import solve_relations

_space_cache: dict[int, "ModularSymbolSpace"] = {}
_SPACE_CACHE_KEEP = 3


def _lift_to_coprime(c: int, d: int, M: int) -> tuple[int, int]:
    """Lift a P^1(Z/M) representative to integers with gcd(c, d) = 1."""
    if M == 1:
        return 0, 1
    c %= M
    d %= M
    if c == 0:
        return 0, 1
    while gcd(c, d) != 1:
        d += M
    return c, d


def _sl2_lift(c: int, d: int, M: int) -> tuple[int, int, int, int]:
    """An SL_2(Z) matrix (a, b; c', d') with (c', d') = (c, d) mod M."""
    c, d = _lift_to_coprime(c, d, M)
    x, y, g = _gcdex(c, d)
    assert g == 1
    # det = y*d - (-x)*c = x*c + y*d = 1
    return y, -x, c, d


def _cusp_reduce(p: int, q: int) -> tuple[int, int]:
    """Canonical (numerator, denominator >= 0) form of a cusp p/q, oo = (1, 0)."""
    if q == 0:
        return (1, 0)
    g = gcd(p, q)
    p, q = p // g, q // g
    if q < 0:
        p, q = -p, -q
    return (p, q)


def cusps_equivalent(c1: tuple[int, int], c2: tuple[int, int], M: int) -> bool:
    """Gamma_0(M)-equivalence of cusps p1/q1, p2/q2 in lowest terms.

    With s_i p_i = 1 mod q_i the cusps are equivalent iff
    s1 q2 = s2 q1 mod gcd(q1 q2, M); the uniform formula covers oo = 1/0.
    """
    (p1, q1), (p2, q2) = c1, c2
    s1 = _gcdex(p1, q1)[0]
    s2 = _gcdex(p2, q2)[0]
    return (s1 * q2 - s2 * q1) % gcd(q1 * q2, M) == 0


class ModularSymbolSpace:
    """Manin-symbol presentation of weight-2 modular symbols for Gamma_0(M)."""

    def __init__(self, M: int, _payload: dict | None = None):
        self.M = M
        self.p1 = P1List(M)
        n = len(self.p1)
        self.n_gens = n

        # right action of sigma = (0,-1;1,0), tau = (0,-1;1,-1), star = (-c:d)
        sigma = np.empty(n, dtype=np.int64)
        tau = np.empty(n, dtype=np.int64)
        star = np.empty(n, dtype=np.int64)
        for i, (c, d) in enumerate(self.p1):
            sigma[i] = self.p1.index(d, -c)
            tau[i] = self.p1.index(d, -c - d)
            star[i] = self.p1.index(-c, d)
        self.sigma = sigma
        self.tau = tau
        self.star_perm = star

        if _payload is not None:
            self.survivors = [int(x) for x in _payload["survivors"]]
            self.dim_quotient = len(self.survivors)
            self.P_den = int(_payload["P_den"][0])
            self.P_num = _payload["P_num"].astype(np.int64)
            self.X = _payload["X"].astype(np.int64)
            self._finish_setup()
            return

        # two-term relations x + x.sigma = 0: pair generators up to sign
        zero_gen = np.zeros(n, dtype=bool)
        rep = np.arange(n, dtype=np.int64)
        sign = np.ones(n, dtype=np.int64)
        for i in range(n):
            j = int(sigma[i])
            if j == i:
                zero_gen[i] = True  # 2x = 0
            elif j < i:
                rep[i] = j
                sign[i] = -1

        # first pass: collect all representatives forced to zero (tau-fixed: 3x = 0)
        zero_reps: set[int] = set()
        for i in range(n):
            if int(tau[i]) == i and not zero_gen[i]:
                zero_reps.add(int(rep[i]))

        # second pass: one 3-term relation per tau-orbit, over representatives
        relations: list[dict[int, Fraction]] = []
        seen = np.zeros(n, dtype=bool)
        for i in range(n):
            if seen[i]:
                continue
            t1 = int(tau[i])
            t2 = int(tau[t1])
            orbit = {i, t1, t2}
            for j in orbit:
                seen[j] = True
            if len(orbit) == 1:
                continue
            assert len(orbit) == 3, "tau orbits have size 1 or 3"
            rel: dict[int, Fraction] = {}
            for j in (i, t1, t2):
                if zero_gen[j]:
                    continue
                r, s = int(rep[j]), int(sign[j])
                if r in zero_reps:
                    continue
                rel[r] = rel.get(r, Fraction(0)) + s
            rel = {c: v for c, v in rel.items() if v != 0}
            if rel:
                relations.append(rel)

        unknowns = [
            i
            for i in range(n)
            if rep[i] == i and not zero_gen[i] and i not in zero_reps
        ]
        free, expr = solve_relations(unknowns, relations)

        self.survivors = free  # generator indices forming the quotient basis
        self.dim_quotient = len(free)
        pos = {g: k for k, g in enumerate(free)}

        # projection of every generator to quotient coordinates
        proj: list[dict[int, Fraction]] = []
        for i in range(n):
            r, s = int(rep[i]), int(sign[i])
            if zero_gen[i] or r in zero_reps:
                proj.append({})
            elif r in pos:
                proj.append({pos[r]: Fraction(s)})
            else:
                e = expr[r]
                proj.append({pos[c]: s * v for c, v in e.items() if v != 0})

        den = 1
        for d_ in proj:
            for v in d_.values():
                den = den * v.denominator // gcd(den, v.denominator)
        assert den < 2**31, "projection denominator unexpectedly large"
        self.P_den = den
        P = np.zeros((self.dim_quotient, n), dtype=np.int64)
        for i, d_ in enumerate(proj):
            for k, v in d_.items():
                P[k, i] = int(v * den)
        assert int(np.abs(P).max(initial=0)) < 2**40, "projection entries too large"
        self.P_num = P
        self.X = None
        self._finish_setup()

    def _finish_setup(self) -> None:
        """Lifts, cusps, boundary, the cuspidal kernel, and dimension checks."""
        M = self.M
        n = self.n_gens
        self.lifts = [_sl2_lift(c, d, M) for (c, d) in self.p1]
        cusp_list: list[tuple[int, int]] = []

        def cusp_class(cu: tuple[int, int]) -> int:
            for idx, known in enumerate(cusp_list):
                if cusps_equivalent(cu, known, M):
                    return idx
            cusp_list.append(cu)
            return len(cusp_list) - 1

        # discover every cusp class (all generators), then build boundary
        # columns for the surviving coordinates only
        endpoint_classes: list[tuple[int, int]] = []
        for g in range(n):
            a, b, c, d = self.lifts[g]
            endpoint_classes.append(
                (cusp_class(_cusp_reduce(a, c)), cusp_class(_cusp_reduce(b, d)))
            )
        cols: list[tuple[int, int, int]] = []
        for k, g in enumerate(self.survivors):
            c_inf, c_zero = endpoint_classes[g]
            if c_inf != c_zero:
                cols.append((k, c_inf, 1))
                cols.append((k, c_zero, -1))
        boundary = np.zeros((self.dim_quotient, len(cusp_list)), dtype=np.int64)
        for k, cc, v in cols:
            boundary[k, cc] += v
        self.cusps = cusp_list
        self.boundary = boundary
        assert len(cusp_list) == nu_inf(M), "cusp count disagrees with nu_inf"

        self.genus = genus_x0(M)
        assert self.dim_quotient == 2 * self.genus + len(cusp_list) - 1, (
            "quotient dimension disagrees with 2g + c - 1"
        )

        if self.X is None:
            self.X = self._cuspidal_kernel()
        else:
            assert not np.any(self.X @ self.boundary), "cached kernel not cuspidal"
        self.dim_cuspidal = self.X.shape[0]
        assert self.dim_cuspidal == 2 * self.genus, "cuspidal dimension != 2 * genus"
        self._x_solver = None

    # ------------------------------------------------------------------ #

    def _cuspidal_kernel(self) -> np.ndarray:
        """Primitive integer basis of ker(boundary) in quotient coordinates."""
        D = self.dim_quotient
        nc = len(self.cusps)
        B = [
            [Fraction(int(self.boundary[k, j])) for k in range(D)] for j in range(nc)
        ]
        pivots: list[int] = []
        r = 0
        for col in range(D):
            sel = None
            for i in range(r, len(B)):
                if B[i][col] != 0:
                    sel = i
                    break
            if sel is None:
                continue
            B[r], B[sel] = B[sel], B[r]
            pv = B[r][col]
            B[r] = [x / pv for x in B[r]]
            for i in range(len(B)):
                if i != r and B[i][col] != 0:
                    f = B[i][col]
                    B[i] = [x - f * y for x, y in zip(B[i], B[r])]
            pivots.append(col)
            r += 1
        free_cols = [c for c in range(D) if c not in pivots]
        rows = []
        for fc in free_cols:
            v = [Fraction(0)] * D
            v[fc] = Fraction(1)
            for i, pc in enumerate(pivots):
                v[pc] = -B[i][fc]
            den = 1
            for x in v:
                den = den * x.denominator // gcd(den, x.denominator)
            iv = [int(x * den) for x in v]
            g = 0
            for x in iv:
                g = gcd(g, x)
            if g > 1:
                iv = [x // g for x in iv]
            rows.append(iv)
        return np.array(rows, dtype=np.int64).reshape(len(rows), D)

    # ------------------------------------------------------------------ #
    # operators on quotient coordinates: (num, den) with columns = images
    # of basis coordinates, denominator P_den throughout
    # ------------------------------------------------------------------ #

    def star_quot(self) -> tuple[np.ndarray, int]:
        D = self.dim_quotient
        num = np.zeros((D, D), dtype=np.int64)
        for k, g in enumerate(self.survivors):
            num[:, k] = self.P_num[:, int(self.star_perm[g])]
        return num, self.P_den

    def hecke_quot(self, n: int) -> tuple[np.ndarray, int]:
        """T_n on quotient coordinates via Merel's family (any n >= 1)."""
        D = self.dim_quotient
        num = np.zeros((D, D), dtype=np.int64)
        mats = merel_matrices(n)
        tab = self.p1.table
        M = self.M
        for k, g in enumerate(self.survivors):
            c0, d0 = self.p1[g]
            acc = np.zeros(D, dtype=np.int64)
            for a, b, c, d in mats:
                idx = tab[((c0 * a + d0 * c) % M) * M + (c0 * b + d0 * d) % M]
                if idx >= 0:
                    acc += self.P_num[:, idx]
            num[:, k] = acc
        return num, self.P_den

    def path_symbol(self, alpha: tuple[int, int], beta: tuple[int, int]) -> np.ndarray:
        """Quotient coordinates (times P_den) of the symbol {alpha, beta}.

        Endpoints are rationals (num, den), with (1, 0) for oo.  Manin's
        continued-fraction trick expresses the path over Manin symbols.
        """
        return self._path_from_inf(beta) - self._path_from_inf(alpha)

    def _path_from_inf(self, cusp: tuple[int, int]) -> np.ndarray:
        """Coordinates (times P_den) of the symbol {oo, p/q}."""
        p, q = cusp
        D = self.dim_quotient
        out = np.zeros(D, dtype=np.int64)
        if q == 0:
            return out
        g = gcd(p, q)
        p, q = p // g, q // g
        if q < 0:
            p, q = -p, -q
        tab = self.p1.table
        M = self.M
        # convergents p_j/q_j; term j contributes Manin symbol (q_j : (-1)^(j-1) q_(j-1))
        qm1, qm2 = 0, 1  # q_(-1), q_(-2)
        a, b = p, q
        sgn = -1  # (-1)^(j-1) at j = 0
        while True:
            t, r = divmod(a, b)
            qj = t * qm1 + qm2
            idx = tab[(qj % M) * M + (sgn * qm1) % M]
            assert idx >= 0, "continued-fraction symbol must be a valid Manin symbol"
            out += self.P_num[:, idx]
            if r == 0:
                break
            qm2, qm1 = qm1, qj
            a, b = b, r
            sgn = -sgn
        return out

    def atkin_lehner_quot(self, N: int) -> tuple[np.ndarray, int]:
        """W_N for prime N exactly dividing M, on quotient coordinates."""
        M = self.M
        if not is_prime(N) or M % N != 0 or gcd(N, M // N) != 1:
            raise NotExactDivisor(f"N = {N} must be a prime exactly dividing M = {M}")
        # (N, b; M, N d) with det = N: N d - (M/N) b = 1
        x, y, g = _gcdex(N, M // N)
        assert g == 1
        W = (N, -y, M, N * x)
        assert W[0] * W[3] - W[1] * W[2] == N
        D = self.dim_quotient
        num = np.zeros((D, D), dtype=np.int64)
        for k, gidx in enumerate(self.survivors):
            a, b, c, d = self.lifts[gidx]
            # W applied to the endpoints g(0) = b/d and g(oo) = a/c
            alpha = (W[0] * b + W[1] * d, W[2] * b + W[3] * d)
            beta = (W[0] * a + W[1] * c, W[2] * a + W[3] * c)
            num[:, k] = self.path_symbol(alpha, beta)
        return num, self.P_den

    def u_coset_quot(self, N: int) -> tuple[np.ndarray, int]:
        """U_N for prime N | M via the coset matrices (1, j; 0, N)."""
        M = self.M
        if not is_prime(N) or M % N != 0:
            raise BadIndex(f"U_{N} requires prime N dividing M = {M}")
        D = self.dim_quotient
        num = np.zeros((D, D), dtype=np.int64)
        for k, gidx in enumerate(self.survivors):
            a, b, c, d = self.lifts[gidx]
            acc = np.zeros(D, dtype=np.int64)
            for j in range(N):
                acc += self.path_symbol((b + j * d, N * d), (a + j * c, N * c))
            num[:, k] = acc
        return num, self.P_den

    # ------------------------------------------------------------------ #
    # operators restricted to the cuspidal subspace, exact over Q
    # ------------------------------------------------------------------ #

    def cuspidal_operator(self, num: np.ndarray, den: int) -> list[list[Fraction]]:
        """Matrix H with O(x_i) = sum_j H[j][i] x_j ... columns = images."""
        if self._x_solver is None:
            self._x_solver = _FractionSolver(self.X)
        imgs = num @ self.X.T  # column i = image of cuspidal basis row i
        out = []
        for j in range(imgs.shape[1]):
            col = [Fraction(int(v), den) for v in imgs[:, j]]
            out.append(self._x_solver.solve(col))
        # out[i][j]: coefficient of x_j in O(x_i); return row-convention matrix
        return out


class _FractionSolver:
    """Exact solver for X^T c = v with X a full-row-rank integer matrix."""

    def __init__(self, X: np.ndarray):
        self.k = X.shape[0]
        self.D = X.shape[1]
        rows = [[Fraction(int(X[i, j])) for i in range(self.k)] for j in range(self.D)]
        self.ops: list[tuple[str, int, int, Fraction]] = []
        r = 0
        for col in range(self.k):
            sel = None
            for i in range(r, self.D):
                if rows[i][col] != 0:
                    sel = i
                    break
            assert sel is not None, "cuspidal basis not of full rank"
            if sel != r:
                rows[r], rows[sel] = rows[sel], rows[r]
                self.ops.append(("swap", r, sel, Fraction(0)))
            pv = rows[r][col]
            if pv != 1:
                rows[r] = [x / pv for x in rows[r]]
                self.ops.append(("scale", r, 0, pv))
            for i in range(self.D):
                if i != r and rows[i][col] != 0:
                    f = rows[i][col]
                    rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
                    self.ops.append(("sub", i, r, f))
            r += 1

    def solve(self, v: list[Fraction]) -> list[Fraction]:
        w = list(v)
        for op, i, j, f in self.ops:
            if op == "swap":
                w[i], w[j] = w[j], w[i]
            elif op == "scale":
                w[i] = w[i] / f
            else:
                w[i] = w[i] - f * w[j]
        for i in range(self.k, self.D):
            assert w[i] == 0, "image does not lie in the cuspidal span"
        return w[: self.k]


def manin_space(M: int) -> ModularSymbolSpace:
    """Construct (or fetch from cache) the level-M space.  The relation
    quotient is the expensive exact step, so its numeric payload is kept on
    disk; structural checks re-run on load."""
    if M in _space_cache:
        return _space_cache[M]
    from . import cache

    payload = cache.load(f"space-{M}")
    if payload is not None:
        try:
            sp = ModularSymbolSpace(M, _payload=payload)
            sp._from_disk = True
        except AssertionError:
            sp = None
    else:
        sp = None
    if sp is None:
        sp = ModularSymbolSpace(M)
        sp._from_disk = False
        cache.save(
            f"space-{M}",
            {
                "survivors": np.array(sp.survivors, dtype=np.int64),
                "P_num": sp.P_num,
                "P_den": np.array([sp.P_den], dtype=np.int64),
                "X": sp.X,
            },
        )
    if len(_space_cache) >= _SPACE_CACHE_KEEP:
        _space_cache.pop(next(iter(_space_cache)))
    _space_cache[M] = sp
    return sp


def p1_list(M: int) -> P1List:
    return P1List(M)
