"""Integral, p-saturated, echelonized q-expansion bases of S_2(Gamma_0(M)).

Construction: for a functional e on the relation quotient (pulled back to the
free module and symmetrized under the star involution), the pairing
a_n = e(T_n x) turns each cuspidal symbol x into a cusp form q-expansion;
Merel's matrices evaluate every T_n against a single Manin symbol at once.
Stacking functionals until the rational rank reaches dim S_2, p-saturating
the resulting integer lattice, and echelonizing mod p yields the basis.
Operators transport to the basis through the symbol side: the image of the
row tagged (x, e) under an operator O of the symbol space is the row tagged
(O x, e).
"""

from __future__ import annotations

from math import gcd

import numpy as np

from ..errors import (
    NotInSpan,
    PipelineInconsistency,
    PrimeDividesLevel,
    RankDeficient,
)
from ..qseries import TruncatedSeries
from .arith import sturm_bound
from .heilbronn import HeilbronnFlat, heilbronn_flat
from .space import ModularSymbolSpace, manin_space

_P0 = (1 << 31) - 1  # certification prime for rational ranks
_MAX_FUNCTIONALS = 12
_BASIS_CACHE: dict[tuple[int, int, int], "QExpBasis"] = {}
_BASIS_CACHE_KEEP = 4

try:  # pragma: no cover - exercised only where numba is installed
    import os

    os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
    import numba

    @numba.njit(parallel=True, cache=True)
    def _raw_kernel(cs, ds, ha, hb, hc, hd, hdet, table, M, etil, nterms, out):
        for k in numba.prange(len(cs)):
            c0 = cs[k]
            d0 = ds[k]
            for t in range(len(ha)):
                cn = (c0 * ha[t] + d0 * hc[t]) % M
                dn = (c0 * hb[t] + d0 * hd[t]) % M
                idx = table[cn * M + dn]
                if idx >= 0:
                    out[k, hdet[t]] += etil[idx]

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False


def _raw_series_matrix(
    space: ModularSymbolSpace, etil: np.ndarray, flat: HeilbronnFlat, nterms: int
) -> np.ndarray:
    """R[k, n] = e(T_n gbar_k) for every surviving generator k, n < nterms."""
    D = space.dim_quotient
    M = space.M
    out = np.zeros((D, nterms), dtype=np.int64)
    cs = np.array([space.p1[g][0] for g in space.survivors], dtype=np.int64)
    ds = np.array([space.p1[g][1] for g in space.survivors], dtype=np.int64)
    emax = int(np.abs(etil).max(initial=0))
    assert emax * (len(flat) + 1) < 2**52, "bincount accumulation would lose exactness"
    mask = flat.det < nterms
    ha = flat.a[mask].astype(np.int64)
    hb = flat.b[mask].astype(np.int64)
    hc = flat.c[mask].astype(np.int64)
    hd = flat.d[mask].astype(np.int64)
    hdet = flat.det[mask].astype(np.int64)
    table = space.p1.table
    if _HAVE_NUMBA:
        _raw_kernel(cs, ds, ha, hb, hc, hd, hdet, table, M, etil, nterms, out)
        return out
    for k in range(D):
        cn = (cs[k] * ha + ds[k] * hc) % M
        dn = (cs[k] * hb + ds[k] * hd) % M
        idx = table[cn * M + dn]
        val = np.where(idx >= 0, etil[np.maximum(idx, 0)], 0).astype(np.float64)
        acc = np.bincount(hdet, weights=val, minlength=nterms)[:nterms]
        out[k] = np.rint(acc).astype(np.int64)
    return out


def _matmul_exact(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Integer matrix product, exact; falls back to object dtype if needed."""
    amax = int(np.abs(A).max(initial=0))
    bmax = int(np.abs(B).max(initial=0))
    bound = amax * bmax * A.shape[1]
    if bound < 2**52:
        return np.rint(A.astype(np.float64) @ B.astype(np.float64)).astype(np.int64)
    if bound < 2**62:
        return A @ B
    return (A.astype(object) @ B.astype(object))


def matmul_mod(A: np.ndarray, B: np.ndarray, p: int) -> np.ndarray:
    """(A @ B) mod p via BLAS; exact because reduced entries keep the
    accumulation far below 2^53."""
    Am = np.mod(A, p).astype(np.float64)
    Bm = np.mod(B, p).astype(np.float64)
    assert A.shape[1] * (p - 1) ** 2 < 2**52
    return np.rint(Am @ Bm).astype(np.int64) % p


def _rref_mod(A: np.ndarray, p: int) -> tuple[np.ndarray, list[int], np.ndarray]:
    """Reduced row echelon form of A mod p with full transform.

    Returns (R, pivots, T) where T is invertible mod p, T @ A = R mod p,
    R[:len(pivots)] is the RREF and the remaining rows are zero.
    """
    m, n = A.shape
    if A.dtype == object:
        R = np.array([[int(x) % p for x in row] for row in A], dtype=np.int64)
    else:
        R = np.mod(A, p).astype(np.int64)
    T = np.eye(m, dtype=np.int64)
    r = 0
    pivots: list[int] = []
    for col in range(n):
        if r == m:
            break
        nz = np.nonzero(R[r:, col])[0]
        if len(nz) == 0:
            continue
        sel = r + int(nz[0])
        if sel != r:
            R[[r, sel]] = R[[sel, r]]
            T[[r, sel]] = T[[sel, r]]
        inv = pow(int(R[r, col]), -1, p)
        R[r] = (R[r] * inv) % p
        T[r] = (T[r] * inv) % p
        f = R[:, col].copy()
        f[r] = 0
        nzrows = np.nonzero(f)[0]
        if len(nzrows):
            R[nzrows] = (R[nzrows] - np.outer(f[nzrows], R[r])) % p
            T[nzrows] = (T[nzrows] - np.outer(f[nzrows], T[r])) % p
        pivots.append(col)
        r += 1
    return R, pivots, T


def _rank_mod(A: np.ndarray, p: int) -> int:
    if A.dtype == object:
        Am = np.array([[int(x) % p for x in row] for row in A], dtype=np.int64)
    else:
        Am = np.mod(A, p).astype(np.int64)
    m, n = Am.shape
    r = 0
    for col in range(n):
        if r == m:
            break
        nz = np.nonzero(Am[r:, col])[0]
        if len(nz) == 0:
            continue
        sel = r + int(nz[0])
        if sel != r:
            Am[[r, sel]] = Am[[sel, r]]
        inv = pow(int(Am[r, col]), -1, p)
        Am[r] = (Am[r] * inv) % p
        f = Am[r + 1 :, col].copy()
        nzr = np.nonzero(f)[0]
        if len(nzr):
            Am[r + 1 + nzr] = (Am[r + 1 + nzr] - np.outer(f[nzr], Am[r])) % p
        r += 1
    return r


def p_saturate(rows: list[list[int]], p: int) -> list[list[int]]:
    """Saturate a Q-independent integer row lattice at p (replace semantics).

    While the mod-p rank is below the row count, a kernel combination is
    divided by p and swapped in for one of its constituent rows.
    """
    A = np.array(rows, dtype=object)
    m = A.shape[0]
    guard = 0
    while True:
        _, pivots, T = _rref_mod(A, p)
        if len(pivots) == m:
            return [list(int(x) for x in row) for row in A]
        v = T[len(pivots)] % p  # a kernel combination
        w = v.astype(object) @ A
        assert all(int(x) % p == 0 for x in w), "kernel combination not divisible by p"
        w = np.array([int(x) // p for x in w], dtype=object)
        j = int(np.nonzero(v % p)[0][0])
        A[j] = w
        guard += 1
        assert guard < 64 * m, "p-saturation failed to terminate"


class QExpBasis:
    """Echelonized mod-p basis of S_2(Gamma_0(M)) with symbol-side transport.

    With ``functional`` set, the construction is restricted to that single
    pairing functional (required by Atkin-Lehner transport, which is only
    well-defined when the symbol-to-series map has star-minus-part kernel);
    RankDeficient is raised if that functional does not see the whole space.
    """

    def __init__(
        self,
        space: ModularSymbolSpace,
        p: int,
        nterms: int,
        functional: int | None = None,
    ):
        M = space.M
        if M % p == 0:
            raise PrimeDividesLevel(f"p = {p} divides the level {M}")
        if p < 5:
            raise ValueError("p must be at least 5")
        if nterms < sturm_bound(M) + 5:
            raise ValueError(
                f"nterms = {nterms} below Sturm bound + 5 = {sturm_bound(M) + 5}"
            )
        assert space.P_den % p != 0, "projection denominator not invertible mod p"
        self.space = space
        self.M = M
        self.p = p
        self.nterms = nterms
        self.d = space.genus

        flat = heilbronn_flat(nterms - 1) if nterms > 1 else None
        self.R: dict[int, np.ndarray] = {}
        self._etilde: dict[int, np.ndarray] = {}

        blocks: list[np.ndarray] = []
        tags: list[tuple[dict[int, np.ndarray], int]] = []  # ({e: vec}, den)
        e_order: list[int] = []

        self._used_disk = getattr(space, "_from_disk", False)

        def add_functional(e_idx: int) -> bool:
            from . import cache

            et = space.P_num[e_idx].copy()
            ets = et + et[space.star_perm]
            g = int(np.gcd.reduce(np.abs(ets)))
            if g == 0:
                return False
            if g > 1:
                ets //= g
            self._etilde[e_idx] = ets
            key = f"raw-{M}-e{e_idx}-n{nterms}"
            payload = cache.load(key)
            if payload is not None and np.array_equal(payload["etilde"], ets):
                R_e = payload["R"].astype(np.int64)
                self._used_disk = True
            else:
                R_e = _raw_series_matrix(space, ets, flat, nterms)
                cache.save(key, {"etilde": ets, "R": R_e})
            self.R[e_idx] = R_e
            A_e = _matmul_exact(space.X, R_e)
            blocks.append(A_e)
            for i in range(space.X.shape[0]):
                tags.append(({e_idx: space.X[i].copy()}, 1))
            e_order.append(e_idx)
            return True

        if self.d > 0 and functional is not None:
            if (
                not add_functional(functional)
                or _rank_mod(np.vstack(blocks), _P0) != self.d
            ):
                raise RankDeficient(
                    f"functional {functional} does not see all of S_2 at level {M}"
                )
            A_stack = np.vstack(blocks)
        elif self.d > 0:
            next_e = 0
            # functionals until the rational rank certificate reaches dim S_2
            while next_e < min(space.dim_quotient, _MAX_FUNCTIONALS):
                added = add_functional(next_e)
                next_e += 1
                if added and _rank_mod(np.vstack(blocks), _P0) == self.d:
                    break
            else:
                raise PipelineInconsistency(
                    f"rational rank below dim S_2 after {_MAX_FUNCTIONALS} functionals"
                )
            # a deficient mod-p rank is often an unlucky functional rather than
            # a non-saturated lattice; a couple more functionals are cheaper
            # than exact-arithmetic transport on saturation rows
            extra = 0
            while (
                _rank_mod(np.vstack(blocks), p) < self.d
                and extra < 3
                and next_e < space.dim_quotient
            ):
                add_functional(next_e)
                next_e += 1
                extra += 1
            A_stack = np.vstack(blocks)
        else:
            A_stack = np.zeros((0, nterms), dtype=np.int64)

        self.e_order = e_order

        # p-saturation with tag tracking; appending every kernel combination
        # divided by p guarantees the lattice grows each round
        A = A_stack
        rounds = 0
        while self.d > 0:
            r, pivots, T = _rref_mod(A, p)
            rk = len(pivots)
            if rk == self.d:
                break
            assert rk < self.d
            Aobj = A.astype(object)
            new_rows = []
            new_tags = []
            for v in T[rk:] % p:
                if not np.any(v):
                    continue
                w = v.astype(object) @ Aobj
                assert all(int(x) % p == 0 for x in w), "kernel combo not divisible"
                w = np.array([int(x) // p for x in w], dtype=object)
                if not np.any(w != 0):
                    continue
                newtag: dict[int, np.ndarray] = {}
                den_lcm = 1
                for i in np.nonzero(v)[0]:
                    dv = tags[int(i)][1]
                    den_lcm = den_lcm * dv // gcd(den_lcm, dv)
                for i in np.nonzero(v)[0]:
                    tg, dv = tags[int(i)]
                    scale = int(v[int(i)]) * (den_lcm // dv)
                    for e_idx, vec in tg.items():
                        cur = newtag.setdefault(
                            e_idx, np.zeros(space.dim_quotient, dtype=object)
                        )
                        newtag[e_idx] = cur + scale * vec.astype(object)
                new_rows.append(w)
                new_tags.append((newtag, den_lcm * p))
            assert new_rows, "mod-p rank deficient but no divisible kernel rows"
            A = np.vstack([Aobj] + [w.reshape(1, -1) for w in new_rows])
            tags.extend(new_tags)
            rounds += 1
            assert rounds < 64, "p-saturation failed to terminate"

        self._A = A
        self._tags = tags
        if self.d > 0:
            Rr, pivots, T = _rref_mod(A, p)
            assert len(pivots) == self.d
            self.B = Rr[: self.d].astype(np.int64)
            self.pivots = pivots
            self.Tp = T[: self.d] % p
        else:
            self.B = np.zeros((0, nterms), dtype=np.int64)
            self.pivots = []
            self.Tp = np.zeros((0, 0), dtype=np.int64)
        self._saturated = any(den != 1 for _, den in tags)
        if self._used_disk and self.d > 0:
            # cache integrity is re-verified through the transport invariant
            self.verify_transport(3)

    # ------------------------------------------------------------------ #

    def row_series(self, i: int) -> TruncatedSeries:
        return TruncatedSeries(tuple(int(x) for x in self.B[i]), self.p)

    def embed(self, series: TruncatedSeries) -> np.ndarray:
        """Coordinates of a series in the basis; NotInSpan on any mismatch."""
        if series.p != self.p:
            raise NotInSpan(f"series is not over F_{self.p}")
        if series.prec < self.nterms:
            raise NotInSpan(
                f"series precision {series.prec} below basis nterms {self.nterms}"
            )
        s = np.array(series.coeffs[: self.nterms], dtype=np.int64) % self.p
        if s.size and s[0] != 0:
            raise NotInSpan("constant term nonzero: not a cuspidal candidate")
        coords = s[self.pivots] if self.d else np.zeros(0, dtype=np.int64)
        resid = (coords @ self.B - s) % self.p if self.d else s
        if np.any(resid % self.p):
            raise NotInSpan("series does not lie in the span of the basis")
        return coords

    def contains(self, series: TruncatedSeries) -> bool:
        try:
            self.embed(series)
            return True
        except NotInSpan:
            return False

    # ------------------------------------------------------------------ #
    # operator transport
    # ------------------------------------------------------------------ #

    def _op_images_mod_p(self, num: np.ndarray, den: int) -> np.ndarray:
        """Series mod p of the operator image of every raw row."""
        p = self.p
        if den % p == 0:
            raise PipelineInconsistency("operator denominator divisible by p")
        m = len(self._tags)
        out = np.zeros((m, self.nterms), dtype=np.int64)
        opT = np.mod(num.T, p)
        inv_den_p = pow(den % p, -1, p)
        fast_rows = [i for i, (_, dv) in enumerate(self._tags) if dv == 1]
        slow_rows = [i for i, (_, dv) in enumerate(self._tags) if dv != 1]
        for e_idx, R_e in self.R.items():
            Ye = np.zeros((len(fast_rows), self.space.dim_quotient), dtype=np.int64)
            for row_pos, i in enumerate(fast_rows):
                tg, _ = self._tags[i]
                if e_idx in tg:
                    Ye[row_pos] = np.mod(tg[e_idx].astype(np.int64), p)
            part = matmul_mod(matmul_mod(Ye, opT, p), R_e, p)
            out[fast_rows] = (out[fast_rows] + part) % p
        out[fast_rows] = (out[fast_rows] * inv_den_p) % p
        for i in slow_rows:
            out[i] = self._op_image_exact(i, num, den)
        return out

    def _op_image_exact(self, i: int, num: np.ndarray, den: int) -> np.ndarray:
        """Exact p-integral operator image of one (possibly 1/p^k) raw row."""
        p = self.p
        tg, row_den = self._tags[i]
        total = np.zeros(self.nterms, dtype=object)
        for e_idx, vec in tg.items():
            y_op = vec.astype(object) @ num.T.astype(object)
            total = total + y_op @ self.R[e_idx].astype(object)
        den_total = row_den * den
        k = 0
        u = den_total
        while u % p == 0:
            u //= p
            k += 1
        mod = p ** (k + 1)
        inv_u = pow(int(u) % mod, -1, mod)
        c = np.array([(int(x) * inv_u) % mod for x in total], dtype=object)
        if not all(int(x) % (p**k) == 0 for x in c):
            # the symbol-side image of this 1/p^k row is not p-integral: this
            # operator cannot be transported through this functional
            raise PipelineInconsistency(
                "operator image of a saturation row is not p-integral"
            )
        return np.array([(int(x) // (p**k)) % p for x in c], dtype=np.int64)

    def _series_to_coords(self, rows: np.ndarray) -> np.ndarray:
        """Express full-precision series rows in the basis, with residual check."""
        coords = rows[:, self.pivots] % self.p
        resid = (matmul_mod(coords, self.B, self.p) - rows) % self.p
        if np.any(resid):
            raise NotInSpan("operator image leaves the basis span")
        return coords

    def transported_matrix(self, num: np.ndarray, den: int) -> np.ndarray:
        """Matrix H (row convention: O(B_i) = sum_j H[i, j] B_j) of a symbol
        operator given on quotient coordinates."""
        if self.d == 0:
            return np.zeros((0, 0), dtype=np.int64)
        img = self._op_images_mod_p(num, den)
        rows = matmul_mod(self.Tp, img, self.p)
        return self._series_to_coords(rows)

    def hecke_transported(self, n: int) -> np.ndarray:
        num, den = self.space.hecke_quot(n)
        return self.transported_matrix(num, den)

    def hecke_coefficientwise(self, n: int) -> np.ndarray:
        """T_n on the basis computed purely from q-expansions (gcd(n, M) = 1)."""
        if gcd(n, self.M) != 1:
            raise ValueError("coefficientwise T_n requires gcd(n, M) = 1")
        if self.d == 0:
            return np.zeros((0, 0), dtype=np.int64)
        Ln = (self.nterms - 1) // n + 1
        if self.pivots and max(self.pivots) >= Ln:
            raise PipelineInconsistency(
                f"T_{n} prefix too short to solve against pivots"
            )
        p = self.p
        pref = np.zeros((self.d, Ln), dtype=np.int64)
        for i in range(self.d):
            for m in range(1, Ln):
                acc = 0
                for t in range(1, min(m, n) + 1):
                    if m % t == 0 and n % t == 0 and gcd(t, self.M) == 1:
                        acc += t * int(self.B[i, m * n // (t * t)])
                pref[i, m] = acc % p
        coords = pref[:, [c for c in self.pivots]] % p
        resid = (coords @ self.B[:, :Ln] - pref) % p
        if np.any(resid):
            raise NotInSpan("coefficientwise Hecke image leaves the span")
        return coords

    def verify_transport(self, nmax: int = 5) -> None:
        """Keystone consistency check: transported T_n == coefficientwise T_n.

        Indices whose coefficientwise prefix cannot reach the pivot columns
        are skipped.
        """
        for n in range(2, nmax + 1):
            if gcd(n, self.M) != 1:
                continue
            if self.pivots and max(self.pivots) >= (self.nterms - 1) // n + 1:
                continue
            a = self.hecke_transported(n)
            b = self.hecke_coefficientwise(n)
            if not np.array_equal(a % self.p, b % self.p):
                raise PipelineInconsistency(
                    f"transport mismatch for T_{n} at level {self.M}"
                )

    def truncated(self, L: int) -> "QExpBasisView":
        return QExpBasisView(self, L)


class QExpBasisView:
    """Column-truncated view of a basis (pivots preserved); embed-only."""

    def __init__(self, parent: QExpBasis, nterms: int):
        if nterms > parent.nterms:
            raise ValueError("cannot extend a basis by truncation")
        if parent.pivots and max(parent.pivots) >= nterms:
            raise ValueError("truncation would drop pivot columns")
        self.parent = parent
        self.space = parent.space
        self.M = parent.M
        self.p = parent.p
        self.nterms = nterms
        self.d = parent.d
        self.B = parent.B[:, :nterms]
        self.pivots = parent.pivots

    def embed(self, series: TruncatedSeries) -> np.ndarray:
        return QExpBasis.embed(self, series)  # type: ignore[arg-type]

    def contains(self, series: TruncatedSeries) -> bool:
        try:
            self.embed(series)
            return True
        except NotInSpan:
            return False

    def row_series(self, i: int) -> TruncatedSeries:
        return TruncatedSeries(tuple(int(x) for x in self.B[i]), self.p)


def _obj_mod(A: np.ndarray, p: int) -> np.ndarray:
    return np.array([[int(x) % p for x in row] for row in A], dtype=np.int64)


def qexp_basis(M: int, p: int, nterms: int) -> QExpBasis:
    """Build (or fetch) the level-M mod-p q-expansion basis."""
    key = (M, p, nterms)
    if key in _BASIS_CACHE:
        return _BASIS_CACHE[key]
    basis = QExpBasis(manin_space(M), p, nterms)
    if len(_BASIS_CACHE) >= _BASIS_CACHE_KEEP:
        _BASIS_CACHE.pop(next(iter(_BASIS_CACHE)))
    _BASIS_CACHE[key] = basis
    return basis
