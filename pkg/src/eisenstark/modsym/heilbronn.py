"""Merel's family of integer matrices computing T_n on Manin symbols.

X_n = { (a, b; c, d) : ad - bc = n, a > b >= 0, d > c >= 0 }.  Summing the
right action of X_n over Manin symbols induces T_n on the relation quotient
for every n >= 1 (U_n when n divides the level).  The family for all n up to
a bound is materialized as flat numpy arrays (a, b, c, d, det) so that one
symbol can be pushed through every matrix at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_flat_cache: dict[int, "HeilbronnFlat"] = {}


@dataclass(frozen=True)
class HeilbronnFlat:
    """All Merel matrices of determinant 1..nmax, flattened and det-tagged."""

    nmax: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    det: np.ndarray

    def __len__(self) -> int:
        return len(self.det)

    def slice_to(self, n: int) -> "HeilbronnFlat":
        """Restrict to determinants <= n (mask, not copy order)."""
        if n >= self.nmax:
            return self
        m = self.det <= n
        return HeilbronnFlat(n, self.a[m], self.b[m], self.c[m], self.d[m], self.det[m])


def merel_matrices(n: int) -> list[tuple[int, int, int, int]]:
    """The Merel set X_n as a plain list (small n; tests and single operators)."""
    out = []
    for a in range(1, n + 1):
        for d in range((n + a - 1) // a, n + 2 - a):
            bc = a * d - n
            if bc == 0:
                for b in range(a):
                    out.append((a, b, 0, d))
                for c in range(1, d):
                    out.append((a, 0, c, d))
            elif d > 1:
                for b in range((bc - 1) // (d - 1) + 1, a):
                    if bc % b == 0:
                        out.append((a, b, bc // b, d))
    return out


def heilbronn_flat(nmax: int) -> HeilbronnFlat:
    """Flat family for all determinants up to nmax, cached in-process and on
    disk (bucketed so nearby precisions share one payload).

    Enumerates (a, b) pairs and vectorizes over the (c, d) rectangle; the
    b = 0 and c = 0 strata are emitted by closed-form ranges.
    """
    want = nmax
    for have in sorted(_flat_cache):
        if have >= nmax:
            return _flat_cache[have].slice_to(nmax)

    from . import cache

    bucket = ((max(nmax, 64) + 63) // 64) * 64
    payload = cache.load(f"heilbronn-{bucket}")
    if payload is not None:
        flat = HeilbronnFlat(
            bucket,
            payload["a"],
            payload["b"],
            payload["c"],
            payload["d"],
            payload["det"],
        )
        _flat_cache.clear()
        _flat_cache[bucket] = flat
        return flat.slice_to(nmax)
    nmax_build = bucket

    A: list[np.ndarray] = []
    B: list[np.ndarray] = []
    C: list[np.ndarray] = []
    D: list[np.ndarray] = []

    nmax = nmax_build
    for a in range(1, nmax + 1):
        # c = 0 stratum: det = a d, any 0 <= b < a
        dmax = nmax // a
        if dmax >= 1:
            dv = np.arange(1, dmax + 1, dtype=np.int32)
            bb, dd = np.meshgrid(np.arange(a, dtype=np.int32), dv, indexing="ij")
            k = bb.size
            A.append(np.full(k, a, dtype=np.int32))
            B.append(bb.ravel())
            C.append(np.zeros(k, dtype=np.int32))
            D.append(dd.ravel())
        # b = 0, c >= 1 stratum: det = a d, 1 <= c < d
        for d in range(2, dmax + 1):
            cv = np.arange(1, d, dtype=np.int32)
            k = len(cv)
            A.append(np.full(k, a, dtype=np.int32))
            B.append(np.zeros(k, dtype=np.int32))
            C.append(cv)
            D.append(np.full(k, d, dtype=np.int32))
        # generic stratum b >= 1, c >= 1: det = a d - b c in [1, nmax]
        for b in range(1, a):
            cmax = (nmax - a) // (a - b) if a - b > 0 else 0
            if cmax < 1:
                continue
            cv = np.arange(1, cmax + 1, dtype=np.int64)
            dmax_v = (nmax + b * cv) // a
            width = int(dmax_v.max())
            if width < 2:
                continue
            dv = np.arange(1, width + 1, dtype=np.int64)
            cc, dd = np.meshgrid(cv, dv, indexing="ij")
            det = a * dd - b * cc
            mask = (dd > cc) & (det >= 1) & (det <= nmax)
            if mask.any():
                cc = cc[mask]
                dd = dd[mask]
                k = len(cc)
                A.append(np.full(k, a, dtype=np.int32))
                B.append(np.full(k, b, dtype=np.int32))
                C.append(cc.astype(np.int32))
                D.append(dd.astype(np.int32))

    a_arr = np.concatenate(A)
    b_arr = np.concatenate(B)
    c_arr = np.concatenate(C)
    d_arr = np.concatenate(D)
    det = a_arr.astype(np.int64) * d_arr - b_arr.astype(np.int64) * c_arr
    flat = HeilbronnFlat(nmax, a_arr, b_arr, c_arr, d_arr, det.astype(np.int32))
    _flat_cache.clear()
    _flat_cache[nmax] = flat
    cache.save(
        f"heilbronn-{nmax}",
        {"a": flat.a, "b": flat.b, "c": flat.c, "d": flat.d, "det": flat.det},
    )
    return flat.slice_to(want)


def merel_count(n: int, flat: HeilbronnFlat | None = None) -> int:
    if flat is None:
        return len(merel_matrices(n))
    return int(np.count_nonzero(flat.det == n))
