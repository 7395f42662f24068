"""Classical index / elliptic-point / cusp / genus formulas for X_0(M)."""

from __future__ import annotations

from math import gcd

from ..ffarith import factorize


def psi_index(M: int) -> int:
    """Index of Gamma_0(M) in SL_2(Z): M * prod (1 + 1/ell)."""
    out = M
    for ell in factorize(M):
        out = out // ell * (ell + 1)
    return out


def _euler_phi(n: int) -> int:
    out = n
    for ell in factorize(n):
        out = out // ell * (ell - 1)
    return out


def nu2(M: int) -> int:
    if M % 4 == 0:
        return 0
    out = 1
    for ell in factorize(M):
        if ell == 2:
            continue
        if ell % 4 == 1:
            out *= 2
        else:
            return 0
    return out


def nu3(M: int) -> int:
    if M % 9 == 0:
        return 0
    out = 1
    for ell in factorize(M):
        if ell == 3:
            continue
        if ell % 3 == 1:
            out *= 2
        else:
            return 0
    return out


def nu_inf(M: int) -> int:
    out = 0
    for d in range(1, M + 1):
        if M % d == 0:
            out += _euler_phi(gcd(d, M // d))
    return out


def genus_x0(M: int) -> int:
    g12 = 12 + psi_index(M) - 3 * nu2(M) - 4 * nu3(M) - 6 * nu_inf(M)
    assert g12 % 12 == 0
    return g12 // 12


def sturm_bound(M: int) -> int:
    """Number of q-expansion coefficients pinning a weight-2 form on Gamma_0(M)."""
    return (psi_index(M) + 5) // 6
