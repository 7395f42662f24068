"""Modular symbols for Gamma_0(M): presentation, operators, q-expansion basis."""

from __future__ import annotations

from fractions import Fraction

from ..errors import BadIndex
from ..ffarith import is_prime
from .arith import genus_x0, psi_index, sturm_bound
from .p1 import P1List
from .space import ModularSymbolSpace, manin_space, p1_list

__all__ = [
    "P1List",
    "ModularSymbolSpace",
    "manin_space",
    "p1_list",
    "hecke_matrix",
    "atkin_lehner_matrix",
    "genus_x0",
    "psi_index",
    "sturm_bound",
]


def hecke_matrix(space: ModularSymbolSpace, n: int) -> list[list[Fraction]]:
    """Matrix of T_n (U_n for prime n | M) on the cuspidal subspace over Q.

    Row convention: T(x_i) = sum_j H[i][j] x_j.  Composite n sharing a factor
    with the level is rejected.
    """
    from math import gcd

    if gcd(n, space.M) > 1:
        if not is_prime(n):
            raise BadIndex(f"composite n = {n} shares a factor with M = {space.M}")
        num, den = space.u_coset_quot(n)
    else:
        num, den = space.hecke_quot(n)
    return space.cuspidal_operator(num, den)


def atkin_lehner_matrix(space: ModularSymbolSpace, N: int) -> list[list[Fraction]]:
    """Matrix of the Atkin-Lehner involution W_N on the cuspidal subspace."""
    num, den = space.atkin_lehner_quot(N)
    return space.cuspidal_operator(num, den)
