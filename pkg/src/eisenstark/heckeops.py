"""Pipeline on q-expansions: embed G = g(z) g(qz) at level Nq, push down to
level q, project onto the Eisenstein component, and read off eta = a_1.

The composite (Eisenstein projection) o (trace to level q) is computed by
projecting G onto the mod-p generalized eigenspace of the Eisenstein
eigensystem T_ell -> ell + 1 at level Nq -- a polynomial in transported
Hecke operators, which is convention-free -- and then evaluating the trace
on that small space, where it is known exactly: the trace of pi_1* F is
(N+1) F, the trace of V_N F is T_N F / N, and the trace kills newforms and
forms old at N only.  A direct 1 + W_N U_N trace is also provided
(trace_down); its W_N transport is validated at startup against the known
values above and refuses to run when the symbol-to-expansion identification
cannot support it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
import sympy

from .errors import (
    EisensteinRankNotOne,
    NotInSpan,
    PipelineInconsistency,
    TraceNotOldform,
)
from .ffarith import is_prime
from .merel import mazur_nonvanishing
from .modsym.arith import sturm_bound
from .modsym.qexp import QExpBasis, _rank_mod, _rref_mod, matmul_mod, qexp_basis
from .qseries import (
    TruncatedSeries,
    eisenstein_series_level_q,
    u_operator,
    v_operator,
    weight_one_form,
)

_AUX_PRIME_BOUND = 50


@dataclass
class EmbeddedForm:
    """A mod-p cusp form given by coordinates relative to a QExpBasis."""

    level: int
    p: int
    vector: np.ndarray
    basis: QExpBasis

    def series(self) -> TruncatedSeries:
        s = (self.vector @ self.basis.B) % self.p
        return TruncatedSeries(tuple(int(x) for x in s), self.p)


@dataclass
class EisensteinProjector:
    """Idempotent onto the Eisenstein component of the level-q basis."""

    q: int
    p: int
    matrix: np.ndarray
    aux_primes: tuple[int, ...]
    rank: int
    basis: QExpBasis


def embed(series: TruncatedSeries, basis: QExpBasis) -> EmbeddedForm:
    """Solve for the unique coordinate vector reproducing the series."""
    vec = basis.embed(series)
    return EmbeddedForm(basis.M, basis.p, vec, basis)


# --------------------------------------------------------------------- #
# polynomial helpers mod p (dense ascending coefficient lists)
# --------------------------------------------------------------------- #


def _charpoly_mod(T: np.ndarray, p: int) -> list[int]:
    x = sympy.Symbol("x")
    M = sympy.Matrix([[int(v) for v in row] for row in T])
    coeffs = M.charpoly(x).all_coeffs()  # descending
    return [int(c) % p for c in reversed(coeffs)]  # ascending


def _poly_eval_at(f: list[int], x0: int, p: int) -> int:
    acc = 0
    for c in reversed(f):
        acc = (acc * x0 + c) % p
    return acc


def _poly_divide_linear(f: list[int], lam: int, p: int) -> list[int]:
    """Quotient of f by (x - lam); remainder must vanish mod p."""
    n = len(f) - 1
    out = [0] * n
    acc = 0
    for i in range(n - 1, -1, -1):
        acc = (f[i + 1] + acc * lam) % p
        out[i] = acc
    rem = (f[0] + acc * lam) % p
    assert rem == 0, "division by (x - lam) leaves a remainder"
    return out


def _poly_shift(f: list[int], lam: int, p: int) -> list[int]:
    """Coefficients of f(x + lam), by Horner: out <- out * (x + lam) + c."""
    out = [0] * len(f)
    for c in reversed(f):
        for i in range(len(out) - 1, 0, -1):
            out[i] = (out[i - 1] + out[i] * lam) % p
        out[0] = (out[0] * lam + c) % p
    return out


def _series_inverse(c: list[int], m: int, p: int) -> list[int]:
    """Inverse of sum c_i t^i modulo t^m (c_0 a unit)."""
    inv0 = pow(c[0], -1, p)
    out = [inv0] + [0] * (m - 1)
    for k in range(1, m):
        acc = 0
        for i in range(1, k + 1):
            if i < len(c):
                acc += c[i] * out[k - i]
        out[k] = (-inv0 * acc) % p
    return out


def _poly_mul(a: list[int], b: list[int], p: int) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return out


def _poly_at_matrix(f: list[int], T: np.ndarray, p: int) -> np.ndarray:
    d = T.shape[0]
    acc = np.zeros((d, d), dtype=np.int64)
    for c in reversed(f):
        acc = (acc @ T + c * np.eye(d, dtype=np.int64)) % p
    return acc


def _eigen_idempotent_charpoly(T: np.ndarray, lam: int, p: int) -> np.ndarray:
    """Projector onto the generalized lam-eigenspace of T mod p, by the CRT
    splitting charpoly = (x - lam)^m h with h inverted modulo (x - lam)^m."""
    f = _charpoly_mod(T, p)
    m = 0
    h = f
    while _poly_eval_at(h, lam, p) == 0:
        h = _poly_divide_linear(h, lam, p)
        m += 1
    assert m >= 1, "eigenvalue absent from the characteristic polynomial"
    h_at = _poly_shift(h, lam, p)  # h(t + lam)
    u = _series_inverse(h_at, m, p)
    u_x = _poly_shift(u, -lam % p, p)  # u(x - lam)
    e_poly = _poly_mul(h, u_x, p)
    return _poly_at_matrix(e_poly, T, p)


def _eigen_idempotent_kernel(T: np.ndarray, lam: int, p: int) -> np.ndarray:
    """Same projector via stabilized kernel/image of (T - lam)^(2^k); avoids
    characteristic polynomials for large matrices.  Acts on row vectors by
    right multiplication, like T itself."""
    d = T.shape[0]
    S = (T - lam * np.eye(d, dtype=np.int64)) % p
    rank = _rank_mod(S, p)
    while True:
        S2 = matmul_mod(S, S, p)
        r2 = _rank_mod(S2, p)
        if r2 == rank:
            break
        S, rank = S2, r2
    # row space of S = complement, left-null-space of S = generalized eigenspace
    _, pivots, Tr_ = _rref_mod(S, p)
    r = len(pivots)
    kernel = Tr_[r:] % p  # rows v with v S = 0
    Rr, _, _ = _rref_mod(S, p)
    image = Rr[:r]
    stack = np.vstack([kernel, image]) % p
    assert _rank_mod(stack, p) == d, "kernel + image do not span"
    # projector: x = a @ stack with a = x stack^(-1); keep kernel part
    inv = _matrix_inverse_mod(stack, p)
    sel = np.zeros((d, d), dtype=np.int64)
    k = kernel.shape[0]
    sel[:k, :k] = np.eye(k, dtype=np.int64)
    # x @ E = (x @ inv) selected back through stack
    return (inv @ sel @ stack) % p


def _matrix_inverse_mod(A: np.ndarray, p: int) -> np.ndarray:
    d = A.shape[0]
    aug = np.concatenate([A % p, np.eye(d, dtype=np.int64)], axis=1)
    R, pivots, _ = _rref_mod(aug, p)
    assert pivots == list(range(d)), "matrix not invertible mod p"
    return R[:, d:] % p


# --------------------------------------------------------------------- #
# Eisenstein projector at level q (spec surface)
# --------------------------------------------------------------------- #


def _projector_scan(
    basis_q: QExpBasis,
    skip: frozenset[int],
    aux_order: tuple[int, ...] | None = None,
) -> tuple[np.ndarray, tuple[int, ...], int]:
    """Compose generalized-eigenspace idempotents until the image is a line."""
    p = basis_q.p
    q = basis_q.M
    d = basis_q.d
    E = np.eye(d, dtype=np.int64)
    used: list[int] = []
    Ebar = eisenstein_series_level_q(q, p, basis_q.nterms)
    e_coords = basis_q.embed(Ebar)
    rank = d
    candidates = (
        aux_order if aux_order is not None else tuple(range(2, _AUX_PRIME_BOUND + 1))
    )
    for ell in candidates:
        if not is_prime(ell) or ell in skip:
            continue
        T = basis_q.hecke_transported(ell)
        e_ell = _eigen_idempotent_charpoly(T, (ell + 1) % p, p)
        E = (E @ e_ell) % p
        used.append(ell)
        assert np.array_equal((E @ E) % p, E), "composed projector not idempotent"
        assert np.array_equal((e_coords @ E) % p, e_coords % p), (
            "projector must fix the Eisenstein series"
        )
        rank = _rank_mod(E, p)
        if rank == 1:
            break
    return E, tuple(used), rank


def eisenstein_projector(
    q: int,
    p: int,
    basis: QExpBasis | None = None,
    skip: tuple[int, ...] = (),
    aux_order: tuple[int, ...] | None = None,
) -> EisensteinProjector:
    """Idempotent onto the Eisenstein component of S_2(q) mod p.

    Meaningful under the Mazur gate (nonvanishing Merel class); raises
    EisensteinRankNotOne if the image never reaches dimension 1, after
    checking that failure coincides with a vanishing Merel class.
    """
    if basis is None:
        basis = qexp_basis(q, p, sturm_bound(q) + 5)
    skipset = frozenset(skip) | {p, q}
    E, used, rank = _projector_scan(basis, skipset, aux_order)
    if rank != 1:
        if mazur_nonvanishing(q, p):
            raise PipelineInconsistency(
                f"Eisenstein rank {rank} != 1 at (q, p) = ({q}, {p}) despite "
                "a nonvanishing Merel class"
            )
        raise EisensteinRankNotOne(
            f"Eisenstein component has rank {rank} at (q, p) = ({q}, {p}); "
            "consistent with the vanishing Merel class"
        )
    return EisensteinProjector(q, p, E, used, rank, basis)


# --------------------------------------------------------------------- #
# the eta invariant, Eisenstein-projection-first (no Atkin-Lehner needed)
# --------------------------------------------------------------------- #


def _eisenstein_block_projector(
    basis: QExpBasis, skip: frozenset[int], aux_order: tuple[int, ...] | None = None
) -> tuple[np.ndarray, tuple[int, ...], int]:
    """Projector onto the mod-p generalized eigenspace of the Eisenstein
    eigensystem (T_ell -> ell+1, ell coprime to the level and p) at a
    composite level.  Composes all admissible ell up to the bound."""
    p = basis.p
    d = basis.d
    E = np.eye(d, dtype=np.int64)
    used: list[int] = []
    candidates = (
        aux_order if aux_order is not None else tuple(range(2, _AUX_PRIME_BOUND + 1))
    )
    rank = d
    for ell in candidates:
        if not is_prime(ell) or ell in skip:
            continue
        T = basis.hecke_transported(ell)
        e_ell = _eigen_idempotent_kernel(T, (ell + 1) % p, p)
        E = matmul_mod(E, e_ell, p)
        used.append(ell)
        new_rank = _rank_mod(E, p)
        if new_rank == rank and len(used) >= 4:
            rank = new_rank
            break
        rank = new_rank
    assert np.array_equal(matmul_mod(E, E, p), E % p), "composed projector not idempotent"
    return E, tuple(used), rank


@dataclass
class EtaResult:
    disc: int
    p: int
    q: int
    eta: int
    aux_primes: tuple[int, ...]
    block_dim: int


def pipeline_precision(N: int, q: int) -> int:
    """Coefficient count at level Nq sufficient for the projection pipeline."""
    return sturm_bound(N * q) + 5


def _solve_in_span(
    vectors: list[np.ndarray], v: np.ndarray, p: int
) -> np.ndarray | None:
    """Coefficients c with sum c_i vectors_i = v mod p, or None."""
    A = np.array(vectors, dtype=np.int64) % p
    k = A.shape[0]
    aug = np.concatenate([A, np.eye(k, dtype=np.int64)], axis=1)
    R, pivots, _ = _rref_mod(aug, p)
    pivots = [c for c in pivots if c < A.shape[1]]
    coeffs = np.zeros(k, dtype=np.int64)
    resid = v % p
    for i, col in enumerate(pivots):
        f = int(resid[col]) % p
        if f:
            resid = (resid - f * R[i, : A.shape[1]]) % p
            coeffs = (coeffs + f * R[i, A.shape[1] :]) % p
    if np.any(resid):
        return None
    return coeffs


def eta_invariant_full(
    disc: int,
    p: int,
    q: int,
    aux_order: tuple[int, ...] | None = None,
) -> EtaResult:
    """eta = a_1 of the Eisenstein component of the level-q pushforward of
    g(z) g(qz) mod p, with diagnostics.

    Method: project G onto the Eisenstein-congruent generalized eigenspace V
    at level Nq (Hecke polynomials only), then apply the exact trace values
    on V: the block spanned by the two old embeddings of the Eisenstein
    series carries the whole answer, any further content of V (newforms or
    level-N oldforms congruent to the Eisenstein system) is killed by the
    trace and is separated off using U_q and U_N.
    """
    N = abs(disc)
    if not mazur_nonvanishing(q, p):
        raise EisensteinRankNotOne(
            f"Merel class vanishes at (q, p) = ({q}, {p}); eta is undefined"
        )
    nterms = pipeline_precision(N, q)
    basis = qexp_basis(N * q, p, nterms)

    Ebar = eisenstein_series_level_q(q, p, nterms)
    b1 = basis.embed(Ebar)  # pi_1 pullback: same q-expansion
    vn = np.zeros(nterms, dtype=np.int64)
    en = np.array(Ebar.coeffs, dtype=np.int64)
    vn[::N] = en[: (nterms - 1) // N + 1]
    b2 = basis.embed(TruncatedSeries(tuple(int(x) for x in vn), p))  # V_N pullback

    P, used, dimV = _eisenstein_block_projector(
        basis, frozenset({p, q, N}), aux_order
    )
    if np.any((b1 @ P - b1) % p) or np.any((b2 @ P - b2) % p):
        raise PipelineInconsistency("projector does not fix the Eisenstein block")

    g = weight_one_form(disc, nterms).reduce(p)
    G = g.mul(v_operator(g, q))
    assert G[0] == 0
    w = basis.embed(G)
    v = (w @ P) % p

    inv_N = pow(N % p, -1, p)
    # known directions inside the block, with their eta-contribution weights:
    # trace(pi_1 Ebar) = (N+1) Ebar, trace(V_N Ebar) = ((N+1)/N) Ebar, and the
    # level-N Eisenstein packet (cuspidal mod p since q = 1 mod p) traces to 0
    known = [b1, b2]
    weights = [(N + 1) % p, ((N + 1) * inv_N) % p]
    b3 = _second_eisenstein_vector(basis, N, q)
    if b3 is not None and not np.any((b3 @ P - b3) % p):
        known.append(b3)
        weights.append(0)

    # the trace is a well-defined linear functional mod p, so any expression
    # of v over vectors with known traces yields the same eta, even when the
    # known directions are dependent mod p
    coeffs = _solve_in_span(known, v, p)
    if coeffs is None:
        coeffs = _extract_past_oldform_junk(basis, P, v, known, q, N, dimV)
    if coeffs is None:
        raise PipelineInconsistency(
            f"projected form outside all handled Eisenstein-congruent block "
            f"structures (dim = {dimV})"
        )
    eta = 0
    for c, wt in zip(coeffs, weights):
        eta = (eta + int(c) * wt) % p
    return EtaResult(disc, p, q, int(eta), used, dimV)


def _second_eisenstein_vector(
    basis: QExpBasis, N: int, q: int
) -> np.ndarray | None:
    """Embed the reduction of e_N(z) - q e_N(qz), where e_N is the weight-2
    Eisenstein series at level N; cuspidal mod p because q = 1 mod p."""
    p = basis.p
    nterms = basis.nterms
    out = [0] * nterms
    for d in range(1, nterms):
        if d % N == 0:
            continue
        for n in range(d, nterms, d):
            out[n] += d
    s = [0] * nterms
    for n in range(1, nterms):
        s[n] = out[n] - q * (out[n // q] if n % q == 0 else 0)
    a0 = (N - 1) * (1 - q) * pow(24, -1, p)
    if a0 % p != 0:
        return None
    try:
        return basis.embed(TruncatedSeries(tuple(x % p for x in s), p))
    except NotInSpan:
        return None


def _extract_past_oldform_junk(
    basis: QExpBasis,
    P: np.ndarray,
    v: np.ndarray,
    known: list[np.ndarray],
    q: int,
    N: int,
    dimV: int,
) -> np.ndarray | None:
    """Coordinates of v along the known directions when the block also
    contains a level-N oldform pair congruent to the Eisenstein system
    (this arises when p divides the numerator of (N-1)/12).

    The junk pair J is pinned inside the block by: A = U_q - 1 kills every
    known direction exactly and is nilpotent of rank 1 on J, while U_N acts
    on J by the scalar a_N = -1 (the level-N newforms here have Atkin-Lehner
    sign +1, hence a_N = -1).  A j2 = j1 with U_N j2 = -j2 determines the
    J-direction outside ker A uniquely, and v - c2 j2 lies in
    span(known + [j1]).
    """
    p = basis.p
    MU_q = basis.transported_matrix(*basis.space.u_coset_quot(q))
    MU_N = basis.transported_matrix(*basis.space.u_coset_quot(N))
    A = (MU_q - np.eye(basis.d, dtype=np.int64)) % p

    for b in known:
        if np.any((b @ A) % p):
            raise PipelineInconsistency("U_q does not fix a known block vector")

    Rr, piv, _ = _rref_mod(P, p)
    V = Rr[: len(piv)]
    assert V.shape[0] == dimV
    AV = (V @ A) % p
    r = _rank_mod(AV, p)
    if r != 1:
        raise PipelineInconsistency(
            f"unexpected block structure: rank(U_q - 1) = {r} on a dim-{dimV} "
            "Eisenstein-congruent space"
        )
    Rr2, _, _ = _rref_mod(AV, p)
    j1 = Rr2[0]

    # j2 = t @ V with j2 (U_q - 1) = j1 and j2 U_N = -j2
    lhs = np.concatenate([(V @ A) % p, (V @ MU_N + V) % p], axis=1)
    rhs = np.concatenate([j1, np.zeros(basis.d, dtype=np.int64)])
    sol = _solve_linear_rows(lhs, rhs, p)
    if sol is None:
        raise PipelineInconsistency("junk direction j2 not solvable")
    t, hom = sol
    if hom.shape[0]:
        raise PipelineInconsistency("junk direction j2 not unique")
    j2 = (t @ V) % p

    c2_vec = _solve_in_span([j1], (v @ A) % p, p)
    if c2_vec is None:
        raise PipelineInconsistency("projected form has unexpected U_q image")
    c2 = int(c2_vec[0])
    coeffs = _solve_in_span(known + [j1], (v - c2 * j2) % p, p)
    if coeffs is None:
        return None
    return coeffs[: len(known)]


def _solve_linear_rows(
    lhs: np.ndarray, rhs: np.ndarray, p: int
) -> tuple[np.ndarray, np.ndarray] | None:
    """Solve t @ lhs = rhs mod p; returns (particular, homogeneous basis)."""
    k = lhs.shape[0]
    aug = np.concatenate([lhs % p, np.eye(k, dtype=np.int64)], axis=1)
    R, pivots, _ = _rref_mod(aug, p)
    pivots_in = [c for c in pivots if c < lhs.shape[1]]
    t = np.zeros(k, dtype=np.int64)
    resid = rhs % p
    for i, col in enumerate(pivots_in):
        f = int(resid[col]) % p
        if f:
            resid = (resid - f * R[i, : lhs.shape[1]]) % p
            t = (t + f * R[i, lhs.shape[1] :]) % p
    if np.any(resid):
        return None
    hom = R[len(pivots_in) :, lhs.shape[1] :] % p
    hom = hom[np.any(hom, axis=1)]
    # homogeneous rows h with h @ lhs = 0
    hom = np.array([h for h in hom if not np.any((h @ lhs) % p)], dtype=np.int64)
    return t, hom.reshape(-1, k)


def eta_invariant(disc: int, p: int, q: int) -> int:
    """First coefficient of the Eisenstein component of the traced form."""
    return eta_invariant_full(disc, p, q).eta


# --------------------------------------------------------------------- #
# direct trace 1 + W_N U_N (spec surface)
# --------------------------------------------------------------------- #


class TraceContext:
    """Startup data for the direct level-Nq -> level-q trace.

    The Atkin-Lehner matrix is transported through a basis built from a
    single pairing functional (so the symbol-to-series kernel is the
    star-minus part, which W_N preserves, making the transport
    well-defined).  Both operator orders are tried and validated against
    forms with exactly known traces: pi_1* F -> (N+1) F and
    V_N F -> T_N F / N for every level-q basis form F, plus the two
    Eisenstein pullbacks.  The order passing the battery is fixed.
    """

    def __init__(self, space, p: int, N: int, nterms: int):
        M = space.M
        if M % N != 0 or not is_prime(N) or gcd(N, M // N) != 1:
            raise TraceNotOldform(f"N = {N} must exactly divide the level {M}")
        self.N = N
        self.q = M // N
        self.p = p
        self.L = nterms // N
        if self.L < sturm_bound(self.q) + 5:
            raise TraceNotOldform(
                "level-Nq precision too small for a Sturm-complete trace"
            )
        self.basis_q = qexp_basis(self.q, p, nterms)
        self.basis_q_trunc = self.basis_q.truncated(self.L)

        from .errors import RankDeficient

        last_error = "no single-functional basis of full rank"
        self.basis = None
        self.order = None
        for e_try in range(min(space.dim_quotient, 8)):
            try:
                cand = QExpBasis(space, p, nterms, functional=e_try)
            except RankDeficient:
                continue
            MW = cand.transported_matrix(*space.atkin_lehner_quot(N))
            MU = cand.transported_matrix(*space.u_coset_quot(N))
            order = self._battery(cand, MW, MU)
            if order is not None:
                self.basis = cand
                self.MW, self.MU = MW, MU
                self.order = order
                return
            last_error = (
                f"functional {e_try} supports no operator order with exact "
                "traces on the old space"
            )
        raise TraceNotOldform(last_error)

    def _trace_series(
        self, basis: QExpBasis, MW: np.ndarray, MU: np.ndarray, w: np.ndarray, order: str
    ) -> TruncatedSeries:
        p, N, L = self.p, self.N, self.L
        base = TruncatedSeries(tuple(int(x) for x in (w @ basis.B[:, :L]) % p), p)
        if order == "WU":
            sW = ((w @ MW) % p) @ basis.B % p
            tail = u_operator(TruncatedSeries(tuple(int(x) for x in sW), p), N)
        else:  # "UW"
            v = (((w @ MU) % p) @ MW) % p
            tail = TruncatedSeries(tuple(int(x) for x in (v @ basis.B[:, :L]) % p), p)
        return base.add(tail.truncate(L))

    def _battery(self, basis: QExpBasis, MW, MU) -> str | None:
        """Return the operator order reproducing all known traces, or None."""
        p, N, L = self.p, self.N, self.L
        nterms = basis.nterms
        inv_N = pow(N % p, -1, p)
        cases = []  # (level-Nq coords, expected length-L series)
        try:
            sources = [self.basis_q.B[j] for j in range(self.basis_q.d)]
            Ebar = eisenstein_series_level_q(self.q, p, nterms)
            sources.append(np.array(Ebar.coeffs, dtype=np.int64))
            for F in sources:
                w1 = basis.embed(TruncatedSeries(tuple(int(x) for x in F), p))
                want1 = tuple(int((N + 1) * x) % p for x in F[:L])
                cases.append((w1, want1))
                vn = np.zeros(nterms, dtype=np.int64)
                vn[::N] = F[: (nterms - 1) // N + 1]
                wv = basis.embed(TruncatedSeries(tuple(int(x) for x in vn), p))
                tn = [0] * L
                for m_ in range(L):
                    acc = int(F[N * m_])
                    if m_ % N == 0:
                        acc += N * int(F[m_ // N])
                    tn[m_] = (acc * inv_N) % p
                cases.append((wv, tuple(tn)))
        except NotInSpan:
            return None
        for order in ("WU", "UW"):
            if all(
                self._trace_series(basis, MW, MU, w, order).coeffs == want
                for w, want in cases
            ):
                return order
        return None

    def trace(self, w_coords: np.ndarray) -> TruncatedSeries:
        return self._trace_series(self.basis, self.MW, self.MU, w_coords, self.order)


_trace_contexts: dict[tuple[int, int, int, int], TraceContext] = {}


def trace_context(space, p: int, N: int, nterms: int) -> TraceContext:
    key = (space.M, p, N, nterms)
    if key not in _trace_contexts:
        if len(_trace_contexts) > 4:
            _trace_contexts.clear()
        _trace_contexts[key] = TraceContext(space, p, N, nterms)
    return _trace_contexts[key]


def trace_down(form: EmbeddedForm, N: int) -> TruncatedSeries:
    """Push an embedded level-Nq form down to level q by 1 + W_N U_N.

    The operator order is fixed at startup by the exact-trace battery; the
    output is verified to land in the level-q span.
    """
    ctx = trace_context(form.basis.space, form.p, N, form.basis.nterms)
    w = ctx.basis.embed(form.series())
    s = ctx.trace(w)
    if not ctx.basis_q_trunc.contains(s):
        raise TraceNotOldform(
            f"trace of the given form does not land at level {ctx.q}"
        )
    return s


def trace_pipeline_precision(N: int, q: int) -> int:
    """Precision at level Nq so the direct trace is Sturm-complete at q."""
    return max(sturm_bound(N * q) + 5, N * (sturm_bound(q) + 6))
