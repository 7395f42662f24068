"""Orchestration: admissibility gates, single rows, batch table generation,
and rendering (csv / json / md), reproducing the two published data tables."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import EisenstarkError, EisensteinRankNotOne, PipelineInconsistency
from .ffarith import is_prime, legendre, plog
from .heckeops import eta_invariant_full
from .merel import mazur_nonvanishing, merel_class, merel_unit
from .stark import cubic_poly, stark_class, unit_reduction

INFINITY = "inf"
UNDEFINED = None


@dataclass(frozen=True)
class RowRequest:
    disc: int
    p: int
    q: int


@dataclass
class RowResult:
    request: RowRequest
    merel_log: int | None = None
    stark_log: int | None = None
    log_ratio: int | None = None  # None with status 'infinity' means oo
    eta: int | None = None
    ratio: int | None = None  # log_ratio / eta
    ratio_inv: int | None = None  # eta / log_ratio
    checks: dict[str, bool] = field(default_factory=dict)
    status: str = "ok"
    error: str | None = None


def validate(request: RowRequest) -> dict[str, bool]:
    """Named admissibility gates; all structured, none raising."""
    disc, p, q = request.disc, request.p, request.q
    checks: dict[str, bool] = {}
    checks["p_prime"] = is_prime(p)
    checks["p_ge_5"] = p >= 5
    checks["q_prime"] = is_prime(q)
    checks["q_congruent_1_mod_p"] = checks["q_prime"] and checks["p_prime"] and q % p == 1
    checks["coprime"] = q % p != 0 and abs(disc) % q != 0 and abs(disc) % p != 0
    ok_so_far = all(checks.values())
    checks["legendre"] = (
        ok_so_far and legendre(disc % q, q) == -1
    )  # (-D/q) = -1: transposition Frobenius, a_q(g) = 0
    checks["mazur"] = (
        checks["legendre"] and mazur_nonvanishing(q, p)
    )
    return checks


def compute_row(request: RowRequest, verbose: bool = False) -> RowResult:
    """One verification row.  Rows failing the Mazur gate report infinity;
    rows failing earlier gates report status 'invalid'."""
    disc, p, q = request.disc, request.p, request.q
    checks = validate(request)
    res = RowResult(request=request, checks=checks)
    pre_mazur = [k for k in checks if k != "mazur"]
    if not all(checks[k] for k in pre_mazur):
        res.status = "invalid"
        return res

    field_ = cubic_poly(disc)
    mu = merel_unit(q)
    m_cls = merel_class(q, p)
    s_cls = stark_class(field_, q, p)
    res.merel_log = m_cls.exponent
    res.stark_log = s_cls.exponent
    if verbose:
        print(f"# merel unit = {mu.value.value} mod {q} (zeta = {mu.zeta.value})")
        print(f"# unit reduction = {unit_reduction(field_, q).value} mod {q}")
        print(f"# plogs: stark = {s_cls.exponent}, merel = {m_cls.exponent} (mod {p})")

    if m_cls.is_zero():
        res.status = "infinity"
        return res
    res.log_ratio = (s_cls.exponent * pow(m_cls.exponent, -1, p)) % p

    try:
        eta_res = eta_invariant_full(disc, p, q)
    except EisensteinRankNotOne as exc:
        res.status = "infinity"
        res.error = str(exc)
        return res
    except (PipelineInconsistency, EisenstarkError) as exc:
        res.status = "error"
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    res.eta = eta_res.eta
    if verbose:
        print(f"# eta = {res.eta} (block dim {eta_res.block_dim}, "
              f"aux primes {eta_res.aux_primes})")
    if res.eta % p != 0:
        res.ratio = (res.log_ratio * pow(res.eta, -1, p)) % p
    if res.log_ratio % p != 0:
        res.ratio_inv = (res.eta * pow(res.log_ratio, -1, p)) % p
    return res


def admissible_pairs(disc: int, pmax: int, qmax: int) -> list[RowRequest]:
    """All (p, q) with 5 <= p <= pmax, q <= qmax prime, q = 1 mod p, and
    (-D/q) = -1, in (p, q) order."""
    out = []
    for p in range(5, pmax + 1):
        if not is_prime(p):
            continue
        for q in range(p + 1, qmax + 1, p):
            if q % p != 1 or not is_prime(q):
                continue
            if abs(disc) % q == 0 or abs(disc) % p == 0:
                continue
            if legendre(disc % q, q) == -1:
                out.append(RowRequest(disc, p, q))
    return out


def _compute_row_worker(req: RowRequest) -> RowResult:
    return compute_row(req)


def batch(disc: int, pmax: int, qmax: int, jobs: int = 1) -> list[RowResult]:
    """All admissible rows in deterministic (p, q) order; per-row errors are
    isolated into the row status."""
    reqs = admissible_pairs(disc, pmax, qmax)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_compute_row_worker, reqs))
    else:
        results = [compute_row(r) for r in reqs]
    return results


# --------------------------------------------------------------------- #
# rendering
# --------------------------------------------------------------------- #


def _fmt(x: int | None, infinite_marker: bool = False) -> str:
    if x is None:
        return "∞" if infinite_marker else "-"
    return str(x)


def render(results: list[RowResult], fmt: str) -> str:
    if fmt == "csv":
        return _render_csv(results)
    if fmt == "json":
        return _render_json(results)
    if fmt == "md":
        return _render_md(results)
    raise ValueError(f"unknown format {fmt!r}")


def _render_csv(results: list[RowResult]) -> str:
    lines = ["disc,p,q,stark_log,merel_log,log_ratio,eta,ratio,status"]
    for r in results:
        infinite = r.status == "infinity"
        lines.append(
            ",".join(
                [
                    str(r.request.disc),
                    str(r.request.p),
                    str(r.request.q),
                    _fmt(r.stark_log),
                    _fmt(r.merel_log),
                    _fmt(r.log_ratio, infinite_marker=infinite),
                    _fmt(r.eta),
                    _fmt(r.ratio),
                    r.status,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _render_json(results: list[RowResult]) -> str:
    out = []
    for r in results:
        out.append(
            {
                "disc": r.request.disc,
                "p": r.request.p,
                "q": r.request.q,
                "stark_log": r.stark_log,
                "merel_log": r.merel_log,
                "log_ratio": r.log_ratio,
                "log_ratio_infinite": r.status == "infinity",
                "eta": r.eta,
                "ratio": r.ratio,
                "ratio_inv": r.ratio_inv,
                "status": r.status,
                "checks": r.checks,
                "error": r.error,
            }
        )
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def _render_md(results: list[RowResult]) -> str:
    """Markdown table mirroring the published layout.  The ratio column is
    log/eta for disc -23 and eta/log for disc -31, matching the orientation
    under which each published table's ratio is constant."""
    if not results:
        return "| p | q | log ratio | eta | ratio |\n|---|---|---|---|---|\n"
    disc = results[0].request.disc
    lines = [
        f"Data for discriminant {disc}",
        "",
        "| p | q | log(u)/log(merel) | eta | ratio |",
        "|---|---|---|---|---|",
    ]
    for r in results:
        infinite = r.status == "infinity"
        shown_ratio = r.ratio if disc == -23 else r.ratio_inv
        lines.append(
            "| {} | {} | {} | {} | {} |".format(
                r.request.p,
                r.request.q,
                _fmt(r.log_ratio, infinite_marker=infinite),
                _fmt(r.eta),
                _fmt(shown_ratio),
            )
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------- #
# command line
# --------------------------------------------------------------------- #


def _cmd_row(args: argparse.Namespace) -> int:
    req = RowRequest(args.disc, args.p, args.q)
    res = compute_row(req, verbose=args.verbose)
    print(render([res], args.format), end="")
    if res.status == "invalid":
        failed = [k for k, v in res.checks.items() if not v]
        print(f"validation failed: {failed}", file=sys.stderr)
        return 1
    if res.status == "error":
        print(f"pipeline error: {res.error}", file=sys.stderr)
        return 2
    return 0


def _cmd_table(args: argparse.Namespace) -> int:
    results = batch(args.disc, args.pmax, args.qmax, jobs=args.jobs)
    text = render(results, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    if any(r.status == "error" for r in results):
        for r in results:
            if r.status == "error":
                print(
                    f"error at (p, q) = ({r.request.p}, {r.request.q}): {r.error}",
                    file=sys.stderr,
                )
        return 2
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    from .diagnostics import run_selftest

    ok = run_selftest(verbose=True)
    return 0 if ok else 2


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="eisenstark",
        description="Verify the Stark/Merel/Eisenstein ratio for the "
        "weight-one forms of discriminant -23 and -31",
    )
    ap.add_argument("--cache-dir", default=None, help="on-disk cache directory")
    sub = ap.add_subparsers(dest="cmd", required=True)

    row = sub.add_parser("row", help="compute a single (disc, p, q) row")
    row.add_argument("--disc", type=int, required=True, choices=(-23, -31))
    row.add_argument("--p", type=int, required=True)
    row.add_argument("--q", type=int, required=True)
    row.add_argument("--format", default="csv", choices=("csv", "json", "md"))
    row.add_argument("--verbose", action="store_true")
    row.set_defaults(func=_cmd_row)

    table = sub.add_parser("table", help="compute all admissible rows")
    table.add_argument("--disc", type=int, required=True, choices=(-23, -31))
    table.add_argument("--pmax", type=int, default=100)
    table.add_argument("--qmax", type=int, default=150)
    table.add_argument("--format", default="csv", choices=("csv", "json", "md"))
    table.add_argument("--out", default=None)
    table.add_argument("--jobs", type=int, default=1)
    table.set_defaults(func=_cmd_table)

    st = sub.add_parser("selftest", help="run the algebraic invariant suites")
    st.set_defaults(func=_cmd_selftest)

    args = ap.parse_args(argv)
    if args.cache_dir:
        from .modsym import cache

        cache.set_cache_dir(args.cache_dir)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
