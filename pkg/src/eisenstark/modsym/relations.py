"""Sparse Gauss-Jordan elimination over Q for the Manin relation system.

Rows are dicts {unknown: Fraction}.  The eliminator keeps every stored row
fully reduced against all pivots, choosing the shortest available row and,
inside it, the column occurring in fewest other rows (a small Markowitz
heuristic), which keeps fill-in low on the 3-term Manin systems.
"""

from __future__ import annotations

import heapq
from fractions import Fraction


def solve_relations(
    unknowns: list[int], relations: list[dict[int, Fraction]]
) -> tuple[list[int], dict[int, dict[int, Fraction]]]:
    """Quotient a free module on ``unknowns`` by homogeneous ``relations``.

    Returns (free, expr): the unknowns that survive as a basis of the
    quotient, and for every eliminated unknown its expression as a sparse
    combination of free ones.
    """
    rows: dict[int, dict[int, Fraction]] = {}
    col_rows: dict[int, set[int]] = {u: set() for u in unknowns}
    for rid, rel in enumerate(relations):
        row = {c: Fraction(v) for c, v in rel.items() if v != 0}
        if not row:
            continue
        rows[rid] = row
        for c in row:
            col_rows[c].add(rid)

    active = set(rows)
    heap = [(len(r), rid) for rid, r in rows.items()]
    heapq.heapify(heap)
    pivot_of_row: dict[int, int] = {}

    while heap:
        ln, rid = heapq.heappop(heap)
        if rid not in active:
            continue
        row = rows[rid]
        if not row:
            active.discard(rid)
            continue
        if len(row) != ln:
            heapq.heappush(heap, (len(row), rid))
            continue
        # pivot on the column of this row present in fewest rows overall
        col = min(row, key=lambda c: (len(col_rows[c]), c))
        piv = row[col]
        if piv != 1:
            for c in row:
                row[c] /= piv
        active.discard(rid)
        pivot_of_row[rid] = col

        for rid2 in list(col_rows[col]):
            if rid2 == rid:
                continue
            row2 = rows[rid2]
            f = row2.pop(col)
            col_rows[col].discard(rid2)
            for c, v in row.items():
                if c == col:
                    continue
                nv = row2.get(c, Fraction(0)) - f * v
                if nv == 0:
                    if c in row2:
                        del row2[c]
                        col_rows[c].discard(rid2)
                else:
                    if c not in row2:
                        col_rows[c].add(rid2)
                    row2[c] = nv
            if rid2 in active:
                heapq.heappush(heap, (len(row2), rid2))
        col_rows[col] = {rid}

    expr: dict[int, dict[int, Fraction]] = {}
    pivot_cols = set()
    for rid, col in pivot_of_row.items():
        row = rows[rid]
        expr[col] = {c: -v for c, v in row.items() if c != col}
        pivot_cols.add(col)
    free = [u for u in unknowns if u not in pivot_cols]
    # pivot expressions must reference free unknowns only (Gauss-Jordan invariant)
    for col, e in expr.items():
        assert all(c not in pivot_cols for c in e), "unreduced pivot expression"
    return free, expr
