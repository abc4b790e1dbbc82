"""Exact rank and determinant of integer matrices (fraction-free elimination).

Bareiss' algorithm keeps every intermediate entry integral, so the results are
exact for the small ``{-1, 0, +1}`` matrices produced by the topological
constructions and for their integer products.
"""

import numpy as np
import scipy.sparse as sp


def _as_rows(m):
    if sp.issparse(m):
        m = m.toarray()
    elif hasattr(m, "to_dense"):
        m = m.to_dense()
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if a.size and not np.all(np.equal(np.mod(a, 1), 0)):
        raise ValueError("exact routines need integer entries")
    return [[int(x) for x in row] for row in a.tolist()], a.shape


def _bareiss(rows, nrows, ncols):
    """Fraction-free forward elimination in place; returns (rank, sign, last pivot)."""
    rank = 0
    sign = 1
    prev = 1
    for col in range(ncols):
        if rank == nrows:
            break
        piv = None
        for r in range(rank, nrows):
            if rows[r][col] != 0:
                piv = r
                break
        if piv is None:
            continue
        if piv != rank:
            rows[piv], rows[rank] = rows[rank], rows[piv]
            sign = -sign
        p = rows[rank][col]
        prow = rows[rank]
        for r in range(rank + 1, nrows):
            row = rows[r]
            f = row[col]
            if f == 0:
                if p != 1 or prev != 1:
                    for c in range(col + 1, ncols):
                        row[c] = (row[c] * p) // prev
                row[col] = 0
                continue
            for c in range(col + 1, ncols):
                row[c] = (row[c] * p - f * prow[c]) // prev
            row[col] = 0
        prev = p
        rank += 1
    return rank, sign, prev


def rank(m) -> int:
    """Exact rank over the rationals of an integer matrix."""
    rows, (nr, nc) = _as_rows(m)
    if nr == 0 or nc == 0:
        return 0
    if nc < nr:
        rows = [list(col) for col in zip(*rows)]
        nr, nc = nc, nr
    r, _, _ = _bareiss(rows, nr, nc)
    return r


def det(m) -> int:
    """Exact determinant of a square integer matrix (``det`` of 0x0 is 1)."""
    rows, (nr, nc) = _as_rows(m)
    if nr != nc:
        raise ValueError("determinant needs a square matrix")
    if nr == 0:
        return 1
    r, sign, last = _bareiss(rows, nr, nc)
    if r < nr:
        return 0
    return sign * last


def is_regular(m) -> bool:
    rows, (nr, nc) = _as_rows(m)
    return nr == nc and (nr == 0 or rank(m) == nr)


def nullity_left(m) -> int:
    """Dimension of ``ker m^T``."""
    return np.shape(m)[0] - rank(m)


def nullity(m) -> int:
    """Dimension of ``ker m``."""
    return np.shape(m)[1] - rank(m)
