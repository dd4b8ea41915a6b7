"""Relationship-matrix algebra for canonical pedigrees.

Everything here derives from the additive-relationship recursion: for a
member ``i`` with parents ``p`` and ``q`` (0 when unknown),

    A[i, j] = (A[j, p] + A[j, q]) / 2        for j < i
    A[i, i] = 1 + A[p, q] / 2

with ``A[p, q] = 0`` whenever a parent is unknown.  The dense builder is
the desk-scale oracle; the remaining operations (inbreeding vector,
per-member weights, sparse inverse, and its sparse square root) scale to
very large pedigrees without ever materializing an ``m x m`` array.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .pedigree import Pedigree

__all__ = [
    "DenseLimitError",
    "relationship_matrix",
    "inbreeding",
    "henderson_weights",
    "inverse_relationship",
    "inverse_root",
    "group_coancestry",
    "write_coordinate",
]

#: members above this count refuse to build a dense matrix (override per call)
DEFAULT_DENSE_LIMIT = 20_000


class DenseLimitError(RuntimeError):
    """Dense relationship matrix requested for an oversized pedigree."""


def relationship_matrix(ped: Pedigree, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Build the full numerator relationship matrix ``A``.

    Parameters
    ----------
    ped : Pedigree
        Canonically ordered pedigree.
    dense_limit : int, optional
        Guard against accidental huge allocations; raise if
        ``ped.size`` exceeds it.

    Returns
    -------
    ndarray of shape (m, m)
        Symmetric positive definite relationship matrix.
    """
    m = ped.size
    if m > dense_limit:
        raise DenseLimitError(
            f"pedigree has {m} members, dense limit is {dense_limit}"
        )
    sire = ped.sire
    dam = ped.dam
    A = np.zeros((m, m))
    for i in range(m):
        pi = sire[i] - 1
        qi = dam[i] - 1
        if qi >= 0:
            A[i, :i] = 0.5 * (A[pi, :i] + A[qi, :i])
            A[i, i] = 1.0 + 0.5 * A[pi, qi]
        elif pi >= 0:
            A[i, :i] = 0.5 * A[pi, :i]
            A[i, i] = 1.0
        else:
            A[i, i] = 1.0
        A[:i, i] = A[i, :i]
    return A


def _kinship_of_pair(sire: np.ndarray, dam: np.ndarray, a: int, b: int) -> float:
    """Relationship ``A[a, b]`` computed over the ancestor closure only.

    The closure of ``{a, b}`` is parent-complete, so running the
    recursion restricted to it reproduces the exact entries of ``A`` on
    that subset.  Cost is quadratic in the closure size, which stays
    small for real pedigrees.
    """
    closure: set[int] = set()
    stack = [a, b]
    while stack:
        j = stack.pop()
        if j == 0 or j in closure:
            continue
        closure.add(j)
        stack.append(sire[j - 1])
        stack.append(dam[j - 1])
    order = sorted(closure)
    pos = {member: k for k, member in enumerate(order)}
    n = len(order)
    A = np.zeros((n, n))
    for k, member in enumerate(order):
        s = sire[member - 1]
        d = dam[member - 1]
        ks = pos[s] if s else -1
        kd = pos[d] if d else -1
        if kd >= 0:
            A[k, :k] = 0.5 * (A[ks, :k] + A[kd, :k])
            A[k, k] = 1.0 + 0.5 * A[ks, kd]
        elif ks >= 0:
            A[k, :k] = 0.5 * A[ks, :k]
            A[k, k] = 1.0
        else:
            A[k, k] = 1.0
        A[:k, k] = A[k, :k]
    return float(A[pos[a], pos[b]])


def inbreeding(ped: Pedigree) -> np.ndarray:
    """Inbreeding coefficients ``h = diag(A) - 1`` without dense ``A``.

    A member with an unknown parent has ``h = 0``; otherwise ``h`` is
    half the relationship of its parents, computed over the parents'
    ancestor closure.  Results match ``diag(relationship_matrix(ped)) - 1``
    to machine precision.  Full-sib families share the computation.
    """
    m = ped.size
    sire = ped.sire
    dam = ped.dam
    h = np.zeros(m)
    pair_cache: dict[tuple[int, int], float] = {}
    for i in range(m):
        d = dam[i]
        if d == 0:
            continue
        s = sire[i]
        key = (s, d)
        value = pair_cache.get(key)
        if value is None:
            value = 0.5 * _kinship_of_pair(sire, dam, s, d)
            pair_cache[key] = value
        h[i] = value
    return h


def henderson_weights(ped: Pedigree, h: np.ndarray | None = None) -> np.ndarray:
    """Per-member weights of the rank-one decomposition of ``A^-1``.

    For member ``i`` the weight is

        b_i = 4 / ((1 + d(p))(1 - h_p) + (1 + d(q))(1 - h_q))

    where ``d(0) = 1`` and ``d(p) = 0`` for a known parent, and the
    inbreeding of an unknown parent counts as zero.  Founders get
    ``b = 1``, non-inbred full-parent members ``b = 2``.
    """
    if h is None:
        h = inbreeding(ped)
    hs = np.where(ped.sire > 0, h[np.maximum(ped.sire - 1, 0)], 0.0)
    hd = np.where(ped.dam > 0, h[np.maximum(ped.dam - 1, 0)], 0.0)
    ds = (ped.sire == 0).astype(float)
    dd = (ped.dam == 0).astype(float)
    denom = (1.0 + ds) * (1.0 - hs) + (1.0 + dd) * (1.0 - hd)
    if np.any(denom <= 0):
        bad = int(np.argmax(denom <= 0)) + 1
        raise ValueError(
            f"nonpositive weight denominator at member {bad}: inconsistent inbreeding input"
        )
    return 4.0 / denom


def _coalesce(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, shape) -> sp.csr_matrix:
    """Sum duplicate coordinates into a CSR matrix.

    A stable sort keyed on (row, col) preserves insertion order inside
    each duplicate group, so additions happen in ascending member order
    and the floating-point result is reproducible.
    """
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    vals = vals[order]
    boundary = np.ones(len(rows), dtype=bool)
    boundary[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(boundary)
    summed = np.add.reduceat(vals, starts) if len(vals) else vals
    out = sp.csr_matrix((summed, (rows[starts], cols[starts])), shape=shape)
    return out


def inverse_relationship(
    ped: Pedigree, weights: np.ndarray | None = None
) -> sp.csr_matrix:
    """Sparse ``A^-1`` assembled from per-member rank-one terms.

    Each member contributes at most nine coordinate entries

        b   at (i, i)
        -b/2 at (i, p), (p, i), (i, q), (q, i)
        b/4 at (p, p), (p, q), (q, p), (q, q)

    for its known parents, so ``nnz <= 9 m`` and no dense array is ever
    allocated.  Entries for successive members accumulate in ascending
    member order.
    """
    if weights is None:
        weights = henderson_weights(ped)
    m = ped.size
    i0 = np.arange(m)  # 0-based member index
    p0 = ped.sire - 1
    q0 = ped.dam - 1
    has_p = p0 >= 0
    has_q = q0 >= 0

    # slots 0..8 per member; unused slots get row -1 and are dropped
    rows = np.full((m, 9), -1, dtype=np.int64)
    cols = np.zeros((m, 9), dtype=np.int64)
    vals = np.zeros((m, 9))

    rows[:, 0] = i0
    cols[:, 0] = i0
    vals[:, 0] = weights

    def put(slot, mask, r, c, v):
        rows[mask, slot] = r[mask]
        cols[mask, slot] = c[mask]
        vals[mask, slot] = v[mask]

    put(1, has_p, i0, p0, -weights / 2)
    put(2, has_p, p0, i0, -weights / 2)
    put(3, has_p, p0, p0, weights / 4)
    put(4, has_q, i0, q0, -weights / 2)
    put(5, has_q, q0, i0, -weights / 2)
    put(6, has_q, q0, q0, weights / 4)
    both = has_p & has_q
    put(7, both, p0, q0, weights / 4)
    put(8, both, q0, p0, weights / 4)

    keep = rows.ravel() >= 0
    return _coalesce(
        rows.ravel()[keep], cols.ravel()[keep], vals.ravel()[keep], (m, m)
    )


def inverse_root(ped: Pedigree, weights: np.ndarray | None = None) -> sp.csr_matrix:
    """Sparse row factor ``B`` with ``B.T @ B = A^-1``.

    Row ``i`` is ``sqrt(b_i) * (e_i - e_p/2 - e_q/2)`` restricted to the
    known parents, so it holds one, two or three nonzeros and
    ``nnz(B) <= 3 m``.
    """
    if weights is None:
        weights = henderson_weights(ped)
    m = ped.size
    root = np.sqrt(weights)
    i0 = np.arange(m)
    p0 = ped.sire - 1
    q0 = ped.dam - 1
    has_p = p0 >= 0
    has_q = q0 >= 0

    rows = np.full((m, 3), -1, dtype=np.int64)
    cols = np.zeros((m, 3), dtype=np.int64)
    vals = np.zeros((m, 3))
    rows[:, 0] = i0
    cols[:, 0] = i0
    vals[:, 0] = root
    rows[has_p, 1] = i0[has_p]
    cols[has_p, 1] = p0[has_p]
    vals[has_p, 1] = -root[has_p] / 2
    rows[has_q, 2] = i0[has_q]
    cols[has_q, 2] = q0[has_q]
    vals[has_q, 2] = -root[has_q] / 2

    keep = rows.ravel() >= 0
    return _coalesce(
        rows.ravel()[keep], cols.ravel()[keep], vals.ravel()[keep], (m, m)
    )


def group_coancestry(A: np.ndarray, x: np.ndarray) -> float:
    """Average relatedness ``x' A x / 2`` of a contribution vector."""
    A = np.asarray(A)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("relationship matrix must be square")
    if x.shape != (A.shape[0],):
        raise ValueError(
            f"contribution vector has length {x.shape}, expected {A.shape[0]}"
        )
    return float(x @ (A @ x)) / 2.0


def write_coordinate(matrix: sp.spmatrix, sink) -> None:
    """Dump a sparse matrix as 1-based ``i j value`` lines (debugging aid)."""
    coo = sp.coo_matrix(matrix)
    own = isinstance(sink, str)
    handle = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            handle.write(f"{i + 1} {j + 1} {float(v)!r}\n")
    finally:
        if own:
            handle.close()
