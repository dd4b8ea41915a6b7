"""Cholesky machinery for the simple and sparse problem builds.

The simple build factors the dense relationship matrix as ``A = U' U``
with ``U`` upper triangular.  The sparse build instead factors the
sparse inverse: a fill-reducing permutation is computed first, then the
permuted matrix is factored as ``R' R`` and the permutation is folded
back in when the factor is used inside a norm constraint.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "NotPositiveDefiniteError",
    "Permutation",
    "InverseFactor",
    "dense_cholesky",
    "natural_order",
    "fill_reducing_permutation",
    "sparse_cholesky",
]

#: a pivot below this fraction of the largest diagonal entry counts as zero
PIVOT_RTOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Factorization hit a nonpositive (or negligible) pivot.

    ``index`` is the 1-based pivot position that failed.
    """

    def __init__(self, index: int, detail: str = ""):
        self.index = index
        message = f"matrix is not positive definite at pivot {index}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


def dense_cholesky(M: np.ndarray) -> np.ndarray:
    """Upper-triangular ``U`` with ``U' U = M`` for dense SPD ``M``.

    Raises
    ------
    NotPositiveDefiniteError
        Reporting the 1-based pivot index at which factorization broke
        down, including pivots smaller than ``PIVOT_RTOL`` times the
        largest diagonal entry.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    c, info = sla.lapack.dpotrf(M, lower=0, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of dpotrf")
    U = np.triu(c)
    floor = PIVOT_RTOL * max(np.max(np.diag(M)), 0.0)
    small = np.flatnonzero(np.diag(U) ** 2 < floor)
    if small.size:
        raise NotPositiveDefiniteError(int(small[0]) + 1, "pivot below tolerance")
    return U


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``0..n-1`` with its inverse.

    ``order[k]`` is the original index placed at position ``k``; the
    permuted matrix is ``S[order][:, order]``.
    """

    order: np.ndarray

    def __post_init__(self):
        n = len(self.order)
        if not np.array_equal(np.sort(self.order), np.arange(n)):
            raise ValueError("not a permutation of 0..n-1")

    @property
    def size(self) -> int:
        return len(self.order)

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.order)
        inv[self.order] = np.arange(len(self.order))
        return inv

    def apply_symmetric(self, S: sp.spmatrix) -> sp.csc_matrix:
        """Return ``P S P'``, i.e. ``S`` with rows/cols reordered by ``order``."""
        S = sp.csc_matrix(S)
        inv = self.inverse
        coo = S.tocoo()
        return sp.csc_matrix(
            (coo.data, (inv[coo.row], inv[coo.col])), shape=S.shape
        )


def natural_order(n: int) -> Permutation:
    """The identity ordering (fallback when fill reduction is disabled)."""
    return Permutation(order=np.arange(n))


def fill_reducing_permutation(S: sp.spmatrix) -> Permutation:
    """Minimum-degree ordering of a structurally symmetric sparse matrix.

    Straight minimum degree on the elimination graph: repeatedly pick
    the vertex of smallest current degree (ties broken by the smaller
    index, so the result is deterministic), connect its neighbours into
    a clique and remove it.  Fill quality is a performance property
    only; any valid permutation keeps the factorization correct.
    """
    S = sp.csr_matrix(S)
    n = S.shape[0]
    if n == 0:
        return Permutation(order=np.arange(0))
    indptr, indices = S.indptr, S.indices
    adjacency: list[set[int]] = []
    for v in range(n):
        nbrs = set(indices[indptr[v]:indptr[v + 1]].tolist())
        nbrs.discard(v)
        adjacency.append(nbrs)

    order = np.empty(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    heap = [(len(adjacency[v]), v) for v in range(n)]
    heapq.heapify(heap)
    placed = 0
    while placed < n:
        degree, v = heapq.heappop(heap)
        if not alive[v] or degree != len(adjacency[v]):
            continue  # stale heap entry
        order[placed] = v
        placed += 1
        alive[v] = False
        nbrs = adjacency[v]
        for u in nbrs:
            au = adjacency[u]
            au.discard(v)
            au.update(nbrs)
            au.discard(u)
            heapq.heappush(heap, (len(au), u))
        adjacency[v] = set()
    return Permutation(order=order)


@dataclass(frozen=True)
class InverseFactor:
    """Sparse Cholesky factor of a permuted SPD matrix.

    ``factor`` is upper triangular in the permuted order and satisfies
    ``factor' factor = P S P'`` for the stored permutation.  ``source``
    keeps a reference to the matrix that was factored so downstream
    builders can reuse it.
    """

    factor: sp.csr_matrix
    perm: Permutation
    source: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.factor.shape[0]

    def cone_matrix(self) -> sp.csr_matrix:
        """The factor with the permutation folded into its columns.

        Returns ``G = factor @ P`` so that ``|G y| = |factor (P y)|``
        and ``G' G`` equals the unpermuted source matrix; ``y`` keeps
        its original indexing.
        """
        n = self.size
        inv = self.perm.inverse
        P = sp.csr_matrix(
            (np.ones(n), (np.arange(n), self.perm.order)), shape=(n, n)
        )
        return sp.csr_matrix(self.factor @ P)


def sparse_cholesky(S: sp.spmatrix, perm: Permutation | None = None) -> InverseFactor:
    """Left-looking sparse Cholesky ``R' R`` of a permuted SPD matrix.

    Parameters
    ----------
    S : sparse matrix
        Symmetric positive definite (both triangles stored).
    perm : Permutation, optional
        Row/column order to factor in; natural order when omitted.

    Raises
    ------
    NotPositiveDefiniteError
        With the 1-based pivot index (in permuted order) on breakdown.
    """
    S = sp.csr_matrix(S)
    n = S.shape[0]
    if perm is None:
        perm = natural_order(n)
    Sp = perm.apply_symmetric(S).tocsc()
    max_diag = max(float(Sp.diagonal().max()), 0.0) if n else 0.0
    floor = PIVOT_RTOL * max_diag

    # columns of the lower factor L (= R'), built left to right
    col_rows: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    col_vals: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    # for each row j, the columns k < j with L[j, k] != 0
    row_cols: list[list[int]] = [[] for _ in range(n)]
    work = np.zeros(n)

    indptr, indices, data = Sp.indptr, Sp.indices, Sp.data
    for j in range(n):
        lo, hi = indptr[j], indptr[j + 1]
        src = indices[lo:hi]
        below = src >= j
        work[src[below]] += data[lo:hi][below]
        for k in row_cols[j]:
            rows_k = col_rows[k]
            vals_k = col_vals[k]
            # L[j, k] is the first stored entry at or past row j
            start = np.searchsorted(rows_k, j)
            work[rows_k[start:]] -= vals_k[start] * vals_k[start:]
        pivot = work[j]
        if pivot <= floor or not np.isfinite(pivot):
            raise NotPositiveDefiniteError(j + 1)
        diag = np.sqrt(pivot)
        rows_j = j + np.flatnonzero(work[j:])
        vals_j = work[rows_j] / diag
        vals_j[0] = diag  # rows_j[0] == j since the pivot is nonzero
        col_rows[j] = rows_j
        col_vals[j] = vals_j
        for r in rows_j[1:]:
            row_cols[r].append(j)
        work[rows_j] = 0.0

    indices_out = np.concatenate([col_rows[j] for j in range(n)]) if n else np.array([], dtype=np.int64)
    values_out = np.concatenate([col_vals[j] for j in range(n)]) if n else np.array([])
    ptr_out = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        ptr_out[j + 1] = ptr_out[j] + len(col_rows[j])
    L = sp.csc_matrix((values_out, indices_out, ptr_out), shape=(n, n))
    R = sp.csr_matrix(L.T)
    return InverseFactor(factor=R, perm=perm, source=S)
