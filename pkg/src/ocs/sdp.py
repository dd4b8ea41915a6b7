"""Semidefinite export of the selection problem.

The group-coancestry cap is equivalent, by a Schur complement against
the (positive definite) sparse inverse relationship matrix, to

    [[2 theta, x'], [x, Ainv]]  positive semidefinite,

which turns the whole selection problem into a block-diagonal linear
matrix inequality ``F0 - sum_k Fk z_k >= 0`` with five blocks of sizes
``1, 1, m, m, 1+m`` (total dimension ``3m + 3``).  This module builds
that data and writes/reads it in the sparse SDPA interchange format so
external semidefinite solvers can consume it; no SDP is solved here.

Block contents (all matrices symmetric, only upper triangles stored):

    F0: [1], [-1], Diag(u), -Diag(l), [[2 theta, 0], [0, Ainv]]
    Fk: [1], [-1], Diag(e_k), -Diag(e_k), [[0, -e_k'], [-e_k, 0]]

The bound-block diagonals of ``F0`` are always written explicitly, even
when zero, so files have a fixed, predictable layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .formulation import SelectionInstance

__all__ = ["SdpProblem", "build_sdp", "export_sdpa", "read_sdpa"]

#: entry = (block, row, col, value), 1-based within the block, row <= col
Entry = tuple[int, int, int, float]


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Block-diagonal SDP data ``max c'z`` s.t. ``F0 - sum Fk z_k >= 0``.

    ``matrices[k]`` holds the sorted upper-triangle entries of ``Fk``
    (``k = 0`` is the constant matrix).  ``diag_blocks`` flags blocks
    stored as diagonal in the SDPA header.
    """

    c: np.ndarray
    block_sizes: tuple[int, ...]
    diag_blocks: tuple[bool, ...]
    matrices: tuple[tuple[Entry, ...], ...]

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def dimension(self) -> int:
        return sum(self.block_sizes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SdpProblem):
            return NotImplemented
        return (
            np.array_equal(self.c, other.c)
            and self.block_sizes == other.block_sizes
            and self.diag_blocks == other.diag_blocks
            and self.matrices == other.matrices
        )


def build_sdp(inst: SelectionInstance, ainv: sp.spmatrix) -> SdpProblem:
    """Assemble the SDP data from an instance and its sparse inverse."""
    m = inst.size
    ainv = sp.csr_matrix(ainv)
    if ainv.shape != (m, m):
        raise ValueError("inverse relationship matrix dimension mismatch")

    f0: list[Entry] = [(1, 1, 1, 1.0), (2, 1, 1, -1.0)]
    f0 += [(3, i + 1, i + 1, float(inst.upper[i])) for i in range(m)]
    # "+ 0.0" turns a negative zero from -l into a plain one
    f0 += [(4, i + 1, i + 1, float(-inst.lower[i]) + 0.0) for i in range(m)]
    f0.append((5, 1, 1, 2.0 * inst.theta))
    coo = sp.triu(ainv).tocoo()
    order = np.lexsort((coo.col, coo.row))
    f0 += [
        (5, int(coo.row[t]) + 2, int(coo.col[t]) + 2, float(coo.data[t]))
        for t in order
    ]

    matrices: list[tuple[Entry, ...]] = [tuple(f0)]
    for k in range(1, m + 1):
        matrices.append(
            (
                (1, 1, 1, 1.0),
                (2, 1, 1, -1.0),
                (3, k, k, 1.0),
                (4, k, k, -1.0),
                (5, 1, 1 + k, -1.0),
            )
        )
    return SdpProblem(
        c=inst.merit.copy(),
        block_sizes=(1, 1, m, m, 1 + m),
        diag_blocks=(True, True, True, True, False),
        matrices=tuple(matrices),
    )


def export_sdpa(sdp: SdpProblem, sink) -> None:
    """Write the problem in sparse SDPA format (``.dat-s``).

    Layout: the variable count, the block count, the signed block sizes
    (negative marks a diagonal block), the objective vector, then one
    ``k blk i j value`` line per stored upper-triangle entry with
    ``k = 0`` for the constant matrix.  Values use shortest round-trip
    decimal text, so re-reading reproduces the problem exactly.
    """
    own = isinstance(sink, str)
    handle = open(sink, "w", encoding="utf-8") if own else sink
    try:
        handle.write(f"{sdp.n_vars}\n")
        handle.write(f"{len(sdp.block_sizes)}\n")
        sizes = [
            -size if diag else size
            for size, diag in zip(sdp.block_sizes, sdp.diag_blocks)
        ]
        handle.write(" ".join(str(s) for s in sizes) + "\n")
        handle.write(" ".join(repr(float(v)) for v in sdp.c) + "\n")
        for k, entries in enumerate(sdp.matrices):
            for blk, i, j, value in entries:
                handle.write(f"{k} {blk} {i} {j} {value!r}\n")
    finally:
        if own:
            handle.close()


def read_sdpa(source) -> SdpProblem:
    """Parse a file written by :func:`export_sdpa` back into data.

    Comment lines (``*`` or ``"``) before the header are skipped, as in
    the usual SDPA convention.  Stored entries keep their written order
    and explicit zeros survive the round trip.
    """
    own = isinstance(source, str)
    handle = open(source, "r", encoding="utf-8") if own else source
    try:
        lines = [ln for ln in handle.read().splitlines() if ln.strip()]
    finally:
        if own:
            handle.close()
    pos = 0
    while lines[pos].lstrip()[:1] in ("*", '"'):
        pos += 1
    n_vars = int(lines[pos])
    n_blocks = int(lines[pos + 1])
    raw_sizes = [int(tok) for tok in lines[pos + 2].replace(",", " ").split()]
    if len(raw_sizes) != n_blocks:
        raise ValueError("block size list does not match block count")
    c = np.array([float(tok) for tok in lines[pos + 3].replace(",", " ").split()])
    if len(c) != n_vars:
        raise ValueError("objective length does not match variable count")
    matrices: list[list[Entry]] = [[] for _ in range(n_vars + 1)]
    for line in lines[pos + 4:]:
        k_txt, blk, i, j, value = line.split()
        k = int(k_txt)
        matrices[k].append((int(blk), int(i), int(j), float(value)))
    return SdpProblem(
        c=c,
        block_sizes=tuple(abs(s) for s in raw_sizes),
        diag_blocks=tuple(s < 0 for s in raw_sizes),
        matrices=tuple(tuple(entries) for entries in matrices),
    )
