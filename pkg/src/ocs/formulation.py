"""Build conic problem instances for contribution selection.

The underlying selection problem over contributions ``x`` is

    maximize    g' x
    subject to  e' x = 1,  l <= x <= u,  x' A x / 2 <= theta

and all three builders here express it in the inequality standard form

    maximize    c' z
    subject to  f0 - F z  in  R+^{n_lin}  x  SOC^{n_soc}

with a single second-order cone block.  Row order is always: the two
rows enforcing the unit total, the upper bounds, the lower bounds, the
cone head (carrying ``sqrt(2 theta)`` in ``f0``), and the cone tail.

* ``build_simple``   keeps ``x`` as the variable; the cone tail is the
  dense Cholesky factor of ``A``.
* ``build_sparse``   substitutes ``y = A x``; every row uses the sparse
  inverse, and the cone tail is a sparse factor of it.
* ``build_compact``  is the same substitution but the cone tail is the
  pedigree square root ``B`` directly, so nothing is ever factored and
  no dense matrix appears anywhere in the pipeline.

The ``y``-variable builds return a :class:`RecoveryMap` that maps the
solved variable back to contributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .factorization import InverseFactor, dense_cholesky, fill_reducing_permutation, sparse_cholesky
from .kinship import inverse_relationship, inverse_root, relationship_matrix
from .pedigree import Pedigree

__all__ = [
    "InvalidInstanceError",
    "SelectionInstance",
    "selection_instance",
    "ConicProblem",
    "RecoveryMap",
    "recover_x",
    "build_simple",
    "build_sparse",
    "build_compact",
    "build",
    "write_conic",
    "FORMULATIONS",
]

FORMULATIONS = ("simple", "sparse", "compact")


class InvalidInstanceError(ValueError):
    """Selection instance data violates a structural requirement."""


@dataclass(frozen=True)
class SelectionInstance:
    """A contribution-selection instance over a canonical pedigree.

    ``lower``/``upper`` are per-member bounds, ``merit`` the objective
    coefficients (defaults to the pedigree EBVs), and ``theta`` the
    group-coancestry cap.
    """

    ped: Pedigree
    theta: float
    lower: np.ndarray
    upper: np.ndarray
    merit: np.ndarray

    def __post_init__(self):
        m = self.ped.size
        if self.theta <= 0:
            raise InvalidInstanceError("theta must be positive")
        for name, vec in (("lower", self.lower), ("upper", self.upper), ("merit", self.merit)):
            if vec.shape != (m,):
                raise InvalidInstanceError(f"{name} has shape {vec.shape}, expected ({m},)")
        if np.any(self.lower < 0):
            raise InvalidInstanceError("lower bounds must be nonnegative")
        if np.any(self.lower > self.upper):
            raise InvalidInstanceError("lower bound exceeds upper bound")
        # cheap necessary conditions for a unit total to exist
        if self.lower.sum() > 1.0:
            raise InvalidInstanceError("lower bounds sum beyond 1: no valid contribution vector")
        if self.upper.sum() < 1.0:
            raise InvalidInstanceError("upper bounds sum below 1: no valid contribution vector")

    @property
    def size(self) -> int:
        return self.ped.size


def selection_instance(
    ped: Pedigree,
    theta: float,
    lower: float | np.ndarray = 0.0,
    upper: float | np.ndarray = 1.0,
    merit: np.ndarray | None = None,
) -> SelectionInstance:
    """Assemble an instance, broadcasting scalar bounds to all members."""
    m = ped.size
    lo = np.full(m, float(lower)) if np.isscalar(lower) else np.asarray(lower, dtype=float)
    up = np.full(m, float(upper)) if np.isscalar(upper) else np.asarray(upper, dtype=float)
    g = ped.ebv.astype(float) if merit is None else np.asarray(merit, dtype=float)
    return SelectionInstance(ped=ped, theta=float(theta), lower=lo, upper=up, merit=g)


@dataclass(frozen=True)
class PedigreeStructure:
    """Promise that a problem's rows follow the y-variable layout.

    Rows are exactly ``[(Ainv e)'; -(Ainv e)'; Ainv; -Ainv; 0; T]`` with
    ``T'T = Ainv`` for the stored sparse inverse.  The solver exploits
    this to condense its Newton system onto matrices with the sparsity
    of ``Ainv`` itself, which is what makes very large pedigrees
    tractable.
    """

    ainv: sp.csr_matrix


@dataclass(frozen=True)
class ConicProblem:
    """Inequality-form cone program data: max ``c'z`` s.t. ``f0 - Fz`` in cone.

    The cone is ``R+^{n_lin} x SOC^{n_soc}`` with the orthant rows first.
    """

    c: np.ndarray
    f0: np.ndarray
    F: sp.csr_matrix
    n_lin: int
    n_soc: int
    structure: PedigreeStructure | None = None

    def __post_init__(self):
        n_rows = self.n_lin + self.n_soc
        if self.F.shape != (n_rows, len(self.c)):
            raise ValueError(
                f"F has shape {self.F.shape}, expected ({n_rows}, {len(self.c)})"
            )
        if self.f0.shape != (n_rows,):
            raise ValueError("f0 length does not match row count")
        if self.n_soc == 1:
            raise ValueError("a one-dimensional cone block should be an orthant row")

    @property
    def n_vars(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class RecoveryMap:
    """Maps a solved variable back to contributions.

    For the y-variable formulations this is multiplication by the
    sparse inverse relationship matrix; ``ainv=None`` is the identity
    (the simple formulation already solves in ``x``).
    """

    ainv: sp.csr_matrix | None = None

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return recover_x(y, self)


def recover_x(y: np.ndarray, mapping: RecoveryMap) -> np.ndarray:
    """Recover contributions from a transformed solution via sparse multiply."""
    y = np.asarray(y, dtype=float)
    if mapping.ainv is None:
        return y.copy()
    if y.shape != (mapping.ainv.shape[1],):
        raise ValueError(
            f"solution length {y.shape} does not match map dimension {mapping.ainv.shape[1]}"
        )
    return mapping.ainv @ y


def _bound_f0(inst: SelectionInstance) -> np.ndarray:
    m = inst.size
    f0 = np.empty(2 + 2 * m + 1 + m)
    f0[0] = 1.0
    f0[1] = -1.0
    f0[2:2 + m] = inst.upper
    f0[2 + m:2 + 2 * m] = -inst.lower
    f0[2 + 2 * m] = math.sqrt(2.0 * inst.theta)
    f0[2 + 2 * m + 1:] = 0.0
    return f0


def build_simple(inst: SelectionInstance, chol_u: np.ndarray) -> ConicProblem:
    """Simple formulation: variable ``x``, cone tail ``U`` with ``U'U = A``."""
    m = inst.size
    if chol_u.shape != (m, m):
        raise InvalidInstanceError("Cholesky factor dimension mismatch")
    ones_row = sp.csr_matrix(np.ones((1, m)))
    eye = sp.identity(m, format="csr")
    F = sp.vstack(
        [ones_row, -ones_row, eye, -eye, sp.csr_matrix((1, m)), sp.csr_matrix(chol_u)],
        format="csr",
    )
    return ConicProblem(
        c=inst.merit.copy(), f0=_bound_f0(inst), F=F, n_lin=2 + 2 * m, n_soc=1 + m
    )


def _build_transformed(inst: SelectionInstance, ainv: sp.csr_matrix, tail: sp.spmatrix):
    m = inst.size
    a = np.asarray(ainv @ np.ones(m))
    a_row = sp.csr_matrix(a.reshape(1, m))
    F = sp.vstack(
        [a_row, -a_row, ainv, -ainv, sp.csr_matrix((1, m)), sp.csr_matrix(tail)],
        format="csr",
    )
    prob = ConicProblem(
        c=np.asarray(ainv @ inst.merit),
        f0=_bound_f0(inst),
        F=F,
        n_lin=2 + 2 * m,
        n_soc=1 + m,
        structure=PedigreeStructure(ainv=ainv),
    )
    return prob, RecoveryMap(ainv=ainv)


def build_sparse(
    inst: SelectionInstance, inv_factor: InverseFactor
) -> tuple[ConicProblem, RecoveryMap]:
    """Sparse formulation: variable ``y = A x``, cone tail a factor of ``A^-1``.

    The fill-reducing permutation is already folded into the factor (a
    permuted norm equals the norm), so ``y`` keeps pedigree indexing.
    """
    if inv_factor.size != inst.size:
        raise InvalidInstanceError("factor dimension mismatch")
    return _build_transformed(inst, sp.csr_matrix(inv_factor.source), inv_factor.cone_matrix())


def build_compact(
    inst: SelectionInstance, root: sp.spmatrix
) -> tuple[ConicProblem, RecoveryMap]:
    """Compact formulation: cone tail is the pedigree root ``B`` itself.

    ``A^-1`` is recovered as the sparse product ``B'B``; no Cholesky
    factorization and no dense matrix appear anywhere.
    """
    root = sp.csr_matrix(root)
    if root.shape != (inst.size, inst.size):
        raise InvalidInstanceError("root matrix dimension mismatch")
    ainv = sp.csr_matrix(root.T @ root)
    ainv.sum_duplicates()
    ainv.sort_indices()
    return _build_transformed(inst, ainv, root)


def build(inst: SelectionInstance, formulation: str = "compact", dense_limit: int | None = None):
    """Run the full pipeline for one formulation.

    Returns ``(problem, recovery)``; the simple formulation gets an
    identity recovery map.  ``dense_limit`` only applies to the simple
    path, which must materialize the dense relationship matrix.
    """
    if formulation not in FORMULATIONS:
        raise ValueError(f"unknown formulation '{formulation}'")
    if formulation == "simple":
        kwargs = {} if dense_limit is None else {"dense_limit": dense_limit}
        A = relationship_matrix(inst.ped, **kwargs)
        chol_u = dense_cholesky(A)
        return build_simple(inst, chol_u), RecoveryMap()
    if formulation == "sparse":
        ainv = inverse_relationship(inst.ped)
        perm = fill_reducing_permutation(ainv)
        factor = sparse_cholesky(ainv, perm)
        return build_sparse(inst, factor)
    return build_compact(inst, inverse_root(inst.ped))


def write_conic(prob: ConicProblem, sink) -> None:
    """Dump a problem in the plain-text conic format (see docs/formats.md).

    Line 1 holds ``n_lin n_soc``, line 2 the objective, line 3 ``f0``,
    then one 1-based ``i j value`` triplet per nonzero of ``F``.
    """
    own = isinstance(sink, str)
    handle = open(sink, "w", encoding="utf-8") if own else sink
    try:
        handle.write(f"{prob.n_lin} {prob.n_soc}\n")
        handle.write(" ".join(repr(float(v)) for v in prob.c) + "\n")
        handle.write(" ".join(repr(float(v)) for v in prob.f0) + "\n")
        coo = prob.F.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            handle.write(f"{i + 1} {j + 1} {float(v)!r}\n")
    finally:
        if own:
            handle.close()
