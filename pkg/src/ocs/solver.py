"""Primal-dual interior-point solver for the single-cone problems built here.

Solves   max c'z  s.t.  s = f0 - F z,  s in K = R+^{n_lin} x SOC^{n_soc}
directly in this inequality form (no conversion to primal standard
form), pairing it with the dual  min f0'w  s.t.  F'w = c, w in K.

The method is path following with Nesterov-Todd scaling on the product
cone and a Mehrotra predictor-corrector step.  Search directions come
from a sparse augmented (KKT) linear system rather than the condensed
normal equations ``F'W^-2F``: the normal equations square both the
sparsity pattern and the conditioning of the scaling, which near
convergence exceeds what double precision can refine, whereas the
augmented form keeps the wild part of the scaling on the diagonal and
in one exactly-represented rank-one term (see :class:`_KktSystem`).
This is also what lets one solver serve every formulation, including
very large pedigrees, without dense intermediates.

Iterates stay strictly inside the cone via a fraction-to-boundary rule,
so an Optimal status certifies cone membership exactly and small
primal/dual residuals and complementarity gap numerically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .formulation import ConicProblem

__all__ = [
    "Status",
    "SolverConfig",
    "IterationRecord",
    "Solution",
    "ResidualReport",
    "solve",
    "residuals",
]

_REG_BASE = 1e-10   # static Tikhonov term on the normal equations
_REG_MAX = 1e-6     # escalation ceiling before declaring failure


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITERATION_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverConfig:
    """Interior-point controls.

    ``tol_gap`` bounds the complementarity gap relative to the
    objective magnitude, ``tol_feas`` the primal/dual residuals, and
    ``step_fraction`` is the fraction-to-boundary factor applied
    identically to the primal and dual steps.
    """

    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98
    verbose: bool = False
    log_sink: object = None

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    gap: float
    primal_residual: float
    dual_residual: float
    step: float


@dataclass(frozen=True)
class Solution:
    """Solver outcome with certificates.

    For ``PRIMAL_INFEASIBLE`` the ``dual`` vector is a normalized Farkas
    ray (``F'w ~ 0``, ``f0'w = -1``, ``w`` in the cone); for
    ``DUAL_INFEASIBLE`` the ``z`` vector is an improving ray
    (``-F z`` nearly in the cone, ``c'z = 1``).
    """

    status: Status
    z: np.ndarray
    slack: np.ndarray
    dual: np.ndarray
    objective: float
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float
    log: tuple[IterationRecord, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class ResidualReport:
    """Max-norm certificate summary for a candidate solution."""

    primal_cone_violation: float
    dual_cone_violation: float
    complementarity_gap: float
    duality_gap: float


class _NumericalBreakdown(Exception):
    """Internal: scaling or factorization collapsed beyond repair."""


# ---------------------------------------------------------------------------
# cone and Jordan-algebra helpers; vectors are split (orthant, soc) views
# ---------------------------------------------------------------------------

def _jflip(v: np.ndarray) -> np.ndarray:
    out = -v
    out[0] = v[0]
    return out


def _jnorm_sq(v: np.ndarray) -> float:
    return float(v[0] * v[0] - v[1:] @ v[1:])


def _cone_identity(nl: int, nq: int) -> np.ndarray:
    e = np.zeros(nl + nq)
    e[:nl] = 1.0
    if nq:
        e[nl] = 1.0
    return e


def _cone_violation(v: np.ndarray, nl: int, nq: int) -> float:
    worst = 0.0
    if nl:
        worst = max(worst, float(-v[:nl].min()))
    if nq:
        worst = max(worst, float(np.linalg.norm(v[nl + 1:]) - v[nl]))
    return max(worst, 0.0)


def _max_step(v: np.ndarray, dv: np.ndarray, nl: int, nq: int) -> float:
    """Largest step keeping ``v + alpha dv`` inside the cone (may be inf)."""
    alpha = math.inf
    if nl:
        neg = dv[:nl] < 0
        if np.any(neg):
            alpha = float(np.min(-v[:nl][neg] / dv[:nl][neg]))
    if nq:
        vq = v[nl:]
        dq = dv[nl:]
        p0 = _jnorm_sq(vq)
        p1 = float(vq[0] * dq[0] - vq[1:] @ dq[1:])
        p2 = _jnorm_sq(dq)
        # roots of p0 + 2 p1 a + p2 a^2 = 0; v is strictly interior (p0 > 0)
        if abs(p2) < 1e-300:
            if p1 < 0:
                alpha = min(alpha, -p0 / (2.0 * p1))
        else:
            disc = p1 * p1 - p2 * p0
            if p2 < 0:
                root = (-p1 - math.sqrt(max(disc, 0.0))) / p2
                alpha = min(alpha, root)
            elif disc >= 0 and p1 < 0:
                sq = math.sqrt(disc)
                r1 = (-p1 - sq) / p2
                r2 = (-p1 + sq) / p2
                candidates = [r for r in (r1, r2) if r > 0]
                if candidates:
                    alpha = min(alpha, min(candidates))
    return alpha


def _jordan_product(x: np.ndarray, y: np.ndarray, nl: int, nq: int) -> np.ndarray:
    out = np.empty(nl + nq)
    out[:nl] = x[:nl] * y[:nl]
    if nq:
        xq = x[nl:]
        yq = y[nl:]
        out[nl] = xq @ yq
        out[nl + 1:] = xq[0] * yq[1:] + yq[0] * xq[1:]
    return out


def _jordan_solve(lam: np.ndarray, r: np.ndarray, nl: int, nq: int) -> np.ndarray:
    """Solve ``lam o y = r`` for ``y`` (inverse of the L-operator at lam)."""
    out = np.empty(nl + nq)
    out[:nl] = r[:nl] / lam[:nl]
    if nq:
        l0 = lam[nl]
        lr = lam[nl + 1:]
        det = l0 * l0 - lr @ lr
        if det <= 0 or l0 <= 0:
            raise _NumericalBreakdown("scaled point left the cone interior")
        y0 = (l0 * r[nl] - lr @ r[nl + 1:]) / det
        out[nl] = y0
        out[nl + 1:] = (r[nl + 1:] - y0 * lr) / l0
    return out


class _Scaling:
    """Nesterov-Todd scaling of the product cone at a primal-dual pair.

    Provides the symmetric ``W`` with ``W w = W^-1 s = lam`` and the
    actions of ``W``, ``W^-1`` and ``W^-2`` on full-length vectors.
    """

    def __init__(self, s: np.ndarray, w: np.ndarray, nl: int, nq: int):
        self.nl = nl
        self.nq = nq
        sl, wl = s[:nl], w[:nl]
        if np.any(sl <= 0) or np.any(wl <= 0):
            raise _NumericalBreakdown("orthant iterate left the interior")
        self.d = np.sqrt(sl / wl)
        lam = np.empty(nl + nq)
        lam[:nl] = np.sqrt(sl * wl)
        if nq:
            sq, wq = s[nl:], w[nl:]
            a2 = _jnorm_sq(sq)
            b2 = _jnorm_sq(wq)
            if a2 <= 0 or b2 <= 0 or sq[0] <= 0 or wq[0] <= 0:
                raise _NumericalBreakdown("cone iterate left the interior")
            a = math.sqrt(a2)
            b = math.sqrt(b2)
            sbar = sq / a
            wbar = wq / b
            gamma = math.sqrt((1.0 + sbar @ wbar) / 2.0)
            # scaling point q solves P(q) wbar = sbar; W uses its Jordan
            # square root v so that W^2 = beta^2 P(q) = beta^2 (2qq' - J)
            q = (sbar + _jflip(wbar)) / (2.0 * gamma)
            v = q.copy()
            v[0] += 1.0
            v /= math.sqrt(2.0 * (q[0] + 1.0))
            self.q = q                # unit hyperbolic: q'Jq = 1
            self.v = v                # unit: v'Jv = 1
            self.u = _jflip(v)
            self.beta = math.sqrt(a / b)
            lam[nl:] = self._soc_w(wq)
        self.lam = lam

    def _soc_w(self, x: np.ndarray) -> np.ndarray:
        v = self.v
        return self.beta * (2.0 * v * (v @ x) - _jflip(x))

    def _soc_winv(self, x: np.ndarray) -> np.ndarray:
        u = self.u
        return (2.0 * u * (u @ x) - _jflip(x)) / self.beta

    def mul_w(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        out[:self.nl] = self.d * x[:self.nl]
        if self.nq:
            out[self.nl:] = self._soc_w(x[self.nl:])
        return out

    def mul_winv(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        out[:self.nl] = x[:self.nl] / self.d
        if self.nq:
            out[self.nl:] = self._soc_winv(x[self.nl:])
        return out


# ---------------------------------------------------------------------------
# Newton system backends.  Both solve, given the NT scaling W,
#
#     [ -W^2  F ] [dw]   [ r1 ]
#     [  F'   0 ] [dz] = [ r2 ]
#
# in a sparse, conditioning-friendly form: the orthant part of W^2 is
# diagonal and the second-order cone part is beta^2 (2qq' - J) at the
# scaling point q, i.e. diagonal plus an exact rank-one term.  Condensed
# normal equations F'W^-2F would square both the sparsity pattern and
# the scaling spread, which near convergence exceeds what double
# precision can refine; in augmented form the spread stays diagonal or
# exactly-represented, so the LU handles it.
# ---------------------------------------------------------------------------


def _amd_order(pattern: sp.spmatrix) -> np.ndarray:
    """Approximate-minimum-degree ordering of a sparse symmetric pattern."""
    from cvxopt import amd, spmatrix

    coo = pattern.tocoo()
    handle = spmatrix(
        coo.data, coo.row.astype(int), coo.col.astype(int), coo.shape
    )
    return np.asarray(list(amd.order(handle)), dtype=np.int64)


class _RefinedLu:
    """Sparse LU in a fixed fill-reducing order with iterative refinement.

    The pattern is constant across interior-point iterations, so the AMD
    ordering is computed once and SuperLU runs in natural-order
    symmetric mode with static pivoting; refinement against the
    assembled matrix recovers the accuracy pivoting would have bought.
    """

    def __init__(self):
        self._perm = None

    def factor(self, matrix: sp.csc_matrix) -> None:
        if self._perm is None:
            # order the sparse part; a handful of dense bordering
            # rows/columns go last (AMD crawls when they participate)
            degrees = np.diff(matrix.indptr)
            cutoff = max(16, matrix.shape[0] // 4)
            dense = np.flatnonzero(degrees > cutoff)
            if dense.size and dense.size < matrix.shape[0] // 2:
                keep = np.flatnonzero(degrees <= cutoff)
                sub = matrix[keep][:, keep]
                self._perm = np.concatenate([keep[_amd_order(sub)], dense])
            else:
                self._perm = _amd_order(matrix)
        perm = self._perm
        self.matrix = matrix
        permuted = matrix[perm][:, perm].tocsc()
        self.lu = spla.splu(
            permuted,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        perm = self._perm
        x = np.empty_like(rhs)
        x[perm] = self.lu.solve(rhs[perm])
        best = x
        best_err = float(np.linalg.norm(rhs - self.matrix @ x))
        floor = 1e-14 * (1.0 + float(np.linalg.norm(rhs)))
        for _ in range(8):
            if best_err <= floor:
                break
            residual = rhs - self.matrix @ best
            x = best.copy()
            x[perm] += self.lu.solve(residual[perm])
            err = float(np.linalg.norm(rhs - self.matrix @ x))
            if err >= 0.9 * best_err:
                break
            best, best_err = x, err
        return best


class _KktSystem:
    """Direct augmented form with one auxiliary variable for the cone:

        [ -W2_orth   .      F_orth           .          ] [dw_orth]
        [    .     -b^2 Dt  F_cone    -sqrt(2) b q      ] [dw_cone]
        [  F_orth'  F_cone'   0              .          ] [  dz   ]
        [    .   -sqrt(2) b q'  .            1          ] [  xi   ]

    with ``Dt = diag(-1, 1, .., 1)`` on the cone rows.  Works for any
    problem; dimension ``n_rows + n_vars (+1)``.
    """

    def __init__(self, prob: ConicProblem, nl: int, nq: int):
        self.nl = nl
        self.nq = nq
        self.n = prob.n_vars
        self.rows = nl + nq
        self.dim = self.rows + self.n + (1 if nq else 0)
        coo = prob.F.tocoo()
        # constant part: F in the top-right block, F' in the bottom-left
        self._base_r = np.concatenate([coo.row, self.rows + coo.col])
        self._base_c = np.concatenate([self.rows + coo.col, coo.row])
        self._base_v = np.concatenate([coo.data, coo.data])
        self._diag = np.arange(self.dim)
        self._lu = _RefinedLu()

    def factor(self, scal: _Scaling, delta: float) -> None:
        nl, nq, rows = self.nl, self.nq, self.rows
        diag = np.zeros(self.dim)
        diag[:nl] = -scal.d * scal.d - delta
        parts = [self._base_v]
        rows_ix = [self._base_r]
        cols_ix = [self._base_c]
        if nq:
            beta2 = scal.beta ** 2
            diag[nl] = beta2 + delta
            diag[nl + 1:rows] = -beta2 - delta
            diag[-1] = 1.0
            col = -math.sqrt(2.0) * scal.beta * scal.q
            soc_rows = np.arange(nl, rows)
            aux = self.dim - 1
            rows_ix += [soc_rows, np.full(nq, aux)]
            cols_ix += [np.full(nq, aux), soc_rows]
            parts += [col, col]
        diag[rows:rows + self.n] = delta
        rows_ix.append(self._diag)
        cols_ix.append(self._diag)
        parts.append(diag)
        kkt = sp.csc_matrix(
            (np.concatenate(parts), (np.concatenate(rows_ix), np.concatenate(cols_ix))),
            shape=(self.dim, self.dim),
        )
        self._lu.factor(kkt)

    def solve(self, r1: np.ndarray, r2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.zeros(self.dim)
        rhs[:self.rows] = r1
        rhs[self.rows:self.rows + self.n] = r2
        x = self._lu.solve(rhs)
        return x[:self.rows], x[self.rows:self.rows + self.n]


class _ReducedKktSystem:
    """Condensed form for the pedigree-structured row layout.

    The y-variable builds have rows ``[a'; -a'; C; -C; 0; T]`` with
    ``C`` the sparse inverse relationship matrix, ``a = C e`` and
    ``T'T = C``.  The box, cone-head and cone-tail directions eliminate
    analytically against their diagonal scaling blocks; the would-be
    squared term ``C E C`` is kept exact by the auxiliary unknown
    ``t = sqrt(E) C dz``.  What remains is the symmetric quasi-definite
    system over ``(dz, t, dw_eq, xi)``:

        [ P_t C + delta I    C E         a  -a   -sqrt(2) b P_t v ]
        [     E C            -E-delta    .   .          .         ]
        [     a'              .        -de1  .          .         ]
        [    -a'              .          .  -de2        .         ]
        [ -sqrt(2) b P_t v'   .          .   .        gamma       ]

    (upper-triangle shown by blocks; ``v = T'q_tail``).  Its pattern is
    two coupled copies of ``C`` plus three bordering rows, which is what
    keeps very large pedigrees factorable.
    """

    def __init__(self, prob: ConicProblem, nl: int, nq: int):
        m = prob.n_vars
        if nl != 2 + 2 * m or nq != 1 + m:
            raise ValueError("problem does not follow the canonical row layout")
        self.n = m
        self.nl = nl
        self.nq = nq
        self.rows = nl + nq
        self.C = prob.structure.ainv.tocsr()
        self.T = prob.F.tocsr()[nl + 1:]
        self.a = np.asarray(self.C @ np.ones(m))
        self.dim = 2 * m + 3
        # constant index arrays: C appears in the (z,z), (z,t), (t,z) blocks
        coo = self.C.tocoo()
        self._c_row = coo.row
        self._c_col = coo.col
        self._c_val = coo.data
        self._diag = np.arange(2 * m)
        self._lu = _RefinedLu()

    def factor(self, scal: _Scaling, delta: float) -> None:
        m = self.n
        # relative regularization: the eliminations divide by these pivots,
        # and an absolute shift would swamp active-bound pivots (d^2 ~ mu)
        # and leak O(delta/d^2) error into the reconstructed dual equation
        d2 = np.maximum(scal.d * scal.d, 1e-290) * (1.0 + delta)
        self.p_u = 1.0 / d2[2:2 + m]
        self.p_l = 1.0 / d2[2 + m:2 + 2 * m]
        E = self.p_u + self.p_l
        beta2 = scal.beta ** 2
        self.p_t = 1.0 / (beta2 * (1.0 + delta))
        self.p_h = self.p_t
        self.q0 = float(scal.q[0])
        self.q_tail = scal.q[1:]
        self.beta = scal.beta
        self.v = np.asarray(self.T.T @ self.q_tail)
        self.gamma = (
            1.0
            - 2.0 * beta2 * self.q0 ** 2 * self.p_h
            + 2.0 * beta2 * float(self.q_tail @ self.q_tail) * self.p_t
        )
        sq2b = math.sqrt(2.0) * self.beta
        self._sq2b = sq2b

        rows_ix = [self._c_row, self._c_row, m + self._c_row]
        cols_ix = [self._c_col, m + self._c_col, self._c_col]
        parts = [
            self.p_t * self._c_val,                 # z-z block: P_t C
            self._c_val * E[self._c_col],           # z-t block: C E
            E[self._c_row] * self._c_val,           # t-z block: E C
        ]
        diag = np.concatenate([np.full(m, delta), -E - delta])
        rows_ix.append(self._diag)
        cols_ix.append(self._diag)
        parts.append(diag)
        # borders: two unit-total rows and the cone auxiliary
        zc = np.arange(m)
        for k, (vec, dval) in enumerate(
            [
                (self.a, -(d2[0] + delta)),
                (-self.a, -(d2[1] + delta)),
                (-sq2b * self.p_t * self.v, self.gamma),
            ]
        ):
            b = 2 * m + k
            rows_ix += [np.full(m, b), zc, np.array([b])]
            cols_ix += [zc, np.full(m, b), np.array([b])]
            parts += [vec, vec, np.array([dval])]
        reduced = sp.csc_matrix(
            (np.concatenate(parts), (np.concatenate(rows_ix), np.concatenate(cols_ix))),
            shape=(self.dim, self.dim),
        )
        self._lu.factor(reduced)

    def solve(self, r1: np.ndarray, r2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.n
        r_e = r1[0:2]
        r_u = r1[2:2 + m]
        r_l = r1[2 + m:2 + 2 * m]
        r_h = float(r1[2 + 2 * m])
        r_t = r1[2 + 2 * m + 1:]
        sq2b = self._sq2b

        rhs = np.zeros(self.dim)
        rhs[:m] = (
            r2
            + self.C @ (self.p_u * r_u)
            - self.C @ (self.p_l * r_l)
            + self.p_t * (self.T.T @ r_t)
        )
        rhs[2 * m + 0] = r_e[0]
        rhs[2 * m + 1] = r_e[1]
        rhs[2 * m + 2] = sq2b * self.q0 * self.p_h * r_h - sq2b * self.p_t * float(
            self.q_tail @ r_t
        )
        x = self._lu.solve(rhs)
        dz = x[:m]
        xi = x[2 * m + 2]

        cz = self.C @ dz
        dw = np.empty(self.rows)
        dw[0] = x[2 * m + 0]
        dw[1] = x[2 * m + 1]
        dw[2:2 + m] = self.p_u * (cz - r_u)
        dw[2 + m:2 + 2 * m] = self.p_l * (-cz - r_l)
        dw[2 + 2 * m] = self.p_h * (r_h + sq2b * self.q0 * xi)
        dw[2 + 2 * m + 1:] = self.p_t * (self.T @ dz - sq2b * self.q_tail * xi - r_t)
        return dw, dz


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _emit(cfg: SolverConfig, line: str) -> None:
    if cfg.verbose:
        print(line)
    if cfg.log_sink is not None:
        cfg.log_sink.write(line + "\n")


def solve(prob: ConicProblem, cfg: SolverConfig | None = None) -> Solution:
    """Solve a conic problem to the configured tolerances.

    Returns a :class:`Solution` whose status is ``OPTIMAL`` only when
    the iterate satisfies the feasibility and gap tolerances; divergence
    patterns with a valid Farkas-type ray yield the infeasible statuses,
    and everything else ends in ``ITERATION_LIMIT`` or
    ``NUMERICAL_FAILURE``.  Identical inputs produce identical output.
    """
    cfg = cfg or SolverConfig()
    F = prob.F.tocsr()
    c = np.asarray(prob.c, dtype=float)
    f0 = np.asarray(prob.f0, dtype=float)
    # a 1-dimensional cone block is just another nonnegative row
    nl, nq = prob.n_lin, prob.n_soc
    if nq == 1:
        nl, nq = nl + 1, 0
    n = prob.n_vars
    nu = nl + (1 if nq else 0)

    scale = max(1.0, float(np.max(np.abs(f0))) if len(f0) else 1.0)
    e_cone = _cone_identity(nl, nq)
    s = scale * e_cone
    w = scale * e_cone
    z = np.zeros(n)

    norm_f0 = float(np.linalg.norm(f0))
    norm_c = float(np.linalg.norm(c))
    log: list[IterationRecord] = []
    status = Status.ITERATION_LIMIT
    iterations = 0
    pres = dres = math.inf

    try:
        if prob.structure is not None and nq:
            kkt = _ReducedKktSystem(prob, nl, nq)
        else:
            kkt = _KktSystem(prob, nl, nq)
        for it in range(cfg.max_iter + 1):
            slack_residual = f0 - F @ z - s
            dual_residual = c - F.T @ w
            gap = float(s @ w)
            objective = float(c @ z)
            dual_objective = float(f0 @ w)
            pres = float(np.linalg.norm(slack_residual)) / (1.0 + norm_f0)
            dres = float(np.linalg.norm(dual_residual)) / (1.0 + norm_c)
            iterations = it

            if (
                pres <= cfg.tol_feas
                and dres <= cfg.tol_feas
                and gap <= cfg.tol_gap * (1.0 + abs(objective))
            ):
                status = Status.OPTIMAL
                break

            # Farkas-type certificates from diverging iterates; thresholds
            # are absolute on the normalized ray, which cannot fire on an
            # instance with a bounded feasible point
            if dual_objective <= -1.0:
                ray = w / -dual_objective
                if float(np.max(np.abs(F.T @ ray))) <= cfg.tol_feas:
                    status = Status.PRIMAL_INFEASIBLE
                    w = ray
                    break
            if objective >= 1.0:
                ray = z / objective
                if _cone_violation(-(F @ ray), nl, nq) <= cfg.tol_feas:
                    status = Status.DUAL_INFEASIBLE
                    z = ray
                    break

            if it == cfg.max_iter:
                break

            scal = _Scaling(s, w, nl, nq)
            delta = _REG_BASE
            while True:
                try:
                    kkt.factor(scal, delta)
                    break
                except (RuntimeError, ValueError, np.linalg.LinAlgError):
                    delta *= 10.0
                    if delta > _REG_MAX:
                        raise _NumericalBreakdown(
                            "Newton factorization failed at maximum regularization"
                        ) from None

            lam = scal.lam
            mu = gap / nu

            # predictor: pure Newton step toward zero complementarity;
            # with d = -lam the top residual is rp - W d = rp + s
            dw_aff, dz_aff = kkt.solve(slack_residual + s, dual_residual)
            ds_aff = slack_residual - F @ dz_aff
            alpha_aff = min(
                1.0,
                _max_step(s, ds_aff, nl, nq),
                _max_step(w, dw_aff, nl, nq),
            )
            mu_aff = float((s + alpha_aff * ds_aff) @ (w + alpha_aff * dw_aff)) / nu
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))

            # corrector: recenter and compensate the second-order term
            eta = _jordan_product(
                scal.mul_winv(ds_aff), scal.mul_w(dw_aff), nl, nq
            )
            target = sigma * mu * e_cone - _jordan_product(lam, lam, nl, nq) - eta
            d_cor = _jordan_solve(lam, target, nl, nq)
            dw, dz = kkt.solve(slack_residual - scal.mul_w(d_cor), dual_residual)
            ds = slack_residual - F @ dz

            # on infeasible problems the direction converges to a clean
            # improving ray long before the iterate does; certify from it
            # (same absolute thresholds as above)
            dir_obj = float(f0 @ dw)
            if dir_obj < 0.0:
                ray = dw / -dir_obj
                if (
                    _cone_violation(ray, nl, nq) <= cfg.tol_feas
                    and float(np.max(np.abs(F.T @ ray))) <= cfg.tol_feas
                ):
                    status = Status.PRIMAL_INFEASIBLE
                    w = ray
                    break
            dir_gain = float(c @ dz)
            if dir_gain > 0.0:
                ray = dz / dir_gain
                if _cone_violation(-(F @ ray), nl, nq) <= cfg.tol_feas:
                    status = Status.DUAL_INFEASIBLE
                    z = ray
                    break

            alpha = min(
                1.0,
                cfg.step_fraction
                * min(_max_step(s, ds, nl, nq), _max_step(w, dw, nl, nq)),
            )
            if not (np.all(np.isfinite(dz)) and np.all(np.isfinite(ds)) and np.all(np.isfinite(dw))):
                raise _NumericalBreakdown("non-finite search direction")
            if alpha <= 0.0 or not math.isfinite(alpha):
                raise _NumericalBreakdown("step length collapsed")

            z = z + alpha * dz
            s = s + alpha * ds
            w = w + alpha * dw

            # safeguard: paired inequality rows (the unit-total encoding)
            # pin the sum of their slacks to the primal residual, which
            # shrinks much faster than the gap; once one slack collapses it
            # blocks every step.  Lifting tiny products back to a floor
            # proportional to mu keeps the iterate stepping, and the
            # perturbation (at most the floor itself per coordinate)
            # vanishes as mu does, far below the feasibility tolerance.
            if nl:
                floor = 0.01 * float(s @ w) / nu
                sl = s[:nl]
                wl = w[:nl]
                low = sl * wl < floor
                if np.any(low):
                    lift = floor / wl[low] - sl[low]
                    sl[low] += np.minimum(lift, floor)

            record = IterationRecord(it, gap, pres, dres, alpha)
            log.append(record)
            if cfg.verbose or cfg.log_sink is not None:
                _emit(cfg, f"{it:4d} {gap:.6e} {pres:.6e} {dres:.6e} {alpha:.6e}")
    except (_NumericalBreakdown, RuntimeError):
        # RuntimeError is SuperLU's singular-factor signal
        status = Status.NUMERICAL_FAILURE

    return Solution(
        status=status,
        z=z,
        slack=f0 - F @ z,
        dual=w,
        objective=float(c @ z),
        gap=float(s @ w),
        iterations=iterations,
        primal_residual=pres,
        dual_residual=dres,
        log=tuple(log),
    )


def residuals(prob: ConicProblem, sol: Solution) -> ResidualReport:
    """Independent certificate check of a solution against its problem."""
    z = np.asarray(sol.z, dtype=float)
    w = np.asarray(sol.dual, dtype=float)
    if z.shape != (prob.n_vars,) or w.shape != (prob.n_lin + prob.n_soc,):
        raise ValueError("solution dimensions do not match problem")
    nl, nq = prob.n_lin, prob.n_soc
    slack = prob.f0 - prob.F @ z
    return ResidualReport(
        primal_cone_violation=_cone_violation(slack, nl, nq),
        dual_cone_violation=_cone_violation(w, nl, nq),
        complementarity_gap=float(slack @ w),
        duality_gap=float(abs(prob.c @ z - prob.f0 @ w)),
    )
