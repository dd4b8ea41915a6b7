"""Independent oracles, instance generation and cross-formulation checks.

The generator simulates cycles of breeding in a closed population:
each cycle truncation-selects the best fraction of the previous cohort
by EBV, mates random non-identical pairs among the selected, and gives
every offspring the parent-mean EBV plus noise.  It exists to produce
realistic pedigree sparsity patterns at any size, deterministically.

Randomness comes from an explicit SplitMix64 stream (documented in the
README) rather than a library generator, so the same seed yields the
same pedigree on any platform or reimplementation.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .formulation import (
    FORMULATIONS,
    SelectionInstance,
    build,
)
from .kinship import group_coancestry, relationship_matrix
from .pedigree import Pedigree
from .solver import Solution, SolverConfig, Status, solve

__all__ = [
    "SplitMix64",
    "GeneratorConfig",
    "generate_pedigree",
    "FormulationResult",
    "EquivalenceReport",
    "cross_check",
    "feasibility_check",
    "dense_limit",
]


def dense_limit(default: int = 20_000) -> int:
    """Dense-oracle member cap, overridable via ``OCS_DENSE_LIMIT``."""
    value = os.environ.get("OCS_DENSE_LIMIT")
    return int(value) if value else default


class SplitMix64:
    """Tiny portable PRNG (Steele et al.'s SplitMix64 finalizer).

    state <- state + 0x9E3779B97F4A7C15;  output mixes the state with
    two xor-shift-multiply rounds.  Doubles take the top 53 bits.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self._state = seed & self._MASK
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self._MASK
        x = self._state
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & self._MASK
        return x ^ (x >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) (tiny modulo bias is irrelevant here)."""
        return self.next_u64() % n

    def normal(self) -> float:
        """Standard normal via Box-Muller (pairs cached)."""
        if self._spare_normal is not None:
            value = self._spare_normal
            self._spare_normal = None
            return value
        u1 = self.uniform()
        while u1 <= 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class GeneratorConfig:
    """Closed-population simulation parameters."""

    seed: int
    n_founders: int
    n_cycles: int
    offspring_per_cycle: int = 0
    selection_fraction: float = 0.5

    def __post_init__(self):
        if self.n_founders < 1:
            raise ValueError("need at least one founder")
        if self.n_cycles < 0:
            raise ValueError("cycle count cannot be negative")
        if self.n_cycles > 0 and self.offspring_per_cycle < 1:
            raise ValueError("cycles without offspring make no members")
        if not 0 < self.selection_fraction <= 1:
            raise ValueError("selection fraction must lie in (0, 1]")
        if self.n_cycles > 0 and self.n_founders < 2:
            raise ValueError("mating needs at least two founders")


def generate_pedigree(cfg: GeneratorConfig) -> Pedigree:
    """Simulate a pedigree; deterministic for a given config.

    Founders have unknown parents and standard-normal EBVs.  Each cycle
    keeps the top ``selection_fraction`` of the previous cohort (at
    least two members, ties broken toward earlier members).  Matings
    sweep along the selected set in order, jittered randomly within a
    local window, and each offspring's mate comes from the same window.
    Fully uniform pairing over thousands of parents would make the
    relationship graph an expander, which no real population is; the
    sweep mirrors crossing within management groups and keeps the
    sparsity patterns representative of deployment data.  Children
    always follow their parents, so the result is already in canonical
    order.
    """
    rng = SplitMix64(cfg.seed)
    sire = [0] * cfg.n_founders
    dam = [0] * cfg.n_founders
    ebv = [rng.normal() for _ in range(cfg.n_founders)]
    cohort = list(range(1, cfg.n_founders + 1))  # 1-based member numbers

    for _ in range(cfg.n_cycles):
        k = max(2, int(round(cfg.selection_fraction * len(cohort))))
        k = min(k, len(cohort))
        ranked = sorted(cohort, key=lambda member: (-ebv[member - 1], member))
        selected = sorted(ranked[:k])
        window = min(k - 1, max(4, k // 512))
        next_cohort = []
        count = cfg.offspring_per_cycle
        for j in range(count):
            base = (j * k) // count
            first = (base + rng.below(2 * window + 1) - window) % k
            offset = 1 + rng.below(window)
            if rng.below(2):
                offset = -offset
            second = (first + offset) % k
            a, b = selected[first], selected[second]
            p, q = (a, b) if a >= b else (b, a)
            sire.append(p)
            dam.append(q)
            ebv.append(0.5 * (ebv[p - 1] + ebv[q - 1]) + 0.5 * rng.normal())
            next_cohort.append(len(sire))
        cohort = next_cohort

    m = len(sire)
    return Pedigree(
        sire=np.array(sire, dtype=np.int64),
        dam=np.array(dam, dtype=np.int64),
        ebv=np.array(ebv),
        labels=tuple(str(i) for i in range(1, m + 1)),
    )


def feasibility_check(
    inst: SelectionInstance, x: np.ndarray, A: np.ndarray | None = None
) -> tuple[float, float, float]:
    """Residual triple of a contribution vector against the dense oracle.

    Returns ``(|e'x - 1|, worst bound violation, coancestry excess)``
    where the last term is ``max(0, x'Ax/2 - theta)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.size,):
        raise ValueError(f"x has shape {x.shape}, expected ({inst.size},)")
    if A is None:
        A = relationship_matrix(inst.ped, dense_limit=dense_limit())
    total = abs(float(x.sum()) - 1.0)
    bounds = max(
        float(np.max(inst.lower - x, initial=0.0)),
        float(np.max(x - inst.upper, initial=0.0)),
    )
    excess = max(0.0, group_coancestry(A, x) - inst.theta)
    return total, max(bounds, 0.0), excess


@dataclass(frozen=True)
class FormulationResult:
    """Outcome of one formulation inside a cross check."""

    formulation: str
    status: Status | None
    objective: float
    x: np.ndarray | None
    residuals: tuple[float, float, float] | None
    error: str | None = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class EquivalenceReport:
    """Cross-formulation comparison on a single instance."""

    results: tuple[FormulationResult, ...]
    solutions: tuple[Solution | None, ...] = field(repr=False, default=())

    def result(self, formulation: str) -> FormulationResult:
        for r in self.results:
            if r.formulation == formulation:
                return r
        raise KeyError(formulation)

    @property
    def statuses(self) -> tuple[Status | None, ...]:
        return tuple(r.status for r in self.results)

    @property
    def max_objective_delta(self) -> float:
        """Largest pairwise relative objective difference among optima."""
        objs = [r.objective for r in self.results if r.optimal]
        if len(objs) < 2:
            return math.inf
        spread = max(objs) - min(objs)
        return spread / (1.0 + max(abs(v) for v in objs))

    @property
    def max_feasibility_residual(self) -> float:
        worst = 0.0
        for r in self.results:
            if r.optimal and r.residuals is not None:
                worst = max(worst, *r.residuals)
        return worst

    def consistent(self, tol: float = 1e-7) -> bool:
        """All three solved, agree on the objective, and returned feasible x."""
        return (
            all(r.optimal for r in self.results)
            and self.max_objective_delta <= tol
            and self.max_feasibility_residual <= tol
        ) or (
            # consistency also means agreeing that no solution exists
            all(r.status is Status.PRIMAL_INFEASIBLE for r in self.results)
        )


def cross_check(inst: SelectionInstance, cfg: SolverConfig | None = None) -> EquivalenceReport:
    """Build and solve all three formulations, validating against dense A.

    Solver failures in one formulation are recorded and do not stop the
    others.  Requires the dense oracle, so the instance must fit under
    the dense limit.
    """
    A = relationship_matrix(inst.ped, dense_limit=dense_limit())
    results = []
    solutions = []
    for formulation in FORMULATIONS:
        try:
            prob, recovery = build(inst, formulation=formulation)
            sol = solve(prob, cfg)
            x = recovery(sol.z) if sol.status is Status.OPTIMAL else None
            res = feasibility_check(inst, x, A) if x is not None else None
            results.append(
                FormulationResult(
                    formulation=formulation,
                    status=sol.status,
                    objective=float(inst.merit @ x) if x is not None else math.nan,
                    x=x,
                    residuals=res,
                )
            )
            solutions.append(sol)
        except Exception as exc:  # keep reporting the other formulations
            results.append(
                FormulationResult(
                    formulation=formulation,
                    status=None,
                    objective=math.nan,
                    x=None,
                    residuals=None,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            solutions.append(None)
    return EquivalenceReport(results=tuple(results), solutions=tuple(solutions))
