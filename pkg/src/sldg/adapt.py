"""SOLVE - ESTIMATE - MARK - REFINE loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dgspace import DGFunction, DGSpace, default_cell_degree, lagrange_nodes, transfer
from .estimator import EstimatorReport, estimate
from .forms import DiscreteProblem, ProblemSpec
from .mesh import Mesh, bisect, build_crisscross
from .solver import NewtonConfig, NonConvergence, SolveReport, solve

log = logging.getLogger(__name__)


STRATEGIES = ("maximum", "fraction")


@dataclass
class AdaptConfig:
    """Loop settings.

    ``strategy="maximum"`` marks cells whose indicator is at least
    ``mark_fraction`` times the largest one; ``"fraction"`` marks the
    ``mark_fraction`` share of cells with the largest indicators.
    """

    max_iterations: int = 13
    mark_fraction: float = 0.5
    max_dofs: int = 2_000_000
    strategy: str = "maximum"

    def __post_init__(self):
        if not 0 < self.mark_fraction <= 1:
            raise ValueError("mark_fraction must lie in (0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown marking strategy {self.strategy!r}")

    def select(self, etas) -> np.ndarray:
        if self.strategy == "maximum":
            return mark_maximum(etas, self.mark_fraction)
        return mark(etas, self.mark_fraction)


@dataclass
class IterationRecord:
    iteration: int
    n_cells: int
    n_dofs: int
    estimator: float
    newton_iterations: int
    solve_report: SolveReport = field(repr=False)
    u_max: float = 0.0


@dataclass
class AdaptResult:
    records: list[IterationRecord]
    mesh: Mesh
    solution: DGFunction
    estimator: EstimatorReport
    stopped_by_dof_cap: bool = False


def mark(etas, fraction: float) -> np.ndarray:
    """Indices of the ceil(fraction * n) largest indicators, ties to the lower index."""
    etas = np.asarray(etas, float)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    n = int(math.ceil(fraction * len(etas) - 1e-12))
    order = np.argsort(-etas, kind="stable")
    return np.sort(order[:n])


def mark_maximum(etas, theta: float) -> np.ndarray:
    """Indices of cells with indicator >= theta * max indicator."""
    etas = np.asarray(etas, float)
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if etas.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(etas >= theta * etas.max())


def adapt_loop(spec: ProblemSpec, k: int, config: AdaptConfig | None = None,
               newton: NewtonConfig | None = None, mesh: Mesh | None = None,
               callback: Callable[[IterationRecord, DGFunction, EstimatorReport], None] | None = None,
               ) -> AdaptResult:
    """Run the adaptive loop from the four-cell criss-cross mesh (or ``mesh``).

    After the first iteration the previous solution, projected onto the
    refined mesh, seeds Newton directly at the target exponent.
    """
    config = config or AdaptConfig()
    newton = newton or NewtonConfig()
    mesh = build_crisscross(1) if mesh is None else mesh
    records: list[IterationRecord] = []
    U = None
    capped = False
    qdeg = default_cell_degree(k, spec.p)

    for it in range(1, config.max_iterations + 1):
        space = DGSpace(mesh, k, qdeg)
        problem = DiscreteProblem(space, spec)
        if U is None:
            cfg, initial = newton, None
        else:
            cfg, initial = replace(newton, continuation_steps=(float(spec.p),)), transfer(U, space)
        try:
            U, rep = solve(space, spec, cfg, initial, problem)
        except NonConvergence as exc:
            if initial is None:
                raise
            # Fall back to full continuation from zero.
            log.info("warm start failed at iteration %d (%s); restarting", it, exc)
            U, rep = solve(space, spec, newton, None, problem)
        est = estimate(space, spec, U, problem.sizes)
        rec = IterationRecord(it, mesh.n_cells, space.total_dofs, est.total,
                              rep.total_iterations, rep, _max_value(U))
        records.append(rec)
        log.info("iteration %d: %d cells, estimator %.4e, newton %d",
                 it, mesh.n_cells, est.total, rep.total_iterations)
        if callback is not None:
            callback(rec, U, est)
        if it == config.max_iterations:
            break
        refined = bisect(mesh, config.select(est.cell_indicators))
        if refined.n_cells * space.dofs_per_cell > config.max_dofs:
            capped = True
            break
        mesh = refined

    return AdaptResult(records, mesh, U, est, capped)


def _max_value(U: DGFunction) -> float:
    k = max(U.space.degree, 2)
    return float(U.values_at(lagrange_nodes(k)).max())
