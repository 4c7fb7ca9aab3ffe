"""Damped Newton iteration with continuation in the exponent p."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dgspace import DGFunction, DGSpace
from .forms import DiscreteProblem, ProblemSpec

log = logging.getLogger(__name__)


class LinearSolveFailure(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def continuation_schedule(p: float, step: float = 2.0) -> tuple[float, ...]:
    """Exponents 2, 2 + step, ... strictly below p, then p itself."""
    stages = []
    q = 2.0
    while q < p - 1e-12:
        stages.append(q)
        q += step
    stages.append(float(p))
    return tuple(stages)


@dataclass
class NewtonConfig:
    tol_residual: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    max_halvings: int = 20
    continuation_steps: tuple[float, ...] | None = None
    linear_rtol: float = 1e-12

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.continuation_steps is not None:
            s = np.asarray(self.continuation_steps, float)
            if s.size == 0 or np.any(np.diff(s) <= 0):
                raise ValueError("continuation steps must be strictly increasing")

    def stages(self, p: float) -> tuple[float, ...]:
        if self.continuation_steps is None:
            return continuation_schedule(p)
        if abs(self.continuation_steps[-1] - p) > 1e-12:
            raise ValueError(f"continuation must end at p={p}, got {self.continuation_steps}")
        return tuple(self.continuation_steps)


@dataclass
class SolveReport:
    stages: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    residual_history: list[list[float]] = field(default_factory=list)
    linear_iterations: list[int] = field(default_factory=list)
    final_residual: float = np.inf
    converged: bool = False

    @property
    def total_iterations(self) -> int:
        return sum(self.iterations)


def block_jacobi(A: sp.csr_matrix, nb: int) -> sp.csr_matrix:
    """Inverse of the cell-diagonal blocks of ``A`` as a sparse matrix."""
    n = A.shape[0]
    nc = n // nb
    idx = np.arange(n).reshape(nc, nb)
    rows = np.repeat(idx, nb, axis=1).ravel()
    cols = np.tile(idx, (1, nb)).ravel()
    blocks = np.asarray(A[rows, cols]).reshape(nc, nb, nb)
    inv = np.linalg.inv(blocks)
    return sp.csr_matrix((inv.ravel(), (rows, cols)), shape=(n, n))


def linear_solve(J, rhs, block_size: int = 1, rtol: float = 1e-12,
                 x0=None) -> tuple[np.ndarray, int]:
    """Preconditioned CG for an SPD system.

    Returns the solution and the iteration count.  Raises
    :class:`LinearSolveFailure` if the relative residual does not reach
    ``rtol`` within ``10 * n`` iterations.
    """
    J = sp.csr_matrix(J)
    rhs = np.asarray(rhs, float)
    n = len(rhs)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros(n), 0
    try:
        M = block_jacobi(J, block_size)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(f"singular diagonal block: {exc}") from exc
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(J, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=10 * n, M=M, callback=cb)
    rel = np.linalg.norm(J @ x - rhs) / bnorm
    if info != 0 or not np.isfinite(rel):
        raise LinearSolveFailure(f"CG stopped after {count[0]} iterations, relative residual {rel:.3e}")
    return x, count[0]


def solve(space: DGSpace, spec: ProblemSpec, config: NewtonConfig | None = None,
          initial: DGFunction | None = None,
          problem: DiscreteProblem | None = None) -> tuple[DGFunction, SolveReport]:
    """Solve A U + b(U) = l by damped Newton with p-continuation."""
    config = config or NewtonConfig()
    problem = problem or DiscreteProblem(space, spec)
    U = DGFunction.zeros(space) if initial is None else initial.copy()
    nb = space.dofs_per_cell
    report = SolveReport()

    for q in config.stages(spec.p):
        F = problem.residual(U, q)
        r = np.linalg.norm(F)
        history = [r]
        its = 0
        while r > config.tol_residual:
            if its >= config.max_iter:
                report.final_residual = r
                report.stages.append(q)
                report.iterations.append(its)
                report.residual_history.append(history)
                raise NonConvergence(f"Newton hit max_iter={config.max_iter} at p={q}, "
                                     f"residual {r:.3e}", report)
            Jq = problem.jacobian(U, q)
            delta, lin_its = linear_solve(Jq, -F, nb, config.linear_rtol)
            report.linear_iterations.append(lin_its)
            lam = 1.0
            for _ in range(config.max_halvings + 1):
                trial = DGFunction(space, U.coeffs + lam * delta)
                F_trial = problem.residual(trial, q)
                r_trial = np.linalg.norm(F_trial)
                if r_trial < r:
                    break
                lam *= config.damping
            else:
                report.final_residual = r
                report.stages.append(q)
                report.iterations.append(its + 1)
                report.residual_history.append(history)
                raise NonConvergence(f"damping exhausted at p={q}, residual {r:.3e}", report)
            U, F, r = trial, F_trial, r_trial
            its += 1
            history.append(r)
            log.debug("p=%g it=%d lambda=%g |F|=%.3e cg=%d", q, its, lam, r, lin_its)
        report.stages.append(q)
        report.iterations.append(its)
        report.residual_history.append(history)
        report.final_residual = r

    report.converged = report.final_residual <= config.tol_residual
    return U, report
