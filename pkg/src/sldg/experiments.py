"""The smooth-solution convergence study and the constant-source adaptive study."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .adapt import AdaptConfig, AdaptResult, adapt_loop
from .analysis import energy_norm, error_report, lp_norm
from .dgspace import DGFunction, DGSpace, default_cell_degree, transfer
from .estimator import effectivity, estimate
from .forms import DiscreteProblem, ProblemSpec, penalty
from .mesh import build_crisscross, refine_uniform
from .output import write_rate_svg, write_vtk
from .solver import NewtonConfig, NonConvergence, solve

log = logging.getLogger(__name__)

ADAPT_SOURCE = 1000.0


def exact_solution():
    """u = sin(pi x) sin(pi y) and its gradient."""
    pi = np.pi

    def u(x, y):
        return np.sin(pi * x) * np.sin(pi * y)

    def grad(x, y):
        return pi * np.cos(pi * x) * np.sin(pi * y), pi * np.sin(pi * x) * np.cos(pi * y)

    return u, grad


def manufacture_source(p: float):
    """f = -Laplace(u) + u^(p-1) for the smooth exact solution (u >= 0 on the unit square)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    u, _ = exact_solution()

    def f(x, y):
        s = u(x, y)
        return 2 * np.pi**2 * s + np.abs(s) ** (p - 2) * s

    return f


def smooth_problem(p: float, C_sigma: float = 10.0) -> ProblemSpec:
    return ProblemSpec(p, manufacture_source(p), C_sigma, exact_solution())


def constant_source_problem(p: float, C_sigma: float = 10.0, value: float = ADAPT_SOURCE) -> ProblemSpec:
    return ProblemSpec(p, lambda x, y: np.full(np.shape(x), value), C_sigma)


def eoc(errors, hs) -> list[float]:
    """Experimental orders log(e_i / e_{i+1}) / log(h_i / h_{i+1})."""
    e = np.asarray(errors, float)
    h = np.asarray(hs, float)
    if len(e) != len(h) or len(e) < 2:
        raise ValueError("need two or more (error, h) pairs of equal length")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


@dataclass
class RateRow:
    level: int
    n_cells: int
    n_dofs: int
    h_max: float
    enorm_err: float
    lp_err: float
    quasinorm_err: float
    l2_err: float
    estimator_total: float
    effectivity: float
    # Appended after the fixed columns.
    quasi_energy_err: float = math.nan
    stability: float = math.nan
    newton_iterations: int = 0


ERROR_COLUMNS = ("enorm_err", "lp_err", "quasinorm_err", "l2_err", "estimator_total",
                 "quasi_energy_err")


@dataclass
class RateTable:
    k: int
    p: float
    rows: list[RateRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def eoc(self, name: str) -> list[float]:
        return eoc(self.column(name), self.column("h_max"))

    def write_csv(self, path) -> None:
        names = [f.name for f in fields(RateRow)]
        eoc_names = [f"eoc_{c}" for c in ERROR_COLUMNS]
        rates = {c: ([math.nan] + self.eoc(c)) if len(self.rows) > 1 else [math.nan]
                 for c in ERROR_COLUMNS}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + eoc_names)
            for i, r in enumerate(self.rows):
                vals = [_fmt(v) for v in asdict(r).values()]
                w.writerow(vals + [_fmt(rates[c][i]) for c in ERROR_COLUMNS])

    @classmethod
    def read_csv(cls, path, k: int, p: float) -> "RateTable":
        rows = []
        types = {f.name: f.type for f in fields(RateRow)}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                kw = {}
                for name, typ in types.items():
                    kw[name] = int(rec[name]) if typ in (int, "int") else float(rec[name])
                rows.append(RateRow(**kw))
        return cls(k, p, rows)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


@dataclass
class ConvergenceResult:
    table: RateTable
    solutions: list[DGFunction]
    stability_constants: list[float]


def stability_quantity(U: DGFunction, spec: ProblemSpec) -> float:
    """|||u_h|||^2 + (1/q) ||u_h||_p^p."""
    en = energy_norm(U, penalty(U.space, spec))
    return float(en**2 + lp_norm(U, spec.p) ** spec.p / spec.q)


def run_converge(k: int, p: float, levels: int = 5, C_sigma: float = 10.0,
                 quad_bump: int = 0, out: str | Path | None = None, vtk: bool = False,
                 newton: NewtonConfig | None = None, n0: int = 2) -> ConvergenceResult:
    """Uniform refinement study against the smooth exact solution.

    Level 0 is the criss-cross mesh with ``n0 x n0`` squares; each further
    level bisects every cell twice, halving h.
    """
    spec = smooth_problem(p, C_sigma)
    newton = newton or NewtonConfig()
    qdeg = default_cell_degree(k, p) + quad_bump
    mesh = build_crisscross(n0)
    table = RateTable(k, p)
    sols, consts = [], []
    U = None
    f_q = None
    for level in range(levels):
        if level > 0:
            mesh = refine_uniform(mesh, 2)
        space = DGSpace(mesh, k, qdeg)
        problem = DiscreteProblem(space, spec)
        init = None if U is None else transfer(U, space)
        cfg = newton if init is None else replace(newton, continuation_steps=(float(p),))
        try:
            try:
                U, rep = solve(space, spec, cfg, init, problem)
            except NonConvergence:
                if init is None:
                    raise
                U, rep = solve(space, spec, newton, None, problem)
        except NonConvergence as exc:
            raise NonConvergence(f"level {level}: {exc}", exc.report) from exc
        err = error_report(U, spec)
        est = estimate(space, spec, U, problem.sizes)
        stab = stability_quantity(U, spec)
        if f_q is None:
            f_q = lp_norm(spec.source, spec.q, space, qdeg + 4) ** spec.q / spec.q
        consts.append(f_q / stab)
        row = RateRow(level, mesh.n_cells, space.total_dofs, float(mesh.diameters().max()),
                      err.enorm, err.lp, err.quasinorm, err.l2, est.total, effectivity(est, err),
                      err.quasi_energy, stab, rep.total_iterations)
        table.rows.append(row)
        sols.append(U)
        log.info("level %d: %d cells, |||e||| = %.4e, eta = %.4e", level, mesh.n_cells,
                 err.enorm, est.total)
        if out is not None and vtk:
            write_vtk(Path(out) / f"converge_k{k}_p{_ptag(p)}_{level:02d}.vtk", U,
                      {"eta_R2": est.eta_R2, "eta_J2": est.eta_J2})

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        table.write_csv(out / f"converge_k{k}_p{_ptag(p)}.csv")
        write_rate_svg(table, out / f"converge_k{k}_p{_ptag(p)}.svg")
    return ConvergenceResult(table, sols, consts)


def _ptag(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else str(p)


ADAPT_COLUMNS = ("iteration", "cells", "dofs", "estimator", "newton_iterations", "u_max")


def run_adapt(k: int, p: float, config: AdaptConfig | None = None, C_sigma: float = 10.0,
              out: str | Path | None = None, vtk: bool = True,
              newton: NewtonConfig | None = None) -> AdaptResult:
    """Adaptive run with the constant source f = 1000."""
    spec = constant_source_problem(p, C_sigma)
    outdir = None if out is None else Path(out)
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)

    def dump(rec, U, est):
        if outdir is not None and vtk:
            write_vtk(outdir / f"adapt_p{_ptag(p)}_{rec.iteration:03d}.vtk", U,
                      {"eta_R2": est.eta_R2, "eta_J2": est.eta_J2})

    result = adapt_loop(spec, k, config, newton, callback=dump)
    if outdir is not None:
        with open(outdir / f"adapt_p{_ptag(p)}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ADAPT_COLUMNS)
            for r in result.records:
                w.writerow([r.iteration, r.n_cells, r.n_dofs, _fmt(r.estimator),
                            r.newton_iterations, _fmt(r.u_max)])
    return result
