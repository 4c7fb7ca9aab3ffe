"""Fast invariant checks runnable without the test suite (``sldg selftest``)."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .analysis import quasinorm, lp_norm, reconstruct
from .dgspace import DGFunction, DGSpace, basis
from .forms import (ProblemSpec, assemble_bilinear, assemble_jacobian_semilinear,
                    assemble_semilinear)
from .mesh import bisect, build_crisscross, conformity_errors
from .quadrature import monomial_integral, triangle_rule

SEED = 20240607


def _quadrature_exactness():
    worst = 0.0
    for d in range(0, 21):
        r = triangle_rule(d)
        for e in range(d + 1):
            for a in range(e + 1):
                exact = monomial_integral(a, e - a)
                got = float(np.sum(r.weights * r.points[:, 0] ** a * r.points[:, 1] ** (e - a)))
                worst = max(worst, abs(got - exact) / exact)
    return worst <= 1e-13, f"max relative error {worst:.2e}"


def _basis_orthonormal():
    worst = 0.0
    for k in range(1, 5):
        b = basis(k)
        r = triangle_rule(2 * k)
        V = b.values(r.points)
        worst = max(worst, np.abs(V.T @ (r.weights[:, None] * V) - np.eye(b.size)).max())
    return worst <= 1e-12, f"max deviation from identity {worst:.2e}"


def _mesh_conformity():
    rng = np.random.default_rng(SEED)
    m = build_crisscross(2)
    for _ in range(12):
        m = bisect(m, rng.choice(m.n_cells, size=max(1, m.n_cells // 5), replace=False))
        errs = conformity_errors(m)
        if errs:
            return False, "; ".join(errs)
    area = m.areas().sum()
    return abs(area - 1) <= 1e-12, f"{m.n_cells} cells, area {area:.15f}"


def _symmetry_and_monotonicity():
    rng = np.random.default_rng(SEED)
    space = DGSpace(build_crisscross(2), 2, 10)
    spec = ProblemSpec(4.0, lambda x, y: 0 * x)
    A = assemble_bilinear(space, spec)
    asym = abs(A - A.T).max() / abs(A).max()
    worst = np.inf
    for _ in range(20):
        U = DGFunction(space, rng.normal(size=space.total_dofs))
        W = DGFunction(space, rng.normal(size=space.total_dofs))
        d = assemble_semilinear(space, spec, U) - assemble_semilinear(space, spec, W)
        worst = min(worst, d @ (U.coeffs - W.coeffs))
        J = assemble_jacobian_semilinear(space, spec, U)
        if abs(J - J.T).max() > 1e-12 * abs(J).max():
            return False, "semilinear Jacobian not symmetric"
    return asym <= 1e-10 and worst >= -1e-12, f"asymmetry {asym:.1e}, min monotonicity {worst:.3e}"


def _quasinorm_lower_bound():
    rng = np.random.default_rng(SEED)
    space = DGSpace(build_crisscross(2), 1)
    for p in (2.0, 4.0, 8.0):
        v = DGFunction(space, rng.normal(size=space.total_dofs))
        w = DGFunction(space, rng.normal(size=space.total_dofs))
        if lp_norm(v, p) ** p > quasinorm(v, w, p) ** 2 * (1 + 1e-10):
            return False, f"violated at p={p}"
    return True, "p in {2, 4, 8}"


def _reconstruction_projection():
    rng = np.random.default_rng(SEED)
    for k in (1, 2, 3):
        space = DGSpace(build_crisscross(2), k)
        v = DGFunction(space, rng.normal(size=space.total_dofs))
        Ev = reconstruct(v)
        diff = np.abs(reconstruct(Ev).coeffs - Ev.coeffs).max()
        if diff > 1e-12:
            return False, f"E(E v) != E v at k={k} ({diff:.1e})"
    return True, "E(E v) = E v for k = 1, 2, 3"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "quadrature exactness": _quadrature_exactness,
    "orthonormal basis": _basis_orthonormal,
    "mesh conformity under bisection": _mesh_conformity,
    "form symmetry and monotonicity": _symmetry_and_monotonicity,
    "quasinorm lower bound": _quasinorm_lower_bound,
    "reconstruction is a projection": _reconstruction_projection,
}


def run(echo=print) -> bool:
    ok_all = True
    for name, check in CHECKS.items():
        ok, detail = check()
        ok_all &= bool(ok)
        echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok_all
