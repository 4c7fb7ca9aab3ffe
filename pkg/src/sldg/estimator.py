"""Residual and jump a posteriori error indicators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import ErrorReport
from .dgspace import DGFunction, DGSpace
from .forms import ProblemSpec
from .mesh import MeshSizeField, mesh_size


@dataclass
class EstimatorReport:
    eta_R2: np.ndarray        # per cell
    eta_J2: np.ndarray        # per cell, facet terms attributed half/half
    eta_J2_facets: np.ndarray  # per facet, unsplit

    @property
    def cell_indicators(self) -> np.ndarray:
        """sqrt(eta_R^2 + attributed eta_J^2) on each cell."""
        return np.sqrt(self.eta_R2 + self.eta_J2)

    @property
    def total(self) -> float:
        return float(np.sqrt(self.eta_R2.sum() + self.eta_J2.sum()))


def estimate(space: DGSpace, spec: ProblemSpec, U: DGFunction,
             sizes: MeshSizeField | None = None, sigma=None,
             degree: int | None = None) -> EstimatorReport:
    """Evaluate the residual and jump indicators of ``U``.

    ``sigma`` is accepted for interface symmetry with the norms; the jump
    terms are weighted by powers of h only.
    """
    m = space.mesh
    sizes = mesh_size(m) if sizes is None else sizes
    p = spec.p

    rule, x, w = space.quadrature(degree)
    uq = U.values_at(rule.points)
    lap = U.laplacians_at(rule.points) if space.degree >= 2 else 0.0
    f = np.broadcast_to(np.asarray(spec.source(x[..., 0], x[..., 1]), float), uq.shape)
    res = f + lap - np.abs(uq) ** (p - 2) * uq
    eta_R2 = sizes.h_cell**2 * (w * res**2).sum(axis=1)

    fd = space.facet_data()
    C = U.cell_coeffs
    c0 = m.facet_cells[:, 0]
    c1 = np.maximum(m.facet_cells[:, 1], 0)
    n = m.facet_normal
    plus = np.einsum("fqb,fb->fq", fd.values[0], C[c0])
    minus = np.einsum("fqb,fb->fq", fd.values[1], C[c1])
    dplus = np.einsum("fqbj,fb,fj->fq", fd.grads[0], C[c0], n)
    dminus = np.einsum("fqbj,fb,fj->fq", fd.grads[1], C[c1], n)
    he = sizes.h_facet
    interior = ~m.boundary_facet
    jump_u = (fd.weights * (plus - minus) ** 2).sum(axis=1)
    jump_g = np.where(interior, (fd.weights * (dplus - dminus) ** 2).sum(axis=1), 0.0)
    eta_J2_f = he * jump_g + jump_u / he + he * jump_u

    eta_J2 = np.zeros(m.n_cells)
    np.add.at(eta_J2, c0[~interior], eta_J2_f[~interior])
    np.add.at(eta_J2, c0[interior], 0.5 * eta_J2_f[interior])
    np.add.at(eta_J2, m.facet_cells[interior, 1], 0.5 * eta_J2_f[interior])
    return EstimatorReport(eta_R2, eta_J2, eta_J2_f)


def effectivity(report: EstimatorReport, err: ErrorReport | float) -> float:
    """Estimator total over the energy-norm error; ``inf`` when the error vanishes."""
    e = err.enorm if isinstance(err, ErrorReport) else float(err)
    if e == 0:
        return float("inf")
    return report.total / e
