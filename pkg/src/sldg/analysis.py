"""Error measures and the nodal-averaging conforming reconstruction."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dgspace import DGFunction, DGSpace, lagrange_nodes
from .forms import ProblemSpec, penalty
from .mesh import mesh_size

ELEVATION = 4


def _cell_values(obj, space: DGSpace, rule, x):
    """Values of a DGFunction, callable or scalar at the cell quadrature points."""
    if obj is None:
        return np.zeros(x.shape[:2])
    if isinstance(obj, DGFunction):
        return obj.values_at(rule.points)
    if callable(obj):
        return np.broadcast_to(np.asarray(obj(x[..., 0], x[..., 1]), float), x.shape[:2])
    return np.broadcast_to(np.asarray(obj, float), x.shape[:2])


def _degree(space: DGSpace, degree):
    return space.cell_rule.degree + ELEVATION if degree is None else degree


def lp_norm(w, p: float, space: DGSpace | None = None, degree: int | None = None,
            per_cell: bool = False):
    """L^p norm of a DGFunction, or of a callable on ``space``'s mesh."""
    space = w.space if space is None else space
    rule, x, wts = space.quadrature(_degree(space, degree))
    cell = (wts * np.abs(_cell_values(w, space, rule, x)) ** p).sum(axis=1)
    total = cell.sum() ** (1 / p)
    return (total, cell ** (1 / p)) if per_cell else total


def l2_norm(w, space: DGSpace | None = None, degree: int | None = None):
    return lp_norm(w, 2.0, space, degree)


def quasinorm(v, w, p: float, space: DGSpace | None = None, degree: int | None = None,
              per_cell: bool = False):
    """(integral of |v|^2 (|w| + |v|)^(p-2))^(1/2)."""
    if space is None:
        space = v.space if isinstance(v, DGFunction) else w.space
    rule, x, wts = space.quadrature(_degree(space, degree))
    vq = np.abs(_cell_values(v, space, rule, x))
    wq = np.abs(_cell_values(w, space, rule, x))
    cell = (wts * vq**2 * (wq + vq) ** (p - 2)).sum(axis=1)
    total = np.sqrt(cell.sum())
    return (total, np.sqrt(cell)) if per_cell else total


def _facet_exact(exact, fd):
    if exact is None:
        return 0.0
    return np.asarray(exact[0](fd.points[..., 0], fd.points[..., 1]), float)


def energy_norm(w: DGFunction, sigma: np.ndarray | None = None, exact=None,
                degree: int | None = None, per_cell: bool = False, C_sigma: float = 10.0):
    """Mesh-dependent H1 norm of ``w``, or of ``u - w`` when ``exact = (u, grad_u)`` is given.

    Facet contributions are split evenly between the two neighbouring cells
    in the per-cell breakdown.
    """
    space = w.space
    m = space.mesh
    if sigma is None:
        sigma = C_sigma * space.degree**2 / mesh_size(m).h_facet
    rule, x, wts = space.quadrature(_degree(space, degree))
    g = w.gradients_at(rule.points)
    if exact is not None:
        gx, gy = exact[1](x[..., 0], x[..., 1])
        g = np.stack([np.broadcast_to(gx, x.shape[:2]), np.broadcast_to(gy, x.shape[:2])], -1) - g
    cell = (wts * (g**2).sum(-1)).sum(axis=1)

    fd = space.facet_data()
    U = w.cell_coeffs
    c0 = m.facet_cells[:, 0]
    c1 = m.facet_cells[:, 1]
    plus = np.einsum("fqb,fb->fq", fd.values[0], U[c0])
    minus = np.einsum("fqb,fb->fq", fd.values[1], U[np.maximum(c1, 0)])
    ue = _facet_exact(exact, fd)
    # Scalar jump coefficient along the first cell's normal.
    jump = np.where(m.boundary_facet[:, None], ue - plus, -(plus - minus)) if exact is not None \
        else plus - minus
    facet = sigma * (fd.weights * jump**2).sum(axis=1)
    _spread(cell, facet, m)
    total = np.sqrt(cell.sum())
    return (total, np.sqrt(cell)) if per_cell else total


def _spread(cell, facet, m):
    interior = ~m.boundary_facet
    np.add.at(cell, m.facet_cells[m.boundary_facet, 0], facet[m.boundary_facet])
    np.add.at(cell, m.facet_cells[interior, 0], 0.5 * facet[interior])
    np.add.at(cell, m.facet_cells[interior, 1], 0.5 * facet[interior])


def jump_norms(w: DGFunction, power: float) -> np.ndarray:
    """Per-facet ||h^power [w]||^2 over every facet."""
    m = w.space.mesh
    fd = w.space.facet_data()
    U = w.cell_coeffs
    plus = np.einsum("fqb,fb->fq", fd.values[0], U[m.facet_cells[:, 0]])
    minus = np.einsum("fqb,fb->fq", fd.values[1], U[np.maximum(m.facet_cells[:, 1], 0)])
    h = mesh_size(m).h_facet
    return h ** (2 * power) * (fd.weights * (plus - minus) ** 2).sum(axis=1)


@dataclass
class ErrorReport:
    enorm: float
    lp: float
    quasinorm: float
    l2: float
    enorm_cells: np.ndarray
    lp_cells: np.ndarray
    quasinorm_cells: np.ndarray
    l2_cells: np.ndarray

    @property
    def quasi_energy(self) -> float:
        """(|||e|||^2 + |||e|||_(u,p)^2)^(1/2), the combined a priori error measure."""
        return float(np.hypot(self.enorm, self.quasinorm))


def error_report(U: DGFunction, spec: ProblemSpec, degree: int | None = None) -> ErrorReport:
    """Errors of ``U`` against ``spec.exact`` with elevated quadrature."""
    if spec.exact is None:
        raise ValueError("problem has no exact solution")
    space = U.space
    u = spec.exact[0]
    sigma = penalty(space, spec)
    en, en_c = energy_norm(U, sigma, spec.exact, degree, per_cell=True)

    rule, x, wts = space.quadrature(_degree(space, degree))
    e = u(x[..., 0], x[..., 1]) - U.values_at(rule.points)
    uq = np.abs(u(x[..., 0], x[..., 1]))
    p = spec.p
    lp_c = (wts * np.abs(e) ** p).sum(axis=1)
    qn_c = (wts * e**2 * (uq + np.abs(e)) ** (p - 2)).sum(axis=1)
    l2_c = (wts * e**2).sum(axis=1)
    return ErrorReport(
        enorm=float(en),
        lp=float(lp_c.sum() ** (1 / p)),
        quasinorm=float(np.sqrt(qn_c.sum())),
        l2=float(np.sqrt(l2_c.sum())),
        enorm_cells=en_c,
        lp_cells=lp_c ** (1 / p),
        quasinorm_cells=np.sqrt(qn_c),
        l2_cells=np.sqrt(l2_c),
    )


# -- conforming reconstruction ---------------------------------------------


@lru_cache(maxsize=None)
def _node_classes(k: int):
    """For each reference Lagrange node: (kind, local entity, position)."""
    out = []
    for i, (x, y) in enumerate(lagrange_nodes(k)):
        lam = np.rint(k * np.array([1 - x - y, x, y])).astype(int)
        zeros = np.flatnonzero(lam == 0)
        if len(zeros) == 2:
            out.append(("vertex", int(np.flatnonzero(lam == k)[0]), 0))
        elif len(zeros) == 1:
            out.append(("edge", int(zeros[0]), tuple(lam)))
        else:
            out.append(("interior", i, 0))
    return out


def lagrange_numbering(space: DGSpace) -> tuple[np.ndarray, np.ndarray]:
    """Global continuous Lagrange node id of every (cell, local node), and a boundary mask."""
    m = space.mesh
    k = space.degree
    nc = m.n_cells
    classes = _node_classes(k)
    nb = len(classes)
    keys = np.zeros((nc, nb, 3), dtype=np.int64)
    bnd = np.zeros((nc, nb), dtype=bool)
    bverts = m.boundary_vertices()
    cells = m.cells
    for j, (kind, ent, lam) in enumerate(classes):
        if kind == "vertex":
            v = cells[:, ent]
            keys[:, j] = np.column_stack([np.zeros(nc, np.int64), v, np.zeros(nc, np.int64)])
            bnd[:, j] = bverts[v]
        elif kind == "edge":
            f = m.cell_facets[:, ent]
            a = cells[:, (ent + 1) % 3]
            b = cells[:, (ent + 2) % 3]
            # Position measured from the endpoint with the smaller global index.
            pos = np.where(a < b, lam[(ent + 1) % 3], lam[(ent + 2) % 3])
            keys[:, j] = np.column_stack([np.ones(nc, np.int64), f, pos])
            bnd[:, j] = m.boundary_facet[f]
        else:
            keys[:, j] = np.column_stack([np.full(nc, 2, np.int64), np.arange(nc), np.full(nc, ent)])
    _, ids = np.unique(keys.reshape(-1, 3), axis=0, return_inverse=True)
    return ids.reshape(nc, nb), bnd


def reconstruct(v: DGFunction) -> DGFunction:
    """Average nodal values over the cells sharing each Lagrange node; zero on the boundary."""
    space = v.space
    ids, bnd = lagrange_numbering(space)
    V = space.basis.values(lagrange_nodes(space.degree))
    nodal = v.cell_coeffs @ V.T
    flat = ids.ravel()
    sums = np.bincount(flat, weights=nodal.ravel())
    counts = np.bincount(flat)
    avg = sums / counts
    avg[flat[bnd.ravel()]] = 0.0
    coeffs = np.linalg.solve(V, avg[ids].T).T
    return DGFunction(space, coeffs.ravel())


def kp_ratios(v: DGFunction) -> tuple[float, float]:
    """Ratios of both sides of the reconstruction stability bound for alpha = 0 and 1.

    alpha = 0: sum_K ||v - E v||^2_{L2(K)}  /  sum_e ||h^(1/2) [v]||^2
    alpha = 1: sum_K ||v - E v||^2_{H1(K)}  /  sum_e ||h^(-1/2) [v]||^2
    """
    d = v - reconstruct(v)
    space = v.space
    rule, _, wts = space.quadrature(2 * space.degree)
    l2 = (wts * d.values_at(rule.points) ** 2).sum()
    h1 = (wts * (d.gradients_at(rule.points) ** 2).sum(-1)).sum()
    j0 = jump_norms(v, 0.5).sum()
    j1 = jump_norms(v, -0.5).sum()
    return float(l2 / j0), float((l2 + h1) / j1)
