"""Assembly of the interior penalty form, the semilinear term and the residual.

Degrees of freedom are numbered cell-major: dof ``c * nb + i`` is the
coefficient of basis function ``i`` on cell ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .dgspace import DGFunction, DGSpace, ScalarField
from .mesh import MeshSizeField, mesh_size

GradField = Callable[[np.ndarray, np.ndarray], tuple]


@dataclass(frozen=True)
class ProblemSpec:
    """-Laplace(u) + |u|^(p-2) u = f in the domain, u = 0 on its boundary.

    ``exact`` is an optional pair ``(u, grad_u)`` of vectorised callables.
    """

    p: float
    source: ScalarField
    C_sigma: float = 10.0
    exact: Optional[tuple[ScalarField, GradField]] = None

    def __post_init__(self):
        if not self.p >= 2:
            raise ValueError(f"exponent p must be >= 2, got {self.p}")
        if not self.C_sigma > 0:
            raise ValueError(f"penalty constant must be positive, got {self.C_sigma}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1)


@dataclass
class AssembledSystem:
    residual: np.ndarray
    jacobian: sp.csr_matrix
    penalty_field: np.ndarray = field(repr=False)


def penalty(space: DGSpace, spec: ProblemSpec, sizes: MeshSizeField | None = None) -> np.ndarray:
    """Per-facet penalty C_sigma * k^2 / h_e."""
    if sizes is None:
        sizes = mesh_size(space.mesh)
    return spec.C_sigma * space.degree**2 / sizes.h_facet


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    nc, nb, _ = blocks.shape
    idx = np.arange(nc * nb).reshape(nc, nb)
    rows = np.repeat(idx, nb, axis=1).ravel()
    cols = np.tile(idx, (1, nb)).ravel()
    n = nc * nb
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def assemble_bilinear(space: DGSpace, spec: ProblemSpec,
                      sigma: np.ndarray | None = None) -> sp.csr_matrix:
    """Symmetric interior penalty matrix with weakly imposed zero boundary data."""
    m = space.mesh
    nb = space.dofs_per_cell
    if sigma is None:
        sigma = penalty(space, spec)

    rule, _, w = space.quadrature()
    G = space.physical_gradients(space.basis.gradients(rule.points))
    K = np.einsum("cq,cqaj,cqbj->cab", w, G, G)
    rows = [np.repeat(np.arange(m.n_cells * nb).reshape(-1, nb), nb, axis=1).ravel()]
    cols = [np.tile(np.arange(m.n_cells * nb).reshape(-1, nb), (1, nb)).ravel()]
    vals = [K.ravel()]

    fd = space.facet_data()
    n = m.facet_normal
    V = fd.values                                      # (2, nf, nq, nb)
    Gn = np.einsum("sfqbj,fj->sfqb", fd.grads, n)      # normal derivatives
    interior = ~m.boundary_facet
    avg = np.where(interior, 0.5, 1.0)[:, None]        # (nf, 1)
    sign = (1.0, -1.0)
    for a in (0, 1):
        for b in (0, 1):
            sel = np.ones(m.n_facets, dtype=bool) if a == b == 0 else interior
            f = np.flatnonzero(sel)
            wq = fd.weights[f]
            sa, sb = sign[a], sign[b]
            block = (
                -sa * np.einsum("fq,fqi,fqj->fij", wq * avg[f], V[a, f], Gn[b, f])
                - sb * np.einsum("fq,fqj,fqi->fij", wq * avg[f], V[b, f], Gn[a, f])
                + sa * sb * np.einsum("fq,fqi,fqj->fij", wq * sigma[f, None], V[a, f], V[b, f])
            )
            ca = m.facet_cells[f, a]
            cb = m.facet_cells[f, b]
            r = (ca[:, None] * nb + np.arange(nb))[:, :, None]
            c = (cb[:, None] * nb + np.arange(nb))[:, None, :]
            rows.append(np.broadcast_to(r, block.shape).ravel())
            cols.append(np.broadcast_to(c, block.shape).ravel())
            vals.append(block.ravel())

    N = space.total_dofs
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    A.sum_duplicates()
    return A


def mass_matrix(space: DGSpace) -> sp.csr_matrix:
    nb = space.dofs_per_cell
    blocks = space.detJ[:, None, None] * np.eye(nb)[None]
    return _block_diag(blocks)


def _nonlinear_setup(space: DGSpace, U: DGFunction):
    rule, _, w = space.quadrature()
    phi = space.basis.values(rule.points)
    uq = U.cell_coeffs @ phi.T
    return phi, w, uq


def assemble_semilinear(space: DGSpace, spec: ProblemSpec, U: DGFunction,
                        p: float | None = None) -> np.ndarray:
    """b_i = integral of |u_h|^(p-2) u_h phi_i."""
    p = spec.p if p is None else p
    phi, w, uq = _nonlinear_setup(space, U)
    return ((w * np.abs(uq) ** (p - 2) * uq) @ phi).ravel()


def assemble_jacobian_semilinear(space: DGSpace, spec: ProblemSpec, U: DGFunction,
                                 p: float | None = None) -> sp.csr_matrix:
    """Block-diagonal matrix of (p-1) |u_h|^(p-2) phi_j phi_i."""
    p = spec.p if p is None else p
    phi, w, uq = _nonlinear_setup(space, U)
    weight = w * (p - 1) * np.abs(uq) ** (p - 2)
    blocks = np.einsum("cq,qa,qb->cab", weight, phi, phi)
    return _block_diag(blocks)


def assemble_load(space: DGSpace, spec: ProblemSpec) -> np.ndarray:
    rule, x, w = space.quadrature()
    fq = np.broadcast_to(np.asarray(spec.source(x[..., 0], x[..., 1]), float), w.shape)
    return ((w * fq) @ space.basis.values(rule.points)).ravel()


class DiscreteProblem:
    """Caches the linear pieces A and l of F(U) = A U + b(U) - l on one space."""

    def __init__(self, space: DGSpace, spec: ProblemSpec):
        self.space = space
        self.spec = spec
        self.sizes = mesh_size(space.mesh)
        self.sigma = penalty(space, spec, self.sizes)
        self.A = assemble_bilinear(space, spec, self.sigma)
        self.load = assemble_load(space, spec)

    def residual(self, U: DGFunction, p: float | None = None) -> np.ndarray:
        return self.A @ U.coeffs + assemble_semilinear(self.space, self.spec, U, p) - self.load

    def jacobian(self, U: DGFunction, p: float | None = None) -> sp.csr_matrix:
        return (self.A + assemble_jacobian_semilinear(self.space, self.spec, U, p)).tocsr()

    def system(self, U: DGFunction, p: float | None = None) -> AssembledSystem:
        return AssembledSystem(self.residual(U, p), self.jacobian(U, p), self.sigma)


def assemble_residual(space: DGSpace, spec: ProblemSpec, U: DGFunction) -> np.ndarray:
    """F(U) = A U + b(U) - l."""
    return DiscreteProblem(space, spec).residual(U)
