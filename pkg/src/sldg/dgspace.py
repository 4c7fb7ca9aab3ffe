"""Broken polynomial spaces on triangle meshes.

Each cell carries the same orthonormal modal basis, built by orthonormalising
the monomials ``x**a * y**b`` (``a + b <= k``) on the reference triangle.
Since the element map is affine, the physical mass matrix of cell ``K`` is
``2|K| * I``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .mesh import Mesh
from .quadrature import Rule, interval_rule, monomial_integral, triangle_rule

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _exponents(k: int) -> list[tuple[int, int]]:
    return [(d - j, j) for d in range(k + 1) for j in range(d + 1)]


class Basis:
    """Orthonormal basis of P_k on the reference triangle."""

    def __init__(self, k: int):
        if k < 0:
            raise ValueError("degree must be nonnegative")
        self.degree = k
        self.exponents = _exponents(k)
        nb = len(self.exponents)
        gram = np.empty((nb, nb))
        for i, (a, b) in enumerate(self.exponents):
            for j, (c, d) in enumerate(self.exponents):
                gram[i, j] = monomial_integral(a + c, b + d)
        L = np.linalg.cholesky(gram)
        # phi = C @ monomials
        self.coeffs = np.linalg.solve(L, np.eye(nb))
        # One more pass against the quadrature mass matrix removes the
        # rounding left by the ill-conditioned monomial Gram matrix.
        rule = triangle_rule(2 * k)
        V = self.values(rule.points)
        L2 = np.linalg.cholesky(V.T @ (rule.weights[:, None] * V))
        self.coeffs = np.linalg.solve(L2, self.coeffs)

    @property
    def size(self) -> int:
        return len(self.exponents)

    def _monomials(self, pts, dx=0, dy=0):
        x = pts[..., 0][..., None]
        y = pts[..., 1][..., None]
        a = np.array([e[0] for e in self.exponents])
        b = np.array([e[1] for e in self.exponents])
        ca = np.ones_like(a, dtype=float)
        cb = np.ones_like(b, dtype=float)
        for i in range(dx):
            ca = ca * (a - i)
        for i in range(dy):
            cb = cb * (b - i)
        ea = np.maximum(a - dx, 0)
        eb = np.maximum(b - dy, 0)
        return ca * cb * x**ea * y**eb

    def values(self, pts) -> np.ndarray:
        """(..., nb) basis values at reference points (..., 2)."""
        return self._monomials(np.asarray(pts, float)) @ self.coeffs.T

    def gradients(self, pts) -> np.ndarray:
        """(..., nb, 2) reference gradients."""
        pts = np.asarray(pts, float)
        gx = self._monomials(pts, 1, 0) @ self.coeffs.T
        gy = self._monomials(pts, 0, 1) @ self.coeffs.T
        return np.stack([gx, gy], axis=-1)

    def hessians(self, pts) -> np.ndarray:
        """(..., nb, 2, 2) reference second derivatives."""
        pts = np.asarray(pts, float)
        hxx = self._monomials(pts, 2, 0) @ self.coeffs.T
        hxy = self._monomials(pts, 1, 1) @ self.coeffs.T
        hyy = self._monomials(pts, 0, 2) @ self.coeffs.T
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


@lru_cache(maxsize=None)
def basis(k: int) -> Basis:
    return Basis(k)


def lagrange_nodes(k: int) -> np.ndarray:
    """Equispaced degree-k nodes on the reference triangle, (nb, 2)."""
    return np.array([(i / k, j / k) for j in range(k + 1) for i in range(k + 1 - j)])


def default_cell_degree(k: int, p: float) -> int:
    return max(2 * k + 2, int(ceil(k * p)) + 2)


class FacetData(NamedTuple):
    points: np.ndarray    # (nf, nq, 2) physical
    weights: np.ndarray   # (nf, nq), including the facet length
    values: np.ndarray    # (2, nf, nq, nb); side 1 is zero on boundary facets
    grads: np.ndarray     # (2, nf, nq, nb, 2) physical gradients


class DGSpace:
    """Degree-k discontinuous piecewise polynomials on ``mesh``.

    ``cell_degree`` and ``facet_degree`` are the exactness degrees of the
    quadrature rules used for assembly.
    """

    def __init__(self, mesh: Mesh, degree: int, cell_degree: int | None = None,
                 facet_degree: int | None = None):
        if degree < 1:
            raise ValueError("DG degree must be >= 1")
        self.mesh = mesh
        self.degree = degree
        self.basis = basis(degree)
        self.cell_rule: Rule = triangle_rule(cell_degree if cell_degree is not None
                                             else 2 * degree + 2)
        self.facet_rule: Rule = interval_rule(facet_degree if facet_degree is not None
                                              else 2 * degree + 2)
        J = mesh.jacobians
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        self.invJ = np.linalg.inv(J)
        self._facet_cache: dict[int, FacetData] = {}

    @property
    def dofs_per_cell(self) -> int:
        return self.basis.size

    @property
    def total_dofs(self) -> int:
        return self.mesh.n_cells * self.dofs_per_cell

    def with_mesh(self, mesh: Mesh) -> "DGSpace":
        return DGSpace(mesh, self.degree, self.cell_rule.degree, self.facet_rule.degree)

    # -- geometry helpers ---------------------------------------------------

    def map_points(self, ref_pts, cells=None) -> np.ndarray:
        """Physical images (nc, nq, 2) of reference points under each cell map."""
        cells = slice(None) if cells is None else cells
        v0 = self.mesh.vertices[self.mesh.cells[cells, 0]]
        J = self.mesh.jacobians[cells]
        return v0[..., None, :] + np.einsum("cij,qj->cqi", J, np.asarray(ref_pts, float))

    def to_reference(self, cells, pts) -> np.ndarray:
        """Reference coordinates of physical points ``pts[..., 2]`` in ``cells[...]``."""
        cells = np.asarray(cells)
        v0 = self.mesh.vertices[self.mesh.cells[cells, 0]]
        return np.einsum("...ij,...j->...i", self.invJ[cells], pts - v0)

    def physical_gradients(self, ref_grads, cells=None) -> np.ndarray:
        """Map reference gradients (nq, nb, 2) to (nc, nq, nb, 2)."""
        invJ = self.invJ if cells is None else self.invJ[cells]
        return np.einsum("qbi,cij->cqbj", ref_grads, invJ)

    def quadrature(self, degree: int | None = None):
        """Cell rule of the given degree: reference rule, physical points, weights (nc, nq)."""
        rule = self.cell_rule if degree is None else triangle_rule(degree)
        x = self.map_points(rule.points)
        w = np.outer(self.detJ, rule.weights)
        return rule, x, w

    def facet_data(self, degree: int | None = None) -> FacetData:
        degree = self.facet_rule.degree if degree is None else degree
        if degree in self._facet_cache:
            return self._facet_cache[degree]
        m = self.mesh
        rule = interval_rule(degree)
        A = m.vertices[m.facet_vertices[:, 0]]
        B = m.vertices[m.facet_vertices[:, 1]]
        t = rule.points
        pts = A[:, None, :] + t[None, :, None] * (B - A)[:, None, :]
        w = np.outer(m.facet_length, rule.weights)
        nf, nq, nb = m.n_facets, len(t), self.dofs_per_cell
        vals = np.zeros((2, nf, nq, nb))
        grads = np.zeros((2, nf, nq, nb, 2))
        for side in (0, 1):
            cells = m.facet_cells[:, side]
            ok = cells >= 0
            c = cells[ok]
            ref = self.to_reference(c[:, None], pts[ok])
            vals[side, ok] = self.basis.values(ref)
            g = self.basis.gradients(ref)
            grads[side, ok] = np.einsum("fqbi,fij->fqbj", g, self.invJ[c])
        data = FacetData(pts, w, vals, grads)
        self._facet_cache[degree] = data
        return data


@dataclass
class DGFunction:
    space: DGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.total_dofs,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, "
                f"space needs ({self.space.total_dofs},)"
            )

    @classmethod
    def zeros(cls, space: DGSpace) -> "DGFunction":
        return cls(space, np.zeros(space.total_dofs))

    @property
    def cell_coeffs(self) -> np.ndarray:
        return self.coeffs.reshape(-1, self.space.dofs_per_cell)

    def copy(self) -> "DGFunction":
        return DGFunction(self.space, self.coeffs.copy())

    def __add__(self, other):
        return DGFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return DGFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return DGFunction(self.space, c * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return DGFunction(self.space, -self.coeffs)

    def values_at(self, ref_pts) -> np.ndarray:
        """(nc, nq) values at the same reference points on every cell."""
        return self.cell_coeffs @ self.space.basis.values(ref_pts).T

    def gradients_at(self, ref_pts) -> np.ndarray:
        """(nc, nq, 2) physical gradients at the same reference points on every cell."""
        g = self.space.physical_gradients(self.space.basis.gradients(ref_pts))
        return np.einsum("cb,cqbj->cqj", self.cell_coeffs, g)

    def laplacians_at(self, ref_pts) -> np.ndarray:
        """(nc, nq) broken Laplacian."""
        H = self.space.basis.hessians(ref_pts)
        invJ = self.space.invJ
        # Tr(J^-T H J^-1) = sum_ab H_ab (J^-1 J^-T)_ab
        M = np.einsum("cai,cbi->cab", invJ, invJ)
        lap = np.einsum("qnab,cab->cqn", H, M)
        return np.einsum("cn,cqn->cq", self.cell_coeffs, lap)


def evaluate(f: DGFunction, cell: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Values (N,) and physical gradients (N, 2) of ``f`` on ``cell`` at reference points."""
    space = f.space
    if not 0 <= cell < space.mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    pts = np.atleast_2d(np.asarray(points, float))
    c = f.cell_coeffs[cell]
    vals = space.basis.values(pts) @ c
    grads = np.einsum("nbi,ij,b->nj", space.basis.gradients(pts), space.invJ[cell], c)
    return vals, grads


def evaluate_physical(f: DGFunction, cells, pts) -> np.ndarray:
    """Values of ``f`` at physical points ``pts[..., 2]`` known to lie in ``cells[...]``."""
    cells = np.asarray(cells)
    ref = f.space.to_reference(cells, pts)
    phi = f.space.basis.values(ref)
    return np.einsum("...b,...b->...", phi, f.cell_coeffs[cells])


def project_L2(g: ScalarField, space: DGSpace, degree: int | None = None) -> DGFunction:
    """Cellwise L2 projection of ``g(x, y)`` onto the space."""
    rule, x, _ = space.quadrature(degree)
    gq = np.broadcast_to(np.asarray(g(x[..., 0], x[..., 1]), float), x.shape[:2])
    phi = space.basis.values(rule.points)
    # Mass matrix is detJ * I, so the detJ factors cancel.
    coeffs = gq @ (rule.weights[:, None] * phi)
    return DGFunction(space, coeffs.ravel())


def transfer(f: DGFunction, space: DGSpace) -> DGFunction:
    """Project ``f`` onto a space whose mesh was refined from ``f``'s mesh.

    ``space.mesh.parent`` must map each new cell to the old cell containing it.
    """
    parent = space.mesh.parent
    if parent is None:
        raise ValueError("target mesh carries no parent map")
    rule = triangle_rule(2 * space.degree)
    x = space.map_points(rule.points)
    vals = evaluate_physical(f, np.broadcast_to(parent[:, None], x.shape[:2]), x)
    phi = space.basis.values(rule.points)
    return DGFunction(space, (vals @ (rule.weights[:, None] * phi)).ravel())


class FacetTrace(NamedTuple):
    points: np.ndarray
    weights: np.ndarray
    normal: np.ndarray
    v_plus: np.ndarray
    grad_plus: np.ndarray
    v_minus: np.ndarray | None
    grad_minus: np.ndarray | None

    @property
    def boundary(self) -> bool:
        return self.v_minus is None

    @property
    def jump(self) -> np.ndarray:
        """[v] = v+ n+ + v- n-, shape (nq, 2)."""
        d = self.v_plus if self.boundary else self.v_plus - self.v_minus
        return d[:, None] * self.normal

    @property
    def average(self) -> np.ndarray:
        if self.boundary:
            return self.v_plus
        return 0.5 * (self.v_plus + self.v_minus)

    @property
    def grad_average(self) -> np.ndarray:
        if self.boundary:
            return self.grad_plus
        return 0.5 * (self.grad_plus + self.grad_minus)

    @property
    def grad_jump(self) -> np.ndarray:
        """Normal-flux jump [grad v] = grad v+ . n+ + grad v- . n- (zero on the boundary)."""
        if self.boundary:
            return np.zeros(len(self.weights))
        return (self.grad_plus - self.grad_minus) @ self.normal


def facet_trace(f: DGFunction, facet: int) -> FacetTrace:
    space = f.space
    m = space.mesh
    if not 0 <= facet < m.n_facets:
        raise IndexError(f"facet {facet} out of range")
    fd = space.facet_data()
    c0, c1 = m.facet_cells[facet]
    U = f.cell_coeffs
    vp = fd.values[0, facet] @ U[c0]
    gp = np.einsum("qbj,b->qj", fd.grads[0, facet], U[c0])
    if c1 < 0:
        vm = gm = None
    else:
        vm = fd.values[1, facet] @ U[c1]
        gm = np.einsum("qbj,b->qj", fd.grads[1, facet], U[c1])
    return FacetTrace(fd.points[facet], fd.weights[facet], m.facet_normal[facet], vp, gp, vm, gm)


def write_function(f: DGFunction, path) -> None:
    s = f.space
    lines = [f"{s.degree} {s.mesh.n_cells} {s.dofs_per_cell}"]
    lines += [" ".join(repr(float(c)) for c in row) for row in f.cell_coeffs]
    Path(path).write_text("\n".join(lines) + "\n")


def read_function(space: DGSpace, path) -> DGFunction:
    tokens = Path(path).read_text().split()
    k, nc, nb = (int(t) for t in tokens[:3])
    if (k, nc, nb) != (space.degree, space.mesh.n_cells, space.dofs_per_cell):
        raise ValueError(f"{path}: header {(k, nc, nb)} does not match the space")
    return DGFunction(space, np.array(tokens[3:], dtype=float))
