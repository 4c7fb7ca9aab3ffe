"""Conforming triangulations of planar polygons with newest-vertex bisection.

Local edge ``i`` of a cell is the edge opposite local vertex ``i``, i.e. the
segment from vertex ``(i+1) % 3`` to vertex ``(i+2) % 3``.  Cells are stored
counter-clockwise, so that segment traversed in that order has the cell on
its left and its outward normal is ``(dy, -dx) / length``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


class Mesh:
    """Immutable triangle mesh with facet topology.

    Parameters
    ----------
    vertices : (nv, 2) array_like
    cells : (nc, 3) array_like of int
        Counter-clockwise vertex triples.
    ref_edge : (nc,) array_like of int, optional
        Local index of the refinement edge of each cell.  Defaults to the
        longest edge (ties broken by the smallest opposite-vertex index).
    generation : (nc,) array_like of int, optional
        Bisection depth of each cell, zero by default.
    parent : (nc,) array_like of int, optional
        Cell of the mesh this one was refined from, if any.
    """

    def __init__(self, vertices, cells, ref_edge=None, generation=None, parent=None):
        vertices = np.array(vertices, dtype=float).reshape(-1, 2)
        cells = np.array(cells, dtype=np.int64).reshape(-1, 3)
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("cell references a nonexistent vertex")
        if ref_edge is None:
            ref_edge = _longest_edge(vertices, cells)
        if generation is None:
            generation = np.zeros(len(cells), dtype=np.int64)
        self.vertices = vertices
        self.cells = cells
        self.ref_edge = np.array(ref_edge, dtype=np.int64).reshape(len(cells))
        self.generation = np.array(generation, dtype=np.int64).reshape(len(cells))
        self.parent = None if parent is None else np.array(parent, dtype=np.int64)
        self._build_topology()
        for arr in self.__dict__.values():
            if isinstance(arr, np.ndarray):
                arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_facets(self) -> int:
        return len(self.facet_vertices)

    def _build_topology(self):
        nc = len(self.cells)
        loc = np.array([[1, 2], [2, 0], [0, 1]])
        edges = self.cells[:, loc].reshape(-1, 2)
        keys = np.sort(edges, axis=1)
        uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        nf = len(uniq)
        counts = np.bincount(inverse, minlength=nf)
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two cells")

        # Stable sort keeps the lower cell index first on each facet.
        order = np.argsort(inverse, kind="stable")
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        occ0 = order[start]
        occ1 = np.where(counts == 2, order[np.minimum(start + 1, len(order) - 1)], -1)

        facet_cells = np.full((nf, 2), -1, dtype=np.int64)
        facet_local = np.full((nf, 2), -1, dtype=np.int64)
        facet_cells[:, 0] = occ0 // 3
        facet_local[:, 0] = occ0 % 3
        two = occ1 >= 0
        facet_cells[two, 1] = occ1[two] // 3
        facet_local[two, 1] = occ1[two] % 3

        # Orient each facet as seen from its first cell.
        fv = edges[occ0]
        d = self.vertices[fv[:, 1]] - self.vertices[fv[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]

        self.facet_vertices = fv
        self.facet_cells = facet_cells
        self.facet_local = facet_local
        self.facet_normal = normal
        self.facet_length = length
        self.boundary_facet = ~two
        self.cell_facets = inverse.reshape(nc, 3)
        del first

    # -- geometry -----------------------------------------------------------

    @property
    def jacobians(self) -> np.ndarray:
        """(nc, 2, 2) affine Jacobians with columns ``v1 - v0`` and ``v2 - v0``."""
        p = self.vertices[self.cells]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    def areas(self) -> np.ndarray:
        J = self.jacobians
        return 0.5 * (J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    def edge_lengths(self) -> np.ndarray:
        """(nc, 3) lengths of local edges."""
        p = self.vertices[self.cells]
        return np.stack(
            [np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1) for i in range(3)],
            axis=1,
        )

    def diameters(self) -> np.ndarray:
        return self.edge_lengths().max(axis=1)

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of each cell, in radians."""
        L = self.edge_lengths()
        a, b, c = L[:, 0], L[:, 1], L[:, 2]
        cosines = np.stack(
            [(b**2 + c**2 - a**2) / (2 * b * c),
             (c**2 + a**2 - b**2) / (2 * c * a),
             (a**2 + b**2 - c**2) / (2 * a * b)],
            axis=1,
        )
        return np.arccos(np.clip(cosines, -1.0, 1.0)).min(axis=1)

    def boundary_vertices(self) -> np.ndarray:
        """Boolean mask of vertices lying on a boundary facet."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.facet_vertices[self.boundary_facet].ravel()] = True
        return mask

    def boundary_cells(self) -> np.ndarray:
        """Boolean mask of cells owning at least one boundary facet."""
        mask = np.zeros(self.n_cells, dtype=bool)
        mask[self.facet_cells[self.boundary_facet, 0]] = True
        return mask

    def cell_neighbours(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n_cells)]
        for a, b in self.facet_cells[~self.boundary_facet]:
            nbrs[a].append(int(b))
            nbrs[b].append(int(a))
        return nbrs

    def __repr__(self):
        return f"Mesh(nv={self.n_vertices}, nc={self.n_cells}, nf={self.n_facets})"


def _longest_edge(vertices, cells):
    p = vertices[cells]
    L = np.stack(
        [np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1) for i in range(3)], axis=1
    )
    # Relative tolerance so that equal-length edges tie exactly.
    Lmax = L.max(axis=1, keepdims=True)
    candidate = L >= Lmax * (1 - 1e-12)
    # Tie-break on the smallest global index of the opposite vertex.
    opp = np.where(candidate, cells, np.iinfo(np.int64).max)
    return np.argmin(opp, axis=1)


@dataclass(frozen=True)
class MeshSizeField:
    h_cell: np.ndarray
    h_facet: np.ndarray


def mesh_size(mesh: Mesh) -> MeshSizeField:
    """Cell diameters and facet sizes (mean of neighbours, or the one-sided value)."""
    h = mesh.diameters()
    fc = mesh.facet_cells
    hf = h[fc[:, 0]].copy()
    interior = fc[:, 1] >= 0
    hf[interior] = 0.5 * (h[fc[interior, 0]] + h[fc[interior, 1]])
    return MeshSizeField(h_cell=h, h_facet=hf)


def build_crisscross(n: int) -> Mesh:
    """Unit square split into ``n x n`` squares, each cut by both diagonals."""
    if int(n) != n or n < 1:
        raise MeshError(f"criss-cross mesh needs n >= 1, got {n!r}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    c = (t[:-1] + t[1:]) / 2
    CX, CY = np.meshgrid(c, c, indexing="xy")
    centres = np.column_stack([CX.ravel(), CY.ravel()])
    vertices = np.vstack([corners, centres])

    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10 = v00 + 1
            v01 = v00 + (n + 1)
            v11 = v01 + 1
            m = (n + 1) ** 2 + j * n + i
            # Centre first: the refinement edge (local 0) is the square side.
            cells += [(m, v00, v10), (m, v10, v11), (m, v11, v01), (m, v01, v00)]
    cells = np.array(cells, dtype=np.int64)
    return Mesh(vertices, cells, ref_edge=np.zeros(len(cells), dtype=np.int64))


def bisect(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked cells plus conforming closure.

    The returned mesh carries ``parent``: for every new cell, the index of the
    cell of ``mesh`` that contains it.
    """
    marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked,
                                  dtype=np.int64))
    nc = mesh.n_cells
    if marked.size and (marked.min() < 0 or marked.max() >= nc):
        raise MeshError("marked cell index out of range")
    if marked.size == 0:
        return Mesh(mesh.vertices, mesh.cells, mesh.ref_edge, mesh.generation,
                    parent=np.arange(nc))

    cf = mesh.cell_facets
    ref_facet = cf[np.arange(nc), mesh.ref_edge]
    split = np.zeros(mesh.n_facets, dtype=bool)
    split[ref_facet[marked]] = True

    # Closure: any cell with a split edge must also split its refinement edge.
    while True:
        touched = split[cf].any(axis=1)
        need = touched & ~split[ref_facet]
        if not need.any():
            break
        split[ref_facet[need]] = True

    vertices = [*map(tuple, mesh.vertices)]
    midpoint: dict[tuple[int, int], int] = {}
    for f in np.flatnonzero(split):
        a, b = mesh.facet_vertices[f]
        midpoint[(min(a, b), max(a, b))] = len(vertices)
        vertices.append(tuple(0.5 * (mesh.vertices[a] + mesh.vertices[b])))

    new_cells, new_ref, new_gen, new_parent = [], [], [], []
    cells = mesh.cells.tolist()
    for c in range(nc):
        stack = [(cells[c], int(mesh.ref_edge[c]), int(mesh.generation[c]))]
        while stack:
            tri, r, g = stack.pop()
            apex, a, b = tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]
            m = midpoint.get((min(a, b), max(a, b)))
            if m is None:
                new_cells.append(tri)
                new_ref.append(r)
                new_gen.append(g)
                new_parent.append(c)
                continue
            # Children keep orientation; the new vertex is opposite their refinement edge.
            stack.append(([apex, m, b], 1, g + 1))
            stack.append(([apex, a, m], 2, g + 1))
    return Mesh(np.array(vertices), new_cells, new_ref, new_gen, parent=new_parent)


def refine_uniform(mesh: Mesh, times: int = 1) -> Mesh:
    """Bisect every cell ``times`` times; ``parent`` refers to the input mesh."""
    parent = np.arange(mesh.n_cells)
    for _ in range(times):
        mesh = bisect(mesh, np.arange(mesh.n_cells))
        parent = parent[mesh.parent]
    return Mesh(mesh.vertices, mesh.cells, mesh.ref_edge, mesh.generation, parent=parent)


def conformity_errors(mesh: Mesh) -> list[str]:
    """Return a list of violated mesh invariants (empty when the mesh is valid)."""
    errors = []
    areas = mesh.areas()
    if np.any(areas <= 0):
        errors.append(f"{int(np.sum(areas <= 0))} cells with non-positive area")
    counts = np.bincount(mesh.cell_facets.ravel(), minlength=mesh.n_facets)
    if np.any(counts != np.where(mesh.boundary_facet, 1, 2)):
        errors.append("facet adjacency inconsistent")

    # Hanging nodes: a vertex strictly inside some facet.
    fv = mesh.facet_vertices
    A, B = mesh.vertices[fv[:, 0]], mesh.vertices[fv[:, 1]]
    scale = max(1.0, float(np.abs(mesh.vertices).max()))
    key = lambda x: tuple(np.round(x / scale * 2**40).astype(np.int64))  # noqa: E731
    mids = {key(m): f for f, m in enumerate(0.5 * (A + B))}
    hanging = [v for v, x in enumerate(mesh.vertices) if key(x) in mids]
    if not hanging and mesh.n_vertices * mesh.n_facets <= 4_000_000:
        for v, x in enumerate(mesh.vertices):
            d = B - A
            w = x - A
            cross = d[:, 0] * w[:, 1] - d[:, 1] * w[:, 0]
            t = (w * d).sum(axis=1) / (d * d).sum(axis=1)
            on = (np.abs(cross) <= 1e-12 * mesh.facet_length**2) & (t > 1e-12) & (t < 1 - 1e-12)
            if on.any():
                hanging.append(v)
    if hanging:
        errors.append(f"{len(hanging)} hanging nodes")

    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.cells.ravel()] = True
    if not used.all():
        errors.append("unreferenced vertices")
    return errors


def is_conforming(mesh: Mesh) -> bool:
    return not conformity_errors(mesh)


def write_mesh(mesh: Mesh, path) -> None:
    """Write the ``nv nc nf`` ASCII format; facets are rebuilt when reading."""
    lines = [f"{mesh.n_vertices} {mesh.n_cells} {mesh.n_facets}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [
        f"{i} {j} {k} {r} {g}"
        for (i, j, k), r, g in zip(mesh.cells.tolist(), mesh.ref_edge.tolist(),
                                   mesh.generation.tolist())
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    tokens = Path(path).read_text().split()
    try:
        nv, nc, _nf = (int(t) for t in tokens[:3])
        data = tokens[3:]
        xy = np.array(data[: 2 * nv], dtype=float).reshape(nv, 2)
        rest = np.array(data[2 * nv: 2 * nv + 5 * nc], dtype=np.int64).reshape(nc, 5)
    except ValueError as exc:
        raise MeshError(f"malformed mesh file {path}") from exc
    return Mesh(xy, rest[:, :3], rest[:, 3], rest[:, 4])
