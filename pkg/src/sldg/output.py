"""Legacy VTK and standalone SVG writers."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .dgspace import DGFunction

VTK_TRIANGLE = 5


def write_vtk(path, U: DGFunction, cell_data: dict[str, np.ndarray] | None = None) -> None:
    """Write ``U`` as an ASCII unstructured grid.

    Each cell gets its own three points so the discontinuous field is
    represented exactly at the vertices.
    """
    space = U.space
    m = space.mesh
    nc = m.n_cells
    pts = m.vertices[m.cells].reshape(-1, 2)
    vals = U.values_at(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])).ravel()
    lines = [
        "# vtk DataFile Version 3.0",
        f"dG solution k={space.degree}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {3 * nc} double",
    ]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in pts]
    lines.append(f"CELLS {nc} {4 * nc}")
    lines += [f"3 {3 * c} {3 * c + 1} {3 * c + 2}" for c in range(nc)]
    lines.append(f"CELL_TYPES {nc}")
    lines += [str(VTK_TRIANGLE)] * nc
    lines.append(f"POINT_DATA {3 * nc}")
    lines += ["SCALARS u_h double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.16g}" for v in vals]
    cell_data = dict(cell_data or {})
    cell_data.setdefault("h", m.diameters())
    cell_data.setdefault("generation", m.generation)
    lines.append(f"CELL_DATA {nc}")
    for name, arr in cell_data.items():
        arr = np.asarray(arr, float)
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.16g}" for v in arr]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


_COLOURS = {
    "enorm_err": "#1f77b4",
    "lp_err": "#d62728",
    "quasinorm_err": "#2ca02c",
    "l2_err": "#9467bd",
    "estimator_total": "#ff7f0e",
    "quasi_energy_err": "#17becf",
}


def write_rate_svg(table, path, width: int = 640, height: int = 480) -> None:
    """Log-log plot of every error column against h, with slope-k and slope-(k+1) guides."""
    h = table.column("h_max")
    series = {c: table.column(c) for c in _COLOURS}
    series = {c: v for c, v in series.items() if np.all(v > 0) and np.all(np.isfinite(v))}
    allv = np.concatenate(list(series.values()) + [np.array([1.0])])
    x0, x1 = math.log10(h.min()) - 0.1, math.log10(h.max()) + 0.1
    y0, y1 = math.log10(allv.min()) - 0.3, math.log10(allv.max()) + 0.3
    ml, mr, mt, mb = 70, 170, 20, 50

    def X(v):
        return ml + (math.log10(v) - x0) / (x1 - x0) * (width - ml - mr)

    def Y(v):
        return mt + (y1 - math.log10(v)) / (y1 - y0) * (height - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
        'fill="none" stroke="black"/>',
        f'<text x="{(width - mr + ml) / 2}" y="{height - 12}" text-anchor="middle" '
        'font-size="13">h</text>',
        f'<text x="14" y="{(height - mb + mt) / 2}" font-size="13" '
        f'transform="rotate(-90 14 {(height - mb + mt) / 2})">error</text>',
        f'<text x="{ml + 5}" y="{mt + 15}" font-size="12">k={table.k}, p={table.p:g}</text>',
    ]
    for e in range(math.ceil(y0), math.floor(y1) + 1):
        out.append(f'<text x="{ml - 6}" y="{Y(10.0**e) + 4:.1f}" text-anchor="end" '
                   f'font-size="10">1e{e}</text>')
    legend_y = mt + 10
    for name, vals in series.items():
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(h, vals))
        col = _COLOURS[name]
        out.append(f'<polyline class="series" data-name="{escape(name)}" points="{pts}" '
                   f'fill="none" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{width - mr + 10}" y="{legend_y}" font-size="11" '
                   f'fill="{col}">{escape(name)}</text>')
        legend_y += 16
    # Reference slopes anchored at the coarsest energy error.
    anchor = series.get("enorm_err", next(iter(series.values())))[0]
    for slope in (table.k, table.k + 1):
        ys = anchor * (h / h[0]) ** slope * 0.5
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(h, ys))
        out.append(f'<polyline class="reference" data-slope="{slope}" points="{pts}" '
                   'fill="none" stroke="gray" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{X(h[-1]) + 4:.1f}" y="{Y(ys[-1]):.1f}" font-size="11" '
                   f'fill="gray">slope {slope}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
