"""Interior penalty dG for -Laplace(u) + |u|^(p-2) u = f with a posteriori estimation."""

from .adapt import AdaptConfig, adapt_loop, mark, mark_maximum
from .analysis import energy_norm, error_report, lp_norm, quasinorm, reconstruct
from .dgspace import DGFunction, DGSpace, evaluate, facet_trace, project_L2
from .estimator import effectivity, estimate
from .forms import ProblemSpec, assemble_bilinear, assemble_residual
from .mesh import Mesh, bisect, build_crisscross, mesh_size
from .solver import NewtonConfig, solve

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "DGFunction", "DGSpace", "Mesh", "NewtonConfig", "ProblemSpec",
    "adapt_loop", "assemble_bilinear", "assemble_residual", "bisect", "build_crisscross",
    "effectivity", "energy_norm", "error_report", "estimate", "evaluate", "facet_trace",
    "lp_norm", "mark", "mark_maximum", "mesh_size", "project_L2", "quasinorm", "reconstruct",
    "solve",
]
