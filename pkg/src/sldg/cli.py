"""Command line entry point.

Exit status: 0 on success, 1 on usage errors, 2 when the nonlinear or linear
solver fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .adapt import STRATEGIES, AdaptConfig
from .experiments import run_adapt, run_converge
from .solver import LinearSolveFailure, NonConvergence


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sldg", description="IP-dG solver for -Laplace(u) + |u|^(p-2) u = f.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("converge", help="uniform refinement study with u = sin(pi x) sin(pi y)")
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--p", type=float, default=4.0)
    c.add_argument("--levels", type=int, default=5)
    c.add_argument("--csigma", type=float, default=10.0)
    c.add_argument("--quad-bump", type=int, default=0,
                   help="extra degrees of cell quadrature exactness")
    c.add_argument("--vtk", action="store_true", help="also write one VTK file per level")
    c.add_argument("--out", default="out")

    a = sub.add_parser("adapt", help="adaptive run with f = 1000")
    a.add_argument("--k", type=int, default=1)
    a.add_argument("--p", type=float, default=2.0)
    a.add_argument("--iters", type=int, default=13)
    a.add_argument("--mark-frac", type=float, default=0.5)
    a.add_argument("--strategy", choices=STRATEGIES, default="maximum")
    a.add_argument("--max-dofs", type=int, default=2_000_000)
    a.add_argument("--csigma", type=float, default=10.0)
    a.add_argument("--no-vtk", action="store_true")
    a.add_argument("--out", default="out")

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")

    if args.command == "selftest":
        from . import selftest

        return 0 if selftest.run() else 1

    try:
        if args.command == "converge":
            if args.k < 1 or args.levels < 2 or args.p < 2 or args.csigma <= 0:
                parser.error("need k >= 1, levels >= 2, p >= 2 and csigma > 0")
            res = run_converge(args.k, args.p, args.levels, args.csigma, args.quad_bump,
                               args.out, vtk=args.vtk)
            t = res.table
            print(f"{'level':>5} {'cells':>7} {'h':>10} {'dG err':>11} {'eoc':>6} "
                  f"{'Lp err':>11} {'eoc':>6} {'eta':>11} {'eff':>6}")
            e_en, e_lp = [None] + t.eoc("enorm_err"), [None] + t.eoc("lp_err")
            for i, r in enumerate(t.rows):
                f = lambda v: "" if v is None else f"{v:6.3f}"  # noqa: E731
                print(f"{r.level:5d} {r.n_cells:7d} {r.h_max:10.4e} {r.enorm_err:11.4e} "
                      f"{f(e_en[i]):>6} {r.lp_err:11.4e} {f(e_lp[i]):>6} "
                      f"{r.estimator_total:11.4e} {r.effectivity:6.2f}")
        else:
            try:
                cfg = AdaptConfig(args.iters, args.mark_frac, args.max_dofs, args.strategy)
            except ValueError as exc:
                parser.error(str(exc))
            if args.k < 1 or args.p < 2 or args.csigma <= 0:
                parser.error("need k >= 1, p >= 2 and csigma > 0")
            res = run_adapt(args.k, args.p, cfg, args.csigma, args.out, vtk=not args.no_vtk)
            for r in res.records:
                print(f"{r.iteration:3d} {r.n_cells:8d} cells  eta={r.estimator:.4e}  "
                      f"newton={r.newton_iterations}  max u_h={r.u_max:.4f}")
    except (NonConvergence, LinearSolveFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
