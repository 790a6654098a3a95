"""Command-line front end.

::

    parabolic-fem study --problem checkerboard --levels 5 --couple-tau --out table.csv
    parabolic-fem verify
    parabolic-fem norms --traj run.traj [--problem smooth1d]

``study`` exits with status 2 when ``--assert-rates`` is given and a
fitted rate falls outside its bounds.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .norms import discrete_energy_norm, h1_norm, l2_norm, w_norm_error
from .problems import PROBLEM_NAMES, UnknownProblemError, get_problem
from .study import (ERROR_COLUMNS, TIME_MODES, StudyError, load_config, parse_config,
                    run_study)
from .trajio import dump_trajectory, load_trajectory

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_RATES = 2

DEFAULT_RATE_BOUNDS = (("e_W", 0.85, 1.15),)


def _parse_bound(text: str):
    """``column:lo:hi``; an empty bound is open (``e_LinfL2:1.5:``)."""
    try:
        col, lo, hi = text.split(":")
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"rate bound must look like column:lo:hi, got {text!r}") from None
    if col not in ERROR_COLUMNS:
        raise argparse.ArgumentTypeError(f"unknown error column {col!r}")
    lo = float(lo) if lo else -np.inf
    hi = float(hi) if hi else np.inf
    return col, lo, hi


def _study_overrides(args) -> dict:
    time_mode = args.time_mode
    if args.couple_tau:
        if time_mode not in (None, "semi"):
            raise ValueError("--couple-tau conflicts with --time-mode " + time_mode)
        time_mode = "semi"
    return {
        "problem": args.problem,
        "levels": args.levels,
        "time_mode": time_mode,
        "steps": args.steps,
        "tol_time": args.tol_time,
        "out": args.out,
        "timing": None if args.timing is None else str(args.timing),
        "eps": args.eps,
        "n_modes": args.n_modes,
    }


def cmd_study(args) -> int:
    overrides = _study_overrides(args)
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = parse_config("", overrides)

    def show(row):
        if not args.quiet:
            print(f"level {row.level}: h={row.h:.4g} tau={row.tau:.4g} dofs={row.dofs} "
                  f"e_W={row.e_W:.5e} ({row.seconds:.1f} s)", flush=True)

    finest = {}

    def keep(level, traj):
        if args.dump_traj:
            finest["traj"] = traj

    try:
        report = run_study(cfg, on_row=show, on_traj=keep)
    except StudyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if cfg.out:
            print(f"{len(exc.report.rows)} finished rows kept in {cfg.out}", file=sys.stderr)
        return EXIT_ERROR
    print(report.format_table(), end="")
    if cfg.out:
        print(f"wrote {cfg.out}")
    if args.dump_traj:
        dump_trajectory(finest["traj"], args.dump_traj)
        print(f"wrote {args.dump_traj}")
    if args.assert_rates is not None:
        bounds = args.assert_rates or list(DEFAULT_RATE_BOUNDS)
        rates = report.rates()
        failed = False
        for col, lo, hi in bounds:
            rate = rates[col]
            if rate is None:
                print(f"rate check {col}: needs at least two levels", file=sys.stderr)
                failed = True
            elif not lo <= rate <= hi:
                print(f"rate check {col}: {rate:.3f} outside [{lo}, {hi}]", file=sys.stderr)
                failed = True
        if failed:
            return EXIT_RATES
    return EXIT_OK


def cmd_verify(args) -> int:
    from .checks import SUITES, run_all
    names = args.suite or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"error: unknown suites {', '.join(unknown)}; choose from "
              f"{', '.join(SUITES)}", file=sys.stderr)
        return EXIT_ERROR
    results = run_all(names)
    for res in results:
        print(res.line(), flush=True)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed} of {len(results)} suites passed")
    return EXIT_OK if failed == 0 else EXIT_ERROR


def cmd_norms(args) -> int:
    traj = load_trajectory(args.traj)
    snaps = traj.snapshots
    tau = np.diff(traj.times)
    h1_sq = np.array([h1_norm(s) ** 2 for s in snaps])
    print(f"mesh: dim {traj.mesh.dim}, {traj.mesh.n_free} free vertices, "
          f"h = {traj.mesh.h_max:.6g}; {traj.n_steps} steps on "
          f"[{traj.times[0]:.6g}, {traj.times[-1]:.6g}]")
    print(f"max_n ||u^n||_L2            {max(l2_norm(s) for s in snaps):.10e}")
    print(f"(sum tau ||u^n||_H1^2)^1/2  {np.sqrt(np.sum(tau * h1_sq[1:])):.10e}")
    print(f"discrete energy norm        {discrete_energy_norm(traj):.10e}")
    if args.problem:
        options = {"eps": args.eps} if args.eps is not None else {}
        if args.n_modes is not None:
            options["n_modes"] = args.n_modes
        problem = get_problem(args.problem, **options)
        for key, value in w_norm_error(traj, problem.exact).as_dict().items():
            print(f"{key:<27s} {value:.10e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parabolic-fem",
        description="P1 finite elements and backward Euler for parabolic problems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="run a mesh refinement study")
    st.add_argument("--config", help="key=value file; command-line options override it")
    st.add_argument("--problem", help="one of " + ", ".join(PROBLEM_NAMES))
    st.add_argument("--levels", help="number of levels (0..k-1) or a list like 1,2,3")
    st.add_argument("--couple-tau", action="store_true",
                    help="time-converged errors (semi-discrete reference on every level)")
    st.add_argument("--time-mode", choices=TIME_MODES,
                    help="semi, coupled (N doubles with each level) or fixed N")
    st.add_argument("--steps", type=int, help="time steps on level 0 (or the start count)")
    st.add_argument("--tol-time", type=float, help="time refinement tolerance (semi mode)")
    st.add_argument("--eps", type=float, help="problem parameter eps")
    st.add_argument("--n-modes", type=int, help="modes of the spectral solutions")
    st.add_argument("--out", help="CSV report path")
    st.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                    help="write 0 in the seconds column (reproducible CSV)")
    st.add_argument("--assert-rates", nargs="*", type=_parse_bound, metavar="COL:LO:HI",
                    help="exit 2 unless fitted rates lie in the bounds "
                         "(default e_W:0.85:1.15)")
    st.add_argument("--dump-traj", help="write the finest-level trajectory to this file")
    st.add_argument("-q", "--quiet", action="store_true")
    st.set_defaults(func=cmd_study)

    ve = sub.add_parser("verify", help="run the invariant suites")
    ve.add_argument("suite", nargs="*", help="suite names (default: all)")
    ve.set_defaults(func=cmd_verify)

    no = sub.add_parser("norms", help="norms of a dumped trajectory")
    no.add_argument("--traj", required=True, help="trajectory file")
    no.add_argument("--problem", help="also report errors against this problem's "
                                      "exact solution (" + ", ".join(PROBLEM_NAMES) + ")")
    no.add_argument("--eps", type=float)
    no.add_argument("--n-modes", type=int)
    no.set_defaults(func=cmd_norms)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, UnknownProblemError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
