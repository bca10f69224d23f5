"""Command-line entry point: run, verify, synth-surface and reduce.

Heavy modules are imported inside the subcommand handlers, not at module
level, so that ``--threads`` can pin the BLAS thread pools through the
environment before numpy is first imported.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 solver failure, 4 file/format error.  Failures additionally emit a
single-line JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
_LOG_LEVELS = ("debug", "info", "warning", "error")

log = logging.getLogger("jointbe.cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointbe",
        description="Coupled FE-BE quasi-static contact analysis of "
                    "jointed structures.")
    parser.add_argument("--threads", type=int, metavar="N",
                        help="pin all BLAS/OpenMP thread pools to N threads")
    parser.add_argument("--seed", type=int, metavar="S",
                        help="override the topography random seed")
    parser.add_argument("--log-level", choices=_LOG_LEVELS, default="warning",
                        help="logging verbosity (default: warning)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured analysis")
    p_run.add_argument("config", help="INI configuration file")

    p_ver = sub.add_parser("verify", help="run a built-in verification suite")
    p_ver.add_argument("suite", choices=("analytic", "oracle", "fixture",
                                         "all"),
                       help="which suite to run")

    p_syn = sub.add_parser("synth-surface",
                           help="synthesize the configured interface height "
                                "map and write it as CSV")
    p_syn.add_argument("config", help="INI configuration file with [grid] "
                                      "and [topography] sections")
    p_syn.add_argument("--out", metavar="PATH",
                       help="output CSV (default: heights.csv in the "
                            "configured output directory)")

    p_red = sub.add_parser("reduce",
                           help="reduce an external FE model "
                                "(Matrix Market K/M plus a DOF map)")
    p_red.add_argument("--stiffness", required=True, metavar="K.mtx")
    p_red.add_argument("--mass", required=True, metavar="M.mtx")
    p_red.add_argument("--dofmap", required=True, metavar="MAP.csv")
    p_red.add_argument("--boundary-nodes", required=True, metavar="NODES.txt",
                       help="text file with one boundary node id per line")
    p_red.add_argument("--n-modes", type=int, required=True, metavar="N",
                       help="number of fixed-interface modes to keep")
    p_red.add_argument("--out", required=True, metavar="MODEL.npz")

    return parser


def _configure(args) -> None:
    if args.threads is not None:
        if args.threads < 1:
            raise ValueError("--threads must be a positive integer")
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(args):
    from .config import RunConfig
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _cmd_run(args) -> int:
    from .driver import run_case
    cfg = _load_config(args)
    bundle = run_case(cfg)
    summary = {
        "config_hash": bundle.config_hash,
        "out_dir": str(bundle.out_dir),
        "files": {label: str(path) for label, path in bundle.files.items()},
        "phases": [{"name": p.name, "wall_s": p.wall_s, "cpu_s": p.cpu_s}
                   for p in bundle.phases],
        "n_steps": len(bundle.steps),
    }
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import SUITE_NAMES, format_results, report, verify_suite
    names = SUITE_NAMES if args.suite == "all" else (args.suite,)
    results = []
    for name in names:
        results.extend(verify_suite(name))
    print(format_results(results), file=sys.stderr)
    json.dump(report(results), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_synth_surface(args) -> int:
    from .driver import build_grid, build_profile
    from .topography import write_height_csv
    cfg = _load_config(args)
    if cfg.grid is None:
        from .config import ConfigError
        raise ConfigError("[grid]: surface synthesis needs a contact grid")
    grid = build_grid(cfg, (0.0, 0.0))
    profile = build_profile(cfg, grid)
    out = args.out
    if out is None:
        cfg.output.directory.mkdir(parents=True, exist_ok=True)
        out = cfg.output.directory / "heights.csv"
    write_height_csv(profile, out)
    json.dump({"out": str(out), "n_points": int(profile.heights.size),
               "seed": cfg.seed}, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _cmd_reduce(args) -> int:
    import numpy as np

    from .rom import craig_bampton, load_fe_matrices
    k, m, dofmap = load_fe_matrices(args.stiffness, args.mass, args.dofmap)
    nodes = []
    with open(args.boundary_nodes) as fh:
        for line in fh:
            text = line.split("#", 1)[0].strip()
            if text:
                nodes.append(int(text))
    if not nodes:
        raise ValueError(f"no boundary nodes listed in {args.boundary_nodes}")
    boundary = np.array([dofmap.dof(node, c) for node in nodes
                         for c in range(3)])
    reduced = craig_bampton(k, m, boundary, n_modes=args.n_modes)
    reduced.save(args.out)
    json.dump({
        "out": str(args.out),
        "n_full": int(k.shape[0]),
        "n_boundary": int(reduced.n_boundary),
        "n_modes": int(reduced.n_modes),
        "omega_fixed_rad_s": [float(w) for w in reduced.omega_fixed],
    }, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _fail(category: str, exc: BaseException, code: int) -> int:
    log.error("%s", exc)
    json.dump({"error": {"category": category, "message": str(exc)}},
              sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _configure(args)
    except ValueError as exc:
        return _fail("config", exc, EXIT_CONFIG)

    handlers = {
        "run": _cmd_run,
        "verify": _cmd_verify,
        "synth-surface": _cmd_synth_surface,
        "reduce": _cmd_reduce,
    }
    # error classes are imported lazily for the same reason as the handlers
    from .config import ConfigError
    from .contact import ContactSolveError
    from .driver import RestrictionError
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (ContactSolveError, RestrictionError) as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    except (OSError, ValueError, KeyError) as exc:
        return _fail("io", exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
