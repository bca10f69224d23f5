#!/usr/bin/env python3
"""Run the bundled analysis configs and print a one-line summary of each.

The configs live in configs/ at the repository root and cover the analytic
benchmarks (Hertz sphere, Cattaneo-Mindlin shear, rigid flat punch) and the
lap-joint fixture in its three interface variants (smooth with a form
deviation, rough, node-collocated).  Results land in each config's own
output directory.

Usage:
    python scripts/run_bundled_configs.py                 # everything
    python scripts/run_bundled_configs.py hertz cattaneo  # a subset
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from jointbe.config import RunConfig          # noqa: E402
from jointbe.driver import run_case           # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*",
                        help="config stems to run (default: all bundled)")
    parser.add_argument("--config-dir", type=Path, default=REPO / "configs")
    args = parser.parse_args(argv)

    available = sorted(p.stem for p in args.config_dir.glob("*.cfg"))
    names = args.names or available
    unknown = sorted(set(names) - set(available))
    if unknown:
        parser.error(f"unknown config(s) {unknown}; available: {available}")

    width = max(len(n) for n in names)
    for name in names:
        cfg = RunConfig.load(args.config_dir / f"{name}.cfg")
        t0 = time.perf_counter()
        bundle = run_case(cfg)
        wall = time.perf_counter() - t0
        state = bundle.final_state
        line = (f"{name:<{width}}  {wall:7.1f} s  "
                f"{len(bundle.steps):4d} steps  "
                f"P = {bundle.preload_state.normal_force:10.1f} N  "
                f"contact {int((state.lam[0::3] > 0).sum()):4d}"
                f"/{state.n_points:4d} pts")
        curves = bundle.files.get("modal_curves")
        if curves:
            line += f"  curves -> {curves}"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
