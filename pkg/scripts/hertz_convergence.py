#!/usr/bin/env python3
"""Grid-convergence study of the Hertz sphere benchmark.

Presses a rigid sphere (R = 50 mm) onto the elastic half-space pair at a
prescribed approach and sweeps the contact-grid pitch.  For each resolution
the contact radius (area-equivalent) and the peak pressure are compared
against the analytic Hertz solution; the error table is printed and
optionally plotted on log-log axes alongside the expected first-order
reference slope.

Usage:
    python scripts/hertz_convergence.py --plot hertz_convergence.png
"""
from __future__ import annotations

import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from jointbe.config import RunConfig          # noqa: E402
from jointbe.driver import run_case           # noqa: E402

RADIUS = 50e-3
APPROACH = 1.25e-4
E_YOUNG, NU = 2.1e11, 0.3

CFG = """\
[material]
young_modulus_pa = {e}
poisson_ratio = {nu}

[grid]
nx = {n}
ny = {n}
pitch_m = {pitch}

[topography]
sphere_radius_m = {radius}

[fixture]
kind = rigid

[preload]
approach_m = {approach}
steps = 1

[solver]
mu_friction = 0.0

[output]
directory = {out}
"""


def analytic():
    e_c = E_YOUNG / (4.0 * (1.0 - NU ** 2))
    a = np.sqrt(RADIUS * APPROACH)
    p_total = (4.0 / 3.0) * e_c * np.sqrt(RADIUS) * APPROACH ** 1.5
    p0 = 3.0 * p_total / (2.0 * np.pi * a ** 2)
    return a, p0


def run_resolution(n_across: int, workdir: Path):
    """Errors in (a, p0) with n_across elements across the contact diameter."""
    a_want, p0_want = analytic()
    pitch = 2.0 * a_want / n_across
    n = int(np.ceil(2.6 * a_want / pitch))
    out = workdir / f"n{n_across}"
    cfg_path = workdir / f"n{n_across}.cfg"
    cfg_path.write_text(CFG.format(e=E_YOUNG, nu=NU, n=n, pitch=pitch,
                                   radius=RADIUS, approach=APPROACH, out=out))
    t0 = time.perf_counter()
    bundle = run_case(RunConfig.load(cfg_path))
    wall = time.perf_counter() - t0
    state = bundle.preload_state
    cell = bundle.extras["context"].grid.cell_area
    n_closed = int((state.lam[0::3] > 0.0).sum())
    a_got = np.sqrt(n_closed * cell / np.pi)
    p0_got = state.lam[0::3].max() / cell
    return (abs(a_got - a_want) / a_want,
            abs(p0_got - p0_want) / p0_want, wall)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resolutions", type=int, nargs="+",
                        default=[10, 16, 24, 40, 64],
                        help="elements across the contact diameter")
    parser.add_argument("--plot", metavar="PNG",
                        help="save a log-log error plot")
    args = parser.parse_args(argv)

    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        for n_across in args.resolutions:
            err_a, err_p, wall = run_resolution(n_across, Path(tmp))
            rows.append((n_across, err_a, err_p, wall))
            print(f"n_across={n_across:4d}  err_a={err_a:9.2e}  "
                  f"err_p0={err_p:9.2e}  [{wall:6.1f} s]")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        data = np.array(rows)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(data[:, 0], data[:, 1], "o-", label="contact radius a")
        ax.loglog(data[:, 0], data[:, 2], "s-", label="peak pressure p0")
        ref = data[0, 1] * data[0, 0] / data[:, 0]
        ax.loglog(data[:, 0], ref, "k--", lw=0.8, label="first order")
        ax.set_xlabel("elements across contact diameter")
        ax.set_ylabel("relative error")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)
        print(f"wrote {args.plot}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
