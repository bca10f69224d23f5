#!/usr/bin/env python3
"""Plot amplitude-dependent modal frequency and damping from a run.

Reads one or more modal-curve CSV files (written by the driver's output
phase) and draws the two standard joint-dynamics panels: frequency ratio
omega/omega_lin and damping ratio D, both against modal amplitude on a log
axis.  Multiple files are overlaid for comparison, labeled by file stem.

Usage:
    python scripts/plot_modal_curves.py out/lapjoint_form/modal_curves.csv \\
        out/lapjoint_rough/modal_curves.csv --out curves.png
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from jointbe.results import read_modal_curves     # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("curves", nargs="+", type=Path,
                        help="modal_curves.csv files to overlay")
    parser.add_argument("--out", default="modal_curves.png", metavar="PNG")
    args = parser.parse_args(argv)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_w, ax_d) = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    for path in args.curves:
        cols = read_modal_curves(path)
        for mode in sorted(set(cols["mode"].astype(int))):
            sel = cols["mode"] == mode
            label = path.parent.name or path.stem
            if len(set(cols["mode"])) > 1:
                label += f" mode {mode}"
            ax_w.semilogx(cols["amplitude_m"][sel],
                          cols["omega_over_lin"][sel], "o-", label=label)
            ax_d.loglog(cols["amplitude_m"][sel],
                        cols["damping_ratio"][sel], "o-", label=label)

    ax_w.set_xlabel("modal amplitude [m]")
    ax_w.set_ylabel(r"$\omega/\omega_{lin}$")
    ax_d.set_xlabel("modal amplitude [m]")
    ax_d.set_ylabel("damping ratio D")
    for ax in (ax_w, ax_d):
        ax.grid(True, which="both", alpha=0.3)
    ax_w.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
