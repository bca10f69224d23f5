"""Result serialization: state CSVs, modal curves, timings and the manifest.

All numeric CSV fields use scientific notation with 17 significant digits so
that every artifact round-trips bit-exactly through the package's own
readers.  The manifest lists the config hash, package version, per-phase
wall/CPU timings and exactly the files that were written.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .contact import OPEN, SLIP, STICK, ContactState

STATUS_LABELS = {OPEN: "sep", STICK: "stick", SLIP: "slip"}
_LABEL_CODES = {label: code for code, label in STATUS_LABELS.items()}

_FLOAT_FMT = "%.17e"


def write_state_csv(path, point_ids: np.ndarray, points_xy: np.ndarray,
                    state: ContactState) -> None:
    """Dump a converged contact state, one row per contact point."""
    point_ids = np.asarray(point_ids, int)
    points_xy = np.asarray(points_xy, float)
    if point_ids.size != state.n_points or len(points_xy) != state.n_points:
        raise ValueError("point identifiers do not match the state size")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point_id", "x", "y", "g_n", "g_t1", "g_t2",
                         "lam_n", "lam_t1", "lam_t2", "status"])
        for p in range(state.n_points):
            row = [str(point_ids[p])]
            row += [_FLOAT_FMT % v for v in points_xy[p]]
            row += [_FLOAT_FMT % v for v in state.g[3 * p: 3 * p + 3]]
            row += [_FLOAT_FMT % v for v in state.lam[3 * p: 3 * p + 3]]
            row.append(STATUS_LABELS[int(state.status[p])])
            writer.writerow(row)


def read_state_csv(path):
    """Read a state dump; returns (point_ids, points_xy, g, lam, status)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["point_id", "x", "y", "g_n", "g_t1", "g_t2",
                    "lam_n", "lam_t1", "lam_t2", "status"]
        if header != expected:
            raise ValueError(f"unexpected state header in {path}: {header}")
        ids, xy, g, lam, status = [], [], [], [], []
        for row in reader:
            ids.append(int(row[0]))
            xy.append([float(row[1]), float(row[2])])
            g.extend(float(v) for v in row[3:6])
            lam.extend(float(v) for v in row[6:9])
            if row[9] not in _LABEL_CODES:
                raise ValueError(f"unknown contact status {row[9]!r} in {path}")
            status.append(_LABEL_CODES[row[9]])
    return (np.array(ids, int), np.array(xy, float), np.array(g, float),
            np.array(lam, float), np.array(status, int))


@dataclass
class PhaseTiming:
    """Wall/CPU seconds of one named driver phase."""

    name: str
    wall_s: float
    cpu_s: float


class PhaseTimer:
    """Context manager that appends a PhaseTiming to a shared list."""

    def __init__(self, name: str, sink: list):
        self.name = name
        self.sink = sink

    def __enter__(self):
        self._wall = time.perf_counter()
        self._cpu = time.process_time()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.sink.append(PhaseTiming(
            name=self.name,
            wall_s=time.perf_counter() - self._wall,
            cpu_s=time.process_time() - self._cpu,
        ))
        return False


@dataclass
class StepRecord:
    """Converged per-step snapshot kept for invariant checking and logs."""

    phase: str
    step: int
    state: ContactState
    n_open: int
    n_stick: int
    n_slip: int
    pjor_iterations: int
    set_retries: int


def write_step_log(path, steps) -> None:
    """Per-step cost observables: set sizes, solver iterations, retries."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "step", "n_open", "n_stick", "n_slip",
                         "pjor_iterations", "set_retries"])
        for rec in steps:
            writer.writerow([rec.phase, rec.step, rec.n_open, rec.n_stick,
                             rec.n_slip, rec.pjor_iterations, rec.set_retries])


def read_step_log(path) -> list[dict]:
    """Read a step log back as a list of dicts with integer counters."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["phase", "step", "n_open", "n_stick", "n_slip",
                    "pjor_iterations", "set_retries"]
        if header != expected:
            raise ValueError(f"unexpected step-log header in {path}: {header}")
        rows = []
        for row in reader:
            rec = {"phase": row[0]}
            rec.update({k: int(v) for k, v in zip(header[1:], row[1:])})
            rows.append(rec)
    return rows


def read_modal_curves(path) -> dict:
    """Read a modal-curve CSV back into column arrays keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["mode", "amplitude_m", "omega_rad_s", "omega_over_lin",
                    "damping_ratio"]
        if header != expected:
            raise ValueError(f"unexpected curve header in {path}: {header}")
        cols: dict = {name: [] for name in header}
        for row in reader:
            cols["mode"].append(int(row[0]))
            for name, val in zip(header[1:], row[1:]):
                cols[name].append(float(val))
    return {name: np.array(vals) for name, vals in cols.items()}


@dataclass
class ResultBundle:
    """Everything a run produced, in memory plus on disk."""

    out_dir: Path
    config_hash: str
    files: dict = field(default_factory=dict)
    phases: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    preload_state: ContactState | None = None
    final_state: ContactState | None = None
    point_ids: np.ndarray | None = None
    points_xy: np.ndarray | None = None
    curves: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def record_file(self, label: str, path: Path) -> Path:
        self.files[label] = Path(path)
        return self.files[label]

    def write_manifest(self) -> Path:
        manifest = {
            "config_hash": self.config_hash,
            "version": __version__,
            "phases": [
                {"name": p.name, "wall_s": p.wall_s, "cpu_s": p.cpu_s}
                for p in self.phases
            ],
            "files": {label: str(path.name) for label, path in self.files.items()},
        }
        path = self.out_dir / "manifest.json"
        missing = [str(p) for p in self.files.values() if not p.is_file()]
        if missing:
            raise ValueError(f"manifest references unwritten files: {missing}")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
