"""Run configuration: INI-style key-value files parsed into typed sections.

Key names carry their units as suffixes (``*_pa``, ``*_m``, ``*_n``) so a
config file is self-documenting.  Parsing is strict: unknown sections or
keys, missing required keys, and out-of-range values all raise
:class:`ConfigError` naming the offending ``[section] key``.

The canonical serialization (`canonical_lines`) lists every resolved field
as a sorted ``section.key=value`` line, so the config hash is invariant to
comments, key order and whitespace, and changes exactly when a field
changes.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .contact import SolverSettings


class ConfigError(ValueError):
    """Invalid or missing configuration data; message names the field."""


_REQUIRED = object()


class _Section:
    """Typed, consumption-tracked view of one config section."""

    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = dict(raw)
        self.seen: set[str] = set()

    def _fetch(self, key: str, default):
        self.seen.add(key)
        if key in self.raw:
            return self.raw[key].strip()
        if default is _REQUIRED:
            raise ConfigError(f"[{self.name}] {key}: required key is missing")
        return default

    def _fail(self, key: str, message: str):
        raise ConfigError(f"[{self.name}] {key}: {message}")

    def str(self, key: str, default=_REQUIRED, choices=None) -> str:
        val = self._fetch(key, default)
        if isinstance(val, str) and choices is not None and val not in choices:
            self._fail(key, f"must be one of {', '.join(choices)} (got {val!r})")
        return val

    def float(self, key: str, default=_REQUIRED, minimum=None, maximum=None,
              exclusive: bool = False):
        val = self._fetch(key, default)
        if val is None or isinstance(val, float):
            return val
        try:
            out = float(val)
        except ValueError:
            self._fail(key, f"expected a number, got {val!r}")
        if minimum is not None and (out <= minimum if exclusive else out < minimum):
            self._fail(key, f"must be {'>' if exclusive else '>='} {minimum}")
        if maximum is not None and (out >= maximum if exclusive else out > maximum):
            self._fail(key, f"must be {'<' if exclusive else '<='} {maximum}")
        return out

    def int(self, key: str, default=_REQUIRED, minimum=None):
        val = self._fetch(key, default)
        if val is None or isinstance(val, int):
            return val
        try:
            out = int(val)
        except ValueError:
            self._fail(key, f"expected an integer, got {val!r}")
        if minimum is not None and out < minimum:
            self._fail(key, f"must be >= {minimum}")
        return out

    def bool(self, key: str, default=_REQUIRED):
        val = self._fetch(key, default)
        if val is None or isinstance(val, bool):
            return val
        low = val.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        self._fail(key, f"expected true/false, got {val!r}")

    def floats(self, key: str, default=_REQUIRED) -> tuple:
        val = self._fetch(key, default)
        if val is None or isinstance(val, tuple):
            return val
        try:
            out = tuple(float(tok) for tok in val.replace(",", " ").split())
        except ValueError:
            self._fail(key, f"expected a list of numbers, got {val!r}")
        if not out:
            self._fail(key, "list must not be empty")
        return out

    def path(self, key: str, default=_REQUIRED, base: Path | None = None):
        val = self._fetch(key, default)
        if val is None or isinstance(val, Path):
            return val
        out = Path(val)
        if base is not None and not out.is_absolute():
            out = base / out
        return out

    def finish(self):
        unknown = sorted(set(self.raw) - self.seen)
        if unknown:
            raise ConfigError(f"[{self.name}] {unknown[0]}: unrecognized key")


@dataclass(frozen=True)
class MaterialConfig:
    """Identical isotropic material of both contacting bodies."""

    young_modulus_pa: float
    poisson_ratio: float
    density_kg_m3: float = 7800.0


@dataclass(frozen=True)
class GridConfig:
    """Contact grid: ``nx * ny`` points at square pitch ``pitch_m``."""

    nx: int
    ny: int
    pitch_m: float
    origin_x_m: float | None = None
    origin_y_m: float | None = None

    @property
    def span(self) -> tuple[float, float]:
        return ((self.nx - 1) * self.pitch_m, (self.ny - 1) * self.pitch_m)


@dataclass(frozen=True)
class TopographyConfig:
    """Composite interface height map; absent components default to flat."""

    sphere_radius_m: float | None = None
    crown_peak_to_peak_m: float | None = None
    roughness_sigma_m: float | None = None
    roughness_lambda_min_m: float | None = None
    roughness_lambda_max_m: float | None = None
    height_csv: Path | None = None
    depth_cutoff_m: float | None = None
    seed: int = 0

    @property
    def has_roughness(self) -> bool:
        return self.roughness_sigma_m is not None


@dataclass(frozen=True)
class FixtureConfig:
    """Structural model around the interface.

    ``rigid`` treats both bodies as half-spaces only; ``lap_joint`` builds
    the clamped two-beam splice and reduces it with ``n_modes`` fixed-
    interface modes.  ``node_collocated`` coupling replaces the contact grid
    by the interface nodes themselves (zero local compliance).
    """

    kind: str
    n_modes: int = 10
    n_length_elems: int = 20
    n_width_elems: int = 4
    n_thickness_elems: int = 2
    n_overlap_elems: int = 5
    elem_size_m: float = 5e-3
    coupling: str = "bilinear"


@dataclass(frozen=True)
class PreloadConfig:
    """Normal preload phase: prescribed clamp force or rigid-body approach."""

    target_force_n: float | None
    approach_m: float | None
    steps: int = 20


@dataclass(frozen=True)
class TangentialConfig:
    """Post-preload shear phase (rigid fixtures): ramp the tangential offset
    until the shear resultant reaches ``force_fraction`` of the friction
    bound ``mu * P``."""

    force_fraction: float
    steps: int = 20


@dataclass(frozen=True)
class QsmaConfig:
    """Modal hysteresis sweeps after preload."""

    amplitudes: tuple
    n_modes: int = 1
    steps_per_ramp: int = 100
    observe_dof: int | None = None


@dataclass(frozen=True)
class SolverOptions:
    """Contact solver tuning; maps onto the solver's settings object."""

    mu_friction: float
    omega_relax: float = 0.5
    tol_rel: float = 1e-10
    max_iter: int = 50000

    def settings(self) -> SolverSettings:
        return SolverSettings(mu_friction=self.mu_friction,
                              omega_relax=self.omega_relax,
                              tol_rel=self.tol_rel, max_iter=self.max_iter)


@dataclass(frozen=True)
class OutputConfig:
    """Artifact selection; ``directory`` is created on demand."""

    directory: Path
    write_state: bool = True
    write_curves: bool = True
    write_heights: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description."""

    material: MaterialConfig
    grid: GridConfig | None
    topography: TopographyConfig
    fixture: FixtureConfig
    preload: PreloadConfig
    tangential: TangentialConfig | None
    qsma: QsmaConfig | None
    solver: SolverOptions
    output: OutputConfig

    @property
    def seed(self) -> int:
        return self.topography.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, topography=replace(self.topography, seed=int(seed)))

    def canonical_lines(self) -> list[str]:
        lines = []
        for section in ("material", "grid", "topography", "fixture", "preload",
                        "tangential", "qsma", "solver", "output"):
            obj = getattr(self, section)
            if obj is None:
                continue
            for key in sorted(vars(obj)):
                val = getattr(obj, key)
                if val is None:
                    continue
                lines.append(f"{section}.{key}={_canon_value(val)}")
        return sorted(lines)

    def config_hash(self) -> str:
        text = "\n".join(self.canonical_lines()) + "\n"
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(
            inline_comment_prefixes=("#", ";"), interpolation=None
        )
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        return cls.from_parser(parser, base=path.parent)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser,
                    base: Path | None = None) -> "RunConfig":
        sections = {name: dict(parser[name]) for name in parser.sections()}
        if "fe_model" in sections:
            if "fixture" in sections:
                raise ConfigError(
                    "[fe_model] duplicates [fixture]; give the section once")
            sections["fixture"] = sections.pop("fe_model")
        known = ("material", "grid", "topography", "fixture", "preload",
                 "tangential", "qsma", "solver", "output")
        for name in sections:
            if name not in known:
                raise ConfigError(f"[{name}] unrecognized section")
        for name in ("material", "fixture", "preload", "solver", "output"):
            if name not in sections:
                raise ConfigError(f"[{name}] required section is missing")

        sec = _Section("material", sections["material"])
        material = MaterialConfig(
            young_modulus_pa=sec.float("young_modulus_pa", minimum=0.0, exclusive=True),
            poisson_ratio=sec.float("poisson_ratio", minimum=0.0,
                                    maximum=0.5, exclusive=False),
            density_kg_m3=sec.float("density_kg_m3", default=7800.0,
                                    minimum=0.0, exclusive=True),
        )
        if material.poisson_ratio >= 0.5:
            raise ConfigError("[material] poisson_ratio: must be < 0.5")
        sec.finish()

        sec = _Section("fixture", sections["fixture"])
        kind = sec.str("kind", choices=("lap_joint", "rigid"))
        if kind == "lap_joint":
            fixture = FixtureConfig(
                kind=kind,
                n_modes=sec.int("n_modes", default=10, minimum=0),
                n_length_elems=sec.int("n_length_elems", default=20, minimum=1),
                n_width_elems=sec.int("n_width_elems", default=4, minimum=1),
                n_thickness_elems=sec.int("n_thickness_elems", default=2, minimum=1),
                n_overlap_elems=sec.int("n_overlap_elems", default=5, minimum=1),
                elem_size_m=sec.float("elem_size_m", default=5e-3,
                                      minimum=0.0, exclusive=True),
                coupling=sec.str("coupling", default="bilinear",
                                 choices=("bilinear", "node_collocated")),
            )
            if fixture.n_overlap_elems >= fixture.n_length_elems:
                raise ConfigError(
                    "[fixture] n_overlap_elems: must be smaller than n_length_elems")
        else:
            fixture = FixtureConfig(kind=kind)
        sec.finish()

        nodal = fixture.kind == "lap_joint" and fixture.coupling == "node_collocated"
        grid = None
        if "grid" in sections:
            if nodal:
                raise ConfigError(
                    "[grid] nx: node-collocated coupling uses the interface "
                    "nodes; remove the [grid] section")
            sec = _Section("grid", sections["grid"])
            grid = GridConfig(
                nx=sec.int("nx", minimum=1),
                ny=sec.int("ny", minimum=1),
                pitch_m=sec.float("pitch_m", minimum=0.0, exclusive=True),
                origin_x_m=sec.float("origin_x_m", default=None),
                origin_y_m=sec.float("origin_y_m", default=None),
            )
            sec.finish()
        elif not nodal:
            raise ConfigError("[grid] required section is missing")

        sec = _Section("topography", sections.get("topography", {}))
        topography = TopographyConfig(
            sphere_radius_m=sec.float("sphere_radius_m", default=None,
                                      minimum=0.0, exclusive=True),
            crown_peak_to_peak_m=sec.float("crown_peak_to_peak_m", default=None,
                                           minimum=0.0, exclusive=True),
            roughness_sigma_m=sec.float("roughness_sigma_m", default=None,
                                        minimum=0.0, exclusive=True),
            roughness_lambda_min_m=sec.float("roughness_lambda_min_m", default=None,
                                             minimum=0.0, exclusive=True),
            roughness_lambda_max_m=sec.float("roughness_lambda_max_m", default=None,
                                             minimum=0.0, exclusive=True),
            height_csv=sec.path("height_csv", default=None, base=base),
            depth_cutoff_m=sec.float("depth_cutoff_m", default=None,
                                     minimum=0.0, exclusive=True),
            seed=sec.int("seed", default=0, minimum=0),
        )
        sec.finish()
        rough_keys = (topography.roughness_sigma_m,
                      topography.roughness_lambda_min_m,
                      topography.roughness_lambda_max_m)
        if any(v is not None for v in rough_keys) and None in rough_keys:
            raise ConfigError(
                "[topography] roughness_sigma_m: roughness needs sigma, "
                "lambda_min and lambda_max together")
        if (topography.has_roughness and topography.roughness_lambda_min_m
                >= topography.roughness_lambda_max_m):
            raise ConfigError(
                "[topography] roughness_lambda_min_m: must be smaller than "
                "roughness_lambda_max_m")
        if topography.height_csv is not None and not topography.height_csv.is_file():
            raise ConfigError(
                f"[topography] height_csv: file not found: {topography.height_csv}")
        if nodal and any(v is not None for v in
                         (topography.sphere_radius_m, topography.crown_peak_to_peak_m,
                          topography.roughness_sigma_m, topography.height_csv,
                          topography.depth_cutoff_m)):
            raise ConfigError(
                "[topography] sphere_radius_m: node-collocated coupling "
                "supports only the flat (matched) interface")

        sec = _Section("preload", sections["preload"])
        preload = PreloadConfig(
            target_force_n=sec.float("target_force_n", default=None, minimum=0.0),
            approach_m=sec.float("approach_m", default=None, minimum=0.0),
            steps=sec.int("steps", default=20, minimum=1),
        )
        sec.finish()
        if (preload.target_force_n is None) == (preload.approach_m is None):
            raise ConfigError(
                "[preload] target_force_n: give exactly one of target_force_n "
                "and approach_m")
        if preload.approach_m is not None and fixture.kind != "rigid":
            raise ConfigError(
                "[preload] approach_m: prescribed approach needs kind = rigid")

        sec = _Section("solver", sections["solver"])
        solver = SolverOptions(
            mu_friction=sec.float("mu_friction", minimum=0.0),
            omega_relax=sec.float("omega_relax", default=0.5,
                                  minimum=0.0, maximum=1.0, exclusive=True),
            tol_rel=sec.float("tol_rel", default=1e-10, minimum=0.0, exclusive=True),
            max_iter=sec.int("max_iter", default=50000, minimum=1),
        )
        sec.finish()

        tangential = None
        if "tangential" in sections:
            sec = _Section("tangential", sections["tangential"])
            tangential = TangentialConfig(
                force_fraction=sec.float("force_fraction", minimum=0.0,
                                         maximum=1.0, exclusive=True),
                steps=sec.int("steps", default=20, minimum=1),
            )
            sec.finish()
            if fixture.kind != "rigid":
                raise ConfigError(
                    "[tangential] force_fraction: shear phase needs kind = rigid")
            if solver.mu_friction == 0.0:
                raise ConfigError(
                    "[tangential] force_fraction: needs mu_friction > 0")

        qsma = None
        if "qsma" in sections:
            sec = _Section("qsma", sections["qsma"])
            qsma = QsmaConfig(
                amplitudes=sec.floats("amplitudes"),
                n_modes=sec.int("n_modes", default=1, minimum=1),
                steps_per_ramp=sec.int("steps_per_ramp", default=100, minimum=1),
                observe_dof=sec.int("observe_dof", default=None, minimum=0),
            )
            sec.finish()
            if fixture.kind != "lap_joint":
                raise ConfigError(
                    "[qsma] amplitudes: modal sweeps need kind = lap_joint")
            amps = qsma.amplitudes
            if amps[0] <= 0.0 or any(b <= a for a, b in zip(amps, amps[1:])):
                raise ConfigError(
                    "[qsma] amplitudes: must be positive and strictly ascending")

        sec = _Section("output", sections["output"])
        output = OutputConfig(
            directory=sec.path("directory", base=base),
            write_state=sec.bool("write_state", default=True),
            write_curves=sec.bool("write_curves", default=True),
            write_heights=sec.bool("write_heights", default=False),
        )
        sec.finish()

        return cls(material=material, grid=grid, topography=topography,
                   fixture=fixture, preload=preload, tangential=tangential,
                   qsma=qsma, solver=solver, output=output)


def _canon_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, tuple):
        return ",".join(_canon_value(v) for v in val)
    return str(val)
