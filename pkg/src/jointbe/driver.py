"""End-to-end quasi-static driver: preload, shear and modal-sweep phases.

A run follows a fixed sequence.  The structural fixture (rigid pair or
reduced lap joint) and the interface height map are built once; the contact
grid is then restricted to the points that can plausibly touch, the preload
is ramped incrementally (with force targeting against the interface
resultant when a clamp force is prescribed), and the optional shear and
modal-hysteresis phases run from the preloaded state.  If a converged
preload loads a point on the rim of the restricted set, the restriction was
too tight: the depth cutoff is enlarged by 1.5x and the phase re-runs, at
most five times.

Force targeting re-ramps from the virgin state for every trial scale, so
the reported state is always the end of one monotone incremental ramp.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .contact import ContactSolveError, ContactSolver, SolverSettings
from .coupling import (RigidCondensed, build_coupling, condense_static,
                       node_based_coupling)
from .halfspace import BeGrid, ElasticHalfSpace, assemble_compliance
from .minifem import SolidMaterial, build_lap_joint
from .qsma import linearized_modes, modal_curve, modal_load_sweep, write_modal_curves
from .results import (PhaseTimer, ResultBundle, StepRecord, write_state_csv,
                      write_step_log)
from .rom import reduce_lap_joint
from .topography import (RoughnessSpec, compose_profiles, crown_profile,
                         flat_profile, geometric_restriction, read_height_csv,
                         restriction_boundary, sphere_profile,
                         synthesize_roughness, write_height_csv)

log = logging.getLogger(__name__)

MAX_ENLARGEMENTS = 5
ENLARGE_FACTOR = 1.5
FORCE_REL_TOL = 1e-8
SHEAR_REL_TOL = 1e-6


class RestrictionError(RuntimeError):
    """The restricted contact set kept loading its rim after enlargement."""


@dataclass(frozen=True)
class RunPlan:
    """Validated schedule of all load phases."""

    preload_force: float | None
    preload_approach: float | None
    preload_steps: int
    shear_fraction: float | None
    shear_steps: int
    amplitudes: tuple
    sweep_steps: int
    n_sweep_modes: int
    depth_cutoff: float | None
    settings: SolverSettings

    def __post_init__(self):
        if self.preload_steps < 1 or self.shear_steps < 1 or self.sweep_steps < 1:
            raise ValueError("all step counts must be >= 1")
        amps = self.amplitudes
        if any(b <= a for a, b in zip(amps, amps[1:])):
            raise ValueError("sweep amplitudes must be ascending")

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunPlan":
        return cls(
            preload_force=cfg.preload.target_force_n,
            preload_approach=cfg.preload.approach_m,
            preload_steps=cfg.preload.steps,
            shear_fraction=(cfg.tangential.force_fraction
                            if cfg.tangential is not None else None),
            shear_steps=(cfg.tangential.steps
                         if cfg.tangential is not None else 1),
            amplitudes=(cfg.qsma.amplitudes if cfg.qsma is not None else ()),
            sweep_steps=(cfg.qsma.steps_per_ramp
                         if cfg.qsma is not None else 1),
            n_sweep_modes=(cfg.qsma.n_modes if cfg.qsma is not None else 0),
            depth_cutoff=cfg.topography.depth_cutoff_m,
            settings=cfg.solver.settings(),
        )


@dataclass
class FixtureContext:
    """Everything the load phases need about one restricted contact set."""

    op: object
    point_ids: np.ndarray
    points_xy: np.ndarray
    areas: np.ndarray
    base_gex: np.ndarray
    dg_preload: np.ndarray
    preload_guess: float
    compliance: object = None
    reduced: object = None
    w_b: object = None
    grid: BeGrid | None = None
    profile: object = None
    retained: np.ndarray | None = None


def build_grid(cfg: RunConfig, center: tuple[float, float]) -> BeGrid:
    """Contact grid from config; defaults to centring it on ``center``."""
    g = cfg.grid
    ox = g.origin_x_m
    oy = g.origin_y_m
    if ox is None:
        ox = center[0] - 0.5 * (g.nx - 1) * g.pitch_m
    if oy is None:
        oy = center[1] - 0.5 * (g.ny - 1) * g.pitch_m
    return BeGrid(nx=g.nx, ny=g.ny, pitch_x=g.pitch_m, pitch_y=g.pitch_m,
                  origin_x=ox, origin_y=oy)


def build_profile(cfg: RunConfig, grid: BeGrid):
    """Compose the interface height map from the configured components."""
    topo = cfg.topography
    parts = []
    if topo.height_csv is not None:
        parts.append(read_height_csv(topo.height_csv, grid))
    if topo.sphere_radius_m is not None:
        parts.append(sphere_profile(grid, topo.sphere_radius_m))
    if topo.crown_peak_to_peak_m is not None:
        parts.append(crown_profile(grid, topo.crown_peak_to_peak_m))
    if topo.has_roughness:
        parts.append(synthesize_roughness(grid, RoughnessSpec(
            sigma=topo.roughness_sigma_m,
            lambda_min=topo.roughness_lambda_min_m,
            lambda_max=topo.roughness_lambda_max_m,
            seed=topo.seed,
        )))
    if not parts:
        return flat_profile(grid)
    return compose_profiles(*parts)


def _halfspace(cfg: RunConfig) -> ElasticHalfSpace:
    return ElasticHalfSpace(e_young=cfg.material.young_modulus_pa,
                            nu_poisson=cfg.material.poisson_ratio)


def _base_gex(heights: np.ndarray) -> np.ndarray:
    out = np.zeros(3 * heights.size)
    out[0::3] = -heights
    return out


def _build_context(cfg: RunConfig, cutoff: float | None, shared: dict
                   ) -> FixtureContext:
    """Assemble the condensed operator for one restriction cutoff."""
    fix = cfg.fixture
    if fix.kind == "lap_joint" and fix.coupling == "node_collocated":
        reduced = shared["reduced"]
        w_b, points, areas = node_based_coupling(reduced.boundary_xy)
        op = condense_static(reduced, w_b, None)
        n = len(points)
        f_b = reduced.preload_pattern[:reduced.n_boundary]
        return FixtureContext(
            op=op, point_ids=np.arange(n), points_xy=points, areas=areas,
            base_gex=np.zeros(3 * n), dg_preload=op.gap_offset(f_b),
            preload_guess=cfg.preload.target_force_n or 1.0,
            reduced=reduced, w_b=w_b,
        )

    grid = shared["grid"]
    profile = shared["profile"]
    if cutoff is None:
        retained = profile.included_indices
    else:
        retained = geometric_restriction(profile, cutoff)
    hs = _halfspace(cfg)
    compliance = assemble_compliance(grid, hs, hs, retained=retained)
    points_xy = grid.points()[retained]
    areas = np.full(retained.size, grid.cell_area)
    heights = profile.heights[retained]
    base = _base_gex(heights)

    if fix.kind == "rigid":
        op = RigidCondensed(compliance)
        dg = np.zeros_like(base)
        dg[0::3] = -1.0  # unit rigid-body approach
        guess = cfg.preload.approach_m
        if guess is None:
            # punch-stiffness seed: composite modulus times the grid span
            e_c = cfg.material.young_modulus_pa / (
                4.0 * (1.0 - cfg.material.poisson_ratio ** 2))
            span = min((grid.nx - 1) * grid.pitch_x, (grid.ny - 1) * grid.pitch_y)
            guess = cfg.preload.target_force_n / max(e_c * span, 1e-300)
        return FixtureContext(
            op=op, point_ids=retained, points_xy=points_xy, areas=areas,
            base_gex=base, dg_preload=dg, preload_guess=guess,
            compliance=compliance, grid=grid, profile=profile, retained=retained,
        )

    reduced = shared["reduced"]
    w_b = build_coupling(reduced.boundary_xy, points_xy)
    op = condense_static(reduced, w_b, compliance)
    f_b = reduced.preload_pattern[:reduced.n_boundary]
    return FixtureContext(
        op=op, point_ids=retained, points_xy=points_xy, areas=areas,
        base_gex=base, dg_preload=op.gap_offset(f_b),
        preload_guess=cfg.preload.target_force_n,
        compliance=compliance, reduced=reduced, w_b=w_b,
        grid=grid, profile=profile, retained=retained,
    )


def _build_shared(cfg: RunConfig) -> dict:
    """Cutoff-independent setup: fixture model, grid and height map."""
    shared: dict = {}
    fix = cfg.fixture
    if fix.kind == "lap_joint":
        material = SolidMaterial(e_young=cfg.material.young_modulus_pa,
                                 nu_poisson=cfg.material.poisson_ratio,
                                 density=cfg.material.density_kg_m3)
        size = fix.elem_size_m
        joint = build_lap_joint(material, n_len=fix.n_length_elems,
                                n_wid=fix.n_width_elems,
                                n_thk=fix.n_thickness_elems,
                                n_overlap=fix.n_overlap_elems,
                                elem_size=(size, size, size))
        shared["joint"] = joint
        shared["reduced"] = reduce_lap_joint(joint, fix.n_modes)
        if fix.coupling == "node_collocated":
            return shared
        x0, x1, y0, y1 = joint.overlap_box
        grid = build_grid(cfg, (0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        pts = grid.points()
        tol = 1e-9
        if (pts[:, 0].min() < x0 - tol or pts[:, 0].max() > x1 + tol
                or pts[:, 1].min() < y0 - tol or pts[:, 1].max() > y1 + tol):
            raise ConfigError(
                "[grid] pitch_m: contact grid extends beyond the interface "
                f"overlap ({x1 - x0:.4g} x {y1 - y0:.4g} m)")
    else:
        grid = build_grid(cfg, (0.0, 0.0))
    shared["grid"] = grid
    shared["profile"] = build_profile(cfg, grid)
    return shared


def _march(solver: ContactSolver, state, offsets, bundle: ResultBundle | None,
           phase: str):
    """Advance through a list of offsets, logging and recording each step."""
    for i, g_ex in enumerate(offsets):
        state, info = solver.step(state, g_ex)
        log.info("%s step %d/%d: open=%d stick=%d slip=%d pjor=%d retries=%d",
                 phase, i + 1, len(offsets), info.n_open, info.n_stick,
                 info.n_slip, info.pjor_iterations, info.set_retries)
        if bundle is not None:
            bundle.steps.append(StepRecord(
                phase=phase, step=i + 1, state=state.copy(),
                n_open=info.n_open, n_stick=info.n_stick, n_slip=info.n_slip,
                pjor_iterations=info.pjor_iterations,
                set_retries=info.set_retries,
            ))
    return state


def _ramp_offsets(base: np.ndarray, dg_unit: np.ndarray, scale: float,
                  steps: int, start: float = 0.0) -> list:
    fracs = np.linspace(start, scale, steps + 1)[1:]
    return [base + f * dg_unit for f in fracs]


def _solve_scale(eval_force, target: float, guess: float, rel_tol: float,
                 what: str, max_evals: int = 60) -> float:
    """Scale at which the monotone resultant ``eval_force`` meets ``target``.

    Regula falsi with the Illinois modification on f(s) = N(s) - target,
    bracketing first by proportional extrapolation from the initial guess.
    Terminates on the relative force error, not the bracket width.
    """
    def miss(n):
        return abs(n - target) <= rel_tol * target

    s_lo, n_lo = 0.0, 0.0
    s_hi = max(guess, 1e-300)
    n_hi = eval_force(s_hi)
    evals = 1
    while n_hi < target and evals < max_evals:
        if miss(n_hi):
            return s_hi
        s_lo, n_lo = s_hi, n_hi
        # proportional extrapolation (the resultant is near-linear in the
        # scale), slightly overshot so the next point brackets the target
        if n_hi > 0.0:
            s_hi *= min(10.0, max(1.05, 1.02 * target / n_hi))
        else:
            s_hi *= 10.0
        n_hi = eval_force(s_hi)
        evals += 1
    if n_hi < target:
        raise ContactSolveError(
            f"{what} resultant saturates at {n_hi:.6e} below the target "
            f"{target:.6e}")
    side = 0
    while evals < max_evals:
        if miss(n_hi):
            return s_hi
        if miss(n_lo) and s_lo > 0.0:
            return s_lo
        f_lo, f_hi = n_lo - target, n_hi - target
        s_new = s_hi - f_hi * (s_hi - s_lo) / (f_hi - f_lo)
        if not s_lo < s_new < s_hi:
            s_new = 0.5 * (s_lo + s_hi)
        n_new = eval_force(s_new)
        evals += 1
        if n_new < target:
            s_lo, n_lo = s_new, n_new
            if side == -1:
                f_hi *= 0.5
                n_hi = f_hi + target
            side = -1
        else:
            s_hi, n_hi = s_new, n_new
            if side == +1:
                f_lo *= 0.5
                n_lo = f_lo + target
            side = +1
    raise ContactSolveError(
        f"{what} force targeting did not reach {target:.6e} within "
        f"{max_evals} ramps")


def run_preload(plan: RunPlan, ctx: FixtureContext,
                bundle: ResultBundle | None = None):
    """Ramp the preload from the virgin state; returns (state, scale).

    With a prescribed approach the scale is known; with a prescribed clamp
    force the load scale is found by re-ramping from the virgin state until
    the interface normal resultant matches the target to 1e-8 relative.
    """
    solver = ContactSolver(ctx.op, plan.settings)
    virgin = solver.initial_state(ctx.base_gex)

    if plan.preload_approach is not None:
        scale = plan.preload_approach
    elif plan.preload_force == 0.0:
        scale = 0.0
    else:
        def resultant(s: float) -> float:
            offsets = _ramp_offsets(ctx.base_gex, ctx.dg_preload, s,
                                    plan.preload_steps)
            state = _march(solver, virgin.copy(), offsets, None, "preload-trial")
            return state.normal_force

        scale = _solve_scale(resultant, plan.preload_force, ctx.preload_guess,
                             FORCE_REL_TOL, "preload")
    offsets = _ramp_offsets(ctx.base_gex, ctx.dg_preload, scale,
                            plan.preload_steps)
    state = _march(solver, virgin, offsets, bundle, "preload")
    log.info("preload converged: scale=%.9e, normal force=%.9e",
             scale, state.normal_force)
    return state, scale


def _boundary_loaded(ctx: FixtureContext, state) -> bool:
    """True if a converged point on the restriction rim carries load."""
    if ctx.profile is None or ctx.retained is None:
        return False
    rim = restriction_boundary(ctx.profile, ctx.retained)
    if rim.size == 0:
        return False
    pos = np.searchsorted(ctx.retained, rim)
    lam_n = state.lam[0::3]
    floor = 1e-12 * max(lam_n.max(), 1e-300)
    return bool((lam_n[pos] > floor).any())


def run_shear(plan: RunPlan, ctx: FixtureContext, state0, solver=None,
              bundle: ResultBundle | None = None):
    """Ramp a uniform tangential offset until Q = fraction * mu * P."""
    settings = plan.settings
    if solver is None:
        solver = ContactSolver(ctx.op, settings)
    target = plan.shear_fraction * settings.mu_friction * state0.normal_force
    dg_shear = np.zeros_like(ctx.base_gex)
    dg_shear[1::3] = -1.0  # unit first-tangential offset

    def resultant(u: float) -> float:
        offsets = _ramp_offsets(state0.g_ex, dg_shear, u, plan.shear_steps)
        state = _march(solver, state0.copy(), offsets, None, "shear-trial")
        return abs(state.lam[1::3].sum())

    # seed the bracket from the normal approach scale; tangential and normal
    # patch compliances are of the same order
    guess = plan.shear_fraction * settings.mu_friction * abs(
        state0.g_ex[0::3].min())
    scale = _solve_scale(resultant, target, max(guess, 1e-300),
                         SHEAR_REL_TOL, "shear")
    offsets = _ramp_offsets(state0.g_ex, dg_shear, scale, plan.shear_steps)
    state = _march(solver, state0.copy(), offsets, bundle, "shear")
    log.info("shear converged: offset=%.9e, Q=%.9e (target %.9e)",
             scale, abs(state.lam[1::3].sum()), target)
    return state, scale


def run_sweeps(plan: RunPlan, cfg: RunConfig, ctx: FixtureContext, state0,
               bundle: ResultBundle | None = None):
    """Modal hysteresis sweeps around the preloaded equilibrium."""
    modes = linearized_modes(ctx.reduced, ctx.w_b, ctx.compliance, state0,
                             n_modes=plan.n_sweep_modes)
    obs_dof = cfg.qsma.observe_dof
    if obs_dof is None:
        obs_dof = int(np.argmax(np.abs(
            ctx.reduced.r_matrix @ modes[0].phi_lin)))
    # geometric load grid: every amplitude decade gets equal resolution, and
    # the first segment (pure stick, linear response) needs no refinement
    amax = plan.amplitudes[-1]
    grid_alphas = np.unique(np.concatenate([
        [0.0],
        np.geomspace(plan.amplitudes[0] / 10.0, amax, plan.sweep_steps),
        np.asarray(plan.amplitudes),
    ]))
    if bundle is not None:
        # both hysteresis branches restart from the preload state after
        # this many recorded steps; consumers stepping through the records
        # need the boundary to pair consecutive states correctly
        bundle.extras["sweep_branch_steps"] = len(grid_alphas) - 1
    curves = []
    for mode in modes:
        log.info("sweeping mode %d (omega_lin=%.6e rad/s)",
                 mode.label, mode.omega_lin)
        solver = ContactSolver(ctx.op, plan.settings)
        counter = {"step": 0}

        def stepper(state, g_ex_new):
            new, info = solver.step(state, g_ex_new)
            counter["step"] += 1
            if bundle is not None:
                bundle.steps.append(StepRecord(
                    phase=f"sweep_mode{mode.label}", step=counter["step"],
                    state=new.copy(), n_open=info.n_open,
                    n_stick=info.n_stick, n_slip=info.n_slip,
                    pjor_iterations=info.pjor_iterations,
                    set_retries=info.set_retries,
                ))
            return new, info

        record = modal_load_sweep(
            ctx.reduced, ctx.op, mode, state0, amax,
            settings=plan.settings, stepper=stepper, alphas=grid_alphas,
            obs_dofs=[obs_dof], r_matrix=ctx.reduced.r_matrix,
        )
        curves.append(modal_curve(record, mode, np.asarray(plan.amplitudes)))
        if bundle is not None:
            bundle.extras.setdefault("records", []).append(record)
    return curves, obs_dof


def run_case(cfg: RunConfig) -> ResultBundle:
    """Execute a full configured run and write its artifact bundle."""
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = ResultBundle(out_dir=out_dir, config_hash=cfg.config_hash())
    plan = RunPlan.from_config(cfg)

    with PhaseTimer("setup", bundle.phases):
        shared = _build_shared(cfg)

    with PhaseTimer("preload", bundle.phases):
        cutoff = plan.depth_cutoff
        for attempt in range(MAX_ENLARGEMENTS + 1):
            ctx = _build_context(cfg, cutoff, shared)
            bundle.steps = [s for s in bundle.steps if s.phase != "preload"]
            state, preload_scale = run_preload(plan, ctx, bundle)
            if not _boundary_loaded(ctx, state):
                break
            if attempt == MAX_ENLARGEMENTS:
                raise RestrictionError(
                    f"restriction rim still loaded after {MAX_ENLARGEMENTS} "
                    f"enlargements (cutoff {cutoff:.6e} m)")
            cutoff *= ENLARGE_FACTOR
            log.warning("restriction rim loaded; enlarging depth cutoff to "
                        "%.6e m (attempt %d)", cutoff, attempt + 1)
    bundle.preload_state = state
    bundle.final_state = state
    bundle.point_ids = ctx.point_ids
    bundle.points_xy = ctx.points_xy
    bundle.extras.update(context=ctx, plan=plan, preload_scale=preload_scale,
                         depth_cutoff=cutoff)

    if plan.shear_fraction is not None:
        with PhaseTimer("shear", bundle.phases):
            state, shear_scale = run_shear(plan, ctx, state, bundle=bundle)
        bundle.final_state = state
        bundle.extras["shear_scale"] = shear_scale

    obs_dof = None
    if cfg.qsma is not None:
        with PhaseTimer("qsma", bundle.phases):
            curves, obs_dof = run_sweeps(plan, cfg, ctx, bundle.preload_state,
                                         bundle)
        bundle.curves = curves
        bundle.extras["observe_dof"] = obs_dof

    with PhaseTimer("output", bundle.phases):
        _write_artifacts(cfg, bundle, shared)
    bundle.record_file("manifest", bundle.write_manifest())
    return bundle


def _write_artifacts(cfg: RunConfig, bundle: ResultBundle, shared: dict) -> None:
    out = bundle.out_dir
    if cfg.output.write_state:
        path = out / "state_preload.csv"
        write_state_csv(path, bundle.point_ids, bundle.points_xy,
                        bundle.preload_state)
        bundle.record_file("state_preload", path)
        if bundle.final_state is not bundle.preload_state:
            path = out / "state_final.csv"
            write_state_csv(path, bundle.point_ids, bundle.points_xy,
                            bundle.final_state)
            bundle.record_file("state_final", path)
    if cfg.output.write_curves and bundle.curves:
        path = out / "modal_curves.csv"
        write_modal_curves(path, bundle.curves)
        bundle.record_file("modal_curves", path)
    if cfg.output.write_heights and "profile" in shared:
        path = out / "heights.csv"
        write_height_csv(shared["profile"], path)
        bundle.record_file("heights", path)
    if bundle.steps:
        path = out / "steps.csv"
        write_step_log(path, bundle.steps)
        bundle.record_file("steps", path)
