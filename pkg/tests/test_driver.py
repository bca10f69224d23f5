"""Tests for the end-to-end driver: plans, targeting, restriction, artifacts.

Force targeting is checked against a prescribed-force flat-punch run and a
synthetic power-law resultant; the restriction enlargement loop is exercised
on sphere problems sized so the rim check must fire a known number of times;
reruns of the same config are checked to produce bit-identical CSV files.
"""
from __future__ import annotations

import numpy as np
import pytest

from jointbe.config import ConfigError, RunConfig
from jointbe.contact import ContactSolveError, SolverSettings
from jointbe.driver import (
    ENLARGE_FACTOR,
    FORCE_REL_TOL,
    RestrictionError,
    RunPlan,
    _solve_scale,
    build_profile,
    run_case,
)
from jointbe.results import read_state_csv

MATERIAL = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3
"""

SOLVER_OUT = """\
[solver]
mu_friction = {mu}

[output]
directory = {out}
"""


def rigid_config(tmp_path, *, nx, pitch, topo="", preload="", mu=0.0,
                 tangential="", out="out", name="case.cfg") -> RunConfig:
    text = MATERIAL + f"""
[grid]
nx = {nx}
ny = {nx}
pitch_m = {pitch}

[fixture]
kind = rigid
"""
    if topo:
        text += f"\n[topography]\n{topo}\n"
    text += f"\n[preload]\n{preload}\n"
    if tangential:
        text += f"\n[tangential]\n{tangential}\n"
    text += "\n" + SOLVER_OUT.format(mu=mu, out=out)
    path = tmp_path / name
    path.write_text(text)
    return RunConfig.load(path)


def joint_config(tmp_path, *, pitch, out="out", name="case.cfg") -> RunConfig:
    text = MATERIAL + f"""
[grid]
nx = 6
ny = 5
pitch_m = {pitch}

[fixture]
kind = lap_joint
n_modes = 6
n_length_elems = 10
n_width_elems = 3
n_thickness_elems = 1
n_overlap_elems = 3

[topography]
crown_peak_to_peak_m = 2e-6
depth_cutoff_m = 3e-6

[preload]
target_force_n = 1500
steps = 4

[qsma]
amplitudes = 50 150
steps_per_ramp = 12

""" + SOLVER_OUT.format(mu=0.3, out=out)
    path = tmp_path / name
    path.write_text(text)
    return RunConfig.load(path)


def default_settings() -> SolverSettings:
    return SolverSettings(mu_friction=0.0)


class TestRunPlan:
    def base_kwargs(self):
        return dict(preload_force=100.0, preload_approach=None,
                    preload_steps=5, shear_fraction=None, shear_steps=1,
                    amplitudes=(1.0, 2.0), sweep_steps=10, n_sweep_modes=1,
                    depth_cutoff=None, settings=default_settings())

    def test_valid_plan(self):
        plan = RunPlan(**self.base_kwargs())
        assert plan.preload_force == 100.0

    @pytest.mark.parametrize("field", ["preload_steps", "shear_steps",
                                       "sweep_steps"])
    def test_step_counts_must_be_positive(self, field):
        kwargs = self.base_kwargs()
        kwargs[field] = 0
        with pytest.raises(ValueError, match="step counts"):
            RunPlan(**kwargs)

    def test_amplitudes_must_ascend(self):
        kwargs = self.base_kwargs()
        kwargs["amplitudes"] = (2.0, 1.0)
        with pytest.raises(ValueError, match="ascending"):
            RunPlan(**kwargs)

    def test_from_config(self, tmp_path):
        cfg = rigid_config(tmp_path, nx=8, pitch=2.5e-4,
                           preload="approach_m = 1e-5\nsteps = 4")
        plan = RunPlan.from_config(cfg)
        assert plan.preload_approach == 1e-5
        assert plan.preload_force is None
        assert plan.preload_steps == 4
        assert plan.shear_fraction is None
        assert plan.amplitudes == ()


class TestSolveScale:
    def test_power_law_resultant(self):
        calls = []

        def resultant(s):
            calls.append(s)
            return 3.0e6 * s ** 1.5

        target = 1000.0
        scale = _solve_scale(resultant, target, 1e-5, 1e-10, "test")
        assert abs(3.0e6 * scale ** 1.5 - target) <= 1e-10 * target
        assert len(calls) <= 25

    def test_linear_resultant_converges_fast(self):
        calls = []

        def resultant(s):
            calls.append(s)
            return 7.5 * s

        scale = _solve_scale(resultant, 600.0, 1.0, 1e-12, "test")
        assert abs(7.5 * scale - 600.0) <= 1e-12 * 600.0
        assert len(calls) <= 8

    def test_saturating_resultant_raises(self):
        with pytest.raises(ContactSolveError, match="saturates"):
            _solve_scale(lambda s: 1.0 - np.exp(-s), 2.0, 1.0, 1e-8,
                         "test", max_evals=25)


class TestForceTargeting:
    def test_flat_punch_meets_target(self, tmp_path):
        cfg = rigid_config(tmp_path, nx=16, pitch=2.5e-4,
                           preload="target_force_n = 1000\nsteps = 5")
        bundle = run_case(cfg)
        state = bundle.preload_state
        assert abs(state.normal_force - 1000.0) <= FORCE_REL_TOL * 1000.0
        assert state.n_points == 256
        # frictionless flat punch: every point closed with zero residual gap
        assert (state.lam[0::3] > 0.0).all()
        assert np.abs(state.g[0::3]).max() < 1e-15
        assert bundle.extras["preload_scale"] > 0.0
        assert (bundle.out_dir / "state_preload.csv").is_file()
        assert (bundle.out_dir / "manifest.json").is_file()

    def test_zero_preload_is_trivial(self, tmp_path):
        cfg = rigid_config(tmp_path, nx=8, pitch=2.5e-4,
                           preload="target_force_n = 0\nsteps = 2")
        bundle = run_case(cfg)
        assert bundle.preload_state.normal_force == 0.0
        assert (bundle.preload_state.lam == 0.0).all()
        assert bundle.extras["preload_scale"] == 0.0


class TestRestrictionEnlargement:
    R = 50e-3

    def sphere_config(self, tmp_path, *, approach, cutoff, nx=24, pitch=1.2e-4):
        topo = f"sphere_radius_m = {self.R}\ndepth_cutoff_m = {cutoff}"
        return rigid_config(tmp_path, nx=nx, pitch=pitch, topo=topo,
                            preload=f"approach_m = {approach}\nsteps = 5")

    def test_tight_cutoff_enlarges_once(self, tmp_path):
        # contact radius sqrt(R * approach) lies between the retained radii
        # of the initial cutoff and the once-enlarged cutoff
        cutoff = 1.0e-5
        cfg = self.sphere_config(tmp_path, approach=2.5e-5, cutoff=cutoff)
        bundle = run_case(cfg)
        assert bundle.extras["depth_cutoff"] == pytest.approx(
            ENLARGE_FACTOR * cutoff)
        r_pts = np.hypot(*bundle.points_xy.T)
        r_loaded = r_pts[bundle.preload_state.lam[0::3] > 0.0].max()
        assert r_loaded < r_pts.max()

    def test_generous_cutoff_is_kept(self, tmp_path):
        cfg = self.sphere_config(tmp_path, approach=2.5e-5, cutoff=4.0e-5)
        bundle = run_case(cfg)
        assert bundle.extras["depth_cutoff"] == 4.0e-5

    def test_rim_still_loaded_after_five_enlargements(self, tmp_path):
        # approach more than 2 * 1.5^5 times the cutoff: the retained disc
        # stays inside the true contact circle at every enlargement
        cfg = self.sphere_config(tmp_path, approach=2.0e-5, cutoff=1.0e-6)
        with pytest.raises(RestrictionError, match="still loaded after 5"):
            run_case(cfg)


class TestPathConsistency:
    def run_cattaneo(self, tmp_path, preload_steps, shear_steps, out):
        topo = "sphere_radius_m = 50e-3"
        cfg = rigid_config(
            tmp_path, nx=20, pitch=2.0e-4, topo=topo, mu=0.5,
            preload=f"approach_m = 2e-5\nsteps = {preload_steps}",
            tangential=f"force_fraction = 0.5\nsteps = {shear_steps}",
            out=out, name=f"{out}.cfg")
        return run_case(cfg)

    def test_halving_the_steps_leaves_the_final_state(self, tmp_path):
        coarse = self.run_cattaneo(tmp_path, 6, 4, "coarse")
        fine = self.run_cattaneo(tmp_path, 12, 8, "fine")
        p = coarse.preload_state.normal_force
        assert fine.preload_state.normal_force == pytest.approx(p, rel=1e-9)
        q_c = abs(coarse.final_state.lam[1::3].sum())
        q_f = abs(fine.final_state.lam[1::3].sum())
        assert q_c == pytest.approx(0.5 * 0.5 * p, rel=1e-6)
        assert q_f == pytest.approx(0.5 * 0.5 * p, rel=1e-6)
        scale = np.abs(coarse.final_state.lam).max()
        err = np.abs(coarse.final_state.lam - fine.final_state.lam).max()
        assert err <= 1e-3 * scale


class TestLapJointRuns:
    def test_rerun_is_bit_identical(self, tmp_path):
        first = run_case(joint_config(tmp_path, pitch=2e-3, out="run_a",
                                      name="a.cfg"))
        second = run_case(joint_config(tmp_path, pitch=2e-3, out="run_b",
                                       name="b.cfg"))
        names = sorted(p.name for p in first.out_dir.glob("*.csv"))
        assert "state_preload.csv" in names
        assert "modal_curves.csv" in names
        assert "steps.csv" in names
        for name in names:
            a = (first.out_dir / name).read_bytes()
            b = (second.out_dir / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"

    def test_grid_must_fit_the_overlap(self, tmp_path):
        cfg = joint_config(tmp_path, pitch=4e-3)
        with pytest.raises(ConfigError, match=r"\[grid\] pitch_m"):
            run_case(cfg)


class TestProfileBuild:
    def grid_for(self, cfg):
        from jointbe.driver import build_grid
        return build_grid(cfg, (0.0, 0.0))

    def test_flat_fixture_has_zero_heights(self, tmp_path):
        cfg = rigid_config(tmp_path, nx=8, pitch=2.5e-4,
                           preload="approach_m = 1e-5")
        profile = build_profile(cfg, self.grid_for(cfg))
        assert (profile.heights == 0.0).all()

    def test_sphere_profile_depth(self, tmp_path):
        cfg = rigid_config(tmp_path, nx=9, pitch=2.5e-4,
                           topo="sphere_radius_m = 50e-3",
                           preload="approach_m = 1e-5")
        grid = self.grid_for(cfg)
        profile = build_profile(cfg, grid)
        assert profile.heights.max() == 0.0
        r2 = (grid.points() ** 2).sum(axis=1)
        expected = -r2.max() / (2.0 * 50e-3)
        assert profile.heights.min() == pytest.approx(expected, rel=1e-3)

    def test_roughness_seed_reproducible(self, tmp_path):
        topo = ("roughness_sigma_m = 1e-6\nroughness_lambda_min_m = 5e-4\n"
                "roughness_lambda_max_m = 2e-3\nseed = 42")
        cfg = rigid_config(tmp_path, nx=12, pitch=2.5e-4, topo=topo,
                           preload="approach_m = 1e-5")
        grid = self.grid_for(cfg)
        h1 = build_profile(cfg, grid).heights
        h2 = build_profile(cfg, grid).heights
        h3 = build_profile(cfg.with_seed(43), grid).heights
        assert (h1 == h2).all()
        assert not (h1 == h3).all()


class TestStateArtifacts:
    def test_state_csv_matches_memory(self, tmp_path):
        topo = "sphere_radius_m = 50e-3\ndepth_cutoff_m = 4e-5"
        cfg = rigid_config(tmp_path, nx=16, pitch=2.0e-4, topo=topo,
                           preload="approach_m = 2e-5\nsteps = 4")
        bundle = run_case(cfg)
        ids, xy, g, lam, status = read_state_csv(
            bundle.out_dir / "state_preload.csv")
        assert (ids == bundle.point_ids).all()
        assert (xy == bundle.points_xy).all()
        assert (g == bundle.preload_state.g).all()
        assert (lam == bundle.preload_state.lam).all()
        assert (status == bundle.preload_state.status).all()
