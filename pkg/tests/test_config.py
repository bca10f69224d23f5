"""Tests for config parsing, validation messages, and the canonical hash."""
from __future__ import annotations

import dataclasses
from pathlib import Path

import pytest

from jointbe.config import ConfigError, RunConfig

RIGID_BASE = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3

[grid]
nx = 8
ny = 8
pitch_m = 2.5e-4

[fixture]
kind = rigid

[preload]
approach_m = 1e-5
steps = 4

[solver]
mu_friction = 0.0

[output]
directory = out
"""

JOINT_BASE = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3

[grid]
nx = 10
ny = 8
pitch_m = 1e-3

[fixture]
kind = lap_joint
n_modes = 4

[preload]
target_force_n = 100.0

[qsma]
amplitudes = 1.0 2.0 5.0

[solver]
mu_friction = 0.3

[output]
directory = out
"""


def load_text(tmp_path: Path, text: str, name: str = "case.cfg") -> RunConfig:
    path = tmp_path / name
    path.write_text(text)
    return RunConfig.load(path)


class TestParsing:
    def test_minimal_rigid_config(self, tmp_path):
        cfg = load_text(tmp_path, RIGID_BASE)
        assert cfg.fixture.kind == "rigid"
        assert cfg.preload.approach_m == 1e-5
        assert cfg.preload.target_force_n is None
        assert cfg.grid.nx == 8 and cfg.grid.pitch_m == 2.5e-4
        assert cfg.tangential is None and cfg.qsma is None
        assert cfg.output.directory == tmp_path / "out"

    def test_defaults_resolved(self, tmp_path):
        cfg = load_text(tmp_path, JOINT_BASE)
        assert cfg.preload.steps == 20
        assert cfg.qsma.steps_per_ramp == 100 and cfg.qsma.n_modes == 1
        assert cfg.solver.tol_rel == 1e-10
        assert cfg.fixture.n_overlap_elems == 5
        assert cfg.material.density_kg_m3 == 7800.0

    def test_fe_model_alias(self, tmp_path):
        cfg = load_text(tmp_path, JOINT_BASE.replace("[fixture]", "[fe_model]"))
        assert cfg.fixture.kind == "lap_joint"

    def test_fe_model_and_fixture_together_rejected(self, tmp_path):
        text = JOINT_BASE + "\n[fe_model]\nkind = rigid\n"
        with pytest.raises(ConfigError, match="fe_model"):
            load_text(tmp_path, text)

    def test_inline_comments_stripped(self, tmp_path):
        text = RIGID_BASE.replace("nx = 8", "nx = 8  # points across")
        assert load_text(tmp_path, text).grid.nx == 8

    def test_solver_settings_mapping(self, tmp_path):
        text = RIGID_BASE.replace(
            "mu_friction = 0.0",
            "mu_friction = 0.25\nomega_relax = 0.4\ntol_rel = 1e-9\nmax_iter = 123",
        )
        s = load_text(tmp_path, text).solver.settings()
        assert (s.mu_friction, s.omega_relax, s.tol_rel, s.max_iter) == (
            0.25, 0.4, 1e-9, 123)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig.load(tmp_path / "nope.cfg")


class TestValidationMessages:
    def test_missing_grid_pitch_names_field(self, tmp_path):
        text = RIGID_BASE.replace("pitch_m = 2.5e-4\n", "")
        with pytest.raises(ConfigError, match=r"\[grid\] pitch_m"):
            load_text(tmp_path, text)

    def test_unknown_key_named(self, tmp_path):
        text = RIGID_BASE.replace("nx = 8", "nx = 8\nnz = 3")
        with pytest.raises(ConfigError, match=r"\[grid\] nz: unrecognized"):
            load_text(tmp_path, text)

    def test_unknown_section_named(self, tmp_path):
        with pytest.raises(ConfigError, match=r"\[extras\]"):
            load_text(tmp_path, RIGID_BASE + "\n[extras]\nfoo = 1\n")

    def test_missing_required_section(self, tmp_path):
        text = RIGID_BASE.replace("[preload]\napproach_m = 1e-5\nsteps = 4\n", "")
        with pytest.raises(ConfigError, match=r"\[preload\]"):
            load_text(tmp_path, text)

    def test_non_numeric_value(self, tmp_path):
        text = RIGID_BASE.replace("pitch_m = 2.5e-4", "pitch_m = tiny")
        with pytest.raises(ConfigError, match=r"\[grid\] pitch_m: expected a number"):
            load_text(tmp_path, text)

    def test_preload_needs_exactly_one_target(self, tmp_path):
        both = RIGID_BASE.replace("approach_m = 1e-5",
                                  "approach_m = 1e-5\ntarget_force_n = 10")
        with pytest.raises(ConfigError, match="exactly one"):
            load_text(tmp_path, both)
        neither = RIGID_BASE.replace("approach_m = 1e-5\n", "")
        with pytest.raises(ConfigError, match="exactly one"):
            load_text(tmp_path, neither)

    def test_approach_requires_rigid(self, tmp_path):
        text = JOINT_BASE.replace("target_force_n = 100.0", "approach_m = 1e-6")
        with pytest.raises(ConfigError, match="rigid"):
            load_text(tmp_path, text)

    def test_qsma_requires_lap_joint(self, tmp_path):
        text = RIGID_BASE + "\n[qsma]\namplitudes = 1 2\n"
        with pytest.raises(ConfigError, match="lap_joint"):
            load_text(tmp_path, text)

    def test_amplitudes_must_ascend(self, tmp_path):
        text = JOINT_BASE.replace("amplitudes = 1.0 2.0 5.0",
                                  "amplitudes = 1.0 5.0 2.0")
        with pytest.raises(ConfigError, match=r"\[qsma\] amplitudes"):
            load_text(tmp_path, text)

    def test_tangential_requires_rigid_and_friction(self, tmp_path):
        text = JOINT_BASE + "\n[tangential]\nforce_fraction = 0.5\n"
        with pytest.raises(ConfigError, match="rigid"):
            load_text(tmp_path, text)
        text = RIGID_BASE + "\n[tangential]\nforce_fraction = 0.5\n"
        with pytest.raises(ConfigError, match="mu_friction"):
            load_text(tmp_path, text)

    def test_roughness_group_all_or_none(self, tmp_path):
        text = RIGID_BASE + "\n[topography]\nroughness_sigma_m = 1e-6\n"
        with pytest.raises(ConfigError, match="lambda_min"):
            load_text(tmp_path, text)

    def test_roughness_band_ordering(self, tmp_path):
        text = RIGID_BASE + ("\n[topography]\nroughness_sigma_m = 1e-6\n"
                             "roughness_lambda_min_m = 2e-3\n"
                             "roughness_lambda_max_m = 1e-3\n")
        with pytest.raises(ConfigError, match="smaller than"):
            load_text(tmp_path, text)

    def test_height_csv_must_exist(self, tmp_path):
        text = RIGID_BASE + "\n[topography]\nheight_csv = missing.csv\n"
        with pytest.raises(ConfigError, match="height_csv"):
            load_text(tmp_path, text)

    def test_nodal_forbids_grid_and_topography(self, tmp_path):
        text = JOINT_BASE.replace("kind = lap_joint",
                                  "kind = lap_joint\ncoupling = node_collocated")
        with pytest.raises(ConfigError, match=r"\[grid\]"):
            load_text(tmp_path, text)
        text = text.replace("[grid]\nnx = 10\nny = 8\npitch_m = 1e-3\n\n", "")
        text += "\n[topography]\nsphere_radius_m = 1.0\n"
        with pytest.raises(ConfigError, match="flat"):
            load_text(tmp_path, text)

    def test_overlap_shorter_than_beam(self, tmp_path):
        text = JOINT_BASE.replace("n_modes = 4",
                                  "n_modes = 4\nn_length_elems = 5\nn_overlap_elems = 5")
        with pytest.raises(ConfigError, match="n_overlap_elems"):
            load_text(tmp_path, text)

    def test_negative_poisson_rejected(self, tmp_path):
        text = RIGID_BASE.replace("poisson_ratio = 0.3", "poisson_ratio = -0.1")
        with pytest.raises(ConfigError, match=r"\[material\] poisson_ratio"):
            load_text(tmp_path, text)


class TestCanonicalHash:
    def test_comments_and_order_do_not_change_hash(self, tmp_path):
        a = load_text(tmp_path, RIGID_BASE, "a.cfg")
        shuffled = RIGID_BASE.replace(
            "[material]\nyoung_modulus_pa = 2.1e11\npoisson_ratio = 0.3",
            "# header comment\n[material]\npoisson_ratio = 0.3\n"
            "young_modulus_pa = 2.1e11  ; inline",
        )
        b = load_text(tmp_path, shuffled, "b.cfg")
        assert a.config_hash() == b.config_hash()

    def test_explicit_default_keeps_hash(self, tmp_path):
        a = load_text(tmp_path, RIGID_BASE, "a.cfg")
        b = load_text(tmp_path, RIGID_BASE.replace(
            "[solver]\nmu_friction = 0.0",
            "[solver]\nmu_friction = 0.0\ntol_rel = 1e-10\nmax_iter = 50000"),
            "b.cfg")
        assert a.config_hash() == b.config_hash()

    def test_any_field_change_changes_hash(self, tmp_path):
        base = load_text(tmp_path, RIGID_BASE, "a.cfg")
        edits = [
            ("young_modulus_pa = 2.1e11", "young_modulus_pa = 2.0e11"),
            ("nx = 8", "nx = 9"),
            ("approach_m = 1e-5", "approach_m = 2e-5"),
            ("steps = 4", "steps = 5"),
            ("mu_friction = 0.0", "mu_friction = 0.1"),
            ("directory = out", "directory = elsewhere"),
        ]
        seen = {base.config_hash()}
        for old, new in edits:
            cfg = load_text(tmp_path, RIGID_BASE.replace(old, new), "e.cfg")
            h = cfg.config_hash()
            assert h not in seen, f"edit {old!r} -> {new!r} did not change the hash"
            seen.add(h)

    def test_optional_section_changes_hash(self, tmp_path):
        a = load_text(tmp_path, JOINT_BASE, "a.cfg")
        b = load_text(tmp_path, JOINT_BASE.replace(
            "[qsma]\namplitudes = 1.0 2.0 5.0\n", ""), "b.cfg")
        assert a.config_hash() != b.config_hash()

    def test_seed_override_changes_hash(self, tmp_path):
        cfg = load_text(tmp_path, RIGID_BASE)
        assert cfg.seed == 0
        reseeded = cfg.with_seed(7)
        assert reseeded.seed == 7
        assert reseeded.config_hash() != cfg.config_hash()

    def test_canonical_lines_sorted_and_prefixed(self, tmp_path):
        lines = load_text(tmp_path, JOINT_BASE).canonical_lines()
        assert lines == sorted(lines)
        assert all("." in ln and "=" in ln for ln in lines)
        assert any(ln.startswith("qsma.amplitudes=") for ln in lines)


class TestBundledConfigs:
    def test_all_bundled_configs_load(self):
        config_dir = Path(__file__).resolve().parent.parent / "configs"
        paths = sorted(config_dir.glob("*.cfg"))
        assert len(paths) >= 6
        hashes = set()
        for path in paths:
            cfg = RunConfig.load(path)
            hashes.add(cfg.config_hash())
        assert len(hashes) == len(paths)

    def test_replace_output_dir_supported(self, tmp_path):
        cfg = load_text(tmp_path, RIGID_BASE)
        moved = dataclasses.replace(
            cfg, output=dataclasses.replace(cfg.output, directory=tmp_path / "x"))
        assert moved.output.directory == tmp_path / "x"
        assert moved.config_hash() != cfg.config_hash()
