"""Acceptance suite: one test, and one pass/fail line, per release criterion.

Numeric tolerances are pinned directly in each test.  The bundled
configuration files are each executed once per session through a shared
cache; the analytic benchmarks (Hertz, Cattaneo-Mindlin, flat punch) and
the lap-joint fixture criteria all read from those runs, and the invariant
criterion sweeps every converged step of every bundled config.
"""
from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from jointbe import verify
from jointbe.config import RunConfig
from jointbe.contact import SLIP, STICK
from jointbe.driver import run_case
from jointbe.halfspace import ElasticHalfSpace, influence_coefficients
from jointbe.results import read_modal_curves

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
ALL_CONFIGS = ("hertz", "cattaneo", "flat_punch",
               "lapjoint_form", "lapjoint_rough", "lapjoint_nodal")

# worst tolerated normalized residual for each contact law, on every
# converged step of every bundled config
INVARIANT_LIMITS = {
    "penetration": 1e-6,
    "negative_pressure": 1e-12,
    "complementarity": 1e-6,
    "cone": 1e-9,
    "open_point_force": 1e-12,
    "force_balance": 1e-9,
    "dissipativity": 1e-6,
}


@pytest.fixture(scope="session")
def run_bundled(tmp_path_factory):
    """Execute a bundled config once and cache (config, bundle, wall time)."""
    cache = {}

    def get(name):
        if name not in cache:
            cfg = RunConfig.load(CONFIG_DIR / f"{name}.cfg")
            out = tmp_path_factory.mktemp(name)
            cfg = replace(cfg, output=replace(cfg.output, directory=out))
            t0 = time.perf_counter()
            bundle = run_case(cfg)
            cache[name] = (cfg, bundle, time.perf_counter() - t0)
        return cache[name]

    return get


def hertz_analytic(radius, approach, e_young, nu):
    e_c = e_young / (4.0 * (1.0 - nu ** 2))
    a = np.sqrt(radius * approach)
    p_total = (4.0 / 3.0) * e_c * np.sqrt(radius) * approach ** 1.5
    p0 = 3.0 * p_total / (2.0 * np.pi * a ** 2)
    return a, p0


def test_c01_self_influence_closed_form():
    hs = ElasticHalfSpace(e_young=194e9, nu_poisson=0.2854)
    half = 0.25e-3
    block = influence_coefficients(0.0, 0.0, half, half, hs)
    want = (4.0 * (1.0 - hs.nu_poisson ** 2) * np.log(1.0 + np.sqrt(2.0))
            / (np.pi * hs.e_young * half))
    assert abs(block.c_zz - want) / want <= 1e-12


def test_c02_hertz_sphere_contact(run_bundled):
    cfg, bundle, wall = run_bundled("hertz")
    radius = cfg.topography.sphere_radius_m
    approach = cfg.preload.approach_m
    a_want, p0_want = hertz_analytic(radius, approach,
                                     cfg.material.young_modulus_pa,
                                     cfg.material.poisson_ratio)
    assert 2.0 * a_want / cfg.grid.pitch_m >= 40.0   # resolution floor
    state = bundle.preload_state
    cell = bundle.extras["context"].grid.cell_area
    n_closed = int((state.lam[0::3] > 0.0).sum())
    a_got = np.sqrt(n_closed * cell / np.pi)
    p0_got = state.lam[0::3].max() / cell
    assert abs(a_got - a_want) / a_want <= 0.02
    assert abs(p0_got - p0_want) / p0_want <= 0.02
    assert wall < 60.0


def test_c03_cattaneo_mindlin_partial_slip(run_bundled):
    cfg, bundle, wall = run_bundled("cattaneo")
    mu = cfg.solver.mu_friction
    radius = cfg.topography.sphere_radius_m
    approach = cfg.preload.approach_m
    state = bundle.final_state
    cell = bundle.extras["context"].grid.cell_area
    p_total = bundle.preload_state.normal_force
    q_total = abs(state.lam[1::3].sum())
    assert abs(q_total - 0.5 * mu * p_total) / (mu * p_total) <= 1e-5

    a_want, p0 = hertz_analytic(radius, approach,
                                cfg.material.young_modulus_pa,
                                cfg.material.poisson_ratio)
    c_want = a_want * (1.0 - q_total / (mu * p_total)) ** (1.0 / 3.0)
    n_stick = int((state.status == STICK).sum())
    c_got = np.sqrt(n_stick * cell / np.pi)
    assert abs(c_got - c_want) / c_want <= 0.05

    slip = state.status == SLIP
    r = np.hypot(*bundle.points_xy[slip].T)
    lt = np.hypot(state.lam[1::3][slip], state.lam[2::3][slip]) / cell
    p_hz = p0 * np.sqrt(np.maximum(1.0 - (r / a_want) ** 2, 0.0))
    assert np.abs(lt - mu * p_hz).max() / (mu * p0) <= 0.05
    assert wall < 120.0


def test_c04_flat_punch_equilibrium(run_bundled):
    cfg, bundle, _ = run_bundled("flat_punch")
    state = bundle.preload_state
    target = cfg.preload.target_force_n
    assert abs(state.normal_force - target) / target <= 1e-8
    u = (state.g - state.g_ex)[0::3]
    xy = bundle.points_xy
    pitch = cfg.grid.pitch_m
    interior = ((xy[:, 0] > xy[:, 0].min() + 0.5 * pitch)
                & (xy[:, 0] < xy[:, 0].max() - 0.5 * pitch)
                & (xy[:, 1] > xy[:, 1].min() + 0.5 * pitch)
                & (xy[:, 1] < xy[:, 1].max() - 0.5 * pitch))
    ui = u[interior]
    assert (ui.max() - ui.min()) / abs(ui.mean()) <= 0.01


def test_c05_pjor_matches_enumeration():
    res = verify._pjor_enumeration_check()
    assert res.measured <= 1e-8
    assert res.runtime_s < 10.0


def test_c06_condensation_routes_agree():
    direct, schur = verify._condensation_checks()
    assert direct.measured <= 1e-10
    assert schur.measured <= 1e-10
    assert schur.runtime_s < 10.0


def test_c07_craig_bampton_exactness():
    static, eigenvalues = verify._reduction_checks()
    assert static.measured <= 1e-10
    assert eigenvalues.measured <= 1e-9


def test_c08_qsma_linear_limit():
    omega, damping = verify._qsma_linear_checks()
    assert omega.measured <= 1e-3
    assert damping.measured <= 1e-10


def test_c09_jenkins_oracle():
    energy = verify._jenkins_energy_check()
    assert energy.measured <= 0.01
    masing = verify._masing_vs_direct_check()
    assert masing.measured <= 0.005


def test_c10_fixture_modal_trends(run_bundled):
    _, bundle, wall = run_bundled("lapjoint_form")
    cols = read_modal_curves(bundle.files["modal_curves"])
    amp = cols["amplitude_m"]
    ratio = cols["omega_over_lin"]
    damping = cols["damping_ratio"]
    assert amp.max() / amp.min() >= 10.0          # at least one decade
    assert np.diff(ratio).max() <= 1e-12          # softening: non-increasing
    assert np.diff(damping).min() >= -1e-18       # damping: non-decreasing
    assert damping.max() / damping.min() >= 5.0
    assert wall < 600.0


def test_c11_roughness_generator():
    band_limited, std_exact, seeded = verify._roughness_checks()
    assert band_limited.measured <= 1e-10   # of the in-band spectral peak
    assert std_exact.measured <= 1e-12
    assert seeded.measured == 1.0           # bit-equal rerun, seed sensitivity


def test_c12_invariant_suite(run_bundled):
    t0 = time.perf_counter()
    for name in ALL_CONFIGS:
        cfg, bundle, _ = run_bundled(name)
        mu = cfg.solver.mu_friction
        rep = verify.bundle_invariants(bundle, mu)
        assert rep.n_steps == len(bundle.steps) > 0
        for key, limit in INVARIANT_LIMITS.items():
            val = getattr(rep, key)
            assert val <= limit, f"{name}: {key} = {val:.3e} > {limit:g}"
        symmetry, definite = verify.operator_checks(
            bundle.extras["context"].op, "fixture", t0)
        assert symmetry.measured <= 1e-12, name
        assert definite.passed, name
        assert verify.delassus_check(bundle, mu, "fixture", t0).passed, name
