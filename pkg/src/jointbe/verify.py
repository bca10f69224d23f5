"""Built-in verification suites with machine-readable reports.

Three suites group the checks by the kind of reference they compare
against:

``analytic``
    closed-form contact benchmarks (element self-influence, Hertz sphere,
    Cattaneo-Mindlin partial slip, flat punch) plus the spectral properties
    of the roughness generator;
``oracle``
    brute-force and algebraic-identity references (projected iteration vs.
    exhaustive enumeration, condensation route equivalence, reduction
    exactness, the linear interface hook, and the single-point
    spring-slider hysteresis oracle);
``fixture``
    trend and invariant properties of full runs on the built-in lap-joint
    fixture, in both the contact-grid and the node-collocated mode.

Every check returns a :class:`CheckResult`; :func:`verify_suite` executes a
suite and :func:`report` renders the results as a JSON-ready dict.
"""
from __future__ import annotations

import tempfile
import time
from dataclasses import asdict, dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .config import RunConfig
from .contact import (ContactSolver, ContactState, SolverSettings,
                      build_delassus, initial_state, pjor_solve, run_preload)
from .coupling import condense_static
from .driver import run_case
from .halfspace import BeGrid, ElasticHalfSpace, self_compliance_normal
from .qsma import (linear_interface_stepper, linearized_modes, loop_energy,
                   masing_cycle, modal_load_sweep, modal_properties)
from .results import ResultBundle
from .rom import ReducedModel, craig_bampton
from .topography import RoughnessSpec, synthesize_roughness

SUITE_NAMES = ("analytic", "oracle", "fixture")


@dataclass
class CheckResult:
    """Outcome of one verification check."""

    suite: str
    name: str
    passed: bool
    measured: float
    limit: str
    runtime_s: float
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def verify_suite(name: str) -> list[CheckResult]:
    """Run one verification suite and return its check results."""
    suites = {
        "analytic": _analytic_checks,
        "oracle": _oracle_checks,
        "fixture": _fixture_checks,
    }
    try:
        runner = suites[name]
    except KeyError:
        raise ValueError(
            f"unknown verification suite {name!r}; expected one of "
            f"{', '.join(SUITE_NAMES)}") from None
    return runner()


def report(results: list[CheckResult]) -> dict:
    """Machine-readable summary of a list of check results."""
    return {
        "n_checks": len(results),
        "n_passed": sum(r.passed for r in results),
        "passed": all(r.passed for r in results),
        "checks": [r.as_dict() for r in results],
    }


def format_results(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        verdict = "PASS" if r.passed else "FAIL"
        lines.append(f"{verdict} [{r.suite}] {r.name}: measured="
                     f"{r.measured:.3e} (limit {r.limit}) "
                     f"[{r.runtime_s:.1f}s]{' ' + r.detail if r.detail else ''}")
    return "\n".join(lines)


def _check(suite, name, measured, passed, limit, t0, detail="") -> CheckResult:
    return CheckResult(suite=suite, name=name, passed=bool(passed),
                       measured=float(measured), limit=limit,
                       runtime_s=time.perf_counter() - t0, detail=detail)


def _run_inline(text: str) -> ResultBundle:
    """Run a config given as INI text, writing artifacts to a temp dir."""
    tmp = Path(tempfile.mkdtemp(prefix="jointbe_verify_"))
    path = tmp / "case.cfg"
    path.write_text(text.format(out=tmp / "out"))
    return run_case(RunConfig.load(path))


# ---------------------------------------------------------------------------
# analytic suite
# ---------------------------------------------------------------------------

_HERTZ_CFG = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3

[grid]
nx = 52
ny = 52
pitch_m = 1.15e-4

[topography]
sphere_radius_m = 50e-3
depth_cutoff_m = 1.2e-4

[fixture]
kind = rigid

[preload]
approach_m = 1.25e-4
steps = 20

[solver]
mu_friction = 0.0

[output]
directory = {out}
"""

_CATTANEO_CFG = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3

[grid]
nx = 40
ny = 40
pitch_m = 2.5e-4

[topography]
sphere_radius_m = 50e-3

[fixture]
kind = rigid

[preload]
approach_m = 2.45e-4
steps = 20

[tangential]
force_fraction = 0.5
steps = 8

[solver]
mu_friction = 0.5

[output]
directory = {out}
"""

_PUNCH_CFG = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3

[grid]
nx = 32
ny = 32
pitch_m = 2.5e-4

[fixture]
kind = rigid

[preload]
target_force_n = 1000.0
steps = 10

[solver]
mu_friction = 0.0

[output]
directory = {out}
"""


def _composite_modulus(e_young: float, nu: float) -> float:
    """Pair modulus of two identical half-spaces: E / (4 (1 - nu^2))."""
    return e_young / (4.0 * (1.0 - nu ** 2))


def _check_self_influence() -> CheckResult:
    t0 = time.perf_counter()
    e_young, nu, half = 194e9, 0.2854, 0.25e-3
    hs = ElasticHalfSpace(e_young=e_young, nu_poisson=nu)
    got = self_compliance_normal(half, half, hs)
    want = 4.0 * (1.0 - nu ** 2) * np.log(1.0 + np.sqrt(2.0)) / (
        np.pi * e_young * half)
    err = abs(got - want) / want
    return _check("analytic", "self_influence_closed_form", err,
                  err <= 1e-12, "rel err <= 1e-12", t0)


def _hertz_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    bundle = _run_inline(_HERTZ_CFG)
    state = bundle.preload_state
    ctx = bundle.extras["context"]
    cell = ctx.grid.cell_area
    radius, approach = 50e-3, 1.25e-4
    e_c = _composite_modulus(2.1e11, 0.3)
    a_want = np.sqrt(radius * approach)
    p_total = (4.0 / 3.0) * e_c * np.sqrt(radius) * approach ** 1.5
    p0_want = 3.0 * p_total / (2.0 * np.pi * a_want ** 2)

    n_closed = int((state.lam[0::3] > 0.0).sum())
    a_got = np.sqrt(n_closed * cell / np.pi)
    p0_got = state.lam[0::3].max() / cell
    err_a = abs(a_got - a_want) / a_want
    err_p = abs(p0_got - p0_want) / p0_want
    out = [
        _check("analytic", "hertz_contact_radius", err_a, err_a <= 0.02,
               "rel err <= 2%", t0,
               detail=f"a={a_got:.4e} m vs {a_want:.4e} m"),
    ]
    out.append(_check("analytic", "hertz_peak_pressure", err_p,
                      err_p <= 0.02 and out[0].runtime_s < 60.0,
                      "rel err <= 2% within 60 s", t0))
    return out


def _cattaneo_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    bundle = _run_inline(_CATTANEO_CFG)
    state = bundle.final_state
    ctx = bundle.extras["context"]
    cell = ctx.grid.cell_area
    radius, approach, mu = 50e-3, 2.45e-4, 0.5
    e_c = _composite_modulus(2.1e11, 0.3)
    a_want = np.sqrt(radius * approach)
    p_total = bundle.preload_state.normal_force
    q_total = abs(state.lam[1::3].sum())
    c_want = a_want * (1.0 - q_total / (mu * p_total)) ** (1.0 / 3.0)

    from .contact import STICK
    n_stick = int((state.status == STICK).sum())
    c_got = np.sqrt(n_stick * cell / np.pi)
    err_c = abs(c_got - c_want) / c_want

    # slip-annulus tangential tractions against mu times the Hertz pressure
    p0 = 3.0 * (4.0 / 3.0 * e_c * np.sqrt(radius) * approach ** 1.5) / (
        2.0 * np.pi * a_want ** 2)
    from .contact import SLIP
    slip = state.status == SLIP
    r = np.hypot(*bundle.points_xy[slip].T)
    lt = np.hypot(state.lam[1::3][slip], state.lam[2::3][slip]) / cell
    p_hz = p0 * np.sqrt(np.maximum(1.0 - (r / a_want) ** 2, 0.0))
    err_t = np.abs(lt - mu * p_hz).max() / (mu * p0)
    out = [
        _check("analytic", "cattaneo_stick_radius", err_c, err_c <= 0.05,
               "rel err <= 5%", t0,
               detail=f"c={c_got:.4e} m vs {c_want:.4e} m"),
    ]
    out.append(_check("analytic", "cattaneo_slip_tractions", err_t,
                      err_t <= 0.05 and out[0].runtime_s < 120.0,
                      "max |q_t - mu p| <= 5% of mu p0 within 120 s", t0))
    return out


def _punch_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    bundle = _run_inline(_PUNCH_CFG)
    state = bundle.preload_state
    err_force = abs(state.normal_force - 1000.0) / 1000.0
    # surface displacement under the punch: the compliance response g - g_ex
    u = (state.g - state.g_ex)[0::3]
    xy = bundle.points_xy
    pitch = 2.5e-4
    interior = ((xy[:, 0] > xy[:, 0].min() + 0.5 * pitch)
                & (xy[:, 0] < xy[:, 0].max() - 0.5 * pitch)
                & (xy[:, 1] > xy[:, 1].min() + 0.5 * pitch)
                & (xy[:, 1] < xy[:, 1].max() - 0.5 * pitch))
    ui = u[interior]
    err_u = (ui.max() - ui.min()) / abs(ui.mean())
    return [
        _check("analytic", "flat_punch_force_balance", err_force,
               err_force <= 1e-8, "rel err <= 1e-8", t0),
        _check("analytic", "flat_punch_uniform_displacement", err_u,
               err_u <= 0.01, "spread <= 1% away from edge rows", t0),
    ]


def _roughness_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    grid = BeGrid(nx=96, ny=96, pitch_x=1e-4, pitch_y=1e-4,
                  origin_x=0.0, origin_y=0.0)
    spec = RoughnessSpec(sigma=1.5e-6, lambda_min=8e-4, lambda_max=3e-3,
                         seed=7)
    h = synthesize_roughness(grid, spec).heights
    h2 = h.reshape(grid.ny, grid.nx)
    fx = np.fft.fftfreq(grid.nx, d=grid.pitch_x)
    fy = np.fft.fftfreq(grid.ny, d=grid.pitch_y)
    f = np.hypot(*np.meshgrid(fx, fy))
    band = (f >= 1.0 / spec.lambda_max - 1e-12) & (
        f <= 1.0 / spec.lambda_min + 1e-12)
    spectrum = np.fft.fft2(h2)
    leak = np.abs(spectrum[~band]).max() / np.abs(spectrum[band]).max()
    err_std = abs(np.std(h) - spec.sigma) / spec.sigma
    same = synthesize_roughness(grid, spec).heights
    other = synthesize_roughness(
        grid, RoughnessSpec(sigma=spec.sigma, lambda_min=spec.lambda_min,
                            lambda_max=spec.lambda_max, seed=8)).heights
    det = float((h == same).all() and not (h == other).all())
    return [
        _check("analytic", "roughness_band_limited", leak, leak <= 1e-10,
               "out-of-band spectrum <= 1e-10 of band peak", t0),
        _check("analytic", "roughness_std_exact", err_std, err_std <= 1e-12,
               "rel err <= 1e-12", t0),
        _check("analytic", "roughness_seed_deterministic", det, det == 1.0,
               "same seed bit-equal, different seed differs", t0),
    ]


def _analytic_checks() -> list[CheckResult]:
    out = [_check_self_influence()]
    out += _roughness_checks()
    out += _hertz_checks()
    out += _cattaneo_checks()
    out += _punch_checks()
    return out


# ---------------------------------------------------------------------------
# oracle suite
# ---------------------------------------------------------------------------

def _lcp_enumeration(g, c, tol=1e-12):
    """Reference LCP solution by trying every closed subset (SPD: unique)."""
    n = c.size
    for r in range(n + 1):
        for subset in combinations(range(n), r):
            s = np.array(subset, int)
            x = np.zeros(n)
            if s.size:
                x[s] = np.linalg.solve(g[np.ix_(s, s)], -c[s])
                if (x[s] < -tol * max(np.abs(x).max(), 1.0)).any():
                    continue
            w = g @ x + c
            if (w < -tol * max(np.abs(w).max(), 1.0)).any():
                continue
            return x
    raise AssertionError("enumeration found no LCP solution")


def _pjor_enumeration_check() -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(1234)
    settings = SolverSettings(mu_friction=0.0, tol_rel=1e-12)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        a = rng.standard_normal((n, n))
        g = a @ a.T + n * np.eye(n)
        d = np.sqrt(np.diag(g))
        g = g / np.outer(d, d)      # unit diagonal: normalized data
        c = rng.standard_normal(n)
        x_ref = _lcp_enumeration(g, c)
        x_got, _ = pjor_solve(g, c, np.zeros(n), settings, block=1)
        worst = max(worst, np.abs(x_got - x_ref).max())
    return _check("oracle", "pjor_vs_enumeration", worst,
                  worst <= 1e-8 and time.perf_counter() - t0 < 10.0,
                  "max abs err <= 1e-8 on 200 instances within 10 s", t0)


def _point_compliance(czz, cxx, cyy):
    from .halfspace import ComplianceMatrix
    n = np.shape(czz)[0]
    return ComplianceMatrix(
        czz=np.asarray(czz, float), cxx=np.asarray(cxx, float),
        cyy=np.asarray(cyy, float), points=np.zeros((n, 2)),
        point_index=np.arange(n), cell_area=1.0)


def _random_spd(n, rng, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def _condensation_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    settings = SolverSettings(mu_friction=0.4, tol_rel=1e-12)
    worst_direct = 0.0
    worst_schur = 0.0
    for _ in range(30):
        n_pts = int(rng.integers(2, 6))
        nb = int(rng.integers(6, 13))
        k_bb = _random_spd(nb, rng, scale=1e6)
        reduced = ReducedModel(
            k_red=k_bb, m_red=np.eye(nb), r_matrix=np.eye(nb),
            boundary_dofs=np.arange(nb), omega_fixed=np.zeros(0))
        w = sp.csr_matrix(rng.standard_normal((nb, 3 * n_pts)))
        comp = _point_compliance(_random_spd(n_pts, rng, 1e-6),
                                 _random_spd(n_pts, rng, 1e-6),
                                 _random_spd(n_pts, rng, 1e-6))
        op = condense_static(reduced, w, comp)

        # route A: explicit boundary solve; route B: condensed operator
        lam = rng.standard_normal(3 * n_pts)
        f_b = rng.standard_normal(nb)
        g_ex = rng.standard_normal(3 * n_pts) * 1e-6
        q_b = np.linalg.solve(k_bb, f_b + w @ lam)
        g_a = g_ex + comp.dense() @ lam + w.T @ q_b
        g_b = g_ex + op.gap_offset(f_b) + op.matvec(lam)
        scale = np.abs(g_a).max()
        worst_direct = max(worst_direct, np.abs(g_a - g_b).max() / scale)

        # route C: stick-eliminated Schur identity on a random point split
        perm = rng.permutation(n_pts)
        n_stick = int(rng.integers(1, n_pts))
        stick, active = np.sort(perm[:n_stick]), np.sort(perm[n_stick:])
        dg_ex = rng.standard_normal(3 * n_pts) * 1e-6
        g_red, c_red, cone, con, _, _ = build_delassus(
            op, active, stick, dg_ex, settings)
        x = rng.standard_normal(cone.size)
        d_lam = np.zeros(3 * n_pts)
        d_lam[cone] = x
        d_lam[con] = -np.linalg.solve(
            op.sub(con, con), op.sub(con, cone) @ x + dg_ex[con])
        dg_full = op.matvec(d_lam) + dg_ex
        dg_schur = g_red @ x + c_red
        scale = max(np.abs(dg_full[cone]).max(), 1e-300)
        worst_schur = max(worst_schur,
                          np.abs(dg_full[cone] - dg_schur).max() / scale)
    out = [
        _check("oracle", "condensation_direct_vs_condensed", worst_direct,
               worst_direct <= 1e-10, "rel err <= 1e-10", t0),
        _check("oracle", "condensation_schur_identity", worst_schur,
               worst_schur <= 1e-10, "rel err <= 1e-10", t0),
    ]
    return out


def _reduction_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    from .minifem import SolidMaterial, build_lap_joint
    mat = SolidMaterial(e_young=2.1e11, nu_poisson=0.3, density=7800.0)
    joint = build_lap_joint(mat, n_len=6, n_wid=2, n_thk=1, n_overlap=2,
                            elem_size=(5e-3, 5e-3, 5e-3))
    k = joint.k_free.toarray()
    m = joint.m_free.toarray()
    # boundary: all interface-pair DOFs
    b = np.array(sorted(
        joint.free_index(int(n), int(c))
        for nl, nu in joint.pairs for n in (nl, nu) for c in range(3)))
    n = k.shape[0]
    ni = n - b.size

    reduced = craig_bampton(k, m, b, n_modes=ni, method="dense")
    nb = b.size
    # static exactness: reduced boundary compliance vs full-model compliance
    x_full = np.linalg.solve(k, np.eye(n)[:, b])[b]
    x_red = np.linalg.solve(reduced.k_red[:nb, :nb], np.eye(nb))
    err_static = np.abs(x_red - x_full).max() / np.abs(x_full).max()
    # spectral exactness: the complete basis preserves every eigenvalue
    w_full = sla.eigh(k, m, eigvals_only=True)
    w_red = sla.eigh(reduced.k_red, reduced.m_red, eigvals_only=True)
    err_eig = np.abs(np.sort(w_red) - np.sort(w_full)).max() / w_full.max()
    return [
        _check("oracle", "reduction_static_compliance", err_static,
               err_static <= 1e-10, "rel err <= 1e-10", t0),
        _check("oracle", "reduction_full_basis_eigenvalues", err_eig,
               err_eig <= 1e-9, "rel err <= 1e-9", t0),
    ]


def _single_point_system(mu=0.3):
    """One contact point on a 3-DOF structure with closed-form behaviour."""
    kx, ky, kz, mass = 5.0e6, 6.0e6, 8.0e6, 2.0
    cn, ct = 1.0e-7, 2.0e-7
    delta = 2.25e-4
    reduced = ReducedModel(
        k_red=np.diag([kx, ky, kz]), m_red=mass * np.eye(3),
        r_matrix=np.eye(3), boundary_dofs=np.arange(3),
        omega_fixed=np.zeros(0))
    w = np.zeros((3, 3))
    w[2, 0] = 1.0   # normal along z
    w[0, 1] = 1.0
    w[1, 2] = 1.0
    w_b = sp.csr_matrix(w)
    comp = _point_compliance([[cn]], [[ct]], [[ct]])
    condensed = condense_static(reduced, w_b, comp)
    settings = SolverSettings(mu_friction=mu, tol_rel=1e-12)
    state0, _ = run_preload(
        condensed, [np.zeros(3), np.array([-delta, 0.0, 0.0])], settings)
    return dict(reduced=reduced, comp=comp, w_b=w_b, condensed=condensed,
                settings=settings, state0=state0, cn=cn, ct=ct, delta=delta,
                mass=mass, kx=kx)


def _qsma_linear_checks() -> list[CheckResult]:
    t0 = time.perf_counter()
    sys = _single_point_system()
    mode = linearized_modes(sys["reduced"], sys["w_b"], sys["comp"],
                            sys["state0"])[0]
    record = modal_load_sweep(
        sys["reduced"], sys["condensed"], mode, sys["state0"],
        alpha_max=10.0, steps=50,
        stepper=linear_interface_stepper(sys["condensed"]))
    omega, damping = modal_properties(record, 10.0)
    err_w = abs(omega - mode.omega_lin) / mode.omega_lin
    return [
        _check("oracle", "linear_hook_frequency", err_w, err_w <= 1e-3,
               "rel err <= 0.1%", t0),
        _check("oracle", "linear_hook_damping", abs(damping),
               abs(damping) <= 1e-10, "D <= 1e-10", t0),
    ]


def _jenkins_energy_check() -> CheckResult:
    """Imposed-displacement cycle on a spring-slider contact point."""
    t0 = time.perf_counter()
    sys = _single_point_system()
    op, settings = sys["condensed"], sys["settings"]
    # the structural x-spring and the tangential interface compliance act in
    # series under an imposed offset; the slider strength is mu * lam_n
    k_series = 1.0 / (sys["ct"] + 1.0 / sys["kx"])
    f_s = settings.mu_friction * sys["state0"].lam[0]
    x_hat = 4.0 * f_s / k_series    # well past the slip knee
    n_q = 120                       # steps per quarter-cycle

    solver = ContactSolver(op, settings)
    state = sys["state0"].copy()
    path = np.concatenate([
        np.linspace(0.0, x_hat, n_q + 1)[1:],
        np.linspace(x_hat, -x_hat, 2 * n_q + 1)[1:],
        np.linspace(-x_hat, x_hat, 2 * n_q + 1)[1:],
    ])
    xs, fs = [0.0], [float(state.lam[1])]
    for x in path:
        g_ex = sys["state0"].g_ex.copy()
        g_ex[1] -= x
        state, _ = solver.step(state, g_ex)
        xs.append(float(x))
        fs.append(float(state.lam[1]))
    xs, fs = np.array(xs), np.array(fs)
    loop = slice(n_q, n_q + 4 * n_q + 1)   # one closed cycle after first load
    e_got = abs(np.sum(0.5 * (fs[loop][:-1] + fs[loop][1:])
                       * np.diff(xs[loop])))
    e_want = 4.0 * f_s * (x_hat - f_s / k_series)
    err = abs(e_got - e_want) / e_want
    return _check("oracle", "jenkins_cycle_energy", err, err <= 0.01,
                  "rel err <= 1% at >= 100 steps per quarter-cycle", t0,
                  detail=f"E={e_got:.6e} vs {e_want:.6e}")


def _masing_vs_direct_check() -> CheckResult:
    """Masing-reconstructed loop vs. a directly marched modal cycle."""
    t0 = time.perf_counter()
    sys = _single_point_system()
    reduced, op = sys["reduced"], sys["condensed"]
    mode = linearized_modes(reduced, sys["w_b"], sys["comp"], sys["state0"])[0]
    state0 = sys["state0"]
    # slip onset load scale for the x-mode, from the series stiffness model
    alpha_star = sys["settings"].mu_friction * state0.lam[0] * sys["kx"] \
        * (sys["ct"] + 1.0 / sys["kx"]) / np.sqrt(sys["mass"])
    alpha_hat = 2.5 * alpha_star

    record = modal_load_sweep(reduced, op, mode, state0, alpha_hat,
                              steps=200, settings=sys["settings"])
    e_masing = abs(loop_energy(*masing_cycle(record, alpha_hat)))

    f_mod = reduced.m_red @ mode.phi_lin
    dg_mod = op.gap_offset(f_mod)
    phi = mode.phi_lin
    solver = ContactSolver(op, sys["settings"])
    state = state0.copy()
    n_q = 150
    path = np.concatenate([
        np.linspace(0.0, alpha_hat, n_q + 1)[1:],
        np.linspace(alpha_hat, -alpha_hat, 2 * n_q + 1)[1:],
        np.linspace(-alpha_hat, alpha_hat, 2 * n_q + 1)[1:],
    ])
    alphas, qs = [0.0], [0.0]
    for a in path:
        state, _ = solver.step(state, state0.g_ex + a * dg_mod)
        d_lam = state.lam - state0.lam
        dq = op.boundary_disp(d_lam, a * f_mod)
        alphas.append(float(a))
        qs.append(float(phi @ (reduced.m_red @ dq)))
    alphas, qs = np.array(alphas), np.array(qs)
    loop = slice(n_q, 5 * n_q + 1)
    e_direct = abs(np.sum(0.5 * (alphas[loop][:-1] + alphas[loop][1:])
                          * np.diff(qs[loop])))
    err = abs(e_masing - e_direct) / e_direct
    return _check("oracle", "masing_vs_direct_cycle", err, err <= 0.005,
                  "loop area rel err <= 0.5%", t0,
                  detail=f"E={e_masing:.6e} vs {e_direct:.6e}")


def _oracle_checks() -> list[CheckResult]:
    out = [_pjor_enumeration_check()]
    out += _condensation_checks()
    out += _reduction_checks()
    out += _qsma_linear_checks()
    out.append(_jenkins_energy_check())
    out.append(_masing_vs_direct_check())
    return out


# ---------------------------------------------------------------------------
# fixture suite and the shared invariant checker
# ---------------------------------------------------------------------------

_FORM_FIXTURE_CFG = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3
density_kg_m3 = 7800.0

[grid]
nx = 24
ny = 20
pitch_m = 1.0e-3

[topography]
crown_peak_to_peak_m = 1.0e-5
depth_cutoff_m = 6.0e-6

[fixture]
kind = lap_joint
n_modes = 10
n_length_elems = 20
n_width_elems = 4
n_thickness_elems = 2
n_overlap_elems = 5
elem_size_m = 5.0e-3

[preload]
target_force_n = 5000.0
steps = 20

[qsma]
n_modes = 1
amplitudes = 600 950 1500 2400 3800 6000
steps_per_ramp = 60

[solver]
mu_friction = 0.3

[output]
directory = {out}
"""

_NODAL_FIXTURE_CFG = """\
[material]
young_modulus_pa = 2.1e11
poisson_ratio = 0.3
density_kg_m3 = 7800.0

[fixture]
kind = lap_joint
n_modes = 10
n_length_elems = 20
n_width_elems = 4
n_thickness_elems = 2
n_overlap_elems = 5
elem_size_m = 5.0e-3
coupling = node_collocated

[preload]
target_force_n = 5000.0
steps = 20

[qsma]
n_modes = 1
amplitudes = 300 480 750 1200 1900 3000
steps_per_ramp = 60

[solver]
mu_friction = 0.3

[output]
directory = {out}
"""


@dataclass
class InvariantReport:
    """Worst normalized residual of each contact invariant over a run."""

    penetration: float = 0.0
    negative_pressure: float = 0.0
    complementarity: float = 0.0
    cone: float = 0.0
    open_point_force: float = 0.0
    force_balance: float = 0.0
    dissipativity: float = 0.0
    n_steps: int = 0

    def worst(self) -> float:
        return max(self.penetration, self.negative_pressure,
                   self.complementarity, self.cone, self.open_point_force,
                   self.force_balance, self.dissipativity)


def state_invariants(op, state: ContactState, mu: float,
                     prev: ContactState | None = None) -> dict:
    """Normalized residuals of the contact laws for one converged state.

    Kinematic residuals are normalized by the larger of the widest open gap
    and the elastic deformation magnitude ``max|g - g_ex|``; normalizing by
    the gaps alone would blow roundoff up to order one on states where every
    point is closed.  Slip dissipativity is normalized by the largest
    traction times the largest slip increment (with a small floor relative
    to the kinematic scale), so stick points whose recomputed slip is pure
    cancellation noise cannot register as spurious violations.
    """
    from .contact import OPEN
    g_n = state.g[0::3]
    lam_n = state.lam[0::3]
    defo = np.abs(state.g - state.g_ex).max()
    g_scale = max(float(g_n.max(initial=0.0)), float(defo), 1e-300)
    l_scale = max(lam_n.max(), 1e-300)
    out = {
        "penetration": max(0.0, -g_n.min()) / g_scale,
        "negative_pressure": max(0.0, -lam_n.min()) / l_scale,
        "complementarity": np.abs(lam_n * g_n).max() / (l_scale * g_scale),
        "force_balance": np.abs(
            state.g - state.g_ex - op.matvec(state.lam)).max() / g_scale,
    }
    lam_t = np.hypot(state.lam[1::3], state.lam[2::3])
    out["cone"] = max(0.0, (lam_t - mu * lam_n).max()) / l_scale
    open_pts = state.status == OPEN
    if open_pts.any():
        lam3 = np.abs(state.lam.reshape(-1, 3)[open_pts])
        out["open_point_force"] = lam3.max() / l_scale
    else:
        out["open_point_force"] = 0.0
    if prev is not None:
        d_gt = (state.g - prev.g).reshape(-1, 3)[:, 1:]
        lt = state.lam.reshape(-1, 3)[:, 1:]
        power = np.einsum("ij,ij->i", lt, d_gt)
        lt_max = float(np.linalg.norm(lt, axis=1).max(initial=0.0))
        s_max = float(np.linalg.norm(d_gt, axis=1).max(initial=0.0))
        scale = lt_max * max(s_max, 1e-8 * g_scale)
        if scale > 0.0:
            out["dissipativity"] = max(0.0, float(power.max())) / scale
        else:
            out["dissipativity"] = 0.0
    else:
        out["dissipativity"] = 0.0
    return out


def bundle_invariants(bundle: ResultBundle, mu: float) -> InvariantReport:
    """Fold the per-step invariants of a full run into worst-case residuals.

    Each recorded phase restarts from a known predecessor: the preload ramp
    from the virgin state, the shear ramp and both hysteresis branches from
    the preload equilibrium, so slip dissipativity can be evaluated across
    every consecutive pair of states.
    """
    ctx = bundle.extras["context"]
    op = ctx.op
    branch = bundle.extras.get("sweep_branch_steps")
    rep = InvariantReport()
    prev_by_phase: dict = {}
    for rec in bundle.steps:
        if rec.phase not in prev_by_phase:
            if rec.phase == "preload":
                prev = initial_state(op, ctx.base_gex)
            else:
                prev = bundle.preload_state
        else:
            prev = prev_by_phase[rec.phase]
            if (branch and rec.phase.startswith("sweep_")
                    and rec.step == branch + 1):
                prev = bundle.preload_state   # second branch restarts
        vals = state_invariants(op, rec.state, mu, prev)
        for key, val in vals.items():
            setattr(rep, key, max(getattr(rep, key), val))
        rep.n_steps += 1
        prev_by_phase[rec.phase] = rec.state
    return rep


def operator_checks(op, suite: str, t0) -> list[CheckResult]:
    """Symmetry/positive-definiteness of the condensed contact operator."""
    if hasattr(op, "c_star"):
        mats = {"c_star": op.c_star}
    else:
        comp = op.compliance
        mats = {"czz": comp.czz, "cxx": comp.cxx, "cyy": comp.cyy}
    asym = 0.0
    min_eig = np.inf
    for mat in mats.values():
        asym = max(asym, np.abs(mat - mat.T).max() / np.abs(mat).max())
        min_eig = min(min_eig, float(sla.eigvalsh(mat)[0]))
    return [
        _check(suite, "operator_symmetry", asym, asym <= 1e-12,
               "rel asymmetry <= 1e-12", t0),
        _check(suite, "operator_positive_definite", min_eig, min_eig > 0.0,
               "smallest eigenvalue > 0", t0),
    ]


def delassus_check(bundle: ResultBundle, mu: float, suite: str, t0
                   ) -> CheckResult:
    """SPD check of the stick-eliminated operator at the final state."""
    from .contact import SLIP, STICK, classify_sets
    state = bundle.final_state
    op = bundle.extras["context"].op
    settings = SolverSettings(mu_friction=mu)
    stick = np.flatnonzero(state.status == STICK)
    slip = np.flatnonzero(state.status == SLIP)
    if slip.size == 0:
        _, closed = classify_sets(state)
        stick, slip = np.zeros(0, int), closed
    g_red, _, _, _, _, _ = build_delassus(
        op, slip, stick, np.zeros_like(state.g), settings)
    min_eig = float(sla.eigvalsh(g_red)[0]) if g_red.size else np.inf
    return _check(suite, "delassus_positive_definite", min_eig, min_eig > 0.0,
                  "smallest eigenvalue > 0 at the final active set", t0)


def trend_checks(bundle: ResultBundle, suite: str, t0) -> list[CheckResult]:
    """Softening / damping-growth trends of the first modal curve."""
    curve = bundle.curves[0]
    ratio = curve.omega_over_lin
    d = curve.damping
    softening = float(np.diff(ratio).max())     # <= 0 when monotone
    d_growth = float(np.diff(d).min())          # >= 0 when monotone
    span = float(d.max() / max(d.min(), 1e-300))
    decade = float(curve.alpha_hat[-1] / curve.alpha_hat[0])
    return [
        _check(suite, "frequency_softening_monotone", softening,
               softening <= 1e-12 and decade >= 10.0,
               "omega ratio non-increasing over >= 1 decade", t0),
        _check(suite, "damping_growth_monotone", d_growth,
               d_growth >= -1e-18 and decade >= 10.0,
               "damping non-decreasing over >= 1 decade", t0),
        _check(suite, "damping_span", span, span >= 5.0,
               "max/min damping >= 5", t0),
    ]


# The contact solver stops on the per-sweep traction increment (tol_rel of
# SolverSettings), so the distance of a converged state from the exact fixed
# point can exceed tol_rel by the contraction factor of the iteration.  The
# kinematic limits below leave that headroom; the remaining laws hold to
# projection exactness or plain roundoff.
_INVARIANT_LIMITS = {
    "penetration": 1e-6,
    "negative_pressure": 1e-12,
    "complementarity": 1e-6,
    "cone": 1e-9,
    "open_point_force": 1e-12,
    "force_balance": 1e-9,
    "dissipativity": 1e-6,
}


def invariant_checks(bundle: ResultBundle, mu: float, suite: str, t0
                     ) -> list[CheckResult]:
    rep = bundle_invariants(bundle, mu)
    out = []
    for key, limit in _INVARIANT_LIMITS.items():
        val = getattr(rep, key)
        out.append(_check(suite, f"invariant_{key}", val, val <= limit,
                          f"normalized residual <= {limit:g} on "
                          f"{rep.n_steps} steps", t0))
    return out


def _fixture_checks() -> list[CheckResult]:
    out = []
    t0 = time.perf_counter()
    form = _run_inline(_FORM_FIXTURE_CFG)
    out += trend_checks(form, "fixture", t0)
    out += invariant_checks(form, 0.3, "fixture", t0)
    out += operator_checks(form.extras["context"].op, "fixture", t0)
    out.append(delassus_check(form, 0.3, "fixture", t0))

    t1 = time.perf_counter()
    nodal = _run_inline(_NODAL_FIXTURE_CFG)
    ratio = nodal.curves[0].omega_over_lin
    softening = float(np.diff(ratio).max())
    out.append(_check("fixture", "node_collocated_softening", softening,
                      softening <= 1e-12 and ratio.max() <= 1.0 + 1e-9,
                      "omega ratio <= 1 and non-increasing", t1))
    out += invariant_checks(nodal, 0.3, "fixture", t1)
    return out
