"""Incremental quasi-static solver for the condensed frictional contact problem.

State per contact point: force lam = (lam_n, lam_t1, lam_t2) constrained to
the Coulomb cone, and g = (g_n, g_t1, g_t2) where g_n is the normal gap and
g_t the accumulated tangential relative displacement.  Elasticity ties them
through the condensed operator:  g = g_ex + C* lam, with g_ex carrying the
initial gaps and all external-load/prescribed-motion terms.

Each load increment is solved with an active-set strategy:

1. classify points as separated (open gap, zero force) or closed,
2. optionally predict, assuming everything closed sticks, which closed
   points can be eliminated as sticking (linear constraint d(g) = 0),
3. reduce to the remaining "active" points via the Delassus operator and
   solve the cone-constrained increment with a projected relaxation sweep
   (PJOR), using the previous forces as warm start,
4. verify the assumed sets against the converged result and retry with
   demoted points until consistent.

Normal complementarity is enforced on total gaps, the friction law on the
tangential increments of the current step, which is what makes the response
history-dependent.  With mu = 0 the tangential directions carry no force and
the solver works on the normal components only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

OPEN, STICK, SLIP = 0, 1, 2

_TINY = 1e-300


class ContactSolveError(RuntimeError):
    """The contact iteration failed to reach a consistent converged state."""


@dataclass(frozen=True)
class SolverSettings:
    """Knobs of the incremental contact solver."""

    mu_friction: float
    omega_relax: float = 0.5
    tol_rel: float = 1e-10
    max_iter: int = 50000
    max_set_retries: int = 10
    use_stick_prediction: bool = True
    divergence_window: int = 50
    max_step_halvings: int = 12
    verify_rel: float = 1e-9

    def __post_init__(self):
        if self.mu_friction < 0.0:
            raise ValueError("friction coefficient must be non-negative")
        if not 0.0 < self.omega_relax <= 1.0:
            raise ValueError("relaxation factor must lie in (0, 1]")


@dataclass
class ContactState:
    """Converged interface state after an increment."""

    lam: np.ndarray
    g: np.ndarray
    g_ex: np.ndarray
    status: np.ndarray

    @property
    def n_points(self) -> int:
        return self.status.size

    def copy(self) -> "ContactState":
        return ContactState(self.lam.copy(), self.g.copy(),
                            self.g_ex.copy(), self.status.copy())

    @property
    def normal_force(self) -> float:
        return float(self.lam[0::3].sum())


@dataclass
class StepInfo:
    pjor_iterations: int
    set_retries: int
    n_open: int
    n_stick: int
    n_slip: int


def _comp_idx(points: np.ndarray, comps) -> np.ndarray:
    pts = np.asarray(points, int)
    return (3 * pts[:, None] + np.asarray(comps, int)[None, :]).ravel()


def _project_cone(y: np.ndarray, mu: float) -> np.ndarray:
    """Per-point projection: normal to the half-line, tangential to the disk
    of radius mu times the just-projected normal force."""
    y3 = y.reshape(-1, 3)
    out = np.empty_like(y3)
    out[:, 0] = np.maximum(y3[:, 0], 0.0)
    r = np.hypot(y3[:, 1], y3[:, 2])
    radius = mu * out[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > radius, np.where(r > 0.0, radius / np.where(r > 0, r, 1.0), 0.0), 1.0)
    out[:, 1] = y3[:, 1] * scale
    out[:, 2] = y3[:, 2] * scale
    return out.ravel()


def _block_frobenius(g_mat: np.ndarray, block: int) -> np.ndarray:
    n = g_mat.shape[0] // block
    rho = np.empty(n)
    for j in range(n):
        sl = slice(block * j, block * (j + 1))
        rho[j] = np.sqrt((g_mat[sl, sl] ** 2).sum())
    return rho


def _scaled_spectral_estimate(g_mat: np.ndarray, eps0: np.ndarray) -> float:
    """Upper Rayleigh estimate of lam_max of diag(sqrt(eps0)) G diag(sqrt(eps0))."""
    d = np.sqrt(eps0)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(eps0.size)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(60):
        w = d * (g_mat @ (d * v))
        lam_new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w <= _TINY:
            return 0.0
        v = w / norm_w
        if abs(lam_new - lam) <= 1e-3 * abs(lam_new):
            return abs(lam_new)
        lam = lam_new
    return abs(lam)


def pjor_solve(g_mat: np.ndarray, c_vec: np.ndarray, x0: np.ndarray,
               settings: SolverSettings, block: int = 3):
    """Projected relaxation sweeps for  -(G x + c) in N_C(x).

    ``block`` is 3 for cone-constrained points and 1 for normal-only
    problems (projection onto the non-negative half-line).  The per-point
    step is omega over the Frobenius norm of the diagonal block, globally
    rescaled by a spectral estimate so strongly coupled operators still
    contract; a divergence monitor halves the steps as a last resort.
    Returns (x, iterations).
    """
    n = c_vec.size
    if n == 0:
        return np.zeros(0), 0
    if g_mat.shape != (n, n) or n % block:
        raise ValueError("inconsistent PJOR system dimensions")
    rho = _block_frobenius(g_mat, block)
    if (rho <= 0.0).any():
        raise ContactSolveError("singular diagonal block in the contact operator")
    eps0 = np.repeat(1.0 / rho, block)
    lam_hat = _scaled_spectral_estimate(g_mat, eps0)
    eps = settings.omega_relax * eps0 / max(1.0, 1.05 * lam_hat)

    mu = settings.mu_friction
    project = (lambda y: _project_cone(y, mu)) if block == 3 else (
        lambda y: np.maximum(y, 0.0))
    x = project(np.array(x0, float))
    c_scale = np.abs(c_vec).max() if n else 0.0
    halvings = 0
    res_floor = np.inf
    for it in range(1, settings.max_iter + 1):
        x_new = project(x - eps * (g_mat @ x + c_vec))
        res = np.abs(x_new - x).max()
        scale = max(np.abs(x_new).max(), eps.mean() * c_scale)
        if res <= settings.tol_rel * max(scale, _TINY):
            return x_new, it
        x = x_new
        if it % settings.divergence_window == 0:
            # projections make the residual non-monotone; only clear growth
            # over the best level seen indicates an unstable step size
            grew = not np.isfinite(res) or res > 4.0 * res_floor
            if grew:
                halvings += 1
                if halvings > settings.max_step_halvings:
                    raise ContactSolveError(
                        "projected iteration diverges; contact operator "
                        "appears indefinite"
                    )
                eps *= 0.5
                x = project(np.array(x0, float))
            elif res < res_floor:
                res_floor = res
    raise ContactSolveError(
        f"projected iteration did not converge in {settings.max_iter} sweeps"
    )


def classify_sets(state: ContactState):
    """Split points into separated and closed.

    Separated means strictly open gap with zero normal force; a grazing
    point (zero gap, zero force) stays in the closed set so it can pick up
    load without a set change.
    """
    g_n = state.g[0::3]
    lam_n = state.lam[0::3]
    sep = np.flatnonzero((g_n > 0.0) & (lam_n == 0.0))
    closed = np.flatnonzero(~((g_n > 0.0) & (lam_n == 0.0)))
    return sep, closed


def _cached_cho(op, idx: np.ndarray, cache: dict | None):
    key = idx.tobytes()
    if cache is not None and key in cache:
        return cache[key]
    factor = sla.cho_factor(op.sub(idx, idx))
    if cache is not None:
        cache[key] = factor
    return factor


def predict_stick(op, state: ContactState, closed: np.ndarray,
                  dg_ex: np.ndarray, settings: SolverSettings,
                  cache: dict | None = None):
    """Predict which closed points stick through the increment.

    Assumes every closed point keeps its gap and tangential motion frozen,
    solves the resulting linear system for the force increments, and keeps
    as stick candidates the points that were not slipping at the previous
    level and whose predicted forces stay strictly inside the friction cone
    (strictly compressed when mu = 0).  The rest become active and are
    handed to the cone solver.
    """
    mu = settings.mu_friction
    comps = (0, 1, 2) if mu > 0.0 else (0,)
    idx = _comp_idx(closed, comps)
    factor = _cached_cho(op, idx, cache)
    lam_pre = state.lam[idx] - sla.cho_solve(factor, dg_ex[idx])
    if mu > 0.0:
        ln = lam_pre[0::3]
        lt = np.hypot(lam_pre[1::3], lam_pre[2::3])
        ok = (ln > 0.0) & (lt < mu * ln) & (state.status[closed] != SLIP)
    else:
        ok = lam_pre > 0.0
    return closed[ok], closed[~ok]


def build_delassus(op, active: np.ndarray, stick: np.ndarray,
                   dg_ex: np.ndarray, settings: SolverSettings,
                   cache: dict | None = None):
    """Eliminate the sticking points from the increment equations.

    Returns (G, c, cone_idx, con_idx, con_factor, cross) with
    d(g)[cone] = G d(lam)[cone] + c after substituting the stick rows.
    """
    comps = (0, 1, 2) if settings.mu_friction > 0.0 else (0,)
    cone = _comp_idx(active, comps)
    con = _comp_idx(stick, comps)
    g_cc = op.sub(cone, cone)
    if con.size:
        factor = _cached_cho(op, con, cache)
        cross = op.sub(con, cone)
        sol = sla.cho_solve(factor, np.column_stack([cross, dg_ex[con]]))
        g_red = g_cc - cross.T @ sol[:, :-1]
        c_red = dg_ex[cone] - cross.T @ sol[:, -1]
    else:
        factor, cross = None, None
        g_red = g_cc
        c_red = dg_ex[cone]
    g_red = 0.5 * (g_red + g_red.T)
    return g_red, c_red, cone, con, factor, cross


def _statuses(lam: np.ndarray, mu: float) -> np.ndarray:
    ln = lam[0::3]
    status = np.full(ln.size, OPEN, int)
    closed = ln > 0.0
    if mu > 0.0:
        lt = np.hypot(lam[1::3], lam[2::3])
        slip = closed & (lt >= mu * ln * (1.0 - 1e-9))
        status[closed & ~slip] = STICK
        status[slip] = SLIP
    else:
        status[closed] = SLIP  # frictionless closed points resist no shear
    return status


def initial_state(op, g_ex0: np.ndarray) -> ContactState:
    """Virgin state: zero forces, gaps equal to the external offsets."""
    g_ex0 = np.asarray(g_ex0, float)
    if g_ex0.size != 3 * op.n_points:
        raise ValueError("offset vector does not match the contact grid")
    if g_ex0[0::3].min() < -1e-12 * max(np.abs(g_ex0).max(), _TINY):
        raise ValueError("initial state must be penetration-free")
    lam = np.zeros_like(g_ex0)
    return ContactState(lam=lam, g=g_ex0.copy(), g_ex=g_ex0.copy(),
                        status=_statuses(lam, 0.0))


def step_increment(op, state: ContactState, g_ex_new: np.ndarray,
                   settings: SolverSettings, cache: dict | None = None):
    """Advance the interface to the new external offsets.

    Returns (new_state, StepInfo).  Raises ContactSolveError if the active
    set does not settle within the retry budget or the cone solver fails.
    """
    g_ex_new = np.asarray(g_ex_new, float)
    mu = settings.mu_friction
    dg_ex = g_ex_new - state.g_ex
    sep, closed = classify_sets(state)

    if settings.use_stick_prediction and closed.size:
        stick, active = predict_stick(op, state, closed, dg_ex, settings, cache)
    else:
        stick = np.zeros(0, int)
        active = closed

    total_iters = 0
    for retry in range(settings.max_set_retries + 1):
        g_red, c_red, cone, con, factor, cross = build_delassus(
            op, active, stick, dg_ex, settings, cache)
        if cone.size:
            x0 = state.lam[cone]
            # totals form: gap complementarity acts on g_old + increment
            c_tot = c_red - g_red @ x0
            block = 3 if mu > 0.0 else 1
            c_tot[0::block] += state.g[_comp_idx(active, (0,))]
            x, iters = pjor_solve(g_red, c_tot, x0, settings, block=block)
            total_iters += iters
            d_lam_cone = x - x0
        else:
            x = np.zeros(0)
            d_lam_cone = x
        lam_new = state.lam.copy()
        if cone.size:
            lam_new[cone] = x
        if con.size:
            rhs = dg_ex[con].copy()
            if cone.size:
                rhs += cross @ d_lam_cone
            lam_new[con] += -sla.cho_solve(factor, rhs)
        g_new = g_ex_new + op.matvec(lam_new)

        # verify the assumed sets against the converged increment
        f_tol = settings.verify_rel * max(np.abs(lam_new).max(), _TINY)
        g_tol = settings.verify_rel * max(np.abs(g_new).max(), _TINY)
        bad_sep = sep[g_new[3 * sep] < -g_tol] if sep.size else sep
        if stick.size:
            ln = lam_new[3 * stick]
            if mu > 0.0:
                lt = np.hypot(lam_new[3 * stick + 1], lam_new[3 * stick + 2])
                bad = (ln < -f_tol) | (lt > mu * ln + f_tol)
            else:
                bad = ln < -f_tol
            bad_stick = stick[bad]
        else:
            bad_stick = stick
        if bad_sep.size == 0 and bad_stick.size == 0:
            new_state = ContactState(
                lam=lam_new, g=g_new, g_ex=g_ex_new.copy(),
                status=_statuses(lam_new, mu),
            )
            # separated points carry no force by construction; make it exact
            open_pts = np.flatnonzero(new_state.status == OPEN)
            new_state.lam[_comp_idx(open_pts, (0, 1, 2))] = 0.0
            info = StepInfo(
                pjor_iterations=total_iters, set_retries=retry,
                n_open=int((new_state.status == OPEN).sum()),
                n_stick=int((new_state.status == STICK).sum()),
                n_slip=int((new_state.status == SLIP).sum()),
            )
            return new_state, info
        active = np.unique(np.concatenate([active, bad_sep, bad_stick]))
        sep = np.setdiff1d(sep, bad_sep, assume_unique=True)
        stick = np.setdiff1d(stick, bad_stick, assume_unique=True)
    raise ContactSolveError(
        f"active set did not settle within {settings.max_set_retries} retries"
    )


class ContactSolver:
    """Stateful convenience wrapper: keeps the factor cache across increments."""

    def __init__(self, op, settings: SolverSettings):
        self.op = op
        self.settings = settings
        self.cache: dict = {}

    def initial_state(self, g_ex0: np.ndarray) -> ContactState:
        return initial_state(self.op, g_ex0)

    def step(self, state: ContactState, g_ex_new: np.ndarray):
        return step_increment(self.op, state, g_ex_new, self.settings, self.cache)

    def march(self, state: ContactState, g_ex_seq):
        """Run a sequence of offsets; returns (final_state, [StepInfo])."""
        infos = []
        for g_ex in g_ex_seq:
            state, info = self.step(state, g_ex)
            infos.append(info)
        return state, infos


def run_preload(op, g_ex_seq, settings: SolverSettings,
                state0: ContactState | None = None):
    """March the virgin interface through a preload ramp.

    ``g_ex_seq`` is an iterable of external offset vectors, the first of
    which defines the virgin state when ``state0`` is not given.
    """
    seq = iter(g_ex_seq)
    solver = ContactSolver(op, settings)
    if state0 is None:
        state0 = solver.initial_state(next(seq))
    return solver.march(state0, seq)
