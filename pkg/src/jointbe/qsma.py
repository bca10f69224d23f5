"""Quasi-static modal analysis of the preloaded, frictional structure.

Starting from a converged preload state, a modal load pattern f = M φ α is
ramped quasi-statically and the modal displacement q_mod = φᵀ M Δq is
recorded along both load directions.  Amplitude-dependent frequency and
damping follow from the secant stiffness of the two branch tips and from
the energy dissipated over one hysteresis cycle, which is constructed from
the initial loading curve with the Masing rules.

The linearization mode shapes come from the tangent eigenproblem around the
static equilibrium: separated contact points contribute nothing, closed
points contribute the stiffness of the elastic interface layer, obtained by
requiring that their gaps do not change under infinitesimal motion.  Points
that are actively sliding at the equilibrium are treated like closed points
(full normal plus tangential tangent term); this is a modeling choice, made
explicit here because the distinction only matters when the linearization
point itself slips.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .contact import (
    STICK,
    ContactSolveError,
    ContactSolver,
    ContactState,
    SolverSettings,
    _comp_idx,
    classify_sets,
)

__all__ = [
    "ModeShape",
    "HysteresisRecord",
    "ModalCurve",
    "linearized_modes",
    "modal_load_sweep",
    "linear_interface_stepper",
    "masing_cycle",
    "loop_energy",
    "modal_properties",
    "modal_curve",
    "write_modal_curves",
]


@dataclass
class ModeShape:
    """Mass-normalized mode of the tangent-linearized structure."""

    phi_lin: np.ndarray
    omega_lin: float
    label: int


@dataclass
class HysteresisRecord:
    """Initial loading curves (α, q_mod) for both load directions.

    ``alpha_pos``/``q_pos`` run from 0 to +α_max, ``alpha_neg``/``q_neg``
    from 0 to −α_max; both include the equilibrium sample (0, 0).  When
    observation DOFs were requested, ``obs_pos``/``obs_neg`` hold the
    Euclidean norm of the reconstructed physical displacement there.
    """

    alpha_pos: np.ndarray
    q_pos: np.ndarray
    alpha_neg: np.ndarray
    q_neg: np.ndarray
    obs_pos: np.ndarray | None = None
    obs_neg: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha_pos[0] != 0.0 or (np.diff(self.alpha_pos) <= 0).any():
            raise ValueError("positive branch must increase strictly from zero")
        if self.alpha_neg[0] != 0.0 or (np.diff(self.alpha_neg) >= 0).any():
            raise ValueError("negative branch must decrease strictly from zero")
        if self.q_pos.size != self.alpha_pos.size or self.q_neg.size != self.alpha_neg.size:
            raise ValueError("branch sample counts do not match")

    @property
    def alpha_max(self) -> float:
        return float(self.alpha_pos[-1])

    def q_at(self, alpha: float) -> float:
        if alpha >= 0.0:
            return float(np.interp(alpha, self.alpha_pos, self.q_pos))
        return float(np.interp(alpha, self.alpha_neg[::-1], self.q_neg[::-1]))

    def obs_at(self, alpha: float) -> float:
        if self.obs_pos is None:
            raise ValueError("record carries no observation samples")
        if alpha >= 0.0:
            return float(np.interp(alpha, self.alpha_pos, self.obs_pos))
        return float(np.interp(alpha, self.alpha_neg[::-1], self.obs_neg[::-1]))


@dataclass
class ModalCurve:
    """Amplitude-dependent modal properties of one mode."""

    mode: int
    omega_lin: float
    alpha_hat: np.ndarray
    amplitude_m: np.ndarray
    omega: np.ndarray
    damping: np.ndarray

    @property
    def omega_over_lin(self) -> np.ndarray:
        return self.omega / self.omega_lin


def linearized_modes(reduced, w_b, compliance, state: ContactState,
                     n_modes: int | None = None) -> list[ModeShape]:
    """Modes of the structure linearized around a converged contact state.

    Closed contact points add the tangent interface stiffness
    W_cl C(cl,cl)^{-1} W_clᵀ to the boundary block of the reduced stiffness
    (the condition that closed gaps stay fixed); separated points add
    nothing.  With ``compliance = None`` (node-collocated interface, zero
    local flexibility) the closed points tie the coupled boundary DOFs
    instead, and the eigenproblem is solved on the null space of W_clᵀ.
    Raises if the linearized structure has a rigid-body mode, which happens
    when too few contacts are closed to suppress one.
    """
    k_t = np.array(reduced.k_red, dtype=float)
    m_t = np.asarray(reduced.m_red, dtype=float)
    nb = reduced.n_boundary
    _, closed = classify_sets(state)
    basis = None
    if closed.size:
        idx = _comp_idx(closed, (0, 1, 2))
        w_cl = w_b[:, idx]
        if hasattr(w_cl, "toarray"):
            w_cl = w_cl.toarray()
        if compliance is None:
            z = sla.null_space(w_cl.T)
            n_modal = reduced.n_reduced - nb
            basis = np.zeros((reduced.n_reduced, z.shape[1] + n_modal))
            basis[:nb, :z.shape[1]] = z
            basis[nb:, z.shape[1]:] = np.eye(n_modal)
        else:
            c_cl = compliance.dense()[np.ix_(idx, idx)]
            factor = sla.cho_factor(c_cl)
            k_t[:nb, :nb] += w_cl @ sla.cho_solve(factor, w_cl.T)
            k_t = 0.5 * (k_t + k_t.T)
    if basis is None:
        evals, evecs = sla.eigh(k_t, m_t)
    else:
        if basis.shape[1] == 0:
            raise RuntimeError("tied interface leaves no free coordinates")
        evals, vr = sla.eigh(basis.T @ k_t @ basis, basis.T @ m_t @ basis)
        evecs = basis @ vr
    if evals[0] <= 1e-10 * max(abs(evals[-1]), 1e-300):
        raise RuntimeError(
            "rigid-body mode detected in the linearized structure; "
            "too few closed contacts to constrain it"
        )
    count = evals.size if n_modes is None else min(n_modes, evals.size)
    return [
        ModeShape(phi_lin=evecs[:, j].copy(), omega_lin=float(np.sqrt(evals[j])),
                  label=j + 1)
        for j in range(count)
    ]


def linear_interface_stepper(condensed):
    """Verification hook: replace the contact laws by a fully tied interface.

    Every component of every point is constrained bilaterally (gaps frozen),
    so the structure-plus-interface system is exactly linear and modal
    responses admit closed-form checks.
    """
    n = 3 * condensed.n_points
    idx = np.arange(n)
    factor = sla.cho_factor(condensed.sub(idx, idx))

    def step(state: ContactState, g_ex_new: np.ndarray):
        g_ex_new = np.asarray(g_ex_new, float)
        d_lam = -sla.cho_solve(factor, g_ex_new - state.g_ex)
        lam = state.lam + d_lam
        new = ContactState(
            lam=lam, g=g_ex_new + condensed.matvec(lam), g_ex=g_ex_new.copy(),
            status=np.full(condensed.n_points, STICK, int),
        )
        return new, None

    return step


def modal_load_sweep(reduced, condensed, mode: ModeShape, state0: ContactState,
                     alpha_max: float, steps: int = 100,
                     settings: SolverSettings | None = None, stepper=None,
                     alphas: np.ndarray | None = None,
                     obs_dofs=None, r_matrix: np.ndarray | None = None,
                     ) -> HysteresisRecord:
    """Ramp the modal load f = M φ α both ways and record (α, q_mod).

    The two branches are marched independently from copies of the preload
    state; q_mod is measured relative to the preload equilibrium.  A custom
    strictly increasing ``alphas`` grid (starting at 0) may replace the
    uniform one.  ``stepper`` defaults to the frictional contact solver; a
    linear test hook may be substituted.  Solver failures are re-raised with
    the load scale at which they occurred.
    """
    if alphas is None:
        if alpha_max <= 0.0:
            raise ValueError("load amplitude must be positive")
        alphas = np.linspace(0.0, alpha_max, steps + 1)
    alphas = np.asarray(alphas, float)
    if alphas[0] != 0.0 or (np.diff(alphas) <= 0).any():
        raise ValueError("load scales must increase strictly from zero")
    if obs_dofs is not None and r_matrix is None:
        raise ValueError("observation requires the recovery matrix")

    phi = np.asarray(mode.phi_lin, float)
    f_mod = np.asarray(reduced.m_red @ phi, float)
    nb = reduced.n_boundary
    dg_mod = condensed.gap_offset(f_mod[:nb])
    omega_m2 = np.diag(np.asarray(reduced.k_red))[nb:]
    if stepper is None:
        if settings is None:
            raise ValueError("contact solver settings are required")
        stepper = ContactSolver(condensed, settings).step

    def run_branch(sign: float):
        state = state0.copy()
        qs = [0.0]
        obs = [0.0]
        for a in alphas[1:]:
            try:
                state, _ = stepper(state, state0.g_ex + sign * a * dg_mod)
            except ContactSolveError as exc:
                raise ContactSolveError(
                    f"{exc} (at load scale alpha={sign * a:.6e})"
                ) from exc
            d_lam = state.lam - state0.lam
            dq = np.empty(reduced.n_reduced)
            dq[:nb] = condensed.boundary_disp(d_lam, sign * a * f_mod[:nb])
            dq[nb:] = sign * a * f_mod[nb:] / omega_m2
            qs.append(float(phi @ (reduced.m_red @ dq)))
            if obs_dofs is not None:
                u = r_matrix @ dq
                obs.append(float(np.linalg.norm(u[obs_dofs])))
        return np.array(qs), (np.array(obs) if obs_dofs is not None else None)

    q_pos, obs_pos = run_branch(+1.0)
    q_neg, obs_neg = run_branch(-1.0)
    return HysteresisRecord(alpha_pos=alphas.copy(), q_pos=q_pos,
                            alpha_neg=-alphas, q_neg=q_neg,
                            obs_pos=obs_pos, obs_neg=obs_neg)


def masing_cycle(record: HysteresisRecord, alpha_hat: float):
    """Closed hysteresis loop between ±α̂ built from the initial loading curve.

    The unloading branch is the initial curve scaled by two in both axes and
    reflected through the reversal point; the reloading branch is its point
    reflection, so the loop closes exactly and is symmetric under
    (α, q) → (−α, −q).  Returns (alpha, q) arrays with first == last sample.
    """
    if not 0.0 < alpha_hat <= record.alpha_max * (1.0 + 1e-12):
        raise ValueError("amplitude outside the recorded loading range")
    mask = record.alpha_pos < alpha_hat * (1.0 - 1e-12)
    a_v = np.append(record.alpha_pos[mask], alpha_hat)
    q_v = np.append(record.q_pos[mask], record.q_at(alpha_hat))
    q_hat = q_v[-1]
    alpha_down = alpha_hat - 2.0 * a_v
    q_down = q_hat - 2.0 * q_v
    alpha_loop = np.concatenate([alpha_down, -alpha_down[1:]])
    q_loop = np.concatenate([q_down, -q_down[1:]])
    return alpha_loop, q_loop


def loop_energy(alpha_loop: np.ndarray, q_loop: np.ndarray) -> float:
    """Trapezoid evaluation of the cycle integral of α over dq_mod."""
    return float(np.sum(0.5 * (alpha_loop[:-1] + alpha_loop[1:])
                        * np.diff(q_loop)))


def modal_properties(record: HysteresisRecord, alpha_hat: float):
    """Amplitude-dependent (ω, D) from the branch tips and the Masing loop.

    ω = sqrt(2 α̂ / |q_mod(α̂) − q_mod(−α̂)|) and
    D = E_diss / (2 π (ω q_mod(α̂))²).
    """
    q_p = record.q_at(alpha_hat)
    q_m = record.q_at(-alpha_hat)
    span = abs(q_p - q_m)
    if span <= 0.0 or q_p == 0.0:
        raise ValueError("zero modal displacement span at this amplitude")
    omega = float(np.sqrt(2.0 * alpha_hat / span))
    e_diss = loop_energy(*masing_cycle(record, alpha_hat))
    damping = float(e_diss / (2.0 * np.pi * (omega * q_p) ** 2))
    return omega, damping


def modal_curve(record: HysteresisRecord, mode: ModeShape,
                alpha_hats) -> ModalCurve:
    """Evaluate (ω, D, observation amplitude) over a set of amplitudes."""
    alpha_hats = np.asarray(alpha_hats, float)
    omega = np.empty(alpha_hats.size)
    damping = np.empty(alpha_hats.size)
    amp = np.empty(alpha_hats.size)
    for i, a in enumerate(alpha_hats):
        omega[i], damping[i] = modal_properties(record, a)
        amp[i] = record.obs_at(a)
    return ModalCurve(mode=mode.label, omega_lin=mode.omega_lin,
                      alpha_hat=alpha_hats, amplitude_m=amp,
                      omega=omega, damping=damping)


def write_modal_curves(path, curves) -> None:
    """Emit modal curves as CSV rows, one line per (mode, amplitude) pair."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "amplitude_m", "omega_rad_s",
                         "omega_over_lin", "damping_ratio"])
        for curve in curves:
            ratio = curve.omega_over_lin
            for i in range(curve.alpha_hat.size):
                writer.writerow([
                    curve.mode,
                    f"{curve.amplitude_m[i]:.17e}",
                    f"{curve.omega[i]:.17e}",
                    f"{ratio[i]:.17e}",
                    f"{curve.damping[i]:.17e}",
                ])
