"""Coupling between the BE contact discretization and the reduced FE model.

Contact forces live point-wise on the BE grid with components ordered
(normal, tangential-1, tangential-2) = (z, x, y) in the structural frame.
The coupling matrix W distributes them onto the relative interface DOFs of
the reduced model with bilinear weights, and its transpose interpolates the
relative interface motion back to the BE points:

    f_boundary = W lam                gap update = ... + W^T q_b

Static condensation folds the reduced stiffness into the contact equations:
eliminating q_b from K_bb q_b = W lam + f_b leaves the effective compliance
C* = C + W^T K_bb^{-1} W and the load-dependent gap offset W^T K_bb^{-1} f_b.

Two interchangeable backends feed the solver: a dense one for FE-coupled
runs (C* is small and dense) and a block-diagonal-by-component one for
rigid-structure runs where C* = C and forming a full 3C x 3C array would
waste memory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .halfspace import ComplianceMatrix

# contact component -> structural component: (n, t1, t2) = (z, x, y)
CONTACT_TO_FE = (2, 0, 1)


def _lattice(boundary_xy: np.ndarray):
    xs = np.unique(boundary_xy[:, 0])
    ys = np.unique(boundary_xy[:, 1])
    if xs.size < 2 or ys.size < 2:
        raise ValueError("interface nodes must form a 2D lattice")
    if xs.size * ys.size != len(boundary_xy):
        raise ValueError("interface nodes do not form a full rectangular lattice")
    node_at = np.full((ys.size, xs.size), -1, int)
    ix = np.searchsorted(xs, boundary_xy[:, 0])
    iy = np.searchsorted(ys, boundary_xy[:, 1])
    node_at[iy, ix] = np.arange(len(boundary_xy))
    if (node_at < 0).any():
        raise ValueError("interface nodes do not form a full rectangular lattice")
    return xs, ys, node_at


def build_coupling(boundary_xy: np.ndarray, points: np.ndarray) -> sp.csr_matrix:
    """Bilinear coupling W of shape (3 * n_nodes, 3 * n_points).

    ``boundary_xy`` are the interface node positions (pair-major order of the
    reduced boundary DOFs); ``points`` are the BE point positions, which must
    lie inside the node lattice.
    """
    boundary_xy = np.asarray(boundary_xy, float)
    points = np.asarray(points, float)
    xs, ys, node_at = _lattice(boundary_xy)

    rows, cols, vals = [], [], []
    for i, (x, y) in enumerate(points):
        cx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        cy = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, ys.size - 2)
        xi = (x - xs[cx]) / (xs[cx + 1] - xs[cx])
        eta = (y - ys[cy]) / (ys[cy + 1] - ys[cy])
        tol = 1e-9
        if not (-tol <= xi <= 1 + tol and -tol <= eta <= 1 + tol):
            raise ValueError(
                f"contact point ({x:.6g}, {y:.6g}) lies outside the interface lattice"
            )
        weights = (
            (node_at[cy, cx], (1 - xi) * (1 - eta)),
            (node_at[cy, cx + 1], xi * (1 - eta)),
            (node_at[cy + 1, cx], (1 - xi) * eta),
            (node_at[cy + 1, cx + 1], xi * eta),
        )
        for node, w in weights:
            if w == 0.0:
                continue
            for c_con, c_fe in enumerate(CONTACT_TO_FE):
                rows.append(3 * node + c_fe)
                cols.append(3 * i + c_con)
                vals.append(w)
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(3 * len(boundary_xy), 3 * len(points))
    )


def node_based_coupling(boundary_xy: np.ndarray):
    """Node-collocated coupling: one contact point per interface node pair.

    Returns (W, points, areas).  W is the permutation that reorders the
    structural components (x, y, z) into contact components (n, t1, t2);
    ``areas`` are tributary lattice areas per point (used to convert nodal
    forces to pressures), summing to the interface footprint.
    """
    boundary_xy = np.asarray(boundary_xy, float)
    xs, ys, node_at = _lattice(boundary_xy)
    n = len(boundary_xy)
    rows = np.empty(3 * n, int)
    cols = np.arange(3 * n)
    for c_con, c_fe in enumerate(CONTACT_TO_FE):
        rows[c_con::3] = 3 * np.arange(n) + c_fe
    w = sp.csr_matrix((np.ones(3 * n), (rows, cols)), shape=(3 * n, 3 * n))

    def trib(coords):
        t = np.zeros(coords.size)
        t[:-1] += 0.5 * np.diff(coords)
        t[1:] += 0.5 * np.diff(coords)
        return t

    tx, ty = trib(xs), trib(ys)
    areas = np.empty(n)
    for iy in range(ys.size):
        for ix in range(xs.size):
            areas[node_at[iy, ix]] = tx[ix] * ty[iy]
    return w, boundary_xy.copy(), areas


@dataclass
class DenseCondensed:
    """FE-coupled effective contact operator (dense C*).

    ``c_star = C + W^T K_bb^{-1} W`` over all contact DOFs; ``gap_offset``
    maps a boundary load vector to its contribution W^T K_bb^{-1} f_b in the
    gap equation; ``boundary_disp`` recovers q_b for a converged state.
    """

    c_star: np.ndarray
    w_b: sp.csr_matrix
    kbb_cho: tuple

    @property
    def n_points(self) -> int:
        return self.c_star.shape[0] // 3

    def sub(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.c_star[np.ix_(rows, cols)]

    def matvec(self, lam: np.ndarray) -> np.ndarray:
        return self.c_star @ lam

    def diag_blocks(self) -> np.ndarray:
        blocks = np.zeros((self.n_points, 3, 3))
        for p in range(self.n_points):
            blocks[p] = self.c_star[3 * p: 3 * p + 3, 3 * p: 3 * p + 3]
        return blocks

    def gap_offset(self, f_b: np.ndarray) -> np.ndarray:
        return self.w_b.T @ sla.cho_solve(self.kbb_cho, f_b)

    def boundary_disp(self, lam: np.ndarray, f_b: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self.kbb_cho, self.w_b @ lam + f_b)


@dataclass
class RigidCondensed:
    """Rigid-structure operator: C* is the half-space compliance itself.

    Keeps the per-direction (C, C) blocks instead of a 3C x 3C dense array;
    cross-component entries are zero by symmetry of the pair kernel.
    """

    compliance: ComplianceMatrix

    @property
    def n_points(self) -> int:
        return self.compliance.n_points

    def sub(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, int)
        cols = np.asarray(cols, int)
        pr, cr = rows // 3, rows % 3
        pc, cc = cols // 3, cols % 3
        blocks = (self.compliance.czz, self.compliance.cxx, self.compliance.cyy)
        out = np.zeros((rows.size, cols.size))
        for c, block in enumerate(blocks):
            sel_r = np.flatnonzero(cr == c)
            sel_c = np.flatnonzero(cc == c)
            if sel_r.size and sel_c.size:
                out[np.ix_(sel_r, sel_c)] = block[np.ix_(pr[sel_r], pc[sel_c])]
        return out

    def matvec(self, lam: np.ndarray) -> np.ndarray:
        return self.compliance.matvec(lam)

    def diag_blocks(self) -> np.ndarray:
        blocks = np.zeros((self.n_points, 3, 3))
        idx = np.arange(self.n_points)
        blocks[:, 0, 0] = self.compliance.czz[idx, idx]
        blocks[:, 1, 1] = self.compliance.cxx[idx, idx]
        blocks[:, 2, 2] = self.compliance.cyy[idx, idx]
        return blocks

    def gap_offset(self, f_b: np.ndarray) -> np.ndarray:
        raise TypeError("rigid-structure operator has no boundary load path")


def condense_static(reduced, w_b: sp.csr_matrix,
                    compliance: ComplianceMatrix | None) -> DenseCondensed:
    """Fold the reduced boundary stiffness into the contact compliance.

    ``compliance = None`` gives the node-collocated mode where all interface
    flexibility comes from the structure (C = 0).  Raises if the resulting
    C* is not symmetric positive definite.
    """
    nb = reduced.n_boundary
    if w_b.shape[0] != nb:
        raise ValueError("coupling matrix does not match the reduced boundary")
    kbb = reduced.k_red[:nb, :nb]
    cho = sla.cho_factor(kbb)
    flex = w_b.T @ sla.cho_solve(cho, w_b.toarray())
    if compliance is None:
        c_star = flex
    else:
        if 3 * compliance.n_points != w_b.shape[1]:
            raise ValueError("compliance size does not match the coupling matrix")
        c_star = compliance.dense() + flex
    c_star = 0.5 * (c_star + c_star.T)
    try:
        sla.cho_factor(c_star)
    except sla.LinAlgError as exc:
        raise ValueError("condensed contact operator is not positive definite") from exc
    return DenseCondensed(c_star=c_star, w_b=sp.csr_matrix(w_b), kbb_cho=cho)
