"""Component-mode reduction of the FE models.

The contact solver only ever touches the interface, so the structural model
is reduced with the Craig-Bampton method: the interface DOFs are kept as
physical coordinates and the interior is represented by constraint modes
plus a truncated set of fixed-interface normal modes.

For matched contact interfaces the reduction is preceded by a change of
coordinates to relative/absolute pairs, so that only the *relative*
interface motion (the one the gaps depend on) stays in the boundary set.

Reduced operators keep the block layout

    q_red = [q_b (boundary), eta (modal)]
    K_red = [[K_bb, 0], [0, diag(omega^2)]],   M_red = [[M_bb, M_bm], [M_mb, I]]

which later stages rely on (static condensation of q_b under contact loads).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_DIRECTIONS = ("x", "y", "z")


@dataclass
class DofMap:
    """Mapping between matrix rows and (node, direction) labels."""

    node_ids: np.ndarray
    directions: np.ndarray  # integer component 0, 1, 2 for x, y, z

    def __post_init__(self):
        self.node_ids = np.asarray(self.node_ids, int)
        self.directions = np.asarray(self.directions, int)
        if self.node_ids.shape != self.directions.shape:
            raise ValueError("node and direction arrays must match")
        self._lookup = {
            (int(n), int(c)): i
            for i, (n, c) in enumerate(zip(self.node_ids, self.directions))
        }

    def dof(self, node: int, direction: int | str) -> int:
        if isinstance(direction, str):
            direction = _DIRECTIONS.index(direction)
        try:
            return self._lookup[(int(node), int(direction))]
        except KeyError:
            raise KeyError(f"no DOF for node {node} direction {direction}") from None


def load_fe_matrices(k_path, m_path, dofmap_path):
    """Load stiffness/mass in Matrix Market format plus a DOF-map CSV.

    The CSV carries one row per matrix row: ``dof_id,node_id,direction``
    with direction in {x, y, z}.  Returns (K, M, DofMap) with CSR matrices.
    """
    k = sp.csr_matrix(scipy.io.mmread(k_path))
    m = sp.csr_matrix(scipy.io.mmread(m_path))
    if k.shape != m.shape or k.shape[0] != k.shape[1]:
        raise ValueError(f"matrix shapes disagree: K {k.shape}, M {m.shape}")
    for name, mat in (("stiffness", k), ("mass", m)):
        coo = mat.tocoo()
        bad = ~np.isfinite(coo.data)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"{name} matrix has a non-finite entry at "
                f"row {int(coo.row[i])}, col {int(coo.col[i])}"
            )
        scale = np.abs(coo.data).max() if coo.data.size else 1.0
        asym = sp.coo_matrix(abs(mat - mat.T))
        if asym.data.size and asym.data.max() > 1e-12 * scale:
            raise ValueError(f"{name} matrix is asymmetric beyond 1e-12 relative")
    k = 0.5 * (k + k.T)
    m = 0.5 * (m + m.T)
    n = k.shape[0]
    node_ids = np.full(n, -1, int)
    dirs = np.full(n, -1, int)
    with open(dofmap_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip().lower() for c in header[:3]] != ["dof_id", "node_id", "direction"]:
            raise ValueError(f"unexpected DOF-map header {header!r}")
        for row in reader:
            if not row:
                continue
            dof = int(row[0])
            if not 0 <= dof < n:
                raise ValueError(f"dof_id {dof} outside 0..{n - 1}")
            if node_ids[dof] != -1:
                raise ValueError(f"duplicate dof_id {dof} in DOF map")
            node_ids[dof] = int(row[1])
            d = row[2].strip().lower()
            if d not in _DIRECTIONS:
                raise ValueError(f"direction {row[2]!r} not one of x, y, z")
            dirs[dof] = _DIRECTIONS.index(d)
    if (node_ids == -1).any():
        missing = int(np.flatnonzero(node_ids == -1)[0])
        raise ValueError(f"DOF map does not cover dof_id {missing}")
    return k, m, DofMap(node_ids, dirs)


def write_fe_matrices(k, m, dofmap: DofMap, k_path, m_path, dofmap_path) -> None:
    """Inverse of :func:`load_fe_matrices` (Matrix Market + DOF-map CSV)."""
    scipy.io.mmwrite(str(k_path), sp.coo_matrix(k))
    scipy.io.mmwrite(str(m_path), sp.coo_matrix(m))
    with open(dofmap_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dof_id", "node_id", "direction"])
        for i, (n, c) in enumerate(zip(dofmap.node_ids, dofmap.directions)):
            writer.writerow([i, int(n), _DIRECTIONS[int(c)]])


def relative_transform(n_dofs: int, a_dofs, b_dofs):
    """Coordinate change replacing side-a DOFs with relative ones.

    With ``q_a = q_rel + q_b`` the returned sparse T satisfies ``q = T q_hat``
    where ``q_hat`` carries ``q_rel`` in the old a slots and is unchanged
    elsewhere.  Congruence ``T^T K T`` then decouples any load path that acts
    only through the relative motion.  Returns (T, boundary_slots == a_dofs).
    """
    a = np.asarray(a_dofs, int)
    b = np.asarray(b_dofs, int)
    if a.shape != b.shape:
        raise ValueError("side-a and side-b DOF lists must pair up")
    both = np.concatenate([a, b])
    if len(np.unique(both)) != both.size:
        raise ValueError("a DOF appears in more than one pair")
    if both.size and (both.min() < 0 or both.max() >= n_dofs):
        raise ValueError("DOF index out of range")
    t = sp.identity(n_dofs, format="lil")
    t[a, b] = 1.0
    return t.tocsr(), a.copy()


@dataclass
class ReducedModel:
    """Craig-Bampton reduced operators with recovery to the full space.

    ``r_matrix`` maps reduced coordinates to full (free) DOFs, including any
    relative-interface transform that preceded the reduction.  Boundary
    coordinates come first, modal coordinates after.
    """

    k_red: np.ndarray
    m_red: np.ndarray
    r_matrix: np.ndarray
    boundary_dofs: np.ndarray
    omega_fixed: np.ndarray
    boundary_xy: np.ndarray | None = None
    preload_pattern: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_dofs)

    @property
    def n_modes(self) -> int:
        return len(self.omega_fixed)

    @property
    def n_reduced(self) -> int:
        return self.k_red.shape[0]

    @property
    def n_full(self) -> int:
        return self.r_matrix.shape[0]

    def expand(self, q_red: np.ndarray) -> np.ndarray:
        """Recover the full free-DOF displacement vector."""
        return self.r_matrix @ q_red

    def reduce_load(self, f_full: np.ndarray) -> np.ndarray:
        return self.r_matrix.T @ f_full

    def save(self, path) -> None:
        data = {
            "format_version": np.int64(1),
            "k_red": self.k_red,
            "m_red": self.m_red,
            "r_matrix": self.r_matrix,
            "boundary_dofs": self.boundary_dofs,
            "omega_fixed": self.omega_fixed,
        }
        if self.boundary_xy is not None:
            data["boundary_xy"] = self.boundary_xy
        if self.preload_pattern is not None:
            data["preload_pattern"] = self.preload_pattern
        np.savez(path, **data)

    @classmethod
    def load(cls, path) -> "ReducedModel":
        with np.load(path, allow_pickle=False) as data:
            if int(data["format_version"]) != 1:
                raise ValueError(f"unsupported reduced-model format in {path}")
            return cls(
                k_red=data["k_red"], m_red=data["m_red"], r_matrix=data["r_matrix"],
                boundary_dofs=data["boundary_dofs"], omega_fixed=data["omega_fixed"],
                boundary_xy=data["boundary_xy"] if "boundary_xy" in data else None,
                preload_pattern=(data["preload_pattern"]
                                 if "preload_pattern" in data else None),
            )


def craig_bampton(k, m, boundary_dofs, n_modes: int, method: str = "auto",
                  residual_tol: float = 1e-6) -> ReducedModel:
    """Reduce (K, M) keeping ``boundary_dofs`` physical plus ``n_modes`` modes.

    Interior constraint modes solve K_ii Psi = -K_ib; fixed-interface modes
    are mass-normalized eigenvectors of (K_ii, M_ii).  ``method`` picks the
    interior eigensolver: "iterative" (shift-invert Lanczos), "dense", or
    "auto" which falls back to dense when the iterative path cannot run.
    """
    k = sp.csr_matrix(k)
    m = sp.csr_matrix(m)
    n = k.shape[0]
    b = np.asarray(boundary_dofs, int)
    if len(np.unique(b)) != b.size:
        raise ValueError("duplicate boundary DOFs")
    if b.size == 0 or b.min() < 0 or b.max() >= n:
        raise ValueError("boundary DOFs out of range")
    interior = np.setdiff1d(np.arange(n), b)
    ni = interior.size
    if not 0 <= n_modes <= ni:
        raise ValueError(f"n_modes must lie in 0..{ni}")

    k_ii = k[interior][:, interior].tocsc()
    k_ib = k[interior][:, b].toarray()
    lu = spla.splu(k_ii)
    psi = -lu.solve(k_ib) if b.size else np.zeros((ni, 0))

    if n_modes == 0:
        theta = np.zeros((ni, 0))
        omega2 = np.zeros(0)
    else:
        m_ii = m[interior][:, interior].tocsc()
        use_dense = method == "dense" or (method == "auto" and n_modes >= ni - 1)
        if method not in ("auto", "dense", "iterative"):
            raise ValueError(f"unknown eigensolver method {method!r}")
        if not use_dense:
            try:
                # fixed start vector: ARPACK otherwise draws one from the
                # global RNG and reruns would not be bit-reproducible
                v0 = np.random.default_rng(0).standard_normal(ni)
                omega2, theta = spla.eigsh(k_ii, k=n_modes, M=m_ii, sigma=0.0,
                                           which="LM", v0=v0)
            except Exception:
                if method == "iterative":
                    raise
                use_dense = True
        if use_dense:
            omega2, theta = sla.eigh(k_ii.toarray(), m_ii.toarray(),
                                     subset_by_index=(0, n_modes - 1))
        order = np.argsort(omega2)
        omega2, theta = omega2[order], theta[:, order]
        # mass-normalize and verify the eigenpairs actually solve the pencil
        norms = np.sqrt(np.einsum("ij,ij->j", theta, m_ii @ theta))
        theta = theta / norms
        # deterministic sign convention (eigensolvers return either sign)
        flips = np.where(theta[np.abs(theta).argmax(axis=0),
                               np.arange(n_modes)] < 0.0, -1.0, 1.0)
        theta = theta * flips
        resid = k_ii @ theta - (m_ii @ theta) * omega2
        scale = np.abs(k_ii @ theta).max(axis=0)
        if (np.abs(resid).max(axis=0) > residual_tol * scale).any():
            raise RuntimeError("fixed-interface eigensolution failed the residual check")

    nb, nm = b.size, n_modes
    r = np.zeros((n, nb + nm))
    r[b, :nb] = np.eye(nb)
    r[interior, :nb] = psi
    r[interior, nb:] = theta
    k_red = r.T @ (k @ r)
    m_red = r.T @ (m @ r)
    k_red = 0.5 * (k_red + k_red.T)
    m_red = 0.5 * (m_red + m_red.T)
    # the exact reduction has no boundary-mode stiffness coupling; enforce it
    k_red[:nb, nb:] = 0.0
    k_red[nb:, :nb] = 0.0
    k_red[nb:, nb:] = np.diag(omega2)
    return ReducedModel(
        k_red=k_red, m_red=m_red, r_matrix=r, boundary_dofs=b,
        omega_fixed=np.sqrt(np.maximum(omega2, 0.0)),
    )


def reduce_lap_joint(joint, n_modes: int, method: str = "auto") -> ReducedModel:
    """Craig-Bampton model of a lap joint with relative interface DOFs.

    Boundary coordinates are the relative displacements (upper minus lower)
    of the matched interface pairs, ordered pair-major with components
    (x, y, z).  The clamp-patch preload pattern is carried along in reduced
    coordinates.
    """
    comps = np.arange(3)
    a_dofs = np.array([joint.free_index(int(nu), int(c))
                       for nl, nu in joint.pairs for c in comps])
    b_dofs = np.array([joint.free_index(int(nl), int(c))
                       for nl, nu in joint.pairs for c in comps])
    if (a_dofs < 0).any() or (b_dofs < 0).any():
        raise ValueError("interface pair DOFs must not be clamped")
    t, boundary = relative_transform(joint.n_dofs_free, a_dofs, b_dofs)
    k_hat = (t.T @ joint.k_free @ t).tocsr()
    m_hat = (t.T @ joint.m_free @ t).tocsr()
    red = craig_bampton(k_hat, m_hat, boundary, n_modes, method=method)
    red.r_matrix = np.asarray(t @ red.r_matrix)
    red.boundary_xy = joint.interface_xy.copy()
    red.preload_pattern = red.r_matrix.T @ joint.preload_pattern
    return red
