"""Minimal hex8 finite-element models for the jointed-structure fixtures.

Provides trilinear brick (hex8) stiffness/mass assembly with full 2x2x2
Gauss quadrature and a consistent mass matrix, plus builders for the two
structural fixtures used throughout:

* a single clamped brick beam, and
* a lap splice: two equal beams overlapping in the middle, each fully
  clamped at its remote end, with matched node pairs on the overlap faces
  and a clamp-patch load pattern that presses the beams together.

Global DOF numbering is ``3 * node + component`` with components (x, y, z).
Dirichlet constraints are applied by elimination; models store the reduced
(free-DOF) operators together with the bookkeeping to map back.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

_LOCAL_COORDS = np.array(
    [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ]
)
_GAUSS_1D = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class SolidMaterial:
    """Isotropic linear-elastic solid."""

    e_young: float
    nu_poisson: float
    density: float

    def __post_init__(self):
        if self.e_young <= 0.0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= self.nu_poisson < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        if self.density <= 0.0:
            raise ValueError("density must be positive")

    def elasticity_matrix(self) -> np.ndarray:
        """6x6 isotropic elasticity in Voigt order (xx, yy, zz, xy, yz, zx)."""
        e, nu = self.e_young, self.nu_poisson
        lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = e / (2.0 * (1.0 + nu))
        d = np.zeros((6, 6))
        d[:3, :3] = lam
        d[np.arange(3), np.arange(3)] += 2.0 * mu
        d[np.arange(3, 6), np.arange(3, 6)] = mu
        return d


def _shape_gradients(xi: float, eta: float, zeta: float):
    """Trilinear shape functions and their local-coordinate gradients."""
    lx, ly, lz = _LOCAL_COORDS.T
    n = 0.125 * (1 + lx * xi) * (1 + ly * eta) * (1 + lz * zeta)
    dn = np.empty((8, 3))
    dn[:, 0] = 0.125 * lx * (1 + ly * eta) * (1 + lz * zeta)
    dn[:, 1] = 0.125 * (1 + lx * xi) * ly * (1 + lz * zeta)
    dn[:, 2] = 0.125 * (1 + lx * xi) * (1 + ly * eta) * lz
    return n, dn


def hex8_matrices(coords: np.ndarray, material: SolidMaterial):
    """Stiffness and consistent mass (24x24 each) of one hex8 element."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (8, 3):
        raise ValueError("hex8 element needs eight nodal coordinates")
    d_mat = material.elasticity_matrix()
    ke = np.zeros((24, 24))
    me = np.zeros((24, 24))
    for xi in _GAUSS_1D:
        for eta in _GAUSS_1D:
            for zeta in _GAUSS_1D:
                n, dn_loc = _shape_gradients(xi, eta, zeta)
                jac = dn_loc.T @ coords
                det_j = np.linalg.det(jac)
                if det_j <= 0.0:
                    raise ValueError("degenerate or inverted hex8 element")
                dn = dn_loc @ np.linalg.inv(jac).T  # (8, 3) global gradients
                b = np.zeros((6, 24))
                b[0, 0::3] = dn[:, 0]
                b[1, 1::3] = dn[:, 1]
                b[2, 2::3] = dn[:, 2]
                b[3, 0::3] = dn[:, 1]
                b[3, 1::3] = dn[:, 0]
                b[4, 1::3] = dn[:, 2]
                b[4, 2::3] = dn[:, 1]
                b[5, 0::3] = dn[:, 2]
                b[5, 2::3] = dn[:, 0]
                ke += det_j * (b.T @ d_mat @ b)
                n_mat = np.zeros((3, 24))
                for c in range(3):
                    n_mat[c, c::3] = n
                me += material.density * det_j * (n_mat.T @ n_mat)
    # exact symmetry for downstream factorizations
    return 0.5 * (ke + ke.T), 0.5 * (me + me.T)


def build_brick_mesh(n_el: tuple[int, int, int], elem_size: tuple[float, float, float],
                     origin: tuple[float, float, float] = (0.0, 0.0, 0.0)):
    """Regular brick mesh: returns (nodes, elements) with hex8 connectivity."""
    nx, ny, nz = n_el
    dx, dy, dz = elem_size
    if min(nx, ny, nz) < 1 or min(dx, dy, dz) <= 0:
        raise ValueError("element counts must be >= 1 and sizes positive")
    xs = origin[0] + dx * np.arange(nx + 1)
    ys = origin[1] + dy * np.arange(ny + 1)
    zs = origin[2] + dz * np.arange(nz + 1)
    gz, gy, gx = np.meshgrid(zs, ys, xs, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def nid(ix, iy, iz):
        return ix + iy * (nx + 1) + iz * (nx + 1) * (ny + 1)

    elements = np.empty((nx * ny * nz, 8), dtype=int)
    e = 0
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                elements[e] = [
                    nid(ix, iy, iz), nid(ix + 1, iy, iz),
                    nid(ix + 1, iy + 1, iz), nid(ix, iy + 1, iz),
                    nid(ix, iy, iz + 1), nid(ix + 1, iy, iz + 1),
                    nid(ix + 1, iy + 1, iz + 1), nid(ix, iy + 1, iz + 1),
                ]
                e += 1
    return nodes, elements


def assemble(nodes: np.ndarray, elements: np.ndarray, material: SolidMaterial):
    """Assemble global stiffness and consistent mass (CSR, all DOFs free)."""
    n_dofs = 3 * len(nodes)
    first = nodes[elements[0]]
    # identical-translation fast path: every element congruent to the first
    rel = nodes[elements] - nodes[elements][:, :1, :]
    congruent = np.abs(rel - rel[0]).max() <= 1e-12 * max(np.abs(first).max(), 1.0)
    if congruent:
        ke0, me0 = hex8_matrices(first, material)
        ke_all = np.broadcast_to(ke0, (len(elements), 24, 24))
        me_all = np.broadcast_to(me0, (len(elements), 24, 24))
    else:
        ke_all = np.empty((len(elements), 24, 24))
        me_all = np.empty((len(elements), 24, 24))
        for i, conn in enumerate(elements):
            ke_all[i], me_all[i] = hex8_matrices(nodes[conn], material)

    edofs = (3 * elements[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 24)
    rows = np.repeat(edofs, 24, axis=1).ravel()
    cols = np.tile(edofs, (1, 24)).ravel()
    k = sp.coo_matrix((ke_all.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    m = sp.coo_matrix((me_all.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    return k, m


@dataclass
class FeModel:
    """Assembled model reduced to free DOFs after clamping."""

    nodes: np.ndarray
    elements: np.ndarray
    k_free: sp.csr_matrix
    m_free: sp.csr_matrix
    free_dofs: np.ndarray
    fixed_nodes: np.ndarray
    _full_to_free: np.ndarray = field(repr=False)

    @property
    def n_dofs_full(self) -> int:
        return 3 * len(self.nodes)

    @property
    def n_dofs_free(self) -> int:
        return len(self.free_dofs)

    def free_index(self, node: int, comp: int) -> int:
        """Free-DOF index of (node, component); -1 if the DOF is clamped."""
        return int(self._full_to_free[3 * node + comp])

    def expand(self, q_free: np.ndarray) -> np.ndarray:
        """Scatter a free-DOF vector into the full numbering (zeros at clamps)."""
        full = np.zeros(self.n_dofs_full)
        full[self.free_dofs] = q_free
        return full


def _reduce_model(nodes, elements, material, fixed_nodes) -> FeModel:
    k, m = assemble(nodes, elements, material)
    fixed_nodes = np.asarray(sorted(set(int(n) for n in np.atleast_1d(fixed_nodes))), int)
    fixed_dofs = (3 * fixed_nodes[:, None] + np.arange(3)[None, :]).ravel()
    mask = np.ones(3 * len(nodes), bool)
    mask[fixed_dofs] = False
    free = np.flatnonzero(mask)
    full_to_free = np.full(3 * len(nodes), -1, dtype=int)
    full_to_free[free] = np.arange(free.size)
    return FeModel(
        nodes=nodes, elements=elements,
        k_free=k[free][:, free].tocsr(), m_free=m[free][:, free].tocsr(),
        free_dofs=free, fixed_nodes=fixed_nodes, _full_to_free=full_to_free,
    )


def nodes_on_plane(nodes: np.ndarray, axis: int, value: float, tol: float = 1e-9
                   ) -> np.ndarray:
    return np.flatnonzero(np.abs(nodes[:, axis] - value) <= tol)


def build_brick_model(n_el, elem_size, material: SolidMaterial,
                      clamp_planes: tuple = ()) -> FeModel:
    """Single brick beam; ``clamp_planes`` is a tuple of (axis, value) pairs."""
    nodes, elements = build_brick_mesh(n_el, elem_size)
    fixed: list[int] = []
    for axis, value in clamp_planes:
        found = nodes_on_plane(nodes, axis, value)
        if found.size == 0:
            raise ValueError(f"no nodes on clamp plane axis={axis}, value={value}")
        fixed.extend(found.tolist())
    return _reduce_model(nodes, elements, material, np.array(fixed, int))


@dataclass
class LapJointModel(FeModel):
    """Lap splice of two clamped beams with a matched contact interface.

    ``pairs[:, 0]`` are lower-beam nodes (top face), ``pairs[:, 1]`` the
    coincident upper-beam nodes (bottom face); both sit on z = 0 over the
    overlap.  ``preload_pattern`` is a free-DOF load vector pressing the
    beams together with unit resultant on each side (upper side -1 N in z,
    lower side +1 N).
    """

    pairs: np.ndarray = None
    preload_pattern: np.ndarray = None
    interface_xy: np.ndarray = None
    overlap_box: tuple = None


def _patch_weights(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Tributary-area weights of a structured node patch, normalized to 1."""
    wx = np.full(len(xs), 1.0)
    wx[0] = wx[-1] = 0.5
    wy = np.full(len(ys), 1.0)
    wy[0] = wy[-1] = 0.5
    w = np.outer(wy, wx).ravel()
    return w / w.sum()


def build_lap_joint(material: SolidMaterial, n_len: int = 20, n_wid: int = 4,
                    n_thk: int = 2, n_overlap: int = 5,
                    elem_size: tuple[float, float, float] = (5e-3, 5e-3, 5e-3)
                    ) -> LapJointModel:
    """Two equal beams overlapping by ``n_overlap`` elements, remote ends clamped."""
    if not 0 < n_overlap < n_len:
        raise ValueError("overlap must be shorter than the beams")
    dx, dy, dz = elem_size
    x_off = (n_len - n_overlap) * dx

    lo_nodes, lo_el = build_brick_mesh((n_len, n_wid, n_thk), elem_size,
                                       origin=(0.0, 0.0, -n_thk * dz))
    up_nodes, up_el = build_brick_mesh((n_len, n_wid, n_thk), elem_size,
                                       origin=(x_off, 0.0, 0.0))
    n_lo = len(lo_nodes)
    nodes = np.vstack([lo_nodes, up_nodes])
    elements = np.vstack([lo_el, up_el + n_lo])

    # matched pairs: lower top face against upper bottom face over the overlap
    tol = 1e-9
    lo_face = nodes_on_plane(lo_nodes, 2, 0.0, tol)
    lo_face = lo_face[(lo_nodes[lo_face, 0] >= x_off - tol)]
    up_face = n_lo + nodes_on_plane(up_nodes, 2, 0.0, tol)
    up_face = up_face[(nodes[up_face, 0] <= n_len * dx + tol)]

    def key(p):
        return (round(p[0] / dx), round(p[1] / dy))

    lo_by_key = {key(nodes[n]): n for n in lo_face}
    pairs = []
    for n_up in up_face:
        k = key(nodes[n_up])
        if k not in lo_by_key:
            raise RuntimeError("interface meshes do not match node for node")
        pairs.append((lo_by_key[k], n_up))
    if len(pairs) != (n_overlap + 1) * (n_wid + 1):
        raise RuntimeError("unexpected interface pair count")
    pairs = np.array(sorted(pairs), dtype=int)
    # the beams were meshed from different x origins; snap the upper interface
    # nodes onto the lower lattice so paired coordinates agree bit for bit
    nodes[pairs[:, 1], :2] = nodes[pairs[:, 0], :2]

    # remote clamps: lower beam at x = 0, upper beam at its far end
    fixed = np.concatenate([
        nodes_on_plane(lo_nodes, 0, 0.0),
        n_lo + nodes_on_plane(up_nodes, 0, x_off + n_len * dx),
    ])
    base = _reduce_model(nodes, elements, material, fixed)

    # clamp-patch preload pattern over the overlap footprint
    xs = x_off + dx * np.arange(n_overlap + 1)
    ys = dy * np.arange(n_wid + 1)
    w = _patch_weights(xs, ys)
    pattern = np.zeros(base.n_dofs_full)
    up_top = n_lo + nodes_on_plane(up_nodes, 2, n_thk * dz, tol)
    up_top = up_top[nodes[up_top, 0] <= n_len * dx + tol]
    lo_bot = nodes_on_plane(lo_nodes, 2, -n_thk * dz, tol)
    lo_bot = lo_bot[lo_nodes[lo_bot, 0] >= x_off - tol]
    for patch, sign in ((up_top, -1.0), (lo_bot, +1.0)):
        order = np.lexsort((nodes[patch, 0], nodes[patch, 1]))
        patch = patch[order]
        if len(patch) != w.size:
            raise RuntimeError("preload patch does not match the overlap footprint")
        pattern[3 * patch + 2] += sign * w
    pattern_free = pattern[base.free_dofs]

    return LapJointModel(
        nodes=base.nodes, elements=base.elements, k_free=base.k_free,
        m_free=base.m_free, free_dofs=base.free_dofs, fixed_nodes=base.fixed_nodes,
        _full_to_free=base._full_to_free,
        pairs=pairs, preload_pattern=pattern_free,
        interface_xy=nodes[pairs[:, 0], :2].copy(),
        overlap_box=(x_off, n_len * dx, 0.0, n_wid * dy),
    )
