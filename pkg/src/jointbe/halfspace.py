"""Elastic half-space influence coefficients on a regular contact grid.

Each grid point represents a rectangular element of size ``2*half_dx`` by
``2*half_dy`` carrying uniform tractions.  The closed-form influence
coefficients relate the total force on one element (normal ``z`` and two
tangential directions ``x``, ``y``) to the surface displacement at another
element's centre.  For an identical isotropic material pair the 3x3 blocks
are diagonal, ``diag(c_zz, c_xx, c_yy)``, ordered (normal, tangential-1,
tangential-2) <-> (z, x, y).

Units: entries are displacement per force [m/N]; the 1/cell-area factor is
folded into the coefficients, so the assembled matrix acts directly on force
vectors in newtons.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ElasticHalfSpace:
    """Isotropic elastic half space (Young's modulus [Pa], Poisson ratio)."""

    e_young: float
    nu_poisson: float

    def __post_init__(self):
        if self.e_young <= 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.e_young}")
        if not 0.0 <= self.nu_poisson < 0.5:
            raise ValueError(
                f"Poisson ratio must satisfy 0 <= nu < 0.5, got {self.nu_poisson}"
            )


@dataclass(frozen=True)
class BeGrid:
    """Regular boundary-element grid.

    ``pitch_x``/``pitch_y`` are the point spacings (= full element widths,
    twice the element half-widths).  ``origin_x``/``origin_y`` locate the
    centre of point (ix=0, iy=0).  Points are numbered row-major: index
    ``p = iy * nx + ix``.
    """

    nx: int
    ny: int
    pitch_x: float
    pitch_y: float
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid must have at least one point, got {self.nx}x{self.ny}")
        if self.pitch_x <= 0.0 or self.pitch_y <= 0.0:
            raise ValueError("grid pitches must be positive")

    @property
    def n_points(self) -> int:
        return self.nx * self.ny

    @property
    def half_dx(self) -> float:
        return 0.5 * self.pitch_x

    @property
    def half_dy(self) -> float:
        return 0.5 * self.pitch_y

    @property
    def cell_area(self) -> float:
        """Element area (pitch_x * pitch_y)."""
        return self.pitch_x * self.pitch_y

    def point_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """(ix, iy) integer indices of all points in row-major order."""
        iy, ix = np.divmod(np.arange(self.n_points), self.nx)
        return ix, iy

    def points(self) -> np.ndarray:
        """(C, 2) array of point centre coordinates in row-major order."""
        ix, iy = self.point_indices()
        return np.column_stack(
            [self.origin_x + ix * self.pitch_x, self.origin_y + iy * self.pitch_y]
        )


@dataclass(frozen=True)
class InfluenceBlock:
    """Diagonal of one 3x3 influence block: c_zz, c_xx, c_yy [m/N]."""

    c_zz: np.ndarray | float
    c_xx: np.ndarray | float
    c_yy: np.ndarray | float


def _log_terms(xbar, ybar, half_dx, half_dy):
    """The four shared log terms of the closed-form rectangle solution.

    Returns (sx, sy) where sx collects the two terms with x-distance
    coefficients and sy the two with y-distance coefficients.  Coefficients
    that vanish force their term to zero, which also covers every point where
    the log argument would degenerate (those only occur on element edge
    lines, where the matching coefficient is zero).
    """
    xp = xbar + half_dx
    xm = xbar - half_dx
    yp = ybar + half_dy
    ym = ybar - half_dy
    rpp = np.hypot(xp, yp)
    rpm = np.hypot(xp, ym)
    rmp = np.hypot(xm, yp)
    rmm = np.hypot(xm, ym)

    def coef_log(coef, num, den):
        coef = np.asarray(coef, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = coef * np.log(num / den)
        return np.where(coef == 0.0, 0.0, val)

    sx = coef_log(xp, yp + rpp, ym + rpm) + coef_log(xm, ym + rmm, yp + rmp)
    sy = coef_log(yp, xp + rpp, xm + rmp) + coef_log(ym, xm + rmm, xp + rpm)
    return sx, sy


def influence_coefficients(xbar, ybar, half_dx, half_dy, halfspace):
    """Closed-form influence coefficients for one half space.

    Parameters
    ----------
    xbar, ybar : float or ndarray
        Centre-to-centre distances between the loaded and the observed
        element (observed minus loaded).
    half_dx, half_dy : float
        Element half-widths; the element spans ``+-half_dx`` by ``+-half_dy``.
    halfspace : ElasticHalfSpace

    Returns
    -------
    InfluenceBlock with entries in displacement per force [m/N].
    """
    if half_dx <= 0.0 or half_dy <= 0.0:
        raise ValueError("element half-widths must be positive")
    e, nu = halfspace.e_young, halfspace.nu_poisson
    area = (2.0 * half_dx) * (2.0 * half_dy)
    pref = 2.0 * (1.0 - nu**2) / (area * np.pi * e)
    sx, sy = _log_terms(np.asarray(xbar, dtype=float), np.asarray(ybar, dtype=float),
                        half_dx, half_dy)
    c_zz = pref * (sx + sy)
    c_xx = pref * (sx + sy / (1.0 - nu))
    c_yy = pref * (sx / (1.0 - nu) + sy)
    return InfluenceBlock(c_zz=c_zz, c_xx=c_xx, c_yy=c_yy)


def self_compliance_normal(half_dx, half_dy, halfspace) -> float:
    """Normal self-influence c_zz(0, 0) of a single element [m/N]."""
    return float(influence_coefficients(0.0, 0.0, half_dx, half_dy, halfspace).c_zz)


@dataclass
class ComplianceMatrix:
    """Assembled interface compliance on the retained contact points.

    The normal/tangential directions decouple for identical isotropic
    materials, so the matrix is stored as three dense symmetric (C, C)
    blocks (``czz``, ``cxx``, ``cyy``) instead of one (3C, 3C) matrix.
    ``point_index`` maps rows to row-major grid point indices.
    """

    czz: np.ndarray
    cxx: np.ndarray
    cyy: np.ndarray
    points: np.ndarray
    point_index: np.ndarray
    cell_area: float
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_points(self) -> int:
        return self.czz.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize the full (3C, 3C) matrix, point-major (n, t1, t2)."""
        if self._dense is None:
            c = self.n_points
            full = np.zeros((3 * c, 3 * c))
            full[0::3, 0::3] = self.czz
            full[1::3, 1::3] = self.cxx
            full[2::3, 2::3] = self.cyy
            self._dense = full
        return self._dense

    def matvec(self, lam: np.ndarray) -> np.ndarray:
        """Apply to a point-major force vector (3C,) -> displacements (3C,)."""
        lam = lam.reshape(self.n_points, 3)
        out = np.empty_like(lam)
        out[:, 0] = self.czz @ lam[:, 0]
        out[:, 1] = self.cxx @ lam[:, 1]
        out[:, 2] = self.cyy @ lam[:, 2]
        return out.ravel()


def assemble_compliance(grid: BeGrid, hs_1: ElasticHalfSpace, hs_2: ElasticHalfSpace,
                        retained: np.ndarray | None = None) -> ComplianceMatrix:
    """Assemble the composite compliance C = C1 + C2 of the half-space pair.

    Exploits the regular grid: coefficients depend only on the integer offset
    between two points, so each unique offset is evaluated once on a
    (2*ny-1, 2*nx-1) table and gathered into the dense blocks.

    Parameters
    ----------
    retained : optional integer array of row-major point indices to keep
        (e.g. from geometric restriction).  Defaults to all grid points.
    """
    if hs_1.nu_poisson != hs_2.nu_poisson and (
        abs(hs_1.nu_poisson - hs_2.nu_poisson) > 1e-12
    ):
        raise ValueError(
            "dissimilar Poisson ratios couple normal and tangential directions; "
            "only identical isotropic pairs are supported"
        )

    ix_all, iy_all = grid.point_indices()
    if retained is None:
        retained = np.arange(grid.n_points)
    else:
        retained = np.asarray(retained, dtype=int)
        if retained.size == 0:
            raise ValueError("retained point set is empty")
    ix = ix_all[retained]
    iy = iy_all[retained]

    off_x = np.arange(-(grid.nx - 1), grid.nx) * grid.pitch_x
    off_y = np.arange(-(grid.ny - 1), grid.ny) * grid.pitch_y
    xbar = off_x[None, :]
    ybar = off_y[:, None]

    tables = [np.zeros((off_y.size, off_x.size)) for _ in range(3)]
    for hs in (hs_1, hs_2):
        block = influence_coefficients(xbar, ybar, grid.half_dx, grid.half_dy, hs)
        tables[0] += block.c_zz
        tables[1] += block.c_xx
        tables[2] += block.c_yy

    row_off = iy[:, None] - iy[None, :] + (grid.ny - 1)
    col_off = ix[:, None] - ix[None, :] + (grid.nx - 1)
    # gather, then symmetrize away last-ulp asymmetry of the log evaluations
    czz, cxx, cyy = (
        0.5 * (t[row_off, col_off] + t[row_off, col_off].T) for t in tables
    )

    return ComplianceMatrix(
        czz=czz,
        cxx=cxx,
        cyy=cyy,
        points=grid.points()[retained],
        point_index=retained,
        cell_area=grid.cell_area,
    )
