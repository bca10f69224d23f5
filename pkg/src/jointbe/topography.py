"""Interface topography: composite height maps on the BE grid.

Heights follow the hills-positive convention and are stored per grid point
(row-major, matching the grid numbering).  Points that do not belong to the
interface carry an explicit ``included = False`` flag instead of a magic
height value.  Composite maps are shifted so the tallest included point sits
at zero: the unstressed gap is then ``g = -h >= 0`` everywhere, with first
touch grazing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .halfspace import BeGrid


@dataclass
class HeightProfile:
    """Heights [m] over a grid, with an explicit interface-membership flag."""

    grid: BeGrid
    heights: np.ndarray
    included: np.ndarray

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float).reshape(self.grid.n_points)
        self.included = np.asarray(self.included, dtype=bool).reshape(self.grid.n_points)
        if not self.included.any():
            raise ValueError("profile excludes every grid point")
        if not np.isfinite(self.heights[self.included]).all():
            raise ValueError("included points must carry finite heights")

    @property
    def included_indices(self) -> np.ndarray:
        return np.flatnonzero(self.included)


@dataclass(frozen=True)
class RoughnessSpec:
    """Band-limited random roughness: target std sigma over [lambda_min, lambda_max]."""

    sigma: float
    lambda_min: float
    lambda_max: float
    seed: int

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.lambda_min < self.lambda_max:
            raise ValueError("need 0 < lambda_min < lambda_max")


def flat_profile(grid: BeGrid) -> HeightProfile:
    return HeightProfile(grid, np.zeros(grid.n_points), np.ones(grid.n_points, bool))


def sphere_profile(grid: BeGrid, radius: float, center: tuple[float, float] | None = None
                   ) -> HeightProfile:
    """Spherical cap touching at its apex (heights <= 0 away from centre)."""
    if radius <= 0.0:
        raise ValueError("sphere radius must be positive")
    pts = grid.points()
    if center is None:
        center = tuple(pts.mean(axis=0))
    r2 = (pts[:, 0] - center[0]) ** 2 + (pts[:, 1] - center[1]) ** 2
    if np.any(r2 >= radius**2):
        raise ValueError("grid extends beyond the sphere radius")
    h = -(radius - np.sqrt(radius**2 - r2))
    return HeightProfile(grid, h, np.ones(grid.n_points, bool))


def crown_profile(grid: BeGrid, peak_to_peak: float) -> HeightProfile:
    """Elliptic dome (crown) form deviation, normalized to a peak-to-peak value.

    Models the machined-surface form error of a nominally flat patch: highest
    at the patch centre, dropping quadratically towards edges and corners.
    """
    if peak_to_peak < 0.0:
        raise ValueError("peak-to-peak value must be non-negative")
    pts = grid.points()
    x0, y0 = pts.mean(axis=0)
    sx = pts[:, 0].max() - pts[:, 0].min()
    sy = pts[:, 1].max() - pts[:, 1].min()
    sx = sx if sx > 0 else 1.0
    sy = sy if sy > 0 else 1.0
    bowl = ((pts[:, 0] - x0) / (0.5 * sx)) ** 2 + ((pts[:, 1] - y0) / (0.5 * sy)) ** 2
    span = bowl.max() - bowl.min()
    if peak_to_peak > 0.0 and span > 0.0:
        h = -peak_to_peak * (bowl - bowl.min()) / span
    else:
        h = np.zeros_like(bowl)
    return HeightProfile(grid, h, np.ones(grid.n_points, bool))


def synthesize_roughness(grid: BeGrid, spec: RoughnessSpec) -> HeightProfile:
    """Synthesize band-limited Gaussian-like roughness via random phases.

    The magnitude spectrum is constant inside the wavelength band
    ``[lambda_min, lambda_max]`` and exactly zero outside (including DC, so
    the mean is zero).  Phases are drawn uniformly per independent spectral
    line with Hermitian symmetry enforced for a real surface; self-conjugate
    lines get a random sign.  The result is rescaled so the sample standard
    deviation equals sigma exactly.  Deterministic per (seed, grid, band).
    """
    max_pitch = max(grid.pitch_x, grid.pitch_y)
    if spec.lambda_min < 2.0 * max_pitch:
        raise ValueError(
            f"lambda_min = {spec.lambda_min:.6g} m is below the resolvable limit "
            f"2*max(pitch) = {2.0 * max_pitch:.6g} m for this grid"
        )

    nx, ny = grid.nx, grid.ny
    fx = np.fft.fftfreq(nx, d=grid.pitch_x)
    fy = np.fft.fftfreq(ny, d=grid.pitch_y)
    f_mag = np.hypot(fy[:, None], fx[None, :])
    with np.errstate(divide="ignore"):
        wavelength = np.where(f_mag > 0.0, 1.0 / np.where(f_mag > 0, f_mag, 1.0), np.inf)
    band = (wavelength >= spec.lambda_min) & (wavelength <= spec.lambda_max) & (f_mag > 0.0)
    n_lines = int(band.sum())
    if n_lines == 0:
        raise ValueError(
            f"no spectral line falls inside [{spec.lambda_min:.6g}, "
            f"{spec.lambda_max:.6g}] m on a {nx}x{ny} grid of extent "
            f"{nx * grid.pitch_x:.6g} x {ny * grid.pitch_y:.6g} m"
        )

    rng = np.random.default_rng(spec.seed)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(ny, nx))

    ky = np.arange(ny)[:, None] + np.zeros(nx, int)[None, :]
    kx = np.zeros(ny, int)[:, None] + np.arange(nx)[None, :]
    pky = (-ky) % ny
    pkx = (-kx) % nx
    self_conj = (ky == pky) & (kx == pkx)
    canonical = (ky < pky) | ((ky == pky) & (kx <= pkx))

    n_total = nx * ny
    amp = spec.sigma * n_total / np.sqrt(n_lines)
    spectrum = np.zeros((ny, nx), dtype=complex)
    mask_c = band & canonical & ~self_conj
    spectrum[mask_c] = amp * np.exp(1j * phase[mask_c])
    spectrum[pky[mask_c], pkx[mask_c]] = np.conj(spectrum[mask_c])
    mask_s = band & self_conj
    spectrum[mask_s] = amp * np.sign(np.cos(phase[mask_s]))

    h = np.fft.ifft2(spectrum)
    assert np.abs(h.imag).max() <= 1e-12 * max(np.abs(h.real).max(), 1e-300)
    h = h.real
    std = h.std()
    if std == 0.0:
        raise ValueError("degenerate roughness realization (zero variance)")
    h *= spec.sigma / std
    return HeightProfile(grid, h.ravel(), np.ones(grid.n_points, bool))


def compose_profiles(*profiles: HeightProfile) -> HeightProfile:
    """Sum height maps of both sides and shift to the first-touch datum.

    The composite is included only where every contributor is included, and
    is shifted so the tallest included point has h = 0 (no initial
    interference: the unstressed gap -h is non-negative).
    """
    if not profiles:
        raise ValueError("need at least one profile")
    grid = profiles[0].grid
    for p in profiles[1:]:
        if p.grid != grid:
            raise ValueError("profiles live on different grids")
    heights = np.zeros(grid.n_points)
    included = np.ones(grid.n_points, bool)
    for p in profiles:
        heights = heights + np.where(p.included, p.heights, 0.0)
        included &= p.included
    if not included.any():
        raise ValueError("composite profile excludes every point")
    heights = heights - heights[included].max()
    heights[~included] = np.nan
    return HeightProfile(grid, heights, included)


def geometric_restriction(profile: HeightProfile, cutoff_depth: float) -> np.ndarray:
    """Indices of points retained for the contact solve.

    Keeps included points whose height lies within ``cutoff_depth`` below the
    first-touch datum (h = 0 after composition): the hills that can plausibly
    come into contact for the expected approach.
    """
    if cutoff_depth < 0.0:
        raise ValueError("cutoff depth must be non-negative")
    datum = profile.heights[profile.included].max()
    keep = profile.included & (profile.heights >= datum - cutoff_depth)
    retained = np.flatnonzero(keep)
    if retained.size == 0:
        raise ValueError("restriction retained no points")
    return retained


def restriction_boundary(profile: HeightProfile, retained: np.ndarray) -> np.ndarray:
    """Retained points that border a dropped-but-included point.

    Used to detect an under-sized retained set: if any of these boundary
    points carries load after a converged solve, the cutoff must grow.
    Neighbourhood is the 4-neighbour grid stencil.
    """
    grid = profile.grid
    ret_mask = np.zeros(grid.n_points, bool)
    ret_mask[retained] = True
    dropped = profile.included & ~ret_mask

    dropped_2d = dropped.reshape(grid.ny, grid.nx)
    near = np.zeros_like(dropped_2d)
    near[:-1, :] |= dropped_2d[1:, :]
    near[1:, :] |= dropped_2d[:-1, :]
    near[:, :-1] |= dropped_2d[:, 1:]
    near[:, 1:] |= dropped_2d[:, :-1]
    boundary = ret_mask & near.ravel()
    return np.flatnonzero(boundary)


def write_height_csv(profile: HeightProfile, path) -> None:
    """Write ``x,y,h`` rows (SI units, row-major order, excluded points omitted)."""
    pts = profile.grid.points()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "h"])
        for idx in profile.included_indices:
            writer.writerow([
                f"{pts[idx, 0]:.17e}", f"{pts[idx, 1]:.17e}",
                f"{profile.heights[idx]:.17e}",
            ])


def read_height_csv(path, grid: BeGrid) -> HeightProfile:
    """Read a height map written by :func:`write_height_csv` onto ``grid``.

    Rows are matched to grid points by coordinates (to within 1e-6 of a
    pitch); points absent from the file are marked excluded.
    """
    heights = np.full(grid.n_points, np.nan)
    included = np.zeros(grid.n_points, bool)
    tol_x = 1e-6 * grid.pitch_x
    tol_y = 1e-6 * grid.pitch_y
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip().lower() for c in header[:3]] != ["x", "y", "h"]:
            raise ValueError(f"unexpected height-map header {header!r} in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            x, y, h = (float(v) for v in row[:3])
            fx = (x - grid.origin_x) / grid.pitch_x
            fy = (y - grid.origin_y) / grid.pitch_y
            ix, iy = round(fx), round(fy)
            if not (0 <= ix < grid.nx and 0 <= iy < grid.ny):
                raise ValueError(f"{path}:{lineno}: point ({x}, {y}) is off-grid")
            if abs(x - (grid.origin_x + ix * grid.pitch_x)) > tol_x or (
                abs(y - (grid.origin_y + iy * grid.pitch_y)) > tol_y
            ):
                raise ValueError(f"{path}:{lineno}: point ({x}, {y}) not on the grid")
            heights[iy * grid.nx + ix] = h
            included[iy * grid.nx + ix] = True
    if not included.any():
        raise ValueError(f"{path} contains no points")
    return HeightProfile(grid, heights, included)
