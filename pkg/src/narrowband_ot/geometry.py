"""Analytic surfaces and narrowband Cartesian grids.

Implements the geometric layer: signed distance, closest-point projection,
outward normal field and the offset-surface area Jacobian for the unit
sphere, the northern hemisphere and a torus, plus construction of the
computational grid ``h*Z^3`` restricted to the tubular neighborhood of the
surface, partitioned into interior nodes (PDE unknowns), ghost nodes
(hemisphere Neumann collar, filled by reflection) and boundary nodes
(filled by interpolation at their surface projections).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CoverageError, DomainError

# Stencil layout shared by the grid and the finite-difference kernels.
# Column 0 is the node itself, columns 1..6 the axis neighbors (+x, -x,
# +y, -y, +z, -z), columns 7..18 the twelve diagonal neighbors in blocks
# of four per axis pair (xy, xz, yz), ordered (++, --, -+, +-).
_AX = np.eye(3, dtype=np.int64)
DIAG_PAIRS = ((0, 1), (0, 2), (1, 2))
STENCIL_OFFSETS = np.array(
    [np.zeros(3, dtype=np.int64)]
    + [s * _AX[j] for j in range(3) for s in (1, -1)]
    + [s0 * _AX[j] + s1 * _AX[k] for (j, k) in DIAG_PAIRS
       for (s0, s1) in ((1, 1), (-1, -1), (-1, 1), (1, -1))]
)

COL_CENTER = 0


def col_axis(j: int, sign: int) -> int:
    """Stencil column of the axis neighbor ``sign*e_j``."""
    return 1 + 2 * j + (0 if sign > 0 else 1)


def col_diag(pair: int, variant: int) -> int:
    """Stencil column of a diagonal neighbor; variant 0..3 = ++, --, -+, +-."""
    return 7 + 4 * pair + variant


def _as_points(z) -> tuple[np.ndarray, bool]:
    pts = np.asarray(z, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def _restore(arr: np.ndarray, single: bool):
    return arr[0] if single else arr


class Surface:
    """Base class for analytic closed (or bounded) surfaces in R^3."""

    name = "surface"
    has_boundary = False

    @property
    def reach(self) -> float:
        raise NotImplementedError

    def signed_distance(self, z):
        raise NotImplementedError

    def closest_point(self, z):
        raise NotImplementedError

    def normal(self, z):
        """Unit normal of the level set through z (equals grad of the
        signed distance; constant along normal lines)."""
        raise NotImplementedError

    def jacobian(self, z, fd_step: float | None = None):
        """Area change factor between the surface and its offset through z;
        the product of the two largest singular values of the closest-point
        map's Jacobian."""
        raise NotImplementedError

    def lattice_ranges(self, h: float, epsilon: float) -> list[tuple[int, int]]:
        raise NotImplementedError

    def _phi_raw(self, pos: np.ndarray) -> np.ndarray:
        """Signed distance without singular-locus guards, for box masking."""
        raise NotImplementedError

    def classify_nodes(self, pos: np.ndarray, epsilon: float):
        """Return (interior_mask, ghost_mask) over candidate positions."""
        phi = self._phi_raw(pos)
        return np.abs(phi) < epsilon, np.zeros(len(pos), dtype=bool)


class UnitSphere(Surface):
    """The unit sphere centered at the origin."""

    name = "sphere"

    @property
    def reach(self) -> float:
        return 1.0

    def _radius(self, pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(pts, axis=1)
        if np.any(r < 1e-12):
            raise DomainError("signed distance undefined at the sphere center")
        return r

    def _phi_raw(self, pos):
        return np.linalg.norm(pos, axis=1) - 1.0

    def signed_distance(self, z):
        pts, single = _as_points(z)
        return _restore(self._radius(pts) - 1.0, single)

    def closest_point(self, z):
        pts, single = _as_points(z)
        return _restore(pts / self._radius(pts)[:, None], single)

    def normal(self, z):
        return self.closest_point(z)

    def jacobian(self, z, fd_step=None):
        pts, single = _as_points(z)
        return _restore(1.0 / self._radius(pts) ** 2, single)

    def lattice_ranges(self, h, epsilon):
        n = int(np.floor((1.0 + epsilon) / h)) + 2
        return [(-n, n)] * 3


class NorthernHemisphere(UnitSphere):
    """Northern half of the unit sphere, with the equator as boundary.

    Geometric quantities (distance, projection, normal, Jacobian) are those
    of the full sphere; the narrowband is restricted to points within
    epsilon of the closed upper hemisphere, and nodes below the equatorial
    plane form a ghost collar filled by even reflection (zero Neumann flux
    through the equator).
    """

    name = "hemisphere"
    has_boundary = True

    def equator_distance(self, z):
        """Distance to the equator circle x^2+y^2=1, z=0."""
        pts, single = _as_points(z)
        rxy = np.linalg.norm(pts[:, :2], axis=1)
        return _restore(np.hypot(rxy - 1.0, pts[:, 2]), single)

    def classify_nodes(self, pos, epsilon):
        phi = np.linalg.norm(pos, axis=1) - 1.0
        interior = (np.abs(phi) < epsilon) & (pos[:, 2] >= 0.0)
        ghost = (pos[:, 2] < 0.0) & (self.equator_distance(pos) < epsilon)
        return interior, ghost


class Torus(Surface):
    """Torus of tube radius a around a circle of radius c in the z=0 plane."""

    name = "torus"

    def __init__(self, minor_radius: float = 0.65, major_radius: float = 1.3):
        if not 0 < minor_radius < major_radius:
            raise ConfigError(
                f"torus radii must satisfy 0 < a < c, got a={minor_radius}, c={major_radius}"
            )
        self.a = float(minor_radius)
        self.c = float(major_radius)

    @property
    def reach(self) -> float:
        return min(self.a, self.c - self.a)

    def _cyl(self, pts: np.ndarray):
        r = np.linalg.norm(pts[:, :2], axis=1)
        rho = np.hypot(r - self.c, pts[:, 2])
        if np.any(r < 1e-12):
            raise DomainError("torus projection undefined on the symmetry axis")
        if np.any(rho < 1e-12):
            raise DomainError("torus projection undefined on the spine circle")
        return r, rho

    def _phi_raw(self, pos):
        r = np.linalg.norm(pos[:, :2], axis=1)
        return np.hypot(r - self.c, pos[:, 2]) - self.a

    def signed_distance(self, z):
        pts, single = _as_points(z)
        r, rho = self._cyl(pts)
        return _restore(rho - self.a, single)

    def closest_point(self, z):
        pts, single = _as_points(z)
        r, rho = self._cyl(pts)
        ring = self.c + (self.a / rho) * (r - self.c)
        out = np.stack([ring * pts[:, 0] / r, ring * pts[:, 1] / r,
                        (self.a / rho) * pts[:, 2]], axis=1)
        return _restore(out, single)

    def normal(self, z):
        pts, single = _as_points(z)
        r, rho = self._cyl(pts)
        out = np.stack([(r - self.c) / rho * pts[:, 0] / r,
                        (r - self.c) / rho * pts[:, 1] / r,
                        pts[:, 2] / rho], axis=1)
        return _restore(out, single)

    def jacobian(self, z, fd_step: float | None = None):
        """Product of the two largest singular values of the centered
        finite-difference Jacobian of the closest-point map."""
        pts, single = _as_points(z)
        d = 0.025 if fd_step is None else float(fd_step)
        cols = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = d
            cols.append((self.closest_point(pts + e) - self.closest_point(pts - e)) / (2 * d))
        jac = np.stack(cols, axis=2)  # (N, 3, 3), column j = dP/dz_j
        sv = np.linalg.svd(jac, compute_uv=False)
        return _restore(sv[:, 0] * sv[:, 1], single)

    def offset_area_factor(self, z):
        """Closed-form value of the same area Jacobian, via the two in-plane
        scalings of the projection (tube: a/rho, ring: image radius / r).

        Cheaper than the finite-difference route; used in per-iteration
        density evaluation at mapped points. Agrees with ``jacobian`` to
        O(fd_step^2).
        """
        pts, single = _as_points(z)
        r, rho = self._cyl(pts)
        ring = self.c + (self.a / rho) * (r - self.c)
        return _restore((self.a / rho) * (ring / r), single)

    def lattice_ranges(self, h, epsilon):
        nxy = int(np.floor((self.c + self.a + epsilon) / h)) + 2
        nz = int(np.floor((self.a + epsilon) / h)) + 2
        return [(-nxy, nxy), (-nxy, nxy), (-nz, nz)]


def make_surface(kind: str, **params) -> Surface:
    """Surface factory keyed by kind name (sphere, hemisphere, torus)."""
    kind = kind.lower()
    if kind in ("sphere", "unitsphere"):
        return UnitSphere()
    if kind in ("hemisphere", "northernhemisphere"):
        return NorthernHemisphere()
    if kind == "torus":
        return Torus(params.get("torus_a", 0.65), params.get("torus_c", 1.3))
    raise ConfigError(f"unknown surface kind {kind!r}")


@dataclass
class NarrowbandGrid:
    """Cartesian lattice nodes inside the tubular neighborhood of a surface.

    Node storage order is interior (lexicographically sorted lattice
    coordinates), then ghost (hemisphere collar), then boundary. Geometric
    data (phi, closest point, normal, Jacobian) is cached for every node.
    Immutable after construction.
    """

    surface: Surface
    h: float
    epsilon: float
    lattice: np.ndarray          # (N, 3) int lattice coordinates
    positions: np.ndarray        # (N, 3) = lattice * h
    n_interior: int
    n_ghost: int
    n_boundary: int
    phi: np.ndarray              # (N,)
    closest: np.ndarray          # (N, 3)
    normal: np.ndarray           # (N, 3)
    jac: np.ndarray              # (N,)
    stencil: np.ndarray          # (n_interior, 19) dense indices
    mirror_src: np.ndarray       # (N,) reflection source index or -1
    _volume: np.ndarray = field(repr=False)   # lattice -> dense index, -1 outside
    _origin: np.ndarray = field(repr=False)   # lattice coordinate of _volume[0,0,0]

    @property
    def n_nodes(self) -> int:
        return len(self.lattice)

    @property
    def n_active(self) -> int:
        """Interior plus ghost nodes (the node count reported for runs)."""
        return self.n_interior + self.n_ghost

    def node_index(self, lattice_coord) -> int:
        """Dense index of a lattice coordinate, or -1 if absent."""
        c = np.asarray(lattice_coord, dtype=np.int64) - self._origin
        if np.any(c < 0) or np.any(c >= self._volume.shape):
            return -1
        return int(self._volume[tuple(c)])

    def interpolation_weights(self, points):
        """Trilinear cell indices and weights for arbitrary points.

        Returns (idx, w) of shape (M, 8); missing corners are tolerated only
        when their weight vanishes, otherwise CoverageError is raised.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = pts / self.h
        base = np.floor(t).astype(np.int64)
        frac = t - base
        snap_hi = frac > 1.0 - 1e-9
        base[snap_hi] += 1
        frac[snap_hi] = 0.0
        frac[frac < 1e-9] = 0.0

        cell = base - self._origin
        shape = np.array(self._volume.shape)
        if np.any(cell < 0) or np.any(cell + 1 >= shape):
            raise CoverageError("interpolation point outside the grid bounding box")

        m = len(pts)
        idx = np.empty((m, 8), dtype=np.int64)
        w = np.empty((m, 8))
        corner = 0
        for dx in (0, 1):
            wx = frac[:, 0] if dx else 1.0 - frac[:, 0]
            for dy in (0, 1):
                wy = frac[:, 1] if dy else 1.0 - frac[:, 1]
                for dz in (0, 1):
                    wz = frac[:, 2] if dz else 1.0 - frac[:, 2]
                    w[:, corner] = wx * wy * wz
                    idx[:, corner] = self._volume[cell[:, 0] + dx, cell[:, 1] + dy,
                                                  cell[:, 2] + dz]
                    corner += 1
        missing = idx < 0
        if np.any(missing & (w > 1e-12)):
            bad = np.where((missing & (w > 1e-12)).any(axis=1))[0][0]
            raise CoverageError(
                f"uncovered interpolation cell at point {pts[bad]} "
                f"(epsilon/h = {self.epsilon / self.h:.3f} too small)"
            )
        idx[missing] = 0
        w[missing] = 0.0
        return idx, w


def build_grid(surface: Surface, h: float, epsilon: float) -> NarrowbandGrid:
    """Construct the narrowband grid h*Z^3 intersected with the epsilon-tube.

    Requires epsilon > sqrt(3)*h (trilinear cells at projected surface
    points must consist of interior nodes) and epsilon < reach.
    """
    if h <= 0 or epsilon <= 0:
        raise ConfigError("h and epsilon must be positive")
    if epsilon <= np.sqrt(3.0) * h:
        raise ConfigError(
            f"epsilon must exceed sqrt(3)*h = {np.sqrt(3.0) * h:.6g}, got {epsilon}"
        )
    if epsilon >= surface.reach:
        raise ConfigError(
            f"epsilon must stay below the reach {surface.reach}, got {epsilon}"
        )

    ranges = surface.lattice_ranges(h, epsilon)
    origin = np.array([lo - 2 for lo, _ in ranges], dtype=np.int64)
    dims = [hi + 2 - (lo - 2) + 1 for lo, hi in ranges]
    axes = [np.arange(lo - 2, hi + 3, dtype=np.int64) for lo, hi in ranges]
    L0, L1, L2 = np.meshgrid(*axes, indexing="ij")
    lat_all = np.stack([L0.ravel(), L1.ravel(), L2.ravel()], axis=1)
    pos_all = lat_all * h

    interior_m, ghost_m = surface.classify_nodes(pos_all, epsilon)
    interior_vol = interior_m.reshape(dims)
    ghost_vol = ghost_m.reshape(dims)

    # boundary nodes: stencil neighbors of interior nodes outside the band
    dil = np.zeros(dims, dtype=bool)
    for off in STENCIL_OFFSETS[1:]:
        src = [slice(max(-o, 0), d - max(o, 0)) for o, d in zip(off, dims)]
        dst = [slice(max(o, 0), d - max(-o, 0)) for o, d in zip(off, dims)]
        dil[tuple(dst)] |= interior_vol[tuple(src)]
    boundary_vol = dil & ~interior_vol & ~ghost_vol

    lat_int = np.argwhere(interior_vol) + origin
    lat_gho = np.argwhere(ghost_vol) + origin
    lat_bdy = np.argwhere(boundary_vol) + origin
    n_int, n_gho, n_bdy = len(lat_int), len(lat_gho), len(lat_bdy)
    lattice = np.vstack([lat_int, lat_gho, lat_bdy])
    positions = lattice * h

    volume = np.full(dims, -1, dtype=np.int64)
    volume[tuple((lattice - origin).T)] = np.arange(len(lattice))

    coords = lat_int - origin
    stencil = np.empty((n_int, 19), dtype=np.int64)
    for cidx, off in enumerate(STENCIL_OFFSETS):
        c = coords + off
        stencil[:, cidx] = volume[c[:, 0], c[:, 1], c[:, 2]]
    if np.any(stencil < 0):
        raise ConfigError("internal error: unresolved stencil neighbor")

    phi = surface.signed_distance(positions)
    closest = surface.closest_point(positions)
    normal = surface.normal(positions)
    jac = surface.jacobian(positions, fd_step=h / 2)

    mirror_src = np.full(len(lattice), -1, dtype=np.int64)
    if surface.has_boundary:
        below = lattice[:, 2] < 0
        mirr = lattice[below].copy()
        mirr[:, 2] = -mirr[:, 2]
        c = mirr - origin
        src = volume[c[:, 0], c[:, 1], c[:, 2]]
        if np.any(src < 0):
            raise ConfigError("internal error: reflection source missing")
        mirror_src[below] = src

    return NarrowbandGrid(
        surface=surface, h=float(h), epsilon=float(epsilon),
        lattice=lattice, positions=positions,
        n_interior=n_int, n_ghost=n_gho, n_boundary=n_bdy,
        phi=phi, closest=closest, normal=normal, jac=jac,
        stencil=stencil, mirror_src=mirror_src,
        _volume=volume, _origin=origin,
    )
