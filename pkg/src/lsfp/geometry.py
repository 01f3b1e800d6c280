"""Hexagonal cell layout wrapped onto a torus, and uniform user drops."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SQRT3 = np.sqrt(3.0)

# Axial lattice offsets of the cluster translation for rings = 1, 2.
_CLUSTER_SHIFT = {7: (2, 1), 19: (3, 2)}
_CLUSTER_RINGS = {7: 1, 19: 2}


@dataclass(frozen=True)
class NetworkGeometry:
    """Base-station layout on a wrapped hexagonal cluster.

    Distances are in km. ``wrap_vectors`` holds the zero vector followed by
    the six cluster translations.
    """

    cell_count: int
    cell_radius: float
    bs_positions: np.ndarray
    wrap_vectors: np.ndarray
    exclusion_radius: float = 0.0625

    @property
    def L(self):
        return self.cell_count

    @property
    def inter_site_distance(self):
        return SQRT3 * self.cell_radius


@dataclass(frozen=True)
class UserDrop:
    """User positions, ``positions[k, l]`` is user k of cell l (km)."""

    positions: np.ndarray

    @property
    def K(self):
        return self.positions.shape[0]


def _axial_to_xy(i, j, spacing):
    return spacing * np.array([i + 0.5 * j, 0.5 * SQRT3 * j])


def _rotations(vec):
    out = []
    for m in range(6):
        t = m * np.pi / 3
        c, s = np.cos(t), np.sin(t)
        out.append([c * vec[0] - s * vec[1], s * vec[0] + c * vec[1]])
    return np.array(out)


def build_hex_torus(L, cell_radius=1.0, exclusion_radius=0.0625):
    """Build the 7- or 19-cell hexagonal cluster with torus wrap-around.

    BS 0 sits at the origin, the remaining sites follow ring by ring.
    """
    if L not in _CLUSTER_SHIFT:
        raise ConfigurationError(f"unsupported cell count {L}; expected 7 or 19")
    if cell_radius <= 0:
        raise ConfigurationError("cell_radius must be positive")
    if not 0 <= exclusion_radius < cell_radius * SQRT3 / 2:
        raise ConfigurationError("exclusion radius must be below the hexagon inradius")

    spacing = SQRT3 * cell_radius
    rings = _CLUSTER_RINGS[L]
    sites = []
    for i in range(-rings, rings + 1):
        for j in range(-rings, rings + 1):
            if max(abs(i), abs(j), abs(i + j)) <= rings:
                sites.append((max(abs(i), abs(j), abs(i + j)), i, j))
    # Order by ring then angle so that the layout is reproducible.
    pts = []
    for ring, i, j in sites:
        xy = _axial_to_xy(i, j, spacing)
        ang = np.arctan2(xy[1], xy[0]) % (2 * np.pi)
        pts.append((ring, round(ang, 9), xy))
    pts.sort(key=lambda t: (t[0], t[1]))
    bs = np.array([p[2] for p in pts])

    shift = _axial_to_xy(*_CLUSTER_SHIFT[L], spacing)
    wraps = np.vstack([np.zeros((1, 2)), _rotations(shift)])
    return NetworkGeometry(L, float(cell_radius), bs, wraps, float(exclusion_radius))


def wrapped_distance(geom, a, b):
    """Torus distance in km between points (or arrays of points) ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a[..., None, :] - b[..., None, :] - geom.wrap_vectors
    return np.sqrt(np.min(np.einsum("...wi,...wi->...w", diff, diff), axis=-1))


def nearest_bs(geom, points):
    """Index of the closest BS under wrapped distance; ties go to the lowest index."""
    points = np.asarray(points, dtype=float)
    d = wrapped_distance(geom, points[..., None, :], geom.bs_positions)
    # argmin returns the first minimum, which is the lowest index
    return np.argmin(np.round(d, 12), axis=-1)


def in_hexagon(offset, cell_radius):
    """True where a BS-relative offset lies inside the pointy-top hexagon."""
    offset = np.asarray(offset, dtype=float)
    normals = _rotations(np.array([1.0, 0.0]))
    proj = offset @ normals.T
    return np.all(proj <= 0.5 * SQRT3 * cell_radius + 1e-12, axis=-1)


def drop_users(geom, K, rng):
    """Drop K users uniformly in every cell, outside the exclusion disk.

    Rejection sampling from the hexagon's bounding box keeps the density
    exactly uniform.
    """
    if K < 1:
        raise ConfigurationError("K must be at least 1")
    R = geom.cell_radius
    half_w = 0.5 * SQRT3 * R
    n = K * geom.L
    accepted = np.empty((0, 2))
    while accepted.shape[0] < n:
        batch = max(2 * (n - accepted.shape[0]), 16)
        cand = np.column_stack([rng.uniform(-half_w, half_w, batch), rng.uniform(-R, R, batch)])
        keep = in_hexagon(cand, R) & (np.hypot(cand[:, 0], cand[:, 1]) >= geom.exclusion_radius)
        accepted = np.vstack([accepted, cand[keep]])
    offsets = accepted[:n].reshape(geom.L, K, 2).transpose(1, 0, 2)
    return UserDrop(offsets + geom.bs_positions[None, :, :])


def neighborhoods(geom, size=7):
    """Cooperation set of each BS: itself plus its ``size - 1`` nearest BSs.

    Returns an (L, size) integer array, each row sorted ascending.
    """
    if size > geom.L:
        raise ConfigurationError("neighborhood larger than the network")
    d = wrapped_distance(geom, geom.bs_positions[:, None, :], geom.bs_positions[None, :, :])
    d = np.round(d / geom.cell_radius, 9)
    out = np.empty((geom.L, size), dtype=int)
    for j in range(geom.L):
        # lexsort: primary key distance, secondary key index
        order = np.lexsort((np.arange(geom.L), d[j]))
        out[j] = np.sort(order[:size])
    return out
