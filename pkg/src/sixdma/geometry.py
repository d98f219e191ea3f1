"""Rotation kinematics and antenna-array geometry.

The array is planar in its local coordinate system (LCS), with every element
confined to the local y-z plane inside a square movement region. A 3D
rotation (about the global x-, y- and z-axes, applied in that order) orients
the panel in the global coordinate system (GCS). Everything downstream
(array responses, beam gains, optimizers) is built on the functions here.

All angles are radians, all lengths are SI meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
"""Free-space propagation speed in m/s."""

TWO_PI = 2.0 * np.pi

# Absolute slack used when validating layout feasibility; covers float noise
# from solver round-trips without admitting materially infeasible layouts.
_FEAS_TOL = 1e-9


class LayoutError(ValueError):
    """Raised when an antenna layout violates its movement-region or
    minimum-spacing constraints, or when a region cannot hold the array."""


def wrap_angle(x: float) -> float:
    """Wrap an angle to the canonical interval [0, 2*pi)."""
    w = float(np.mod(x, TWO_PI))
    # np.mod can return 2*pi for inputs within one ulp below a multiple of it
    return 0.0 if w >= TWO_PI else w


@dataclass(frozen=True)
class RotationAngles:
    """Rotation triple (alpha, beta, gamma) about the x-, y- and z-axes.

    Angles are wrapped to [0, 2*pi) at construction.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))
        object.__setattr__(self, "beta", wrap_angle(self.beta))
        object.__setattr__(self, "gamma", wrap_angle(self.gamma))

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma])


def rotation_matrix(r: RotationAngles) -> np.ndarray:
    """Compose the overall rotation R = R_x(alpha) @ R_y(beta) @ R_z(gamma).

    The result is a proper rotation: orthonormal columns and det = +1.
    """
    ca, sa = np.cos(r.alpha), np.sin(r.alpha)
    cb, sb = np.cos(r.beta), np.sin(r.beta)
    cg, sg = np.cos(r.gamma), np.sin(r.gamma)
    return np.array(
        [
            [cb * cg, -cb * sg, sb],
            [ca * sg + sa * sb * cg, ca * cg - sa * sb * sg, -sa * cb],
            [sa * sg - ca * sb * cg, sa * cg + ca * sb * sg, ca * cb],
        ]
    )


def rotation_columns(r: RotationAngles) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns (r1, s1, s2) of the rotation matrix.

    r1 is the image of the local x-axis; s1 and s2 are the images of the
    local y- and z-axes and carry the per-antenna y and z coordinates into
    the GCS.
    """
    R = rotation_matrix(r)
    return R[:, 0], R[:, 1], R[:, 2]


@dataclass(frozen=True)
class DirectionVector:
    """Unit propagation direction for elevation theta and azimuth phi."""

    theta: float
    phi: float
    v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(
            [
                np.cos(self.theta) * np.cos(self.phi),
                np.cos(self.theta) * np.sin(self.phi),
                np.sin(self.theta),
            ]
        )
        v.setflags(write=False)
        object.__setattr__(self, "v", v)


def direction_vector(theta: float, phi: float) -> DirectionVector:
    """Unit direction [cos(theta)cos(phi), cos(theta)sin(phi), sin(theta)]."""
    return DirectionVector(float(theta), float(phi))


def direction_array(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Stack direction vectors for broadcastable angle arrays; shape (..., 3)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ct = np.cos(theta)
    return np.stack([ct * np.cos(phi), ct * np.sin(phi), np.sin(theta) * np.ones_like(phi)], axis=-1)


@dataclass(frozen=True)
class AntennaLayout:
    """Per-antenna local (y, z) coordinates plus the movement constraints.

    The movement region is the square [-region_half_width, region_half_width]^2
    in the local y-z plane; every pair of antennas must be at least
    ``min_spacing`` apart.
    """

    local_coords: np.ndarray  # (N, 2) columns (y, z), meters
    region_half_width: float
    min_spacing: float

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.local_coords, dtype=float))
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
            raise LayoutError(f"local_coords must be (N, 2), got {coords.shape}")
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "local_coords", coords)
        object.__setattr__(self, "region_half_width", float(self.region_half_width))
        object.__setattr__(self, "min_spacing", float(self.min_spacing))
        self.validate()

    @property
    def n_antennas(self) -> int:
        return self.local_coords.shape[0]

    @property
    def y(self) -> np.ndarray:
        return self.local_coords[:, 0]

    @property
    def z(self) -> np.ndarray:
        return self.local_coords[:, 1]

    def validate(self) -> None:
        """Raise LayoutError on region or spacing violation (tiny float slack)."""
        half = self.region_half_width
        if half <= 0:
            raise LayoutError("region_half_width must be positive")
        if self.min_spacing < 0:
            raise LayoutError("min_spacing must be nonnegative")
        excess = float(np.max(np.abs(self.local_coords))) - half
        if excess > _FEAS_TOL * max(1.0, half):
            raise LayoutError(
                f"antenna outside movement region by {excess:.3e} m "
                f"(half-width {half:.6e} m)"
            )
        n = self.local_coords.shape[0]
        if n > 1 and self.min_spacing > 0:
            d = pairwise_distances(self.local_coords)
            dmin = float(np.min(d))
            if dmin < self.min_spacing - _FEAS_TOL * max(1.0, self.min_spacing):
                raise LayoutError(
                    f"minimum pairwise spacing {dmin:.6e} m below "
                    f"required {self.min_spacing:.6e} m"
                )


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    """Distances over all unordered antenna pairs, flattened (n*(n-1)/2,)."""
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    diff = coords[iu] - coords[ju]
    return np.sqrt(np.sum(diff * diff, axis=1))


def antenna_positions_gcs(layout: AntennaLayout, r: RotationAngles) -> np.ndarray:
    """GCS positions k_n = s1 * y_n + s2 * z_n for all antennas, shape (N, 3)."""
    _, s1, s2 = rotation_columns(r)
    return np.outer(layout.y, s1) + np.outer(layout.z, s2)


def antenna_position_gcs(layout: AntennaLayout, r: RotationAngles, n: int) -> np.ndarray:
    """GCS position of antenna ``n``; raises IndexError when out of range."""
    if not 0 <= n < layout.n_antennas:
        raise IndexError(f"antenna index {n} out of range for N={layout.n_antennas}")
    return antenna_positions_gcs(layout, r)[n]
