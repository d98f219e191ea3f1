"""Closed-form optimum for 1D angular coverage, plus impossibility diagnostics.

With the azimuth fixed at phi0, rotating a line of antennas perpendicular to
the coverage plane zeroes the steering phase of every element at every
frequency, so uniform weights achieve the full array gain N with no beam
squint. The two diagnostic routines certify numerically that neither a
linear array over a 2D angular region nor a planar array over a 1D region
can reach that zero-squint condition by rotation alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gain import BeamWeights, CoverageGrid, uniform_weights
from .geometry import (
    AntennaLayout,
    LayoutError,
    RotationAngles,
    direction_array,
    rotation_matrix,
    rotation_columns,
    wrap_angle,
)


@dataclass(frozen=True)
class ClosedForm1DSolution:
    """Zero-squint configuration for coverage at a fixed azimuth."""

    rotation: RotationAngles
    weights: BeamWeights
    layout: AntennaLayout
    achieved_gain: float


def solve_1d(
    phi0: float,
    n_antennas: int,
    min_spacing: float,
    region_half_width: float,
) -> ClosedForm1DSolution:
    """Closed-form optimum for elevation-only coverage at azimuth ``phi0``.

    Returns alpha = beta = 0 and gamma = wrap(phi0), which maps the local
    y-axis onto the normal of the plane spanned by the coverage directions
    {v(theta, phi0)}. Antennas sit on that axis (z = 0), equally spaced at
    ``min_spacing`` and centered; any feasible spacing is equally optimal,
    this canonical choice keeps results deterministic. Uniform weights then
    attain gain N at every (theta, f).

    Raises LayoutError when the region cannot hold N collinear antennas at
    the required spacing, i.e. when 2*region_half_width < (N-1)*min_spacing.
    """
    n = int(n_antennas)
    if n < 1:
        raise ValueError("n_antennas must be >= 1")
    span = (n - 1) * min_spacing
    if span > 2.0 * region_half_width * (1.0 + 1e-12):
        raise LayoutError(
            f"region of width {2.0 * region_half_width:.6e} m cannot hold "
            f"{n} antennas spaced {min_spacing:.6e} m (span {span:.6e} m)"
        )
    ys = (np.arange(n) - (n - 1) / 2.0) * min_spacing
    layout = AntennaLayout(
        local_coords=np.column_stack([ys, np.zeros(n)]),
        region_half_width=region_half_width,
        min_spacing=min_spacing,
    )
    rotation = RotationAngles(0.0, 0.0, wrap_angle(phi0))
    return ClosedForm1DSolution(
        rotation=rotation,
        weights=uniform_weights(n),
        layout=layout,
        achieved_gain=float(n),
    )


def diagnose_ula_2d(r: RotationAngles, grid: CoverageGrid) -> float:
    """Residual phase projection of a linear array over a 2D angular region.

    Returns max over the grid angles of |r1^T v(theta, phi)|, where r1 is the
    rotated axis of a line array. A zero-squint line array would need this to
    vanish over the whole region; the returned value is strictly positive for
    every rotation on a nondegenerate 2D grid, certifying impossibility.

    Raises ValueError when the grid does not span a genuine 2D angular
    region (the impossibility claim does not apply there).
    """
    if grid.theta[-1] - grid.theta[0] <= 0 or grid.phi[-1] - grid.phi[0] <= 0:
        raise ValueError("grid must span nondegenerate theta and phi extents")
    r1 = rotation_matrix(r)[:, 0]
    th, ph = grid.angle_pairs()
    proj = direction_array(th, ph) @ r1
    return float(np.max(np.abs(proj)))


def diagnose_upa_1d(
    r: RotationAngles,
    phi0: float,
    theta_grid,
) -> tuple[float, float]:
    """Residual projections of a planar array over a 1D elevation range.

    Returns (max |g1|, max |g2|) over the theta samples, with
    g1 = v^T s1 and g2 = v^T s2 the phase coefficients multiplying the local
    y and z coordinates. Zeroing both would require s1 and s2 to be collinear,
    contradicting their orthogonality as rotation-matrix columns, so at least
    one maximum is strictly positive for every rotation.

    Raises ValueError unless the theta samples contain at least two
    non-collinear directions.
    """
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    if theta.size < 2:
        raise ValueError("theta_grid needs at least two samples")
    folded = np.mod(theta, np.pi)
    spread = np.max(folded) - np.min(folded)
    if spread <= 1e-12:
        raise ValueError("theta_grid directions are collinear (degenerate)")
    _, s1, s2 = rotation_columns(r)
    v = direction_array(theta, np.full_like(theta, float(phi0)))
    g1 = v @ s1
    g2 = v @ s2
    return float(np.max(np.abs(g1))), float(np.max(np.abs(g2)))
