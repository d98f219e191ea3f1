"""Closed-form 1D optimum and rotation-impossibility diagnostics."""

import numpy as np
import pytest

from sixdma.closed_form import diagnose_ula_2d, diagnose_upa_1d, solve_1d
from sixdma.gain import build_grid, min_gain
from sixdma.geometry import LayoutError, RotationAngles, rotation_columns, wrap_angle

LAM = 299792458.0 / 1e12


class TestSolve1D:
    def test_rotation_angles(self):
        sol = solve_1d(0.0, 16, LAM / 2, 4 * LAM)
        assert sol.rotation.alpha == 0.0
        assert sol.rotation.beta == 0.0
        # gamma maps the antenna line onto the coverage-plane normal
        assert abs(sol.rotation.gamma - wrap_angle(0.0)) < 1e-12

        sol = solve_1d(np.pi / 4, 16, LAM / 2, 4 * LAM)
        assert abs(sol.rotation.gamma - np.pi / 4) < 1e-12

    def test_geometry_perpendicular_to_coverage_plane(self):
        # the rotated y-axis must be orthogonal to every coverage direction
        for phi0 in [0.0, 0.7, np.pi / 2, 4.0]:
            sol = solve_1d(phi0, 8, LAM / 2, 2 * LAM)
            _, s1, _ = rotation_columns(sol.rotation)
            for theta in np.linspace(0, np.pi / 2, 13):
                v = np.array(
                    [np.cos(theta) * np.cos(phi0), np.cos(theta) * np.sin(phi0), np.sin(theta)]
                )
                assert abs(v @ s1) < 1e-12

    def test_layout_canonical_line(self):
        sol = solve_1d(0.3, 5, 2e-4, 1e-3)
        np.testing.assert_allclose(sol.layout.z, 0.0, atol=1e-15)
        np.testing.assert_allclose(np.diff(sol.layout.y), 2e-4, atol=1e-15)
        assert abs(sol.layout.y.sum()) < 1e-15  # centered
        np.testing.assert_allclose(sol.weights.phases, 0.0, atol=1e-15)

    def test_full_gain_on_any_1d_grid(self):
        sol = solve_1d(0.0, 16, LAM / 2, 4 * LAM)
        assert sol.achieved_gain == 16.0
        for counts in [(8, 1, 4), (33, 1, 7)]:
            grid = build_grid(
                (np.pi / 6, np.pi / 2), (0.0, 0.0), (0.95e12, 1.05e12), counts
            )
            g = min_gain(sol.weights, sol.rotation, sol.layout, grid)
            assert abs(g - 16.0) / 16.0 < 1e-9

    def test_opposite_branch_also_achieves_full_gain(self):
        sol = solve_1d(0.8, 12, LAM / 2, 3 * LAM)
        flipped = RotationAngles(0.0, 0.0, sol.rotation.gamma + np.pi)
        grid = build_grid((np.pi / 6, np.pi / 2), (0.8, 0.8), (0.95e12, 1.05e12), (16, 1, 8))
        g = min_gain(sol.weights, flipped, sol.layout, grid)
        assert abs(g - 12.0) / 12.0 < 1e-9

    def test_region_too_small_raises(self):
        with pytest.raises(LayoutError):
            solve_1d(0.0, 16, LAM / 2, 3 * LAM)  # needs 15*lam/2 span > 6*lam width

    def test_boundary_region_feasible(self):
        solve_1d(0.0, 16, LAM / 2, 15 * LAM / 4)  # width exactly (N-1)*dmin


def grid_2d(n=8):
    return build_grid((0.0, np.pi / 2), (0.0, np.pi / 2), (1e12, 1e12), (n, n, 1))


class TestUla2DDiagnostic:
    def test_vertical_array_residual_is_max_sin_theta(self):
        # first rotation column along +z: beta = -pi/2 with alpha = gamma = 0
        r = RotationAngles(0.0, -np.pi / 2, 0.0)
        grid = grid_2d()
        expected = np.max(np.abs(np.sin(grid.theta)))
        assert abs(diagnose_ula_2d(r, grid) - expected) < 1e-12

    def test_positive_for_random_rotations(self):
        rng = np.random.default_rng(0)
        grid = grid_2d()
        for _ in range(300):
            r = RotationAngles(*rng.uniform(0, 2 * np.pi, 3))
            assert diagnose_ula_2d(r, grid) > 1e-6

    def test_degenerate_region_rejected(self):
        r = RotationAngles(0, 0, 0)
        flat = build_grid((0.3, 0.3), (0.0, np.pi / 2), (1e12, 1e12), (1, 8, 1))
        with pytest.raises(ValueError):
            diagnose_ula_2d(r, flat)


class TestUpa1DDiagnostic:
    def theta_grid(self):
        return np.linspace(np.pi / 6, np.pi / 2, 32)

    def test_gamma_phi0_zeroes_g1_leaving_sin_theta_in_g2(self):
        phi0 = 0.6
        r = RotationAngles(0.0, 0.0, phi0)
        g1, g2 = diagnose_upa_1d(r, phi0, self.theta_grid())
        assert g1 < 1e-12
        assert abs(g2 - np.max(np.abs(np.sin(self.theta_grid())))) < 1e-12

    def test_some_projection_survives_every_rotation(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            r = RotationAngles(*rng.uniform(0, 2 * np.pi, 3))
            g1, g2 = diagnose_upa_1d(r, 0.0, self.theta_grid())
            assert max(g1, g2) > 1e-6

    def test_columns_orthogonal(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            _, s1, s2 = rotation_columns(RotationAngles(*rng.uniform(0, 2 * np.pi, 3)))
            assert abs(s1 @ s2) < 1e-12

    def test_degenerate_grid_rejected(self):
        r = RotationAngles(0, 0, 0)
        with pytest.raises(ValueError):
            diagnose_upa_1d(r, 0.0, [0.4])
        with pytest.raises(ValueError):
            diagnose_upa_1d(r, 0.0, [0.4, 0.4, 0.4])
