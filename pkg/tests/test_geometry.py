"""Rotation kinematics and layout constraint tests."""

import numpy as np
import pytest

from sixdma.geometry import (
    AntennaLayout,
    LayoutError,
    RotationAngles,
    antenna_position_gcs,
    antenna_positions_gcs,
    direction_vector,
    rotation_columns,
    rotation_matrix,
    wrap_angle,
)


def mp_rotation(alpha, beta, gamma):
    """Independent high-precision oracle: compose the three axis rotations."""
    import mpmath as mp

    mp.mp.dps = 50
    ca, sa = mp.cos(alpha), mp.sin(alpha)
    cb, sb = mp.cos(beta), mp.sin(beta)
    cg, sg = mp.cos(gamma), mp.sin(gamma)
    Rx = mp.matrix([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    Ry = mp.matrix([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    Rz = mp.matrix([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
    M = Rx * Ry * Rz
    return np.array([[float(M[i, j]) for j in range(3)] for i in range(3)])


class TestRotationMatrix:
    def test_zero_rotation_is_identity(self):
        R = rotation_matrix(RotationAngles(0.0, 0.0, 0.0))
        np.testing.assert_allclose(R, np.eye(3), atol=1e-15)

    def test_pure_z_rotation_first_column(self):
        R = rotation_matrix(RotationAngles(0.0, 0.0, np.pi / 2))
        np.testing.assert_allclose(R[:, 0], [0.0, 1.0, 0.0], atol=1e-15)

    @pytest.mark.parametrize("gamma", [0.3, 1.0, 2.5, 4.0, 6.0])
    def test_z_rotation_first_column_formula(self, gamma):
        R = rotation_matrix(RotationAngles(0.0, 0.0, gamma))
        np.testing.assert_allclose(
            R[:, 0], [np.cos(gamma), np.sin(gamma), 0.0], atol=1e-14
        )

    def test_orthonormality_determinant_unit_columns(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            r = RotationAngles(*rng.uniform(0, 2 * np.pi, 3))
            R = rotation_matrix(r)
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
            assert abs(np.linalg.det(R) - 1.0) < 1e-12
            np.testing.assert_allclose(np.linalg.norm(R, axis=0), 1.0, atol=1e-12)

    def test_matches_high_precision_composition(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a, b, g = rng.uniform(0, 2 * np.pi, 3)
            np.testing.assert_allclose(
                rotation_matrix(RotationAngles(a, b, g)), mp_rotation(a, b, g),
                atol=1e-14,
            )

    def test_column_orthogonality_s1_s2(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            _, s1, s2 = rotation_columns(RotationAngles(*rng.uniform(0, 2 * np.pi, 3)))
            assert abs(s1 @ s2) < 1e-12


class TestAngleWrapping:
    @pytest.mark.parametrize(
        "raw,expected",
        [(0.0, 0.0), (2 * np.pi, 0.0), (-0.5, 2 * np.pi - 0.5), (7.0, 7.0 - 2 * np.pi)],
    )
    def test_wrap(self, raw, expected):
        assert abs(wrap_angle(raw) - expected) < 1e-12

    def test_angles_wrapped_at_construction(self):
        r = RotationAngles(-1.0, 2 * np.pi + 0.25, 13.0)
        assert 0 <= r.alpha < 2 * np.pi
        assert 0 <= r.beta < 2 * np.pi
        assert 0 <= r.gamma < 2 * np.pi
        assert abs(r.beta - 0.25) < 1e-12


class TestDirectionVector:
    def test_boresight(self):
        np.testing.assert_allclose(direction_vector(0.0, 0.0).v, [1, 0, 0], atol=1e-15)

    def test_zenith_ignores_azimuth(self):
        for phi in [0.0, 1.0, 4.5]:
            np.testing.assert_allclose(
                direction_vector(np.pi / 2, phi).v, [0, 0, 1], atol=1e-12
            )

    def test_diagonal_direction(self):
        v = direction_vector(np.pi / 4, np.pi / 4).v
        np.testing.assert_allclose(v, [0.5, 0.5, np.sqrt(2) / 2], atol=1e-15)

    def test_unit_norm(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            theta = rng.uniform(-np.pi / 2, np.pi / 2)
            phi = rng.uniform(0, 2 * np.pi)
            assert abs(np.linalg.norm(direction_vector(theta, phi).v) - 1.0) < 1e-12


def make_layout(coords, half=1.0, dmin=0.0):
    return AntennaLayout(np.asarray(coords, dtype=float), half, dmin)


class TestAntennaPositions:
    def test_identity_rotation_maps_to_yz_plane(self):
        layout = make_layout([[0.3, -0.2], [0.1, 0.4]])
        r = RotationAngles(0.0, 0.0, 0.0)
        np.testing.assert_allclose(
            antenna_position_gcs(layout, r, 0), [0.0, 0.3, -0.2], atol=1e-15
        )

    def test_quarter_turn_about_z(self):
        # frozen from a 50-digit composition of the axis rotations
        layout = make_layout([[1.0, 0.0]])
        r = RotationAngles(0.0, 0.0, np.pi / 2)
        np.testing.assert_allclose(
            antenna_position_gcs(layout, r, 0), [-1.0, 0.0, 0.0], atol=1e-15
        )

    def test_origin_antenna_fixed_by_any_rotation(self):
        layout = make_layout([[0.0, 0.0]])
        rng = np.random.default_rng(4)
        for _ in range(20):
            r = RotationAngles(*rng.uniform(0, 2 * np.pi, 3))
            np.testing.assert_allclose(
                antenna_position_gcs(layout, r, 0), np.zeros(3), atol=1e-15
            )

    def test_rotation_is_an_isometry(self):
        rng = np.random.default_rng(5)
        coords = rng.uniform(-0.5, 0.5, (6, 2))
        layout = make_layout(coords)
        for _ in range(50):
            r = RotationAngles(*rng.uniform(0, 2 * np.pi, 3))
            k = antenna_positions_gcs(layout, r)
            for n in range(6):
                for m in range(n + 1, 6):
                    d_local = np.linalg.norm(coords[n] - coords[m])
                    d_global = np.linalg.norm(k[n] - k[m])
                    assert abs(d_local - d_global) < 1e-12

    def test_index_out_of_range(self):
        layout = make_layout([[0.1, 0.1]])
        with pytest.raises(IndexError):
            antenna_position_gcs(layout, RotationAngles(0, 0, 0), 1)


class TestLayoutValidation:
    def test_outside_region_rejected(self):
        with pytest.raises(LayoutError):
            make_layout([[1.5, 0.0]], half=1.0)

    def test_spacing_violation_rejected(self):
        with pytest.raises(LayoutError):
            AntennaLayout(np.array([[0.0, 0.0], [0.05, 0.0]]), 1.0, 0.2)

    def test_exact_minimum_spacing_accepted(self):
        AntennaLayout(np.array([[0.0, 0.0], [0.2, 0.0]]), 1.0, 0.2)

    def test_single_antenna_needs_no_spacing(self):
        AntennaLayout(np.array([[0.0, 0.0]]), 1.0, 0.5)

    def test_bad_shapes_rejected(self):
        with pytest.raises(LayoutError):
            AntennaLayout(np.zeros((2, 3)), 1.0, 0.1)
