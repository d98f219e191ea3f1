"""Array response, beam gain, coverage grid and gain field tests."""

import io

import numpy as np
import pytest

from sixdma.closed_form import solve_1d
from sixdma.gain import (
    BeamWeights,
    GAIN_FIELD_HEADER,
    beam_gain,
    build_grid,
    db10,
    gain_field,
    gains_from_responses,
    min_gain,
    response_matrix,
    uniform_weights,
    array_response,
)
from sixdma.geometry import AntennaLayout, RotationAngles, direction_vector


def make_layout(coords, half=1.0, dmin=0.0):
    return AntennaLayout(np.asarray(coords, dtype=float), half, dmin)


class TestArrayResponse:
    def test_single_antenna_at_origin(self):
        layout = make_layout([[0.0, 0.0]])
        a = array_response(1e12, direction_vector(0.3, 0.9), RotationAngles(1, 2, 3), layout)
        np.testing.assert_allclose(a, [1.0 + 0j], atol=1e-15)

    def test_unit_modulus(self):
        rng = np.random.default_rng(0)
        layout = make_layout(rng.uniform(-1e-3, 1e-3, (5, 2)), half=1e-2)
        for _ in range(20):
            r = RotationAngles(*rng.uniform(0, 2 * np.pi, 3))
            a = array_response(
                1e12, direction_vector(rng.uniform(0, 1.5), rng.uniform(0, 6)), r, layout
            )
            np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)

    def test_zero_squint_configuration_gives_all_ones(self):
        # perpendicular line: response is frequency- and angle-independent
        sol = solve_1d(0.0, 8, 1.5e-4, 1.5e-3)
        for f in [0.95e12, 1.0e12, 1.05e12]:
            for theta in [np.pi / 6, np.pi / 3, np.pi / 2]:
                a = array_response(f, direction_vector(theta, 0.0), sol.rotation, sol.layout)
                np.testing.assert_allclose(a, np.ones(8), atol=1e-9)

    def test_generic_value_against_high_precision_oracle(self):
        # frozen from a 50-digit evaluation of the phase 2*pi*f/c * v.(s1 y + s2 z)
        layout = make_layout([[2.1e-4, -0.7e-4]], half=1e-2)
        r = RotationAngles(0.3, 1.1, 5.2)
        a = array_response(1e12, direction_vector(np.pi / 6, np.pi / 4), r, layout)
        assert abs(a[0].real - 0.84467341239092019) < 1e-12
        assert abs(a[0].imag - 0.5352820064226692) < 1e-12

    def test_nonpositive_frequency_rejected(self):
        layout = make_layout([[0.0, 0.0]])
        with pytest.raises(ValueError):
            array_response(0.0, direction_vector(0, 0), RotationAngles(0, 0, 0), layout)


class TestBeamGain:
    def test_full_array_gain_for_matched_uniform(self):
        w = uniform_weights(16)
        assert abs(beam_gain(w, np.ones(16)) - 16.0) < 1e-12
        assert abs(db10(16.0) - 12.0412) < 1e-3

    def test_perfect_cancellation(self):
        w = uniform_weights(2)
        assert beam_gain(w, np.array([1.0, -1.0])) < 1e-28

    def test_against_term_by_term_oracle(self):
        # frozen from a 50-digit term-by-term inner product
        w = BeamWeights([0.4, 2.9, 4.1])
        a = np.exp(1j * np.array([1.0, 0.25, 5.9]))
        assert abs(beam_gain(w, a) - 0.40589305040433403966) < 1e-13

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            beam_gain(uniform_weights(3), np.ones(4))

    def test_gain_bounds(self):
        rng = np.random.default_rng(1)
        for n in [1, 2, 7]:
            w = BeamWeights(rng.uniform(0, 2 * np.pi, n))
            for _ in range(50):
                a = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
                g = beam_gain(w, a)
                assert -1e-12 <= g <= n + 1e-12


class TestBuildGrid:
    def test_uniform_partition_includes_endpoints(self):
        grid = build_grid((0, np.pi / 2), (0, 0), (1e12, 1e12), (3, 1, 1))
        np.testing.assert_allclose(grid.theta, [0, np.pi / 4, np.pi / 2], atol=1e-15)

    def test_single_count_takes_midpoint(self):
        grid = build_grid((0.2, 0.8), (0, 1), (1e12, 2e12), (1, 2, 1))
        np.testing.assert_allclose(grid.theta, [0.5])
        np.testing.assert_allclose(grid.freq, [1.5e12])

    def test_frequency_progression(self):
        grid = build_grid((0, 1), (0, 1), (0.95e12, 1.05e12), (2, 2, 5))
        np.testing.assert_allclose(
            grid.freq, [0.95e12, 0.975e12, 1.0e12, 1.025e12, 1.05e12]
        )

    def test_inverted_range_rejected(self):
        with pytest.raises(ValueError):
            build_grid((1, 0), (0, 1), (1e12, 2e12), (2, 2, 2))

    def test_zero_count_rejected(self):
        with pytest.raises(ValueError):
            build_grid((0, 1), (0, 1), (1e12, 2e12), (0, 2, 2))

    def test_point_order_is_theta_major(self):
        grid = build_grid((0, 1), (2, 3), (1e12, 2e12), (2, 2, 2))
        pts = grid.points()
        assert pts.shape == (8, 3)
        # theta slowest, frequency fastest
        np.testing.assert_allclose(pts[0], [0, 2, 1e12])
        np.testing.assert_allclose(pts[1], [0, 2, 2e12])
        np.testing.assert_allclose(pts[2], [0, 3, 1e12])
        np.testing.assert_allclose(pts[4], [1, 2, 1e12])


class TestGainField:
    def grid(self, counts=(4, 3, 3)):
        return build_grid((0, np.pi / 2), (0, np.pi / 2), (0.95e12, 1.05e12), counts)

    def test_zero_squint_field_is_constant_n(self):
        sol = solve_1d(0.0, 16, 1.5e-4, 1.5e-3)
        grid = build_grid(
            (np.pi / 6, np.pi / 2), (0, 0), (0.95e12, 1.05e12), (16, 1, 8)
        )
        fld = gain_field(sol.weights, sol.rotation, sol.layout, grid)
        np.testing.assert_allclose(fld.gains, 16.0, rtol=1e-12)
        assert abs(fld.min_gain - 16.0) < 1e-9

    def test_single_antenna_constant_one(self):
        layout = make_layout([[0.0, 0.0]])
        fld = gain_field(uniform_weights(1), RotationAngles(1, 2, 3), layout, self.grid())
        np.testing.assert_allclose(fld.gains, 1.0, atol=1e-12)

    def test_min_and_argmin_bookkeeping(self):
        rng = np.random.default_rng(2)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (4, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 4))
        fld = gain_field(w, RotationAngles(0.5, 1.0, 2.0), layout, self.grid())
        assert fld.min_gain == fld.gains[fld.argmin]
        assert fld.min_gain == fld.gains.min()

    def test_matches_pointwise_evaluation(self):
        rng = np.random.default_rng(3)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (3, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 3))
        r = RotationAngles(0.2, 0.4, 0.8)
        grid = self.grid((3, 2, 2))
        fld = gain_field(w, r, layout, grid)
        for idx, (theta, phi, f) in enumerate(grid.points()):
            a = array_response(f, direction_vector(theta, phi), r, layout)
            assert abs(fld.gains[idx] - beam_gain(w, a)) < 1e-12

    def test_refinement_monotonicity(self):
        # a refined grid samples a superset, so its minimum cannot rise
        rng = np.random.default_rng(4)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (5, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 5))
        r = RotationAngles(1.0, 2.0, 3.0)
        coarse = build_grid((0, np.pi / 2), (0, np.pi / 2), (0.95e12, 1.05e12), (3, 3, 3))
        fine = build_grid((0, np.pi / 2), (0, np.pi / 2), (0.95e12, 1.05e12), (5, 5, 5))
        assert min_gain(w, r, layout, fine) <= min_gain(w, r, layout, coarse) + 1e-12

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(5)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (4, 2)), half=1e-2)
        phases = rng.uniform(0, 2 * np.pi, 4)
        r = RotationAngles(0.3, 0.6, 0.9)
        grid = self.grid()
        base = gain_field(BeamWeights(phases), r, layout, grid).gains
        shifted = gain_field(BeamWeights(phases + 1.234), r, layout, grid).gains
        np.testing.assert_allclose(base, shifted, atol=1e-12)

    def test_evaluation_is_deterministic(self):
        rng = np.random.default_rng(6)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (4, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 4))
        r = RotationAngles(0.3, 0.6, 0.9)
        g1 = gain_field(w, r, layout, self.grid()).gains
        g2 = gain_field(w, r, layout, self.grid()).gains
        assert np.array_equal(g1, g2)

    def test_per_angle_min_reduction(self):
        rng = np.random.default_rng(7)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (3, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 3))
        grid = self.grid((3, 2, 4))
        fld = gain_field(w, RotationAngles(0, 0, 0), layout, grid)
        reduced = fld.per_angle_min()
        assert reduced.shape == (3, 2)
        assert abs(reduced.min() - fld.min_gain) < 1e-15

    def test_csv_format_and_row_order(self):
        layout = make_layout([[0.0, 0.0]])
        grid = build_grid((0, 1), (2, 3), (1e12, 2e12), (2, 1, 2))
        fld = gain_field(uniform_weights(1), RotationAngles(0, 0, 0), layout, grid)
        buf = io.StringIO()
        fld.to_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == GAIN_FIELD_HEADER
        assert len(lines) == 1 + 4
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and float(first[2]) == 1e12
        second = lines[2].split(",")
        assert float(second[2]) == 2e12  # frequency varies fastest
        assert abs(float(lines[1].split(",")[3]) - 1.0) < 1e-12
        assert abs(float(lines[1].split(",")[4]) - 0.0) < 1e-12


class TestDbConversion:
    def test_values(self):
        assert abs(db10(10.0) - 10.0) < 1e-12
        assert abs(db10(16.0) - 10 * np.log10(16)) < 1e-12

    def test_floor_avoids_minus_inf(self):
        assert np.isfinite(db10(0.0))
        assert db10(0.0) <= -2990


class TestMinGainWrapper:
    def test_constant_field(self):
        layout = make_layout([[0.0, 0.0]])
        grid = build_grid((0, 1), (0, 1), (1e12, 2e12), (2, 2, 2))
        assert abs(min_gain(uniform_weights(1), RotationAngles(0, 0, 0), layout, grid) - 1.0) < 1e-12

    def test_single_point_grid_equals_beam_gain(self):
        rng = np.random.default_rng(8)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (3, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 3))
        r = RotationAngles(0.7, 0.1, 0.2)
        grid = build_grid((0.4, 0.4), (0.8, 0.8), (1e12, 1e12), (1, 1, 1))
        a = array_response(1e12, direction_vector(0.4, 0.8), r, layout)
        assert abs(min_gain(w, r, layout, grid) - beam_gain(w, a)) < 1e-12

    def test_responses_helper_matches(self):
        rng = np.random.default_rng(9)
        layout = make_layout(rng.uniform(-4e-4, 4e-4, (4, 2)), half=1e-2)
        w = BeamWeights(rng.uniform(0, 2 * np.pi, 4))
        r = RotationAngles(0.7, 0.1, 0.2)
        grid = build_grid((0, 1), (0, 1), (0.9e12, 1.1e12), (3, 3, 3))
        resp = response_matrix(grid, r, layout)
        np.testing.assert_allclose(
            gains_from_responses(w, resp),
            gain_field(w, r, layout, grid).gains,
            atol=1e-13,
        )
