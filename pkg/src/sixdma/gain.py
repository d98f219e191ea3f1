"""Frequency-dependent array response, beam gain and coverage grids.

The objective everywhere downstream is the minimum of the beam gain
|w^H a(f, theta, phi)|^2 over a discretized angle-frequency sample set; this
module is the single source of truth for that quantity. All gains are kept
linear; dB conversion happens only at reporting time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    AntennaLayout,
    DirectionVector,
    RotationAngles,
    direction_array,
    rotation_columns,
)

# Linear gains below this are clamped before taking log10 so reports never
# contain -inf.
_DB_FLOOR = 1e-300

GAIN_FIELD_HEADER = "theta_rad,phi_rad,freq_hz,gain_linear,gain_db"


@dataclass(frozen=True)
class BeamWeights:
    """Unit-modulus analog weights w_n = exp(j*phase_n) / sqrt(N)."""

    phases: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.phases, dtype=float)).copy()
        if p.ndim != 1 or p.size < 1:
            raise ValueError("phases must be a nonempty 1-D array")
        p.setflags(write=False)
        object.__setattr__(self, "phases", p)

    @property
    def n_antennas(self) -> int:
        return self.phases.size

    @property
    def vector(self) -> np.ndarray:
        """Complex weight vector with |w_n| = 1/sqrt(N) exactly."""
        return np.exp(1j * self.phases) / np.sqrt(self.phases.size)


def uniform_weights(n: int) -> BeamWeights:
    return BeamWeights(np.zeros(int(n)))


def _axis_samples(lo: float, hi: float, count: int) -> np.ndarray:
    """Ascending uniform samples including both endpoints; midpoint if count=1."""
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    if hi < lo:
        raise ValueError(f"inverted range [{lo}, {hi}]")
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, count)


@dataclass(frozen=True)
class CoverageGrid:
    """Discretized angle-frequency sample set.

    Flattened point order is elevation-major, then azimuth, then frequency.
    """

    theta: np.ndarray  # (L1,) radians, ascending
    phi: np.ndarray    # (L2,) radians, ascending
    freq: np.ndarray   # (L3,) Hz, ascending

    def __post_init__(self):
        for name in ("theta", "phi", "freq"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            if a.ndim != 1 or a.size < 1 or np.any(np.diff(a) < 0):
                raise ValueError(f"{name} samples must be a nonempty ascending 1-D array")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if np.any(self.freq <= 0):
            raise ValueError("frequencies must be positive")

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.theta.size, self.phi.size, self.freq.size

    @property
    def n_points(self) -> int:
        l1, l2, l3 = self.counts
        return l1 * l2 * l3

    def points(self) -> np.ndarray:
        """All (theta, phi, freq) triples, shape (L1*L2*L3, 3), canonical order."""
        t, p, f = np.meshgrid(self.theta, self.phi, self.freq, indexing="ij")
        return np.stack([t.ravel(), p.ravel(), f.ravel()], axis=1)

    def angle_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (theta, phi) pairs in elevation-major order, (L1*L2,) each."""
        t, p = np.meshgrid(self.theta, self.phi, indexing="ij")
        return t.ravel(), p.ravel()


def build_grid(
    theta_range: tuple[float, float],
    phi_range: tuple[float, float],
    freq_range: tuple[float, float],
    counts: tuple[int, int, int],
) -> CoverageGrid:
    """Uniform coverage grid over the given ranges with counts (L1, L2, L3)."""
    l1, l2, l3 = counts
    return CoverageGrid(
        theta=_axis_samples(theta_range[0], theta_range[1], int(l1)),
        phi=_axis_samples(phi_range[0], phi_range[1], int(l2)),
        freq=_axis_samples(freq_range[0], freq_range[1], int(l3)),
    )


def array_response(
    f: float,
    direction: DirectionVector,
    r: RotationAngles,
    layout: AntennaLayout,
) -> np.ndarray:
    """Unit-modulus steering phasors exp(j*2*pi*(f/c) * v^T k_n), shape (N,)."""
    if f <= 0:
        raise ValueError(f"frequency must be positive, got {f}")
    _, s1, s2 = rotation_columns(r)
    proj = layout.y * (direction.v @ s1) + layout.z * (direction.v @ s2)
    return np.exp(1j * (2.0 * np.pi * f / SPEED_OF_LIGHT) * proj)


def response_matrix(grid: CoverageGrid, r: RotationAngles, layout: AntennaLayout) -> np.ndarray:
    """Array responses at every grid point, shape (L1*L2*L3, N).

    Row order matches ``CoverageGrid.points``.
    """
    _, s1, s2 = rotation_columns(r)
    th, ph = grid.angle_pairs()
    v = direction_array(th, ph)                      # (L1*L2, 3)
    k = np.outer(layout.y, s1) + np.outer(layout.z, s2)  # (N, 3)
    proj = v @ k.T                                   # (L1*L2, N)
    scale = 2.0 * np.pi * grid.freq / SPEED_OF_LIGHT  # (L3,)
    phases = scale[None, :, None] * proj[:, None, :]  # (L1*L2, L3, N)
    n = layout.n_antennas
    return np.exp(1j * phases).reshape(-1, n)


def beam_gain(w: BeamWeights, a: np.ndarray) -> float:
    """Beam gain |w^H a|^2; lies in [0, N] for unit-modulus responses."""
    a = np.asarray(a)
    if a.shape != (w.n_antennas,):
        raise ValueError(f"response length {a.shape} does not match N={w.n_antennas}")
    return float(np.abs(np.vdot(w.vector, a)) ** 2)


def gains_from_responses(w: BeamWeights, responses: np.ndarray) -> np.ndarray:
    """Beam gains for a stack of responses, shape (L,)."""
    s = responses @ np.conj(w.vector)
    return np.abs(s) ** 2


@dataclass(frozen=True)
class GainField:
    """Beam gains over a coverage grid for one (weights, rotation, layout)."""

    grid: CoverageGrid
    gains: np.ndarray  # (L1*L2*L3,), canonical point order
    min_gain: float = field(init=False)
    argmin: int = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float).copy()
        if g.shape != (self.grid.n_points,):
            raise ValueError("gains length does not match grid")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)
        idx = int(np.argmin(g))
        object.__setattr__(self, "argmin", idx)
        object.__setattr__(self, "min_gain", float(g[idx]))

    def per_angle_min(self) -> np.ndarray:
        """Minimum over frequency at each angle pair, shape (L1, L2)."""
        l1, l2, l3 = self.grid.counts
        return self.gains.reshape(l1, l2, l3).min(axis=2)

    def to_csv(self, path_or_file) -> None:
        """Write `theta_rad,phi_rad,freq_hz,gain_linear,gain_db` rows.

        Row order is elevation-major, then azimuth, then frequency; numbers
        carry 12 significant digits; lines end with LF.
        """
        pts = self.grid.points()
        if hasattr(path_or_file, "write"):
            self._write_csv(path_or_file, pts)
        else:
            with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
                self._write_csv(fh, pts)

    def _write_csv(self, fh: io.TextIOBase, pts: np.ndarray) -> None:
        fh.write(GAIN_FIELD_HEADER + "\n")
        for (th, ph, f), g in zip(pts, self.gains):
            fh.write(
                f"{th:.12g},{ph:.12g},{f:.12g},{g:.12g},{db10(g):.12g}\n"
            )


def gain_field(
    w: BeamWeights,
    r: RotationAngles,
    layout: AntennaLayout,
    grid: CoverageGrid,
) -> GainField:
    """Evaluate the beam gain at every grid point and record the minimum."""
    if w.n_antennas != layout.n_antennas:
        raise ValueError("weights and layout disagree on antenna count")
    resp = response_matrix(grid, r, layout)
    return GainField(grid=grid, gains=gains_from_responses(w, resp))


def min_gain(
    w: BeamWeights,
    r: RotationAngles,
    layout: AntennaLayout,
    grid: CoverageGrid,
) -> float:
    """Minimum beam gain over the grid (the max-min coverage objective)."""
    return gain_field(w, r, layout, grid).min_gain


def db10(gain_linear: float) -> float:
    """Linear-to-dB conversion with clamping so reports never emit -inf."""
    return float(10.0 * np.log10(max(float(gain_linear), _DB_FLOOR)))
