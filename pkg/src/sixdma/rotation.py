"""Rotation-angle search: coarse/fine cuboid grids plus Gibbs refinement.

The min-gain objective is wildly non-convex in the three rotation angles, so
for fixed weights and layout the search proceeds in three phases: evaluate
the centers of a coarse tiling of [0, 2pi)^3, sub-tile the best cuboid with
a finer grid, then run a Gibbs-sampling chain that mixes local perturbations
with random jumps across a fixed angle lattice and keeps the best rotation
visited. Every stochastic draw is reproducible from (seed, iteration).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .gain import BeamWeights, CoverageGrid, min_gain
from .geometry import (
    SPEED_OF_LIGHT,
    TWO_PI,
    AntennaLayout,
    RotationAngles,
    direction_array,
    rotation_matrix,
)


@dataclass(frozen=True)
class RotationGridConfig:
    """Coarse tiling of the angle cube and the per-cuboid fine sub-tiling."""

    coarse_counts: tuple[int, int, int] = (8, 8, 8)
    fine_counts: tuple[int, int, int] = (8, 8, 8)

    def __post_init__(self):
        for counts in (self.coarse_counts, self.fine_counts):
            if len(counts) != 3 or any(int(c) < 1 for c in counts):
                raise ValueError("counts must be three integers >= 1")


@dataclass(frozen=True)
class GibbsConfig:
    """Gibbs-sampling chain settings.

    ``candidates_per_iter`` counts both the 6*neighbor_radius local
    perturbations and the random lattice jumps; ``step`` must divide 2*pi.
    ``temperature`` scales gains inside the soft-max; None selects it
    adaptively as 5 / (current min-gain scale) so that one gain unit at the
    current scale shifts selection odds by e^5.
    """

    iters: int = 50
    candidates_per_iter: int = 28
    neighbor_radius: int = 3
    step: float = TWO_PI / 360.0
    temperature: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        if self.neighbor_radius < 1:
            raise ValueError("neighbor_radius must be >= 1")
        if self.candidates_per_iter < 6 * self.neighbor_radius + 1:
            raise ValueError("candidates_per_iter must be >= 6*neighbor_radius + 1")
        ratio = TWO_PI / self.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("step must divide 2*pi")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def lattice_size(self) -> int:
        return int(round(TWO_PI / self.step))


def coarse_centers(cfg: RotationGridConfig) -> list[RotationAngles]:
    """Centers of the uniform cuboid tiling of [0, 2pi)^3.

    Index m decomposes as n_x = m // (Ny*Nz), n_y = (m - n_x*Ny*Nz) // Nz,
    n_z = remainder; component i of the center is 2*pi*(n_i + 1/2)/N_i.
    """
    nx, ny, nz = (int(c) for c in cfg.coarse_counts)
    centers = []
    for m in range(nx * ny * nz):
        ix = m // (ny * nz)
        rem = m - ix * ny * nz
        iy = rem // nz
        iz = rem - iy * nz
        centers.append(
            RotationAngles(
                TWO_PI * (ix + 0.5) / nx,
                TWO_PI * (iy + 0.5) / ny,
                TWO_PI * (iz + 0.5) / nz,
            )
        )
    return centers


def _fine_samples(center: RotationAngles, cfg: RotationGridConfig) -> list[RotationAngles]:
    """Cell-center sub-tiling of the cuboid around ``center``."""
    coarse = [int(c) for c in cfg.coarse_counts]
    fine = [int(c) for c in cfg.fine_counts]
    axes = []
    for c_val, n_coarse, n_fine in zip(center.as_array(), coarse, fine):
        span = TWO_PI / n_coarse
        low = c_val - 0.5 * span
        axes.append(low + (np.arange(n_fine) + 0.5) * span / n_fine)
    out = []
    for a in axes[0]:
        for b in axes[1]:
            for g in axes[2]:
                out.append(RotationAngles(a, b, g))
    return out


def _argmax(rotations, objective) -> tuple[RotationAngles, float]:
    """First-maximum argmax (deterministic tie-break by lowest index)."""
    best_r, best_v = None, -np.inf
    for r in rotations:
        v = objective(r)
        if v > best_v:
            best_r, best_v = r, v
    return best_r, best_v


def hybrid_search(
    w: BeamWeights,
    layout: AntennaLayout,
    grid: CoverageGrid,
    cfg: RotationGridConfig,
) -> RotationAngles:
    """Coarse-then-fine grid search maximizing the min-gain over rotations."""

    def objective(r: RotationAngles) -> float:
        return min_gain(w, r, layout, grid)

    best_center, _ = _argmax(coarse_centers(cfg), objective)
    best_fine, _ = _argmax(_fine_samples(best_center, cfg), objective)
    return best_fine


def gibbs_neighbors(r_prev: RotationAngles, cfg: GibbsConfig) -> list[RotationAngles]:
    """The 6K single-axis perturbations of r_prev by +-k*step, wrapped."""
    a, b, g = r_prev.alpha, r_prev.beta, r_prev.gamma
    out = []
    for k in range(1, cfg.neighbor_radius + 1):
        d = k * cfg.step
        out.extend(
            [
                RotationAngles(a + d, b, g),
                RotationAngles(a - d, b, g),
                RotationAngles(a, b + d, g),
                RotationAngles(a, b - d, g),
                RotationAngles(a, b, g + d),
                RotationAngles(a, b, g - d),
            ]
        )
    return out


def _step_rng(seed: int, iteration: int) -> np.random.Generator:
    """Counter-based stream: draws depend only on (seed, iteration, index)."""
    bitgen = np.random.Philox(key=np.uint64(seed & (2**64 - 1)), counter=[0, 0, 0, iteration])
    return np.random.Generator(bitgen)


def _gibbs_step_detail(
    r_prev: RotationAngles,
    w: BeamWeights,
    layout: AntennaLayout,
    grid: CoverageGrid,
    cfg: GibbsConfig,
    rng: np.random.Generator,
):
    """One chain transition; returns (choice, candidates, gains, labels)."""
    local = gibbs_neighbors(r_prev, cfg)
    local_keys = {tuple(r.as_array()) for r in local}
    n_lat = cfg.lattice_size
    jumps = []
    while len(jumps) < cfg.candidates_per_iter - len(local):
        for _ in range(128):
            idx = rng.integers(0, n_lat, size=3)
            cand = RotationAngles(*(idx * cfg.step))
            if tuple(cand.as_array()) not in local_keys:
                break
        jumps.append(cand)
    candidates = local + jumps
    labels = ["B"] * len(local) + ["D"] * len(jumps)

    gains = np.array([min_gain(w, r, layout, grid) for r in candidates])
    if cfg.temperature is None:
        scale = max(min_gain(w, r_prev, layout, grid), 1e-6)
        mu = 5.0 / scale
    else:
        mu = cfg.temperature
    logits = mu * gains
    logits -= np.max(logits)
    probs = np.exp(logits)
    probs /= probs.sum()

    p_t = 1.0 - rng.random()  # uniform in (0, 1]
    cum = np.cumsum(probs)
    i_star = min(int(np.searchsorted(cum, p_t, side="left")), len(candidates) - 1)
    return candidates[i_star], gains[i_star], labels[i_star], probs


def gibbs_step(
    r_prev: RotationAngles,
    w: BeamWeights,
    layout: AntennaLayout,
    grid: CoverageGrid,
    cfg: GibbsConfig,
    rng: np.random.Generator,
) -> RotationAngles:
    """Draw the next chain state from the soft-max over candidate gains."""
    choice, _, _, _ = _gibbs_step_detail(r_prev, w, layout, grid, cfg, rng)
    return choice


def gibbs_refine(
    r_star: RotationAngles,
    w: BeamWeights,
    layout: AntennaLayout,
    grid: CoverageGrid,
    cfg: GibbsConfig,
    trace_path=None,
) -> RotationAngles:
    """Run the chain for ``cfg.iters`` steps and keep the best rotation seen.

    The visited set starts from ``r_star``, so the result is never worse
    than the input. A fixed seed reproduces the chain exactly.
    """
    best_r = r_star
    best_gain = min_gain(w, r_star, layout, grid)
    rows = [(0, r_star, best_gain, "init")]
    r_cur = r_star
    for t in range(1, cfg.iters + 1):
        rng = _step_rng(cfg.seed, t)
        r_cur, g_cur, label, _ = _gibbs_step_detail(r_cur, w, layout, grid, cfg, rng)
        rows.append((t, r_cur, g_cur, label))
        if g_cur > best_gain:
            best_r, best_gain = r_cur, g_cur
    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "alpha", "beta", "gamma", "min_gain", "accepted_from"])
            for t, r, g, label in rows:
                writer.writerow(
                    [t, f"{r.alpha:.12g}", f"{r.beta:.12g}", f"{r.gamma:.12g}",
                     f"{g:.12g}", label]
                )
    return best_r
