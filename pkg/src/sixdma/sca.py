"""Convex-surrogate subproblems for the alternating optimizer.

Beamforming is handled by lifting the weight vector to a Hermitian matrix
W = w w^H, relaxing the rank-one constraint, and driving it back with a
nuclear-minus-spectral-norm penalty that is majorized afresh at every
iterate. Antenna positions are handled by a second-order minorant of the
beam gain (valid globally because |cos''| <= 1) together with linearized
pairwise-spacing constraints. Both subproblems are dispatched to the dense
interior-point routines in ``ipm``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ipm
from .gain import BeamWeights, gains_from_responses
from .geometry import (
    SPEED_OF_LIGHT,
    AntennaLayout,
    RotationAngles,
    direction_vector,
    rotation_columns,
)

# Penalty schedule (the weight is doubled when SCA stalls while the lift is
# still materially non-rank-one).
PENALTY_CAP = 1e4
RANK_STALL_TOL = 1e-4

# Constraint pruning: keep grid points within this many dB of the running
# minimum plus a random slice of the rest; full-grid checks guard the result.
PRUNE_DB = 3.0
PRUNE_KEEP_FRAC = 0.1
PRUNE_MIN_POINTS = 64


@dataclass(frozen=True)
class PenaltyConfig:
    """Settings for the penalized beamforming SCA."""

    rho: float | None = None     # None: start at 0.1 * N
    max_iters: int = 40
    tol: float = 1e-5            # relative change of the penalized objective

    def __post_init__(self):
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class HermitianLift:
    """Lifted beamforming matrix: Hermitian, PSD, diagonal pinned to 1/N."""

    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("W must be square")
        n = W.shape[0]
        if np.max(np.abs(W - W.conj().T)) > 1e-10:
            raise ValueError("W is not Hermitian within 1e-10")
        if float(np.min(np.linalg.eigvalsh(W))) < -1e-8:
            raise ValueError("W is not PSD within tolerance")
        if np.max(np.abs(np.diag(W).real - 1.0 / n)) > 1e-8 or np.max(
            np.abs(np.diag(W).imag)
        ) > 1e-8:
            raise ValueError("diagonal of W must equal 1/N")
        W = W.copy()
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n_antennas(self) -> int:
        return self.W.shape[0]

    @classmethod
    def from_weights(cls, w: BeamWeights) -> "HermitianLift":
        v = w.vector
        return cls(np.outer(v, v.conj()))


def _as_matrix(W) -> np.ndarray:
    return W.W if isinstance(W, HermitianLift) else np.asarray(W, dtype=complex)


def rank_one_penalty(W) -> float:
    """Nuclear norm minus spectral norm; zero exactly when rank(W) = 1.

    Accepts a HermitianLift or any Hermitian matrix. For a Hermitian
    argument the singular values are the absolute eigenvalues.
    """
    sv = np.abs(np.linalg.eigvalsh(_as_matrix(W)))
    return float(np.sum(sv) - np.max(sv))


def _spectral_subgradient(W_prev: np.ndarray) -> np.ndarray:
    """A subgradient of the spectral norm at a Hermitian matrix.

    Uses the eigenvector of the largest-magnitude eigenvalue, scaled by its
    sign, so the majorization below holds for indefinite matrices too. Ties
    resolve to the lowest index in the eigensolver's ascending order.
    """
    lam, vecs = np.linalg.eigh(W_prev)
    k = int(np.argmax(np.abs(lam)))
    s = vecs[:, k]
    sign = 1.0 if lam[k] >= 0 else -1.0
    return sign * np.outer(s, s.conj())


def penalty_majorant(W, W_prev) -> float:
    """Linearized upper bound of the rank-one penalty around ``W_prev``.

    f_tilde(W | W_prev) = ||W||_* - (||W_prev||_2 + Re Tr(S (W - W_prev)))
    with S a spectral-norm subgradient at W_prev; satisfies
    f_tilde >= rank_one_penalty(W) everywhere and touches at W = W_prev.
    """
    Wm = _as_matrix(W)
    Wp = _as_matrix(W_prev)
    S = _spectral_subgradient(Wp)
    sv = np.abs(np.linalg.eigvalsh(Wm))
    spec_prev = float(np.max(np.abs(np.linalg.eigvalsh(Wp))))
    lin = float(np.sum(np.conj(S) * (Wm - Wp)).real)
    return float(np.sum(sv)) - (spec_prev + lin)


@dataclass
class BeamformingStep:
    """Result of one penalized SDP solve."""

    lift: HermitianLift
    sigma: float          # min constraint value achieved by the lift
    objective: float      # sigma + rho * <S, W> reported by the solver
    converged: bool
    solver: ipm.SDPSolution


def _repair_lift(W: np.ndarray) -> HermitianLift:
    """Project a numerically-feasible solver matrix onto the exact lift set.

    Clamps negative eigenvalues, pins the diagonal to 1/N, then blends in
    just enough of I/N to restore a PSD cushion; all adjustments are at the
    solver-residual scale (~1e-9) and leave the solution unchanged for any
    practical purpose.
    """
    W = 0.5 * (W + W.conj().T)
    n = W.shape[0]
    lam, vecs = np.linalg.eigh(W)
    if lam[0] < 0:
        W = (vecs * np.maximum(lam, 0.0)) @ vecs.conj().T
        W = 0.5 * (W + W.conj().T)
    np.fill_diagonal(W, 1.0 / n)
    eig_min = float(np.min(np.linalg.eigvalsh(W)))
    if eig_min < 0:
        tau = min(1.0, 2.0 * (-eig_min) / (1.0 / n - eig_min))
        W = (1.0 - tau) * W + tau * np.eye(n) / n
        np.fill_diagonal(W, 1.0 / n)
    return HermitianLift(W)


def solve_beamforming_step(
    grid_responses: np.ndarray,
    W_prev,
    cfg: PenaltyConfig,
) -> BeamformingStep:
    """One SCA iteration of the lifted beamforming problem.

    Maximizes sigma - rho * f_tilde(W | W_prev) over feasible lifts. On the
    feasible set the nuclear norm is constant (trace = 1), so the majorant
    reduces to a linear term rho * <s s^H, W> handed to the SDP solver.
    """
    responses = np.atleast_2d(np.asarray(grid_responses, dtype=complex))
    Wp = _as_matrix(W_prev)
    n = Wp.shape[0]
    rho = cfg.rho if cfg.rho is not None else 0.1 * n
    S = _spectral_subgradient(Wp)
    sol = ipm.solve_penalized_sdp(responses, rho * S, 1.0 / n)
    lift = _repair_lift(sol.W)
    sigma_true = float(np.min(gains_from_lift(lift, responses)))
    return BeamformingStep(
        lift=lift,
        sigma=sigma_true,
        objective=sol.objective,
        converged=sol.converged,
        solver=sol,
    )


def gains_from_lift(W, responses: np.ndarray) -> np.ndarray:
    """Constraint values a_i^H W a_i for every response row."""
    Wm = _as_matrix(W)
    t = np.asarray(responses, dtype=complex).conj() @ Wm
    return np.einsum("ln,ln->l", t, np.asarray(responses)).real


def extract_weights(W) -> BeamWeights:
    """Unit-modulus weights from the principal eigenvector of the lift.

    For an exactly rank-one W = w w^H this recovers w up to a global phase;
    for degenerate spectra the eigensolver's deterministic ordering breaks
    the tie.
    """
    Wm = _as_matrix(W)
    _, vecs = np.linalg.eigh(Wm)
    principal = vecs[:, -1]
    return BeamWeights(np.angle(principal))


@dataclass(frozen=True)
class PhaseProjection:
    """Scalars multiplying y and z in the response phase at one grid point."""

    alpha_coef: float  # rad/m
    beta_coef: float   # rad/m


def phase_projection(point, r: RotationAngles) -> PhaseProjection:
    """Per-point projections alpha = (2 pi f / c) v^T s1, beta = ... v^T s2.

    ``point`` is a (theta, phi, freq_hz) triple; these are the unique scalars
    for which the response phase of antenna n equals alpha*y_n + beta*z_n.
    """
    theta, phi, f = point
    _, s1, s2 = rotation_columns(r)
    v = direction_vector(theta, phi).v
    k = 2.0 * np.pi * float(f) / SPEED_OF_LIGHT
    return PhaseProjection(alpha_coef=float(k * (v @ s1)), beta_coef=float(k * (v @ s2)))


@dataclass(frozen=True)
class PositionSurrogate:
    """Quadratic global minorant of the gain at one grid point.

    q(x) = x^T A x + b^T x + c with x = [y_1..y_N, z_1..z_N]; A is symmetric
    negative semidefinite, q <= gain everywhere and q = gain at the
    expansion layout.
    """

    A: np.ndarray  # (2N, 2N)
    b: np.ndarray  # (2N,)
    c: float
    alpha_coef: float
    beta_coef: float

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.A @ x + self.b @ x + self.c)


def build_position_surrogate(
    point,
    r: RotationAngles,
    w: BeamWeights,
    layout_prev: AntennaLayout,
) -> PositionSurrogate:
    """Second-order minorant of the gain in the antenna coordinates.

    The gain is (1/N) sum_{n,m} cos(u_nm) with
    u_nm = alpha*y_nm + beta*z_nm - (phase_n - phase_m); expanding each
    cosine with cos(u) >= cos(u0) - sin(u0)(u-u0) - (u-u0)^2/2 and collecting
    terms yields the quadratic form below. The curvature block couples the
    centered coordinates through C = I - (1/N) 1 1^T.
    """
    proj = phase_projection(point, r)
    al, be = proj.alpha_coef, proj.beta_coef
    n = layout_prev.n_antennas
    y0 = layout_prev.y
    z0 = layout_prev.z
    ph = w.phases
    C = np.eye(n) - np.ones((n, n)) / n
    A = -np.block([[al * al * C, al * be * C], [al * be * C, be * be * C]])

    ydiff = y0[:, None] - y0[None, :]
    zdiff = z0[:, None] - z0[None, :]
    u0 = al * ydiff + be * zdiff - (ph[:, None] - ph[None, :])
    sin_u0 = np.sin(u0)
    row_sin = sin_u0.sum(axis=1)
    by = (2.0 / n) * (al * al * ydiff.sum(axis=1) + al * be * zdiff.sum(axis=1) - al * row_sin)
    bz = (2.0 / n) * (al * be * ydiff.sum(axis=1) + be * be * zdiff.sum(axis=1) - be * row_sin)

    lin = al * ydiff + be * zdiff
    c = float((np.cos(u0) + sin_u0 * lin - 0.5 * lin * lin).sum() / n)
    return PositionSurrogate(
        A=A, b=np.concatenate([by, bz]), c=c, alpha_coef=al, beta_coef=be
    )


@dataclass
class PositionStep:
    """Result of one position QCQP solve."""

    layout: AntennaLayout
    improved: bool
    status: str
    sigma: float
    solver: ipm.QCQPSolution | None


def _spacing_rows(coords_prev: np.ndarray, d_min: float, dims: int) -> tuple[np.ndarray, np.ndarray]:
    """Linearized pairwise-spacing constraints at the previous layout.

    2*(p_n - p_m)^(i) . (p_n - p_m) - ||p_n^(i) - p_m^(i)||^2 >= d_min^2.
    Being a first-order expansion of a convex function, satisfying these
    implies the true spacing constraint.
    """
    n = coords_prev.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    n_pairs = iu.size
    G = np.zeros((n_pairs, dims * n))
    h = np.empty(n_pairs)
    for row, (i, j) in enumerate(zip(iu, ju)):
        sq = 0.0
        for d in range(dims):
            diff = coords_prev[i, d] - coords_prev[j, d]
            G[row, d * n + i] = 2.0 * diff
            G[row, d * n + j] = -2.0 * diff
            sq += diff * diff
        h[row] = d_min * d_min + sq
    return G, h


def _box_rows(n: int, half: float, dims: int) -> tuple[np.ndarray, np.ndarray]:
    size = dims * n
    G = np.vstack([np.eye(size), -np.eye(size)])
    h = np.full(2 * size, -half)
    return G, h


def solve_position_step(
    surrogates: list[PositionSurrogate],
    layout_prev: AntennaLayout,
    *,
    linear: bool = False,
) -> PositionStep:
    """Maximize the worst surrogate subject to spacing and region constraints.

    The spacing constraints are linearized at ``layout_prev``; the returned
    layout is verified against the true constraints and pulled back toward
    the previous layout if the interior-point relaxation left a marginal
    violation. When no surrogate improvement is available the previous
    layout is returned unchanged.

    ``linear`` restricts the antennas to the local y-axis (z pinned at 0).
    """
    if not surrogates:
        raise ValueError("at least one surrogate is required")
    n = layout_prev.n_antennas
    dims = 1 if linear else 2
    size = dims * n
    if linear and np.max(np.abs(layout_prev.z)) > 0:
        raise ValueError("linear mode requires a layout with z = 0")

    x_prev = layout_prev.y.copy() if linear else np.concatenate(
        [layout_prev.y, layout_prev.z]
    )
    quad_A = np.empty((len(surrogates), size, size))
    quad_b = np.empty((len(surrogates), size))
    quad_c = np.empty(len(surrogates))
    for k, s in enumerate(surrogates):
        if linear:
            quad_A[k] = s.A[:n, :n]
            quad_b[k] = s.b[:n]
        else:
            quad_A[k] = s.A
            quad_b[k] = s.b
        quad_c[k] = s.c

    coords_prev = x_prev.reshape(dims, n).T
    G_sp, h_sp = (
        _spacing_rows(coords_prev, layout_prev.min_spacing, dims)
        if n > 1
        else (np.zeros((0, size)), np.zeros(0))
    )
    G_box, h_box = _box_rows(n, layout_prev.region_half_width, dims)
    G = np.vstack([G_sp, G_box])
    h = np.concatenate([h_sp, h_box])

    # the previous layout may sit exactly on a spacing or region boundary;
    # relax just enough to start strictly inside, then repair post hoc
    slack = G @ x_prev - h
    shortfall = float(np.min(slack))
    relax_scale = max(layout_prev.min_spacing**2, layout_prev.region_half_width, 1e-12)
    relax = max(0.0, 1e-9 * relax_scale - shortfall)
    if relax > 0:
        h = h - relax

    try:
        sol = ipm.solve_minmax_qcqp(quad_A, quad_b, quad_c, G, h, x_prev)
    except ipm.SolverError:
        return PositionStep(
            layout=layout_prev, improved=False, status="infeasible", sigma=float("-inf"),
            solver=None,
        )

    x_new = sol.x
    # pull back toward the previous layout until the true constraints hold
    eta = 1.0
    layout_new = None
    for _ in range(60):
        cand = x_prev + eta * (x_new - x_prev)
        coords = (
            np.column_stack([cand, np.zeros(n)]) if linear else cand.reshape(2, n).T
        )
        try:
            layout_new = AntennaLayout(
                coords, layout_prev.region_half_width, layout_prev.min_spacing
            )
            break
        except Exception:
            eta *= 0.5
    if layout_new is None:
        return PositionStep(
            layout=layout_prev, improved=False, status="backtrack_failed",
            sigma=float("-inf"), solver=sol,
        )

    x_final = layout_new.y if linear else np.concatenate([layout_new.y, layout_new.z])
    val_new = min(
        float(x_final @ qa @ x_final + qb @ x_final + qc)
        for qa, qb, qc in zip(quad_A, quad_b, quad_c)
    )
    val_prev = min(
        float(x_prev @ qa @ x_prev + qb @ x_prev + qc)
        for qa, qb, qc in zip(quad_A, quad_b, quad_c)
    )
    if val_new <= val_prev + 1e-12:
        return PositionStep(
            layout=layout_prev, improved=False, status=sol.status, sigma=val_prev,
            solver=sol,
        )
    return PositionStep(
        layout=layout_new, improved=True, status=sol.status, sigma=val_new, solver=sol
    )


def prune_indices(gains: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Grid points kept for the next subproblem solve.

    Everything within PRUNE_DB of the running minimum is kept, plus a random
    PRUNE_KEEP_FRAC slice of the rest. Small grids are never pruned; callers
    re-verify on the full grid after solving.
    """
    gains = np.asarray(gains, dtype=float)
    L = gains.size
    if L <= PRUNE_MIN_POINTS:
        return np.arange(L)
    cutoff = float(np.min(gains)) * 10.0 ** (PRUNE_DB / 10.0)
    keep = gains <= cutoff
    keep |= rng.random(L) < PRUNE_KEEP_FRAC
    return np.flatnonzero(keep)


@dataclass
class SCAInfo:
    iterations: int
    objective_trace: list
    rho_final: float
    converged: bool


def run_beamforming_sca(
    responses: np.ndarray,
    weights_init: BeamWeights,
    cfg: PenaltyConfig,
    rng: np.random.Generator,
) -> tuple[BeamWeights, HermitianLift, SCAInfo]:
    """Penalized SCA loop for the beamforming weights.

    Tracks the exact penalized objective  min-gain(W) - rho * f(W)  on the
    full response set; the penalty weight doubles whenever the loop stalls
    while the lift is still far from rank one. Returns the weights extracted
    from the best lift encountered.
    """
    responses = np.atleast_2d(np.asarray(responses, dtype=complex))
    n = weights_init.n_antennas
    rho = cfg.rho if cfg.rho is not None else 0.1 * n
    W = HermitianLift.from_weights(weights_init)

    def exact_objective(lift: HermitianLift, rho_now: float) -> float:
        return float(np.min(gains_from_lift(lift, responses))) - rho_now * rank_one_penalty(lift)

    obj = exact_objective(W, rho)
    best_W, best_obj = W, obj
    trace = [obj]
    converged = False
    for _ in range(cfg.max_iters):
        gains = gains_from_lift(W, responses)
        idx = prune_indices(gains, rng)
        step = solve_beamforming_step(
            responses[idx], W, PenaltyConfig(rho=rho, max_iters=cfg.max_iters, tol=cfg.tol)
        )
        W = step.lift
        obj_new = exact_objective(W, rho)
        trace.append(obj_new)
        if obj_new > best_obj:
            best_W, best_obj = W, obj_new
        gain_change = abs(obj_new - obj)
        stall_tol = max(cfg.tol, 1e-3)
        if gain_change <= stall_tol * max(1.0, abs(obj)):
            if rank_one_penalty(W) > RANK_STALL_TOL and rho < PENALTY_CAP:
                # stalled while still materially non-rank-one: raise the
                # penalty promptly rather than polishing this plateau
                rho = min(2.0 * rho, PENALTY_CAP)
                obj = exact_objective(W, rho)
                best_obj = exact_objective(best_W, rho)
                continue
            if gain_change <= cfg.tol * max(1.0, abs(obj)):
                converged = True
                obj = obj_new
                break
        obj = obj_new

    weights = extract_weights(best_W)
    return weights, best_W, SCAInfo(
        iterations=len(trace) - 1, objective_trace=trace, rho_final=rho,
        converged=converged,
    )


def run_position_sca(
    point_list: np.ndarray,
    r: RotationAngles,
    w: BeamWeights,
    layout_init: AntennaLayout,
    *,
    max_iters: int = 10,
    tol: float = 1e-4,
    rng: np.random.Generator,
    gain_eval,
    linear: bool = False,
) -> tuple[AntennaLayout, SCAInfo]:
    """SCA loop for the antenna positions.

    ``point_list`` holds the (theta, phi, freq) rows of the coverage grid and
    ``gain_eval(layout)`` must return the per-point gain vector for the fixed
    weights and rotation. A candidate layout is accepted only when the true
    full-grid minimum does not decrease, which keeps the loop monotone even
    with pruned surrogate constraints.
    """
    layout = layout_init
    gains = np.asarray(gain_eval(layout), dtype=float)
    cur = float(np.min(gains))
    trace = [cur]
    converged = False
    for _ in range(max_iters):
        idx = prune_indices(gains, rng)
        surrogates = [
            build_position_surrogate(tuple(point_list[k]), r, w, layout) for k in idx
        ]
        step = solve_position_step(surrogates, layout, linear=linear)
        if not step.improved:
            converged = True
            break
        gains_new = np.asarray(gain_eval(step.layout), dtype=float)
        new = float(np.min(gains_new))
        if new <= cur + 1e-12:
            converged = True
            break
        layout = step.layout
        gains = gains_new
        change = new - cur
        cur = new
        trace.append(cur)
        if change <= tol * max(1.0, cur):
            converged = True
            break
    return layout, SCAInfo(
        iterations=len(trace) - 1, objective_trace=trace, rho_final=0.0,
        converged=converged,
    )
