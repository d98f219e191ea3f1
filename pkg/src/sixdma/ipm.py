"""Dense interior-point solvers for the two structured convex subproblems.

Problem sizes here are tiny (N <= ~32 antennas, a few hundred grid
constraints), so both solvers are self-contained dense routines rather than
bindings to a general-purpose package:

* ``solve_penalized_sdp`` - a feasible-start primal-dual path-following
  method (HKM direction, Mehrotra predictor-corrector) for the lifted
  beamforming problem

      max   sigma + <C, W>
      s.t.  a_i^H W a_i >= sigma   for every grid constraint,
            W_nn = d                for every antenna,
            W  >= 0 (Hermitian PSD), sigma >= 0.

  The gain constraints are rank one, which makes the Schur complement on
  the L + N linear constraints assemble from elementwise products of small
  matrices.

* ``solve_minmax_qcqp`` - a log-barrier damped-Newton method for the
  position problem

      max   sigma
      s.t.  x^T A_i x + b_i^T x + c_i >= sigma   (A_i negative semidefinite),
            G x >= h                              (affine rows),

  whose constraints are all concave, hence the feasible set is convex.

Both return KKT-style residuals so callers and tests can certify solution
quality directly.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None


def _single_threaded_blas():
    """Multithreaded BLAS is counterproductive at these matrix sizes."""
    if threadpool_limits is None:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=1, user_api="blas")


class SolverError(RuntimeError):
    """Raised when a solver cannot make progress from the supplied start."""


@dataclass
class SDPSolution:
    """Solution and certificates for the penalized beamforming SDP."""

    W: np.ndarray
    sigma: float
    objective: float        # sigma + <C, W> at the returned iterate
    y_gain: np.ndarray      # multipliers for the gain constraints (>= 0)
    y_diag: np.ndarray      # multipliers for the diagonal constraints
    Z: np.ndarray           # dual slack matrix (Hermitian PSD)
    status: str             # "optimal" | "max_iters" | "stalled"
    iterations: int
    primal_res: float       # worst equality violation + cone violation
    dual_res: float         # worst dual equality violation + cone violation
    gap: float              # absolute complementarity <W,Z> + t.u + sigma*v
    trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


def _hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def _max_step_psd(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest step a with X + a*dX still PSD (X strictly positive definite)."""
    n = X.shape[0]
    scale = float(np.trace(X).real) / n
    jitter = 0.0
    for _ in range(8):
        try:
            L = np.linalg.cholesky(X + jitter * np.eye(n))
            break
        except np.linalg.LinAlgError:
            # near-rank-deficient iterate close to the optimal face
            jitter = max(1e-16 * scale, jitter * 100.0)
    else:
        return 0.0
    Y = sla.solve_triangular(L, dX, lower=True, check_finite=False)
    Y = sla.solve_triangular(L, Y.conj().T, lower=True, check_finite=False).conj().T
    lam_min = float(np.min(np.linalg.eigvalsh(_hermitize(Y))))
    if lam_min >= 0.0:
        return np.inf
    return -1.0 / lam_min


def _max_step_pos(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest step a with x + a*dx > 0 elementwise."""
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve_penalized_sdp(
    responses: np.ndarray,
    obj_matrix: np.ndarray | None = None,
    diag_value: float | None = None,
    *,
    gap_tol: float = 1e-9,
    feas_tol: float = 1e-9,
    max_iters: int = 100,
    step_frac: float = 0.98,
) -> SDPSolution:
    """Solve the lifted max-min beamforming SDP with a linear penalty term.

    Parameters
    ----------
    responses : (L, N) complex
        One row per grid constraint; row i is the steering vector a_i.
    obj_matrix : (N, N) Hermitian, optional
        Linear objective term C in  max sigma + <C, W>. Defaults to zero.
    diag_value : float, optional
        Required value of every diagonal entry of W; defaults to 1/N.
    """
    with _single_threaded_blas():
        return _solve_penalized_sdp(
            responses,
            obj_matrix,
            diag_value,
            gap_tol=gap_tol,
            feas_tol=feas_tol,
            max_iters=max_iters,
            step_frac=step_frac,
        )


def _solve_penalized_sdp(
    responses,
    obj_matrix=None,
    diag_value=None,
    *,
    gap_tol,
    feas_tol,
    max_iters,
    step_frac,
) -> SDPSolution:
    A = np.atleast_2d(np.asarray(responses, dtype=complex))
    L_n, N = A.shape
    if L_n < 1 or N < 1:
        raise ValueError("responses must contain at least one constraint")
    d = 1.0 / N if diag_value is None else float(diag_value)
    if d <= 0:
        raise ValueError("diag_value must be positive")
    C = np.zeros((N, N), dtype=complex) if obj_matrix is None else _hermitize(
        np.asarray(obj_matrix, dtype=complex)
    )
    Ac = A.T.copy()  # columns a_i as used in a_i^H X a_i = (Ac^H X Ac)_ii

    def gain_vals(X: np.ndarray) -> np.ndarray:
        t = X @ Ac
        return np.einsum("nl,nl->l", Ac.conj(), t).real

    # Strictly feasible primal start: W = d*I keeps the diagonal exact and
    # every gain value d*||a_i||^2 > 0; split that margin between sigma and t.
    W = d * np.eye(N, dtype=complex)
    g0 = gain_vals(W)
    if np.min(g0) <= 0:
        raise SolverError("a constraint row is numerically zero; cannot start")
    sigma = 0.5 * float(np.min(g0))
    t = g0 - sigma

    # Strictly feasible dual start: uniform gain multipliers summing to 2 make
    # the sigma-slack 1; shift the diagonal multipliers to push Z above I.
    y_gain = np.full(L_n, 2.0 / L_n)
    M0 = -C - (2.0 / L_n) * (Ac @ Ac.conj().T)
    nu0 = float(np.min(np.linalg.eigvalsh(_hermitize(M0)))) - 1.0
    y_diag = np.full(N, nu0)
    Z = _hermitize(M0 - nu0 * np.eye(N))
    u = y_gain.copy()
    v = float(np.sum(y_gain) - 1.0)

    nu_deg = N + L_n + 1  # barrier degree of the product cone
    b_norm = max(1.0, d)
    c_norm = max(1.0, float(np.max(np.abs(C))))
    trace: list = []

    status = "max_iters"
    it = 0
    best = None
    best_score = np.inf
    stall = 0
    prev_gap = np.inf
    for it in range(1, max_iters + 1):
        # residuals
        g = gain_vals(W)
        rp_gain = -(g - t - sigma)             # target 0
        rp_diag = d - np.diag(W).real          # target d
        Rd = _hermitize(-C - Ac @ (y_gain[:, None] * Ac.conj().T) - np.diag(y_diag) - Z)
        rd_t = y_gain - u
        rd_s = -1.0 + float(np.sum(y_gain)) - v

        gap = float(np.vdot(W, Z).real + t @ u + sigma * v)
        mu = gap / nu_deg
        pres = max(np.max(np.abs(rp_gain)), np.max(np.abs(rp_diag)))
        dres = max(np.max(np.abs(Rd)), np.max(np.abs(rd_t)), abs(rd_s))
        pobj = sigma + float(np.vdot(C, W).real)
        dobj = d * float(np.sum(y_diag))
        obj_scale = max(1.0, abs(pobj) + abs(dobj))
        trace.append((it, pobj, pres, dres, gap))

        score = max(pres / b_norm, dres / c_norm, gap / obj_scale)
        if score < best_score:
            best_score = score
            best = (W.copy(), t.copy(), float(sigma), y_gain.copy(), y_diag.copy(),
                    Z.copy(), u.copy(), float(v))
        if (
            pres <= feas_tol * b_norm
            and dres <= 1e-8 * c_norm
            and gap <= gap_tol * obj_scale
        ):
            status = "optimal"
            break
        # near the (typically rank-deficient) optimal face the gap stops
        # improving; accept the iterate once it is certificate-grade
        stall = stall + 1 if gap > 0.9 * prev_gap else 0
        prev_gap = gap
        if stall >= 5:
            status = "optimal" if best_score <= 1e-7 else "stalled"
            break

        # scaling quantities shared by predictor and corrector
        Zi = None
        jz = 0.0
        z_scale = float(np.trace(Z).real) / N
        for _ in range(8):
            try:
                Zi = _hermitize(np.linalg.inv(Z + jz * np.eye(N)))
                break
            except np.linalg.LinAlgError:
                jz = max(1e-16 * z_scale, jz * 100.0)
        if Zi is None:
            status = "stalled"
            break
        WA = W @ Ac
        ZiA = Zi @ Ac
        P = Ac.conj().T @ WA       # P_ij = a_i^H W a_j
        Q = Ac.conj().T @ ZiA
        K = P.real * Q.real + P.imag * Q.imag          # Re(P * conj(Q))
        Kp = (WA.conj() * ZiA).real.T                  # (L, N)
        Kpp = (W * Zi.conj()).real                     # (N, N)
        tou = t / u
        sov = sigma / v
        Mschur = np.empty((L_n + N, L_n + N))
        Mschur[:L_n, :L_n] = K + sov
        Mschur[:L_n, :L_n][np.diag_indices(L_n)] += tou
        Mschur[:L_n, L_n:] = Kp
        Mschur[L_n:, :L_n] = Kp.T
        Mschur[L_n:, L_n:] = Kpp

        cho = None
        jitter = 0.0
        base = np.trace(Mschur) / Mschur.shape[0]
        for attempt in range(6):
            try:
                cho = sla.cho_factor(
                    Mschur + jitter * np.eye(L_n + N), lower=True, check_finite=False
                )
                break
            except np.linalg.LinAlgError:
                jitter = max(1e-14 * base, jitter * 100 if jitter else 1e-14 * base)
        if cho is None:
            status = "stalled"
            break

        WRZ = W @ Rd @ Zi

        def solve_direction(sig_mu, E_W, e_t, e_s):
            FZi = sig_mu * Zi - W - (E_W @ Zi if E_W is not None else 0.0)
            f_t = sig_mu - t * u - e_t
            f_s = sig_mu - sigma * v - e_s
            # rhs for the gain rows
            tmp = (FZi - WRZ) @ Ac
            lead = np.einsum("nl,nl->l", Ac.conj(), tmp).real
            rhs = np.empty(L_n + N)
            rhs[:L_n] = (
                rp_gain
                - lead
                + f_t / u
                - tou * rd_t
                + f_s / v
                - sov * rd_s
            )
            rhs[L_n:] = rp_diag - np.diag(FZi - WRZ).real
            dy = sla.cho_solve(cho, rhs, check_finite=False)
            dy_g, dy_d = dy[:L_n], dy[L_n:]
            dZ = _hermitize(Rd - Ac @ (dy_g[:, None] * Ac.conj().T) - np.diag(dy_d))
            dW = _hermitize(FZi - W @ dZ @ Zi)
            du = rd_t + dy_g
            dt = f_t / u - tou * du
            dv = rd_s + float(np.sum(dy_g))
            ds = f_s / v - sov * dv
            return dW, dt, ds, dy_g, dy_d, dZ, du, dv

        # predictor (affine scaling)
        dWa, dta, dsa, _, _, dZa, dua, dva = solve_direction(0.0, None, 0.0, 0.0)
        ap = min(
            1.0,
            _max_step_psd(W, dWa),
            _max_step_pos(t, dta),
            _max_step_pos(np.array([sigma]), np.array([dsa])),
        )
        ad = min(
            1.0,
            _max_step_psd(Z, dZa),
            _max_step_pos(u, dua),
            _max_step_pos(np.array([v]), np.array([dva])),
        )
        gap_aff = float(
            np.vdot(W + ap * dWa, Z + ad * dZa).real
            + (t + ap * dta) @ (u + ad * dua)
            + (sigma + ap * dsa) * (v + ad * dva)
        )
        sig = float(np.clip((max(gap_aff, 0.0) / gap) ** 3, 1e-8, 0.9999))

        # corrector with Mehrotra second-order terms
        dW, dt, ds, dy_g, dy_d, dZ, du, dv = solve_direction(
            sig * mu, dWa @ dZa, dta * dua, dsa * dva
        )
        ap = step_frac * min(
            1.0 / step_frac,
            _max_step_psd(W, dW),
            _max_step_pos(t, dt),
            _max_step_pos(np.array([sigma]), np.array([ds])),
        )
        ad = step_frac * min(
            1.0 / step_frac,
            _max_step_psd(Z, dZ),
            _max_step_pos(u, du),
            _max_step_pos(np.array([v]), np.array([dv])),
        )
        ap, ad = min(ap, 1.0), min(ad, 1.0)
        if max(ap, ad) < 1e-10:
            status = "stalled"
            break

        W = _hermitize(W + ap * dW)
        t = t + ap * dt
        sigma = float(sigma + ap * ds)
        y_gain = y_gain + ad * dy_g
        y_diag = y_diag + ad * dy_d
        Z = _hermitize(Z + ad * dZ)
        u = u + ad * du
        v = float(v + ad * dv)

    if best is not None:
        W, t, sigma, y_gain, y_diag, Z, u, v = best
    g = gain_vals(W)
    cone_p = max(0.0, -float(np.min(np.linalg.eigvalsh(W))), -float(np.min(t)), -sigma)
    cone_d = max(0.0, -float(np.min(np.linalg.eigvalsh(Z))), -float(np.min(u)), -v)
    Rd = _hermitize(-C - Ac @ (y_gain[:, None] * Ac.conj().T) - np.diag(y_diag) - Z)
    return SDPSolution(
        W=W,
        sigma=float(sigma),
        objective=float(sigma) + float(np.vdot(C, W).real),
        y_gain=y_gain,
        y_diag=y_diag,
        Z=Z,
        status=status,
        iterations=it,
        primal_res=max(
            float(np.max(np.abs(g - t - sigma))),
            float(np.max(np.abs(d - np.diag(W).real))),
            cone_p,
        ),
        dual_res=max(
            float(np.max(np.abs(Rd))),
            float(np.max(np.abs(y_gain - u))),
            abs(-1.0 + float(np.sum(y_gain)) - v),
            cone_d,
        ),
        gap=float(np.vdot(W, Z).real + t @ u + sigma * v),
        trace=trace,
    )


@dataclass
class QCQPSolution:
    """Solution and certificates for the max-min concave QCQP."""

    x: np.ndarray
    sigma: float
    lambdas: np.ndarray     # multipliers of the quadratic constraints
    nus: np.ndarray         # multipliers of the affine constraints
    status: str             # "optimal" | "max_iters" | "stalled"
    iterations: int
    primal_res: float       # worst constraint violation (0 at interior points)
    dual_res: float         # scaled stationarity residual
    gap: float              # complementarity m / t_final
    trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


def solve_minmax_qcqp(
    quad_A: np.ndarray,
    quad_b: np.ndarray,
    quad_c: np.ndarray,
    lin_G: np.ndarray,
    lin_h: np.ndarray,
    x0: np.ndarray,
    *,
    gap_tol: float = 1e-9,
    stat_tol: float = 1e-9,
    max_iters: int = 100,
    step_frac: float = 0.99,
) -> QCQPSolution:
    """Maximize sigma subject to quadratic minorants and affine rows.

    Infeasible-start primal-dual path following with a Mehrotra corrector.
    Slacks are eliminated (they are defined by the constraints), so primal
    iterates stay strictly feasible by construction of the line search.

    Parameters
    ----------
    quad_A : (mq, n, n) symmetric negative-semidefinite blocks
    quad_b : (mq, n)
    quad_c : (mq,)
        Constraints x^T A_i x + b_i^T x + c_i >= sigma.
    lin_G, lin_h : (ma, n), (ma,)
        Constraints G x >= h. Must include enough rows (e.g. box bounds) to
        make the feasible set bounded.
    x0 : (n,)
        Strictly feasible for the affine rows: G x0 > h.
    """
    with _single_threaded_blas():
        return _solve_minmax_qcqp(
            quad_A,
            quad_b,
            quad_c,
            lin_G,
            lin_h,
            x0,
            gap_tol=gap_tol,
            stat_tol=stat_tol,
            max_iters=max_iters,
            step_frac=step_frac,
        )


def _solve_minmax_qcqp(
    quad_A,
    quad_b,
    quad_c,
    lin_G,
    lin_h,
    x0,
    *,
    gap_tol,
    stat_tol,
    max_iters,
    step_frac,
) -> QCQPSolution:
    A3 = np.asarray(quad_A, dtype=float)
    B = np.asarray(quad_b, dtype=float)
    cq = np.asarray(quad_c, dtype=float)
    G = np.atleast_2d(np.asarray(lin_G, dtype=float))
    h = np.asarray(lin_h, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    mq, n = B.shape
    ma = G.shape[0]
    if mq < 1:
        raise ValueError("at least one quadratic constraint is required")
    if ma and np.min(G @ x - h) <= 0:
        raise SolverError("x0 is not strictly feasible for the affine rows")

    def qvals(xv):
        return np.einsum("kij,i,j->k", A3, xv, xv) + B @ xv + cq

    def qgrads(xv):
        return 2.0 * np.einsum("kij,j->ki", A3, xv) + B  # (mq, n)

    q0 = qvals(x)
    sigma = float(np.min(q0)) - max(1.0, 0.1 * abs(float(np.min(q0))))
    sq = q0 - sigma
    sa = G @ x - h if ma else np.zeros(0)
    lam = 1.0 / sq
    lam *= 1.0 / max(1.0, lam.sum())  # keep the sigma-row residual moderate
    nus = 1.0 / np.maximum(sa, 1e-2) if ma else np.zeros(0)
    m_tot = mq + ma

    status = "max_iters"
    trace: list = []
    best = None
    best_score = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        gradq = qgrads(x)
        sq = qvals(x) - sigma
        sa = G @ x - h if ma else np.zeros(0)
        r_x = -gradq.T @ lam - (G.T @ nus if ma else 0.0)
        r_s = -1.0 + float(np.sum(lam))
        gap = float(lam @ sq + (nus @ sa if ma else 0.0))
        mu = gap / m_tot
        dres = max(float(np.max(np.abs(r_x))), abs(r_s))
        obj_scale = max(1.0, abs(sigma))
        trace.append((it, sigma, 0.0, dres, gap))

        score = max(dres, gap / obj_scale)
        if score < best_score:
            best_score = score
            best = (x.copy(), float(sigma), lam.copy(), nus.copy())
        if dres <= stat_tol and gap <= gap_tol * obj_scale:
            status = "optimal"
            break

        Dq = lam / sq
        H = gradq.T @ (gradq * Dq[:, None]) - 2.0 * np.einsum("k,kij->ij", lam, A3)
        if ma:
            H = H + G.T @ (G * (nus / sa)[:, None])
        gvec = gradq.T @ Dq
        M = np.empty((n + 1, n + 1))
        M[:n, :n] = H
        M[:n, n] = -gvec
        M[n, :n] = -gvec
        M[n, n] = float(np.sum(Dq))

        cho = None
        jitter = 0.0
        scale_m = max(float(np.trace(M)) / (n + 1), 1e-300)
        for _ in range(8):
            try:
                cho = sla.cho_factor(M + jitter * np.eye(n + 1), check_finite=False)
                break
            except np.linalg.LinAlgError:
                jitter = max(1e-15 * scale_m, jitter * 1000.0)
        if cho is None:
            status = "stalled"
            break

        def direction(r_cq, r_ca):
            rhs = np.empty(n + 1)
            rhs[:n] = -r_x - gradq.T @ (r_cq / sq) - (G.T @ (r_ca / sa) if ma else 0.0)
            rhs[n] = -r_s + float(np.sum(r_cq / sq))
            sol = sla.cho_solve(cho, rhs, check_finite=False)
            dx, ds = sol[:n], float(sol[n])
            dlam = (-r_cq - lam * (gradq @ dx) + lam * ds) / sq
            dnu = (-r_ca - nus * (G @ dx)) / sa if ma else np.zeros(0)
            return dx, ds, dlam, dnu

        def primal_step(dx, ds, frac):
            # backtrack on true (concave) constraint slacks
            a = frac
            for _ in range(80):
                xn = x + a * dx
                ok = np.min(qvals(xn) - (sigma + a * ds)) > 0.0
                if ok and ma:
                    ok = np.min(G @ xn - h) > 0.0
                if ok:
                    return a
                a *= 0.7
            return 0.0

        # predictor
        dx_a, ds_a, dlam_a, dnu_a = direction(lam * sq, nus * sa)
        ad_a = min(1.0, _max_step_pos(lam, dlam_a), _max_step_pos(nus, dnu_a) if ma else np.inf)
        ap_a = primal_step(dx_a, ds_a, 1.0)
        x_a = x + ap_a * dx_a
        sq_a = qvals(x_a) - (sigma + ap_a * ds_a)
        sa_a = G @ x_a - h if ma else np.zeros(0)
        gap_aff = float((lam + ad_a * dlam_a) @ sq_a + ((nus + ad_a * dnu_a) @ sa_a if ma else 0.0))
        sig_c = float(np.clip((max(gap_aff, 0.0) / gap) ** 3, 1e-8, 0.9999))
        if dres > 10.0 * mu:
            # keep the iterate centered while stationarity still lags, else
            # vanishing slacks block the Newton steps that fix it
            sig_c = max(sig_c, 0.5)

        # corrector with second-order complementarity terms
        dsq_a = gradq @ dx_a - ds_a
        dsa_a = G @ dx_a if ma else np.zeros(0)
        r_cq = lam * sq - sig_c * mu + dlam_a * dsq_a
        r_ca = nus * sa - sig_c * mu + dnu_a * dsa_a if ma else np.zeros(0)
        dx, ds, dlam, dnu = direction(r_cq, r_ca)
        ad = step_frac * min(
            1.0 / step_frac,
            _max_step_pos(lam, dlam),
            _max_step_pos(nus, dnu) if ma else np.inf,
        )
        ap = primal_step(dx, ds, min(1.0, step_frac * primal_linear_bound(sq, sa, gradq, G, dx, ds, ma)))
        if max(ap, ad) < 1e-12:
            status = "stalled"
            break
        x = x + ap * dx
        sigma = float(sigma + ap * ds)
        lam = lam + ad * dlam
        nus = nus + ad * dnu if ma else nus

    if best is not None:
        x, sigma, lam, nus = best
    sq = qvals(x) - sigma
    sa = G @ x - h if ma else np.zeros(0)
    gradq = qgrads(x)
    r_x = -gradq.T @ lam - (G.T @ nus if ma else 0.0)
    r_s = -1.0 + float(np.sum(lam))
    viol = max(0.0, -float(np.min(sq)), -float(np.min(sa)) if ma else 0.0)
    return QCQPSolution(
        x=x.copy(),
        sigma=float(sigma),
        lambdas=lam,
        nus=nus,
        status=status,
        iterations=it,
        primal_res=viol,
        dual_res=max(float(np.max(np.abs(r_x))), abs(r_s)),
        gap=float(lam @ sq + (nus @ sa if ma else 0.0)),
        trace=trace,
    )


def primal_linear_bound(sq, sa, gradq, G, dx, ds, ma) -> float:
    """Fraction-to-boundary bound using linearized slack decrements."""
    dsq = gradq @ dx - ds
    bound = _max_step_pos(sq, dsq)
    if ma:
        bound = min(bound, _max_step_pos(sa, G @ dx))
    return float(min(1e30, bound))


def write_solver_trace(path, trace) -> None:
    """Dump per-iteration solver diagnostics as CSV."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iter,objective,primal_res,dual_res,gap\n")
        for row in trace:
            fh.write(",".join(f"{val:.12g}" for val in row) + "\n")
