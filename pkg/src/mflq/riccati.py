"""Solvers for the coupled algebraic Riccati systems.

Four systems are covered, all over constant coefficients:

* the mean-field control pair (one equation for the fluctuation weight P,
  one for the mean weight Phat), solved by integrating the matching
  finite-horizon differential pair to stationarity along a decreasing
  regularization chain R -> R + eps I, then Newton-polishing the limit;
* the non-symmetric coupled pair characterizing closed-loop
  representations of open-loop Nash equilibria (damped fixed point with a
  finite-difference Newton fallback);
* the symmetric coupled pair characterizing closed-loop Nash equilibria
  (iteration over the feedback gains, each step a pair of Lyapunov-type
  linear solves);
* the zero-sum saddle-point pair (damped multi-start Newton, roots
  filtered by sign, range and stabilizer gates).

All statuses are encoded, never raised: ``solved``,
``not_static_stabilizing``, ``psd_violated``, ``max_iterations``,
``diverged``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linops
from .errors import DimensionMismatch, SingularLyapunov, SingularOperator
from .model import ControlSpec, GameSpec, ZeroSumSpec, hat
from .stabilizability import StabilizerCertificate, check_stabilizer

SOLVED = "solved"
NOT_STATIC_STABILIZING = "not_static_stabilizing"
PSD_VIOLATED = "psd_violated"
MAX_ITERATIONS = "max_iterations"
DIVERGED = "diverged"

TAU_PSD = 1e-9
TAU_SING = 1e-12  # stacked blocks are declared singular at cond > 1/TAU_SING

__all__ = [
    "SolveOptions",
    "ControlAreSolution",
    "OpenLoopNashSolution",
    "ClosedLoopNashSolution",
    "ZeroSumSolution",
    "ResidualReport",
    "solve_control_are",
    "solve_openloop_nash_are",
    "solve_closedloop_nash_are",
    "solve_zerosum_are",
    "solve_zerosum_openrep_are",
    "are_residuals",
    "finite_horizon_value",
]


@dataclass(frozen=True)
class SolveOptions:
    are_tol: float = 1e-8
    ode_tol: float = 1e-11
    eps_min: float = 1e-8
    eps_chain_tol: float = 1e-7
    damping: float = 0.5
    max_iter: int = 500
    free_components: tuple | None = None  # (theta, theta_bar), added through I - Sigma^+ Sigma


@dataclass(frozen=True)
class ControlAreSolution:
    P: np.ndarray
    Phat: np.ndarray
    Sigma: np.ndarray
    Sigma_bar: np.ndarray
    theta: np.ndarray
    theta_bar: np.ndarray
    residuals: dict
    status: str
    stabilizer: StabilizerCertificate | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OpenLoopNashSolution:
    # P1, P1hat (and occasionally P2, P2hat) are not symmetric in general
    P1: np.ndarray
    P2: np.ndarray
    P1hat: np.ndarray
    P2hat: np.ndarray
    theta: np.ndarray  # the representation gains Theta**, ThetaBar**
    theta_bar: np.ndarray
    Sigma_stack: np.ndarray
    Sigma_bar_stack: np.ndarray
    residuals: dict
    status: str
    stabilizer: StabilizerCertificate | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ClosedLoopNashSolution:
    P1: np.ndarray
    P2: np.ndarray
    P1hat: np.ndarray
    P2hat: np.ndarray
    theta: np.ndarray
    theta_bar: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    Sigma1_bar: np.ndarray
    Sigma2_bar: np.ndarray
    residuals: dict
    status: str
    stabilizer: StabilizerCertificate | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ZeroSumSolution:
    Pc: np.ndarray
    Pchat: np.ndarray
    Sigma_c: np.ndarray
    Sigma_c_bar: np.ndarray
    theta: np.ndarray
    theta_bar: np.ndarray
    sign_checks: tuple  # R11-psd, R11hat-psd, R22-nsd, R22hat-nsd
    sign_margins: tuple
    residuals: dict
    status: str
    stabilizer: StabilizerCertificate | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ResidualReport:
    equations: dict
    range_residuals: dict
    sign_margins: dict

    def max_equation_residual(self) -> float:
        return max(self.equations.values()) if self.equations else 0.0


# ---------------------------------------------------------------------------
# control-shaped coefficient bundle


@dataclass(frozen=True)
class _CF:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    Ah: np.ndarray
    Bh: np.ndarray
    Ch: np.ndarray
    Dh: np.ndarray
    Qh: np.ndarray
    Sh: np.ndarray
    Rh: np.ndarray


def _control_form(spec) -> _CF:
    h = hat(spec)
    p = h.players[0]
    return _CF(
        spec.A, spec.B, spec.C, spec.D, spec.Q, spec.S, spec.R,
        h.Ahat, h.Bhat, h.Chat, h.Dhat, p.Qhat, p.Shat, p.Rhat,
    )


def _sym(X):
    return 0.5 * (X + X.T)


def _gain_vector(cf: _CF, P):
    return cf.B.T @ P + cf.D.T @ P @ cf.C + cf.S


def _gain_vector_hat(cf: _CF, P, Ph):
    return cf.Bh.T @ Ph + cf.Dh.T @ P @ cf.Ch + cf.Sh


def _are1_residual(cf: _CF, P):
    K = _gain_vector(cf, P)
    Sigma = cf.R + cf.D.T @ P @ cf.D
    return _sym(P @ cf.A + cf.A.T @ P + cf.C.T @ P @ cf.C + cf.Q - K.T @ (linops.pinv(Sigma).pinv @ K))


def _are2_residual(cf: _CF, P, Ph):
    Kh = _gain_vector_hat(cf, P, Ph)
    Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
    return _sym(
        Ph @ cf.Ah + cf.Ah.T @ Ph + cf.Ch.T @ P @ cf.Ch + cf.Qh
        - Kh.T @ (linops.pinv(Sigma_bar).pinv @ Kh)
    )


# ---------------------------------------------------------------------------
# symmetric-matrix Newton with finite-difference Jacobian


class _IntegrationBlowup(Exception):
    pass


def _sym_indices(n):
    return np.triu_indices(n)


def _sym_pack(P, idx):
    return P[idx]


def _sym_unpack(x, n, idx):
    P = np.zeros((n, n))
    P[idx] = x
    return P + np.triu(P, 1).T


def _newton_sym(resfun, P0, tol, max_iter=80):
    """Newton for a symmetric-matrix equation resfun(P) = 0.

    Full (undamped) steps first, which keeps the classical attraction
    basins of the equation's root set; a backtracking-damped pass retries
    from the same start when the undamped iteration escapes or stalls.
    """
    for damped in (False, True):
        P, ok, it = _newton_sym_core(resfun, P0, tol, max_iter, damped)
        if ok:
            return P, True, it
    return P, False, it


def _newton_sym_core(resfun, P0, tol, max_iter, damped):
    n = P0.shape[0]
    idx = _sym_indices(n)
    x = _sym_pack(np.asarray(P0, dtype=float), idx)

    def fvec(x):
        try:
            out = _sym_pack(resfun(_sym_unpack(x, n, idx)), idx)
        except (np.linalg.LinAlgError, _IntegrationBlowup, FloatingPointError):
            return None
        return out if np.all(np.isfinite(out)) else None

    f = fvec(x)
    if f is None:
        return _sym_unpack(x, n, idx), False, 0
    f0 = np.linalg.norm(f)
    for it in range(max_iter):
        nf = np.linalg.norm(f)
        if nf <= tol:
            return _sym_unpack(x, n, idx), True, it
        if not np.isfinite(nf) or nf > max(1e9, 1e6 * (1.0 + f0)):
            return _sym_unpack(x, n, idx), False, it
        J = np.empty((x.size, x.size))
        h = 1e-7 * (1.0 + np.linalg.norm(x))
        for k in range(x.size):
            xk = x.copy()
            xk[k] += h
            fk = fvec(xk)
            if fk is None:
                return _sym_unpack(x, n, idx), False, it
            J[:, k] = (fk - f) / h
        try:
            dx = np.linalg.lstsq(J, -f, rcond=None)[0]
        except np.linalg.LinAlgError:
            return _sym_unpack(x, n, idx), False, it
        if not np.all(np.isfinite(dx)) or np.linalg.norm(dx) > 1e10:
            return _sym_unpack(x, n, idx), False, it
        if not damped:
            f_new = fvec(x + dx)
            if f_new is None:
                return _sym_unpack(x, n, idx), False, it
            x, f = x + dx, f_new
            continue
        lam, accepted = 1.0, False
        for _ in range(30):
            x_try = x + lam * dx
            f_try = fvec(x_try)
            if f_try is not None and np.linalg.norm(f_try) < nf:
                x, f, accepted = x_try, f_try, True
                break
            lam *= 0.5
        if not accepted:
            return _sym_unpack(x, n, idx), False, it
    return _sym_unpack(x, n, idx), np.linalg.norm(f) <= tol, max_iter


def _multistart_roots(resfun, n, tol, scales=(0.0, 0.1, -0.1, 1.0, -1.0, 10.0, -10.0)):
    """Collect distinct symmetric roots of resfun from the prescribed starts."""
    eye = np.eye(n)
    roots = []
    for s in scales:
        P, ok, _ = _newton_sym(resfun, s * eye, tol)
        if not ok:
            continue
        if not any(np.linalg.norm(P - Pr) <= 1e-6 * (1.0 + np.linalg.norm(Pr)) for Pr in roots):
            roots.append(_sym(P))
    return roots


# ---------------------------------------------------------------------------
# finite-horizon differential pair (regularized), integrated to stationarity


def _dre_rhs(cf: _CF, eps, P, Ph):
    """Time-to-go derivative of the finite-horizon pair with R -> R + eps I."""
    m = cf.R.shape[0]
    Sigma = cf.R + eps * np.eye(m) + cf.D.T @ P @ cf.D
    Sigma_bar = cf.Rh + eps * np.eye(m) + cf.Dh.T @ P @ cf.Dh
    K = _gain_vector(cf, P)
    Kh = _gain_vector_hat(cf, P, Ph)
    try:
        L = np.linalg.cholesky(Sigma)
        Lh = np.linalg.cholesky(Sigma_bar)
    except np.linalg.LinAlgError as exc:
        raise _IntegrationBlowup("regularized control weight lost definiteness") from exc
    W = np.linalg.solve(L.T, np.linalg.solve(L, K))
    Wh = np.linalg.solve(Lh.T, np.linalg.solve(Lh, Kh))
    dP = _sym(P @ cf.A + cf.A.T @ P + cf.C.T @ P @ cf.C + cf.Q - K.T @ W)
    dPh = _sym(Ph @ cf.Ah + cf.Ah.T @ Ph + cf.Ch.T @ P @ cf.Ch + cf.Qh - Kh.T @ Wh)
    return dP, dPh


def _rk4_step(cf, eps, P, Ph, h):
    k1, k1h = _dre_rhs(cf, eps, P, Ph)
    k2, k2h = _dre_rhs(cf, eps, P + 0.5 * h * k1, Ph + 0.5 * h * k1h)
    k3, k3h = _dre_rhs(cf, eps, P + 0.5 * h * k2, Ph + 0.5 * h * k2h)
    k4, k4h = _dre_rhs(cf, eps, P + h * k3, Ph + h * k3h)
    Pn = P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    Phn = Ph + (h / 6.0) * (k1h + 2 * k2h + 2 * k3h + k4h)
    return Pn, Phn


def _integrate_dre(cf: _CF, eps, ode_tol, horizon=None, P0=None, Ph0=None):
    """Integrate the pair forward in time-to-go until stationarity.

    With ``horizon`` set, integrates exactly that far instead (finite-
    horizon values).  Adaptive classical RK4 with step doubling; in
    stationary mode the exponential tail is finished by Newton on the
    regularized stationary equations so that the returned iterate
    satisfies the derivative tolerance ``ode_tol`` exactly, without the
    step controller chattering around the fixed point.
    """
    n = cf.A.shape[0]
    P = np.zeros((n, n)) if P0 is None else P0.copy()
    Ph = np.zeros((n, n)) if Ph0 is None else Ph0.copy()
    tau, h = 0.0, 1e-3
    steps = 0
    target = np.inf if horizon is None else float(horizon)
    settled = False
    while steps < 100_000:
        steps += 1
        d, dh = _dre_rhs(cf, eps, P, Ph)
        rate = np.linalg.norm(d) + np.linalg.norm(dh)
        if horizon is None and rate <= max(
            ode_tol, 1e-7 * (1.0 + np.linalg.norm(P) + np.linalg.norm(Ph))
        ):
            settled = True
            break
        if horizon is not None and tau >= target - 1e-12 * max(1.0, abs(target)):
            return P, Ph, tau, steps, True
        if horizon is None and tau > 1e6:
            break
        h_eff = min(h, target - tau) if horizon is not None else h
        P1, Ph1 = _rk4_step(cf, eps, P, Ph, h_eff)
        Pa, Pha = _rk4_step(cf, eps, P, Ph, 0.5 * h_eff)
        P2, Ph2 = _rk4_step(cf, eps, Pa, Pha, 0.5 * h_eff)
        err = (np.linalg.norm(P2 - P1) + np.linalg.norm(Ph2 - Ph1)) / 15.0
        scale = 1e-9 * (1.0 + np.linalg.norm(P) + np.linalg.norm(Ph))
        if err <= scale:
            P, Ph, tau = P2, Ph2, tau + h_eff
            if np.linalg.norm(P) + np.linalg.norm(Ph) > 1e9:
                raise _IntegrationBlowup("finite-horizon pair diverged")
            h = min(h * min(5.0, max(1.0, 0.9 * (scale / max(err, 1e-300)) ** 0.2)), 50.0)
        else:
            h = max(h * max(0.2, 0.9 * (scale / err) ** 0.2), 1e-10)
    if horizon is not None:
        return P, Ph, tau, steps, False

    # Newton tail on the stationary (regularized) equations
    def f1(X):
        return _dre_rhs_single(cf, eps, X)

    P, ok1, it1 = _newton_sym(f1, P, 0.5 * ode_tol)

    def f2(X):
        return _dre_rhs(cf, eps, P, X)[1]

    Ph, ok2, it2 = _newton_sym(f2, Ph, 0.5 * ode_tol)
    steps += it1 + it2
    d, dh = _dre_rhs(cf, eps, P, Ph)
    rate = np.linalg.norm(d) + np.linalg.norm(dh)
    return P, Ph, tau, steps, settled and ok1 and ok2 and rate <= ode_tol


def _dre_rhs_single(cf: _CF, eps, P):
    """Stationary residual of the first regularized equation only."""
    m = cf.R.shape[0]
    Sigma = cf.R + eps * np.eye(m) + cf.D.T @ P @ cf.D
    K = _gain_vector(cf, P)
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise _IntegrationBlowup("regularized control weight lost definiteness") from exc
    W = np.linalg.solve(L.T, np.linalg.solve(L, K))
    return _sym(P @ cf.A + cf.A.T @ P + cf.C.T @ P @ cf.C + cf.Q - K.T @ W)


def finite_horizon_value(spec: ControlSpec, T: float, eps: float = 0.0):
    """Mean-weight matrix Phat(0; T) of the horizon-T problem (terminal 0).

    The quadratic ``<Phat(0;T) x, x>`` is the optimal finite-horizon cost
    of the homogeneous problem; it increases to the infinite-horizon value
    as T grows.
    """
    cf = _control_form(spec)
    P, Ph, _, _, ok = _integrate_dre(cf, eps, ode_tol=0.0, horizon=T)
    if not ok:
        raise _IntegrationBlowup("finite-horizon integration did not finish")
    return P, Ph


# ---------------------------------------------------------------------------
# gain synthesis


def _synthesize(Sigma, K, free=None):
    """Gain from the pseudo-inverse formula -Sigma^+ K + (I - Sigma^+ Sigma) free."""
    pr = linops.pinv(Sigma)
    theta = -pr.pinv @ K
    if free is not None:
        theta = theta + (np.eye(Sigma.shape[0]) - pr.pinv @ Sigma) @ free
    return theta


def _free_pair(opts, m, n):
    if opts.free_components is None:
        return np.zeros((m, n)), np.zeros((m, n))
    th, tb = opts.free_components
    th = np.atleast_2d(np.asarray(th, dtype=float))
    tb = np.atleast_2d(np.asarray(tb, dtype=float))
    if th.shape != (m, n) or tb.shape != (m, n):
        raise DimensionMismatch(f"free components must be {(m, n)}")
    return th, tb


# ---------------------------------------------------------------------------
# mean-field control problem


def solve_control_are(spec: ControlSpec, opts: SolveOptions | None = None) -> ControlAreSolution:
    """Solve the control-problem pair by the regularization chain.

    For eps = 1e-1, 1e-2, ..., eps_min the regularized finite-horizon pair
    is integrated backward (in time-to-go) until stationary, the chain
    stopping once successive iterates agree to ``eps_chain_tol``; the limit
    is then Newton-polished on the unregularized pseudo-inverse equations.
    Gates in order: equation residuals, positive semidefiniteness of
    Sigma/Sigma_bar, range conditions, stabilizer certificate.
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    cf = _control_form(spec)
    n, m = spec.n, spec.m

    eps_list = []
    e = 1e-1
    while e > opts.eps_min * (1.0 + 1e-12):
        eps_list.append(e)
        e /= 10.0
    eps_list.append(opts.eps_min)

    P = Ph = None
    chain_ok = False
    ode_ok = True
    used = []
    iterations = 0
    try:
        prev = None
        for eps in eps_list:
            P, Ph, _, steps, settled = _integrate_dre(cf, eps, opts.ode_tol)
            iterations += steps
            used.append(eps)
            ode_ok = ode_ok and settled
            if prev is not None:
                gap = np.linalg.norm(P - prev[0]) + np.linalg.norm(Ph - prev[1])
                if gap <= opts.eps_chain_tol:
                    chain_ok = True
                    break
            prev = (P, Ph)
    except _IntegrationBlowup as exc:
        z = np.zeros((n, n))
        return ControlAreSolution(
            z, z, cf.R.copy(), cf.Rh.copy(), np.zeros((m, n)), np.zeros((m, n)),
            {"are1": np.inf, "are2": np.inf}, DIVERGED,
            meta={"reason": str(exc), "eps_chain": used, "wall_time_ms": _ms(t0)},
        )

    # polish the chain limit on the unregularized equations
    P, pol1, it1 = _newton_sym(lambda X: _are1_residual(cf, X), P, opts.are_tol * 1e-2)
    Ph, pol2, it2 = _newton_sym(lambda X: _are2_residual(cf, P, X), Ph, opts.are_tol * 1e-2)
    iterations += it1 + it2

    Sigma = _sym(cf.R + cf.D.T @ P @ cf.D)
    Sigma_bar = _sym(cf.Rh + cf.Dh.T @ P @ cf.Dh)
    K = _gain_vector(cf, P)
    Kh = _gain_vector_hat(cf, P, Ph)
    free, free_bar = _free_pair(opts, m, n)
    theta = _synthesize(Sigma, K, free)
    theta_bar = _synthesize(Sigma_bar, Kh, free_bar)

    r1 = float(np.linalg.norm(_are1_residual(cf, P)))
    r2 = float(np.linalg.norm(_are2_residual(cf, P, Ph)))
    rng1_ok, rng1 = linops.range_contains(Sigma, K)
    rng2_ok, rng2 = linops.range_contains(Sigma_bar, Kh)
    residuals = {
        "are1": r1,
        "are2": r2,
        "synth": float(np.linalg.norm(Sigma @ theta + K)),
        "synth_bar": float(np.linalg.norm(Sigma_bar @ theta_bar + Kh)),
        "range1": rng1,
        "range2": rng2,
    }
    meta = {
        "eps_chain": used,
        "chain_converged": chain_ok,
        "ode_settled": ode_ok,
        "polished": pol1 and pol2,
        "iterations": iterations,
        "wall_time_ms": _ms(t0),
    }

    def done(status, cert=None):
        return ControlAreSolution(
            P, Ph, Sigma, Sigma_bar, theta, theta_bar, residuals, status, cert, meta
        )

    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Ph))):
        return done(DIVERGED)
    if max(r1, r2) > opts.are_tol:
        return done(MAX_ITERATIONS if not (chain_ok and ode_ok) else DIVERGED)
    if linops.min_eig(Sigma) < -TAU_PSD or linops.min_eig(Sigma_bar) < -TAU_PSD:
        return done(PSD_VIOLATED)
    if not (rng1_ok and rng2_ok):
        meta["first_failed_gate"] = "range"
        return done(DIVERGED)
    cert = check_stabilizer(spec, theta, theta_bar)
    if not cert.is_stabilizer:
        return done(NOT_STATIC_STABILIZING, cert)
    return done(SOLVED, cert)


def _ms(t0):
    return (time.perf_counter() - t0) * 1e3


# ---------------------------------------------------------------------------
# zero-sum games (saddle-point and open-loop-representation systems share
# the same equations; only the gating differs)


def _zs_sign_margins(spec: ZeroSumSpec, P):
    """Eigenvalue margins of the four definiteness blocks at P."""
    c = spec.cost
    D1h, D2h = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
    R11h = c.R11 + c.R11bar
    R22h = c.R22 + c.R22bar
    m_11 = linops.min_eig(c.R11 + spec.D1.T @ P @ spec.D1)
    m_11h = linops.min_eig(R11h + D1h.T @ P @ D1h)
    m_22 = linops.max_eig(c.R22 + spec.D2.T @ P @ spec.D2)
    m_22h = linops.max_eig(R22h + D2h.T @ P @ D2h)
    checks = (m_11 >= -TAU_PSD, m_11h >= -TAU_PSD, m_22 <= TAU_PSD, m_22h <= TAU_PSD)
    return checks, (m_11, m_11h, m_22, m_22h)


def _solve_zerosum(spec: ZeroSumSpec, opts: SolveOptions, require_sign_conditions: bool) -> ZeroSumSolution:
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    cf = _control_form(spec)
    n, m = spec.n, spec.m
    inner_tol = min(opts.are_tol * 1e-2, 1e-10)

    roots = _multistart_roots(lambda X: _are1_residual(cf, X), n, inner_tol)
    free, free_bar = _free_pair(opts, m, n)

    # Nearest-miss bookkeeping: deeper gate wins; among candidates failing
    # the stabilizer gate the one with the smallest closed-loop abscissas
    # (least unstable) is reported; remaining ties break by start order.
    best = None  # (depth, badness, order, candidate dict)

    def consider(depth, order, cand, badness=(0.0, 0.0)):
        nonlocal best
        key = (-depth, badness, order)
        if best is None or key < best[0]:
            best = (key, cand)

    for order, P in enumerate(roots):
        Sigma = _sym(cf.R + cf.D.T @ P @ cf.D)
        K = _gain_vector(cf, P)
        checks, margins = _zs_sign_margins(spec, P)
        cand = {"P": P, "checks": checks, "margins": margins, "gate": "sign"}
        if require_sign_conditions and not all(checks):
            consider(0, (order,), cand)
            continue
        rng_ok, rng = linops.range_contains(Sigma, K)
        cand.update(gate="range", range1=rng)
        if not rng_ok:
            consider(1, (order,), cand)
            continue
        hat_roots = _multistart_roots(lambda X: _are2_residual(cf, P, X), n, inner_tol)
        if not hat_roots:
            cand.update(gate="hat_equation")
            consider(2, (order,), cand)
            continue
        Sigma_bar = _sym(cf.Rh + cf.Dh.T @ P @ cf.Dh)
        for horder, Ph in enumerate(hat_roots):
            Kh = _gain_vector_hat(cf, P, Ph)
            rngh_ok, rngh = linops.range_contains(Sigma_bar, Kh)
            cand2 = dict(cand, Ph=Ph, gate="range_hat", range2=rngh)
            if not rngh_ok:
                consider(3, (order, horder), cand2)
                continue
            theta = _synthesize(Sigma, K, free)
            theta_bar = _synthesize(Sigma_bar, Kh, free_bar)
            cert = check_stabilizer(spec, theta, theta_bar)
            cand2.update(theta=theta, theta_bar=theta_bar, cert=cert, gate="stabilizer")
            if cert.is_stabilizer:
                cand2["gate"] = "passed"
                consider(5, (order, horder), cand2)
                break
            consider(4, (order, horder), cand2,
                     badness=(cert.hurwitz_abscissa, cert.stochastic_abscissa))
        if best is not None and best[1].get("gate") == "passed":
            break

    meta = {
        "roots": [r.copy() for r in roots],
        "wall_time_ms": _ms(t0),
        "iterations": len(roots),
        "system": "saddle" if require_sign_conditions else "open_representation",
    }

    if best is None:
        z = np.zeros((n, n))
        zt = np.zeros((m, n))
        return ZeroSumSolution(
            z, z, cf.R.copy(), cf.Rh.copy(), zt, zt, (False,) * 4, (np.nan,) * 4,
            {"are1": np.inf, "are2": np.inf}, DIVERGED, None, dict(meta, reason="no_roots"),
        )

    cand = best[1]
    P = cand["P"]
    Ph = cand.get("Ph", np.zeros((n, n)))
    Sigma = _sym(cf.R + cf.D.T @ P @ cf.D)
    Sigma_bar = _sym(cf.Rh + cf.Dh.T @ P @ cf.Dh)
    K = _gain_vector(cf, P)
    Kh = _gain_vector_hat(cf, P, Ph)
    theta = cand.get("theta")
    theta_bar = cand.get("theta_bar")
    if theta is None:
        theta = _synthesize(Sigma, K, free)
        theta_bar = _synthesize(Sigma_bar, Kh, free_bar)
    residuals = {
        "are1": float(np.linalg.norm(_are1_residual(cf, P))),
        "are2": float(np.linalg.norm(_are2_residual(cf, P, Ph))),
        "synth": float(np.linalg.norm(Sigma @ theta + K)),
        "synth_bar": float(np.linalg.norm(Sigma_bar @ theta_bar + Kh)),
        "range1": cand.get("range1", linops.range_contains(Sigma, K)[1]),
        "range2": cand.get("range2", linops.range_contains(Sigma_bar, Kh)[1]),
    }
    gate = cand["gate"]
    meta["first_failed_gate"] = None if gate == "passed" else gate
    if gate == "passed":
        status = SOLVED
    elif gate == "sign":
        status = PSD_VIOLATED
    elif gate == "stabilizer":
        status = NOT_STATIC_STABILIZING
    else:
        status = DIVERGED
    return ZeroSumSolution(
        P, Ph, Sigma, Sigma_bar, theta, theta_bar,
        cand["checks"], cand["margins"], residuals, status, cand.get("cert"), meta,
    )


def solve_zerosum_are(spec: ZeroSumSpec, opts: SolveOptions | None = None) -> ZeroSumSolution:
    """Closed-loop saddle-point system: sign conditions gate the roots."""
    return _solve_zerosum(spec, opts or SolveOptions(), require_sign_conditions=True)


def solve_zerosum_openrep_are(spec: ZeroSumSpec, opts: SolveOptions | None = None) -> ZeroSumSolution:
    """Open-loop-representation system: range conditions and stabilizer only."""
    return _solve_zerosum(spec, opts or SolveOptions(), require_sign_conditions=False)


# ---------------------------------------------------------------------------
# non-zero-sum games: shared pieces


def _game_parts(spec: GameSpec):
    h = hat(spec)
    p1, p2 = spec.players
    return h, p1, p2


def _stacked_blocks(spec: GameSpec, P1, P2, hatted: bool):
    """The two stacked m x m gain systems built from (P1, P2).

    Row block i collects player i's own-row cost blocks: rows (R_i)_{i:}
    plus D_i^T P_i D (hatted version with hatted matrices).
    """
    m1 = spec.m1
    p1, p2 = spec.players
    if hatted:
        D = spec.D + spec.Dbar
        D1, D2 = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
        R1 = p1.R + p1.Rbar
        R2 = p2.R + p2.Rbar
    else:
        D, D1, D2 = spec.D, spec.D1, spec.D2
        R1, R2 = p1.R, p2.R
    top = R1[:m1, :] + D1.T @ P1 @ D
    bot = R2[m1:, :] + D2.T @ P2 @ D
    return np.vstack([top, bot])


def _stacked_rhs(spec: GameSpec, P1, P2, P1h=None, P2h=None, hatted: bool = False):
    m1 = spec.m1
    p1, p2 = spec.players
    if hatted:
        B1, B2 = spec.B1 + spec.B1bar, spec.B2 + spec.B2bar
        D1, D2 = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
        Cc = spec.C + spec.Cbar
        S1 = (p1.S + p1.Sbar)[:m1, :]
        S2 = (p2.S + p2.Sbar)[m1:, :]
        top = B1.T @ P1h + D1.T @ P1 @ Cc + S1
        bot = B2.T @ P2h + D2.T @ P2 @ Cc + S2
    else:
        S1 = p1.S[:m1, :]
        S2 = p2.S[m1:, :]
        top = spec.B1.T @ P1 + spec.D1.T @ P1 @ spec.C + S1
        bot = spec.B2.T @ P2 + spec.D2.T @ P2 @ spec.C + S2
    return np.vstack([top, bot])


def _openloop_equations(spec: GameSpec, P1, P2, P1h, P2h, theta, theta_bar):
    """Residuals of the four non-symmetric representation equations."""
    h, p1, p2 = _game_parts(spec)
    A, B, C, D = spec.A, spec.B, spec.C, spec.D
    out = {}
    for i, (P, Ph, p, ph) in enumerate(
        ((P1, P1h, p1, h.players[0]), (P2, P2h, p2, h.players[1])), start=1
    ):
        r = P @ A + A.T @ P + C.T @ P @ C + p.Q + (P @ B + C.T @ P @ D + p.S.T) @ theta
        rh = (
            Ph @ h.Ahat + h.Ahat.T @ Ph + h.Chat.T @ P @ h.Chat + ph.Qhat
            + (Ph @ h.Bhat + h.Chat.T @ P @ h.Dhat + ph.Shat.T) @ theta_bar
        )
        out[f"are_p{i}"] = float(np.linalg.norm(r))
        out[f"are_p{i}hat"] = float(np.linalg.norm(rh))
    M = _stacked_blocks(spec, P1, P2, hatted=False)
    Mh = _stacked_blocks(spec, P1, P2, hatted=True)
    out["synth"] = float(np.linalg.norm(M @ theta + _stacked_rhs(spec, P1, P2)))
    out["synth_bar"] = float(
        np.linalg.norm(Mh @ theta_bar + _stacked_rhs(spec, P1, P2, P1h, P2h, hatted=True))
    )
    return out


def _sylvester_solve(Aleft, Aright, G, Gright, W):
    """Solve P Aright + Aleft^T P + Gleft^T P Gright + W = 0 for general P.

    Column-major vectorization: vec(P Aright) = (Aright^T kron I) vec(P),
    vec(Aleft^T P) = (I kron Aleft^T) vec(P), vec(G^T P Gright) =
    (Gright^T kron G^T) vec(P).
    """
    n = W.shape[0]
    eye = np.eye(n)
    Kmat = np.kron(Aright.T, eye) + np.kron(eye, Aleft.T) + np.kron(Gright.T, G.T)
    x = np.linalg.solve(Kmat, -W.reshape(-1, order="F"))
    return x.reshape((n, n), order="F")


def solve_openloop_nash_are(spec: GameSpec, opts: SolveOptions | None = None) -> OpenLoopNashSolution:
    """Coupled non-symmetric system for the representation of open-loop Nash points.

    Damped fixed point: gains from the stacked linear systems, then each
    weight matrix from a Sylvester-type linear solve given the gains; a
    finite-difference Newton on the full residual map takes over when the
    fixed point stalls.  Convexity of the cost functionals is not examined
    here (see the equilibrium module).
    """
    opts = opts or SolveOptions()
    if spec.m1 < 1 or spec.m2 < 1:
        raise DimensionMismatch("two-player solve requires m1 >= 1 and m2 >= 1")
    t0 = time.perf_counter()
    h, p1, p2 = _game_parts(spec)
    n, m = spec.n, spec.m
    A, B, C, D = spec.A, spec.B, spec.C, spec.D

    def gains(P1, P2, P1h, P2h):
        M = _stacked_blocks(spec, P1, P2, hatted=False)
        Mh = _stacked_blocks(spec, P1, P2, hatted=True)
        if min(M.size, Mh.size) and max(np.linalg.cond(M), np.linalg.cond(Mh)) > 1.0 / TAU_SING:
            return None
        theta = -np.linalg.solve(M, _stacked_rhs(spec, P1, P2))
        theta_bar = -np.linalg.solve(Mh, _stacked_rhs(spec, P1, P2, P1h, P2h, hatted=True))
        return theta, theta_bar

    def step(P1, P2, P1h, P2h):
        g = gains(P1, P2, P1h, P2h)
        if g is None:
            return None
        theta, theta_bar = g
        new = []
        for p in (p1, p2):
            W = p.Q + p.S.T @ theta
            new.append(_sylvester_solve(A, A + B @ theta, C, C + D @ theta, W))
        for Pn, ph in zip(new[:2], (h.players[0], h.players[1])):
            Wh = h.Chat.T @ Pn @ (h.Chat + h.Dhat @ theta_bar) + ph.Qhat + ph.Shat.T @ theta_bar
            new.append(
                _sylvester_solve(h.Ahat, h.Ahat + h.Bhat @ theta_bar, np.zeros((n, n)), np.zeros((n, n)), Wh)
            )
        return new[0], new[1], new[2], new[3], theta, theta_bar

    P1 = P2 = P1h = P2h = np.zeros((n, n))
    omega = opts.damping
    singular = False
    residual = np.inf
    iterations = 0
    theta = np.zeros((m, n))
    theta_bar = np.zeros((m, n))
    history = []
    for it in range(opts.max_iter):
        iterations = it + 1
        out = step(P1, P2, P1h, P2h)
        if out is None:
            singular = True
            break
        N1, N2, N1h, N2h, theta, theta_bar = out
        P1 = (1 - omega) * P1 + omega * N1
        P2 = (1 - omega) * P2 + omega * N2
        P1h = (1 - omega) * P1h + omega * N1h
        P2h = (1 - omega) * P2h + omega * N2h
        if not all(np.all(np.isfinite(X)) for X in (P1, P2, P1h, P2h)):
            break
        g = gains(P1, P2, P1h, P2h)
        if g is None:
            singular = True
            break
        eqs = _openloop_equations(spec, P1, P2, P1h, P2h, *g)
        residual = max(eqs.values())
        history.append(residual)
        if residual <= opts.are_tol:
            theta, theta_bar = g
            break
        if len(history) > 40 and residual > 0.98 * min(history[:-30]):
            break  # stalled; hand over to Newton

    if not singular and residual > opts.are_tol and all(
        np.all(np.isfinite(X)) for X in (P1, P2, P1h, P2h)
    ):
        P1, P2, P1h, P2h, ok, extra = _openloop_newton(spec, P1, P2, P1h, P2h, gains, opts)
        iterations += extra
        g = gains(P1, P2, P1h, P2h)
        if g is not None:
            theta, theta_bar = g
            residual = max(_openloop_equations(spec, P1, P2, P1h, P2h, theta, theta_bar).values())
        else:
            singular = True

    Sigma_stack = _stacked_blocks(spec, P1, P2, hatted=False)
    Sigma_bar_stack = _stacked_blocks(spec, P1, P2, hatted=True)
    residuals = _openloop_equations(spec, P1, P2, P1h, P2h, theta, theta_bar)
    meta = {"iterations": iterations, "wall_time_ms": _ms(t0)}
    if singular:
        meta["reason"] = "stacked_gain_system_singular"
        status = DIVERGED
        cert = None
    elif not np.isfinite(residual) or residual > opts.are_tol:
        status = MAX_ITERATIONS if np.isfinite(residual) else DIVERGED
        cert = None
    else:
        cert = check_stabilizer(spec, theta, theta_bar)
        status = SOLVED if cert.is_stabilizer else NOT_STATIC_STABILIZING
    return OpenLoopNashSolution(
        P1, P2, P1h, P2h, theta, theta_bar, Sigma_stack, Sigma_bar_stack,
        residuals, status, cert, meta,
    )


def _openloop_newton(spec, P1, P2, P1h, P2h, gains, opts):
    """Finite-difference Newton on the stacked residual map of all four equations."""
    n = spec.n

    def pack(P1, P2, P1h, P2h):
        return np.concatenate([X.reshape(-1) for X in (P1, P2, P1h, P2h)])

    def unpack(x):
        return tuple(x[i * n * n:(i + 1) * n * n].reshape(n, n) for i in range(4))

    def resvec(x):
        Ps = unpack(x)
        g = gains(*Ps)
        if g is None:
            return None
        eqs = _openloop_equations_mats(spec, *Ps, *g)
        return np.concatenate([e.reshape(-1) for e in eqs])

    x = pack(P1, P2, P1h, P2h)
    f = resvec(x)
    if f is None:
        return P1, P2, P1h, P2h, False, 0
    its = 0
    for it in range(60):
        its += 1
        nf = np.linalg.norm(f, ord=np.inf)
        if nf <= opts.are_tol * 1e-2:
            return (*unpack(x), True, its)
        J = np.empty((f.size, x.size))
        hstep = 1e-7 * (1.0 + np.linalg.norm(x))
        for k in range(x.size):
            xk = x.copy()
            xk[k] += hstep
            fk = resvec(xk)
            if fk is None:
                return (*unpack(x), False, its)
            J[:, k] = (fk - f) / hstep
        dx = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam, moved = 1.0, False
        for _ in range(25):
            ftry = resvec(x + lam * dx)
            if ftry is not None and np.linalg.norm(ftry, ord=np.inf) < nf:
                x, f, moved = x + lam * dx, ftry, True
                break
            lam *= 0.5
        if not moved:
            return (*unpack(x), False, its)
    return (*unpack(x), False, its)


def _openloop_equations_mats(spec, P1, P2, P1h, P2h, theta, theta_bar):
    h, p1, p2 = _game_parts(spec)
    A, B, C, D = spec.A, spec.B, spec.C, spec.D
    mats = []
    for P, Ph, p, ph in ((P1, P1h, p1, h.players[0]), (P2, P2h, p2, h.players[1])):
        mats.append(P @ A + A.T @ P + C.T @ P @ C + p.Q + (P @ B + C.T @ P @ D + p.S.T) @ theta)
        mats.append(
            Ph @ h.Ahat + h.Ahat.T @ Ph + h.Chat.T @ P @ h.Chat + ph.Qhat
            + (Ph @ h.Bhat + h.Chat.T @ P @ h.Dhat + ph.Shat.T) @ theta_bar
        )
    return mats


# ---------------------------------------------------------------------------
# closed-loop Nash equilibria


def _closed_nash_equations(spec: GameSpec, P1, P2, P1h, P2h, theta, theta_bar):
    """Residuals of the symmetric system and the per-player gain identities."""
    h, p1, p2 = _game_parts(spec)
    A, B, C, D = spec.A, spec.B, spec.C, spec.D
    m1 = spec.m1
    out = {}
    for i, (P, Ph, p, ph) in enumerate(
        ((P1, P1h, p1, h.players[0]), (P2, P2h, p2, h.players[1])), start=1
    ):
        r = (
            P @ A + A.T @ P + C.T @ P @ C + p.Q
            + theta.T @ (p.R + D.T @ P @ D) @ theta
            + (P @ B + C.T @ P @ D + p.S.T) @ theta
            + theta.T @ (B.T @ P + D.T @ P @ C + p.S)
        )
        rh = (
            Ph @ h.Ahat + h.Ahat.T @ Ph + h.Chat.T @ P @ h.Chat + ph.Qhat
            + theta_bar.T @ (ph.Rhat + h.Dhat.T @ P @ h.Dhat) @ theta_bar
            + (Ph @ h.Bhat + h.Chat.T @ P @ h.Dhat + ph.Shat.T) @ theta_bar
            + theta_bar.T @ (h.Bhat.T @ Ph + h.Dhat.T @ P @ h.Chat + ph.Shat)
        )
        out[f"are_p{i}"] = float(np.linalg.norm(r))
        out[f"are_p{i}hat"] = float(np.linalg.norm(rh))
    # per-player gain identities (own rows only)
    s11 = p1.S[:m1, :]
    s22 = p2.S[m1:, :]
    out["synth1"] = float(np.linalg.norm(
        spec.B1.T @ P1 + spec.D1.T @ P1 @ C + s11 + (p1.R[:m1, :] + spec.D1.T @ P1 @ D) @ theta
    ))
    out["synth2"] = float(np.linalg.norm(
        spec.B2.T @ P2 + spec.D2.T @ P2 @ C + s22 + (p2.R[m1:, :] + spec.D2.T @ P2 @ D) @ theta
    ))
    B1h, B2h = spec.B1 + spec.B1bar, spec.B2 + spec.B2bar
    D1h, D2h = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
    s11h = (p1.S + p1.Sbar)[:m1, :]
    s22h = (p2.S + p2.Sbar)[m1:, :]
    R1h, R2h = p1.R + p1.Rbar, p2.R + p2.Rbar
    out["synth1_bar"] = float(np.linalg.norm(
        B1h.T @ P1h + D1h.T @ P1 @ h.Chat + s11h + (R1h[:m1, :] + D1h.T @ P1 @ h.Dhat) @ theta_bar
    ))
    out["synth2_bar"] = float(np.linalg.norm(
        B2h.T @ P2h + D2h.T @ P2 @ h.Chat + s22h + (R2h[m1:, :] + D2h.T @ P2 @ h.Dhat) @ theta_bar
    ))
    return out


def solve_closedloop_nash_are(spec: GameSpec, opts: SolveOptions | None = None) -> ClosedLoopNashSolution:
    """Symmetric coupled system characterizing closed-loop Nash equilibria.

    Iterates over the gain pair: given gains, each weight solves a
    Lyapunov-type linear equation of the closed-loop system; the gains are
    refreshed from the stacked systems with a pseudo-inverse (free
    component zero when singular) and damped.  Initialized from the
    open-loop representation when that converged.
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    h, p1, p2 = _game_parts(spec)
    n, m = spec.n, spec.m
    A, B, C, D = spec.A, spec.B, spec.C, spec.D

    theta = np.zeros((m, n))
    theta_bar = np.zeros((m, n))
    ol = solve_openloop_nash_are(spec, opts)
    if ol.status in (SOLVED, NOT_STATIC_STABILIZING) and np.all(np.isfinite(ol.theta)) and np.all(
        np.isfinite(ol.theta_bar)
    ):
        theta, theta_bar = ol.theta.copy(), ol.theta_bar.copy()
    free, free_bar = _free_pair(opts, m, n)

    P1 = P2 = P1h = P2h = np.zeros((n, n))
    omega = opts.damping
    residual = np.inf
    failure = None
    history = []
    iterations = 0
    for it in range(opts.max_iter):
        iterations = it + 1
        A_cl, C_cl = A + B @ theta, C + D @ theta
        Ah_cl = h.Ahat + h.Bhat @ theta_bar
        Ch_cl = h.Chat + h.Dhat @ theta_bar
        try:
            Ps = []
            for p in (p1, p2):
                W = p.Q + p.S.T @ theta + theta.T @ p.S + theta.T @ p.R @ theta
                Ps.append(linops.solve_stochastic_lyapunov(A_cl.T, C_cl.T, _sym(W)))
            P1, P2 = Ps
            Phs = []
            for P, ph in ((P1, h.players[0]), (P2, h.players[1])):
                Wh = (
                    Ch_cl.T @ P @ Ch_cl + ph.Qhat + ph.Shat.T @ theta_bar
                    + theta_bar.T @ ph.Shat + theta_bar.T @ ph.Rhat @ theta_bar
                )
                Phs.append(linops.solve_lyapunov(Ah_cl.T, _sym(Wh)))
            P1h, P2h = Phs
        except (SingularLyapunov, SingularOperator, np.linalg.LinAlgError) as exc:
            failure = str(exc)
            break
        M = _stacked_blocks(spec, P1, P2, hatted=False)
        Mh = _stacked_blocks(spec, P1, P2, hatted=True)
        theta_new = _synthesize(M, _stacked_rhs(spec, P1, P2), free)
        theta_bar_new = _synthesize(Mh, _stacked_rhs(spec, P1, P2, P1h, P2h, hatted=True), free_bar)
        theta = (1 - omega) * theta + omega * theta_new
        theta_bar = (1 - omega) * theta_bar + omega * theta_bar_new
        eqs = _closed_nash_equations(spec, P1, P2, P1h, P2h, theta, theta_bar)
        residual = max(eqs.values())
        history.append(residual)
        if residual <= opts.are_tol:
            break
        if len(history) > 50 and residual > 0.98 * min(history[:-40]):
            break

    Sigma1 = _sym(p1.R11 + spec.D1.T @ P1 @ spec.D1)
    Sigma2 = _sym(p2.R22 + spec.D2.T @ P2 @ spec.D2)
    D1h, D2h = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
    Sigma1_bar = _sym(p1.R11 + p1.R11bar + D1h.T @ P1 @ D1h)
    Sigma2_bar = _sym(p2.R22 + p2.R22bar + D2h.T @ P2 @ D2h)
    residuals = _closed_nash_equations(spec, P1, P2, P1h, P2h, theta, theta_bar)
    meta = {"iterations": iterations, "wall_time_ms": _ms(t0)}
    if failure is not None:
        meta["reason"] = failure
        status, cert = DIVERGED, None
    elif not np.isfinite(residual) or max(residuals.values()) > opts.are_tol:
        status = MAX_ITERATIONS if np.isfinite(residual) else DIVERGED
        cert = None
    elif min(linops.min_eig(Sigma1), linops.min_eig(Sigma2),
             linops.min_eig(Sigma1_bar), linops.min_eig(Sigma2_bar)) < -TAU_PSD:
        status, cert = PSD_VIOLATED, None
    else:
        cert = check_stabilizer(spec, theta, theta_bar)
        status = SOLVED if cert.is_stabilizer else NOT_STATIC_STABILIZING
    return ClosedLoopNashSolution(
        _sym(P1), _sym(P2), _sym(P1h), _sym(P2h), theta, theta_bar,
        Sigma1, Sigma2, Sigma1_bar, Sigma2_bar, residuals, status, cert, meta,
    )


# ---------------------------------------------------------------------------
# residual recomputation


def are_residuals(solution, spec) -> ResidualReport:
    """Recompute every equation of the relevant system at the stored solution."""
    if isinstance(solution, ControlAreSolution):
        if not isinstance(spec, ControlSpec):
            raise DimensionMismatch("control solution requires a ControlSpec")
        cf = _control_form(spec)
        P, Ph = solution.P, solution.Phat
        Sigma = cf.R + cf.D.T @ P @ cf.D
        Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
        K, Kh = _gain_vector(cf, P), _gain_vector_hat(cf, P, Ph)
        return ResidualReport(
            equations={
                "are1": float(np.linalg.norm(_are1_residual(cf, P))),
                "are2": float(np.linalg.norm(_are2_residual(cf, P, Ph))),
                "synth": float(np.linalg.norm(Sigma @ solution.theta + K)),
                "synth_bar": float(np.linalg.norm(Sigma_bar @ solution.theta_bar + Kh)),
            },
            range_residuals={
                "range1": linops.range_contains(_sym(Sigma), K)[1],
                "range2": linops.range_contains(_sym(Sigma_bar), Kh)[1],
            },
            sign_margins={
                "Sigma": linops.min_eig(Sigma),
                "Sigma_bar": linops.min_eig(Sigma_bar),
            },
        )
    if isinstance(solution, ZeroSumSolution):
        if not isinstance(spec, ZeroSumSpec):
            raise DimensionMismatch("zero-sum solution requires a ZeroSumSpec")
        cf = _control_form(spec)
        P, Ph = solution.Pc, solution.Pchat
        Sigma = cf.R + cf.D.T @ P @ cf.D
        Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
        K, Kh = _gain_vector(cf, P), _gain_vector_hat(cf, P, Ph)
        checks, margins = _zs_sign_margins(spec, P)
        return ResidualReport(
            equations={
                "are1": float(np.linalg.norm(_are1_residual(cf, P))),
                "are2": float(np.linalg.norm(_are2_residual(cf, P, Ph))),
                "synth": float(np.linalg.norm(Sigma @ solution.theta + K)),
                "synth_bar": float(np.linalg.norm(Sigma_bar @ solution.theta_bar + Kh)),
            },
            range_residuals={
                "range1": linops.range_contains(_sym(Sigma), K)[1],
                "range2": linops.range_contains(_sym(Sigma_bar), Kh)[1],
            },
            sign_margins={
                "R11": margins[0],
                "R11_hat": margins[1],
                "R22": margins[2],
                "R22_hat": margins[3],
            },
        )
    if isinstance(solution, OpenLoopNashSolution):
        if not isinstance(spec, GameSpec):
            raise DimensionMismatch("game solution requires a GameSpec")
        eqs = _openloop_equations(
            spec, solution.P1, solution.P2, solution.P1hat, solution.P2hat,
            solution.theta, solution.theta_bar,
        )
        M = _stacked_blocks(spec, solution.P1, solution.P2, hatted=False)
        Mh = _stacked_blocks(spec, solution.P1, solution.P2, hatted=True)
        sv = np.linalg.svd(M, compute_uv=False) if M.size else np.array([np.inf])
        svh = np.linalg.svd(Mh, compute_uv=False) if Mh.size else np.array([np.inf])
        return ResidualReport(
            equations=eqs,
            range_residuals={},
            sign_margins={"stack_min_sv": float(sv[-1]), "stack_bar_min_sv": float(svh[-1])},
        )
    if isinstance(solution, ClosedLoopNashSolution):
        if not isinstance(spec, GameSpec):
            raise DimensionMismatch("game solution requires a GameSpec")
        eqs = _closed_nash_equations(
            spec, solution.P1, solution.P2, solution.P1hat, solution.P2hat,
            solution.theta, solution.theta_bar,
        )
        return ResidualReport(
            equations=eqs,
            range_residuals={},
            sign_margins={
                "Sigma1": linops.min_eig(solution.Sigma1),
                "Sigma2": linops.min_eig(solution.Sigma2),
                "Sigma1_bar": linops.min_eig(solution.Sigma1_bar),
                "Sigma2_bar": linops.min_eig(solution.Sigma2_bar),
            },
        )
    raise DimensionMismatch(f"unknown solution type {type(solution).__name__}")


def closed_loop_form_residuals(spec: GameSpec, solution: ClosedLoopNashSolution) -> dict:
    """Residuals of the equivalent substituted closed-loop form of the system."""
    h, p1, p2 = _game_parts(spec)
    A_cl = spec.A + spec.B @ solution.theta
    C_cl = spec.C + spec.D @ solution.theta
    Ah_cl = h.Ahat + h.Bhat @ solution.theta_bar
    Ch_cl = h.Chat + h.Dhat @ solution.theta_bar
    th, tb = solution.theta, solution.theta_bar
    out = {}
    for i, (P, Ph, p, ph) in enumerate(
        ((solution.P1, solution.P1hat, p1, h.players[0]),
         (solution.P2, solution.P2hat, p2, h.players[1])), start=1
    ):
        r = P @ A_cl + A_cl.T @ P + C_cl.T @ P @ C_cl + p.Q + p.S.T @ th + th.T @ p.S + th.T @ p.R @ th
        rh = (
            Ph @ Ah_cl + Ah_cl.T @ Ph + Ch_cl.T @ P @ Ch_cl + ph.Qhat
            + ph.Shat.T @ tb + tb.T @ ph.Shat + tb.T @ ph.Rhat @ tb
        )
        out[f"are_p{i}"] = float(np.linalg.norm(r))
        out[f"are_p{i}hat"] = float(np.linalg.norm(rh))
    return out
