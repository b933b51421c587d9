"""Strategy synthesis, offset equations, value functions, certificates.

Under the deterministic exponential-profile forcing admitted by the model
module, every backward stochastic equation collapses: the martingale part
vanishes and only the mean offset equation survives, which becomes one
resolvent linear solve per forcing rate.  Value-function constants are
closed-form sums over rate pairs (an integral of exp(-(a+b) t) is
1/(a+b)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linops, riccati
from .errors import (
    DimensionMismatch,
    NotSolved,
    RangeConditionFailed,
    ResolventSingular,
    UnstableHomogeneousSystem,
)
from .model import (
    ControlSpec,
    FeedbackStrategy,
    GameSpec,
    OffsetTerm,
    ZeroSumSpec,
    hat,
)
from .riccati import (
    SOLVED,
    ClosedLoopNashSolution,
    ControlAreSolution,
    OpenLoopNashSolution,
    ZeroSumSolution,
    _control_form,
    _gain_vector,
    _gain_vector_hat,
    _stacked_blocks,
    are_residuals,
)
from .stabilizability import check_stabilizer

__all__ = [
    "OffsetSolution",
    "ValueReport",
    "NashCertificate",
    "ConvexityReport",
    "synthesize_strategy",
    "solve_offsets",
    "value_function",
    "nash_certificate",
    "convexity_check",
]

_CANDIDATE_STATUSES = (SOLVED, riccati.NOT_STATIC_STABILIZING, riccati.PSD_VIOLATED)


@dataclass(frozen=True)
class OffsetSolution:
    """Mean offset eta_bar and open-loop offset v* as exponential profiles.

    For game solutions ``eta_bar`` is the player-stacked vector (2n); for
    control and zero-sum problems it is n-dimensional.
    """

    eta_bar: tuple[OffsetTerm, ...]
    v_star: tuple[OffsetTerm, ...]
    range_residuals: dict

    def eta_bar_at(self, t, dim) -> np.ndarray:
        out = np.zeros(dim)
        for term in self.eta_bar:
            out = out + term.amplitude * np.exp(-term.rate * np.asarray(t, dtype=float))
        return out


@dataclass(frozen=True)
class ValueReport:
    quadratic: float
    linear: float
    constant: float

    @property
    def total(self) -> float:
        return self.quadratic + self.linear + self.constant


@dataclass(frozen=True)
class ConvexityReport:
    min_eigenvalue: float
    max_eigenvalue: float
    grid: dict
    verdict: str  # convex | concave | indefinite
    margin: float
    necessary_only: bool = True  # checked on a control subspace, not all adapted controls


@dataclass(frozen=True)
class NashCertificate:
    stationarity_residuals: dict
    sign_margins: dict
    range_residuals: dict
    stabilizer: object
    convexity: tuple[ConvexityReport, ...] | None = None


# ---------------------------------------------------------------------------
# forcing bookkeeping


def _forcing_by_rate(spec):
    """Map rate -> dict of amplitude vectors (b, sigma, q1, q2, rho1, rho2)."""
    n = spec.n
    m = spec.m
    dims = {"b": n, "sigma": n, "q1": n, "q2": n, "rho1": m, "rho2": m}
    rates = {}
    for term in spec.forcing.terms:
        slot = rates.setdefault(term.rate, {k: np.zeros(d) for k, d in dims.items()})
        slot[term.kind] = slot[term.kind] + term.amplitude
    return rates


def _require_candidate(solution):
    if solution.status not in _CANDIDATE_STATUSES:
        raise NotSolved(f"solution status is {solution.status!r}")


def _require_solved(solution, allow_candidate):
    if solution.status == SOLVED:
        return
    if allow_candidate:
        _require_candidate(solution)
        return
    raise NotSolved(f"solution status is {solution.status!r}")


# ---------------------------------------------------------------------------
# offsets


def _resolvent(M, rate, rhs):
    n = M.shape[0]
    A = rate * np.eye(n) - M
    try:
        x = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ResolventSingular(f"rate {rate} hits the closed-loop spectrum") from exc
    if not np.all(np.isfinite(x)) or np.linalg.norm(A @ x - rhs) > 1e-8 * (1 + np.linalg.norm(rhs)):
        raise ResolventSingular(f"rate {rate} hits the closed-loop spectrum")
    return x


def solve_offsets(spec, solution) -> OffsetSolution:
    """Mean offset profile and open-loop offset induced by the forcing.

    Deterministic forcing makes the centered backward equation vanish
    identically, so only the mean equation is solved: for each forcing
    rate r the steady profile solves (r I - Acl^T) eta0 = source, and the
    offset v* follows from the pseudo-inverse feedback formula (range
    conditions checked per rate).
    """
    if isinstance(solution, ControlAreSolution) or isinstance(solution, ZeroSumSolution):
        return _offsets_single(spec, solution)
    if isinstance(solution, ClosedLoopNashSolution):
        return _offsets_closed_nash(spec, solution)
    if isinstance(solution, OpenLoopNashSolution):
        return _offsets_open_nash(spec, solution)
    raise DimensionMismatch(f"unknown solution type {type(solution).__name__}")


def _offsets_single(spec, solution) -> OffsetSolution:
    _require_candidate(solution)
    cf = _control_form(spec)
    if isinstance(solution, ControlAreSolution):
        P, Ph = solution.P, solution.Phat
    else:
        P, Ph = solution.Pc, solution.Pchat
    Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
    Sb_pinv = linops.pinv(Sigma_bar).pinv
    Kh = _gain_vector_hat(cf, P, Ph)
    drift = cf.Ah.T - Kh.T @ Sb_pinv @ cf.Bh.T
    eta_terms, v_terms = [], []
    range_residuals = {"centered": 0.0}
    worst = 0.0
    for rate, amps in sorted(_forcing_by_rate(spec).items()):
        rho = amps["rho1"]
        w_src = cf.Dh.T @ (P @ amps["sigma"]) + rho
        f = -Kh.T @ (Sb_pinv @ w_src) + cf.Ch.T @ (P @ amps["sigma"]) + Ph @ amps["b"] + amps["q1"]
        eta0 = _resolvent(drift, rate, f)
        w = cf.Bh.T @ eta0 + w_src
        ok, resid = linops.range_contains(0.5 * (Sigma_bar + Sigma_bar.T), w)
        if not ok:
            raise RangeConditionFailed(
                f"offset source at rate {rate} leaves the gain-system range "
                f"(residual {resid:.3e})"
            )
        worst = max(worst, resid)
        eta_terms.append(OffsetTerm(eta0, rate))
        v_terms.append(OffsetTerm(-Sb_pinv @ w, rate))
    range_residuals["mean"] = worst
    return OffsetSolution(tuple(eta_terms), tuple(v_terms), range_residuals)


def _offsets_closed_nash(spec: GameSpec, solution: ClosedLoopNashSolution) -> OffsetSolution:
    _require_candidate(solution)
    h = hat(spec)
    n, m1 = spec.n, spec.m1
    B1h, B2h = spec.B1 + spec.B1bar, spec.B2 + spec.B2bar
    D1h, D2h = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
    Ah_cl = h.Ahat + h.Bhat @ solution.theta_bar
    Ch_cl = h.Chat + h.Dhat @ solution.theta_bar
    Mv = _stacked_blocks(spec, solution.P1, solution.P2, hatted=True)
    Mv_pinv = linops.pinv(Mv).pinv
    eta_terms, v_terms = [], []
    worst = 0.0
    for rate, amps in sorted(_forcing_by_rate(spec).items()):
        etas = []
        for P, Ph, qk, rhok in (
            (solution.P1, solution.P1hat, amps["q1"], amps["rho1"]),
            (solution.P2, solution.P2hat, amps["q2"], amps["rho2"]),
        ):
            f = Ch_cl.T @ (P @ amps["sigma"]) + Ph @ amps["b"] + qk + solution.theta_bar.T @ rhok
            etas.append(_resolvent(Ah_cl.T, rate, f))
        rhs = np.concatenate([
            B1h.T @ etas[0] + D1h.T @ (solution.P1 @ amps["sigma"]) + amps["rho1"][:m1],
            B2h.T @ etas[1] + D2h.T @ (solution.P2 @ amps["sigma"]) + amps["rho2"][m1:],
        ])
        v0 = -Mv_pinv @ rhs
        worst = max(worst, float(np.linalg.norm(Mv @ v0 + rhs)))
        eta_terms.append(OffsetTerm(np.concatenate(etas), rate))
        v_terms.append(OffsetTerm(v0, rate))
    return OffsetSolution(tuple(eta_terms), tuple(v_terms), {"centered": 0.0, "mean": worst})


def _offsets_open_nash(spec: GameSpec, solution: OpenLoopNashSolution) -> OffsetSolution:
    _require_candidate(solution)
    h = hat(spec)
    n, m1 = spec.n, spec.m1
    p1, p2 = spec.players
    B1h, B2h = spec.B1 + spec.B1bar, spec.B2 + spec.B2bar
    D1h, D2h = spec.D1 + spec.D1bar, spec.D2 + spec.D2bar
    Sb = solution.Sigma_bar_stack
    if np.linalg.cond(Sb) > 1e12:
        raise ResolventSingular("stacked gain system is singular")
    Sb_inv = np.linalg.inv(Sb)
    # 2n x m coupling block (Phat Bhat + Chat^T P Dhat + Shat^T), player-stacked
    L = np.vstack([
        solution.P1hat @ h.Bhat + h.Chat.T @ solution.P1 @ h.Dhat + (p1.S + p1.Sbar).T,
        solution.P2hat @ h.Bhat + h.Chat.T @ solution.P2 @ h.Dhat + (p2.S + p2.Sbar).T,
    ])
    # m x 2n selection of the own-channel rows of Bhat^T eta
    G = np.zeros((spec.m, 2 * n))
    G[:m1, :n] = B1h.T
    G[m1:, n:] = B2h.T
    drift = scipy.linalg.block_diag(h.Ahat.T, h.Ahat.T) - L @ Sb_inv @ G
    eta_terms, v_terms = [], []
    worst = 0.0
    for rate, amps in sorted(_forcing_by_rate(spec).items()):
        w_src = np.concatenate([
            D1h.T @ (solution.P1 @ amps["sigma"]) + amps["rho1"][:m1],
            D2h.T @ (solution.P2 @ amps["sigma"]) + amps["rho2"][m1:],
        ])
        f = (
            -L @ (Sb_inv @ w_src)
            + np.concatenate([
                h.Chat.T @ (solution.P1 @ amps["sigma"]) + solution.P1hat @ amps["b"] + amps["q1"],
                h.Chat.T @ (solution.P2 @ amps["sigma"]) + solution.P2hat @ amps["b"] + amps["q2"],
            ])
        )
        eta0 = _resolvent(drift, rate, f)
        w = G @ eta0 + w_src
        v0 = -Sb_inv @ w
        worst = max(worst, float(np.linalg.norm(Sb @ v0 + w)))
        eta_terms.append(OffsetTerm(eta0, rate))
        v_terms.append(OffsetTerm(v0, rate))
    return OffsetSolution(tuple(eta_terms), tuple(v_terms), {"centered": 0.0, "mean": worst})


# ---------------------------------------------------------------------------
# strategy synthesis


def synthesize_strategy(solution, spec, free_components=None, free_offsets=None,
                        allow_candidate=True) -> FeedbackStrategy:
    """Assemble the feedback strategy (gains plus offset profile).

    With ``free_components`` supplied the gains are re-derived through the
    pseudo-inverse formulas; ``free_offsets`` adds exponential-profile
    terms projected onto the degenerate directions of the mean gain
    system (they vanish when that system is invertible).  Candidate
    (non-certified) solutions are allowed by default so that failed
    stabilizer gates can still be examined; pass
    ``allow_candidate=False`` to insist on a certified solution.
    """
    _require_solved(solution, allow_candidate)
    if free_components is not None:
        th_free, tb_free = free_components
        th_free = np.atleast_2d(np.asarray(th_free, dtype=float))
        tb_free = np.atleast_2d(np.asarray(tb_free, dtype=float))
        if isinstance(solution, (ControlAreSolution, ZeroSumSolution)):
            cf = _control_form(spec)
            P = solution.P if isinstance(solution, ControlAreSolution) else solution.Pc
            Ph = solution.Phat if isinstance(solution, ControlAreSolution) else solution.Pchat
            Sigma = cf.R + cf.D.T @ P @ cf.D
            Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
            Sp = linops.pinv(Sigma).pinv
            Sbp = linops.pinv(Sigma_bar).pinv
            eye = np.eye(spec.m)
            theta = -Sp @ _gain_vector(cf, P) + (eye - Sp @ Sigma) @ th_free
            theta_bar = -Sbp @ _gain_vector_hat(cf, P, Ph) + (eye - Sbp @ Sigma_bar) @ tb_free
        else:
            raise DimensionMismatch("free components apply to control/zero-sum solutions")
    else:
        theta, theta_bar = solution.theta, solution.theta_bar
    if spec.forcing:
        offsets = solve_offsets(spec, solution)
        v_terms = list(offsets.v_star)
    else:
        v_terms = []
    if free_offsets:
        if not isinstance(solution, (ControlAreSolution, ZeroSumSolution)):
            raise DimensionMismatch("free offsets apply to control/zero-sum solutions")
        cf = _control_form(spec)
        P = solution.P if isinstance(solution, ControlAreSolution) else solution.Pc
        Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
        proj = np.eye(spec.m) - linops.pinv(Sigma_bar).pinv @ Sigma_bar
        for term in free_offsets:
            amp = proj @ np.atleast_1d(np.asarray(term.amplitude, dtype=float))
            if np.linalg.norm(amp) > 0.0:
                v_terms.append(OffsetTerm(amp, float(term.rate)))
    return FeedbackStrategy(theta, theta_bar, tuple(v_terms))


# ---------------------------------------------------------------------------
# value function


def _pair_integral(terms_a, terms_b, form):
    """Integral over [0, inf) of <form(a(t)), b(t)> for exponential profiles."""
    total = 0.0
    for va, ra in terms_a:
        for vb, rb in terms_b:
            total += float(form(va) @ vb) / (ra + rb)
    return total


def value_function(spec, solution, offsets: OffsetSolution | None, x, player: int = 1) -> ValueReport:
    """Optimal (saddle) value at initial state x.

    V(x) = <Phat x, x> + 2 <eta_bar(0), x> + constant, the constant being
    the closed-form integral of the forcing terms (quadratic in sigma,
    cross term with b, minus the completed square of the offset).  For
    non-zero-sum Nash solutions only the homogeneous case is supported.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.n,):
        raise DimensionMismatch(f"x must have shape ({spec.n},)")
    _require_candidate(solution)
    if isinstance(solution, (ControlAreSolution, ZeroSumSolution)):
        cf = _control_form(spec)
        P = solution.P if isinstance(solution, ControlAreSolution) else solution.Pc
        Ph = solution.Phat if isinstance(solution, ControlAreSolution) else solution.Pchat
        quadratic = float(x @ Ph @ x)
        if offsets is None or not spec.forcing:
            return ValueReport(quadratic, 0.0, 0.0)
        Sigma_bar = cf.Rh + cf.Dh.T @ P @ cf.Dh
        rates = _forcing_by_rate(spec)
        sig = [(amps["sigma"], r) for r, amps in rates.items()]
        bs = [(amps["b"], r) for r, amps in rates.items()]
        etas = [(t.amplitude, t.rate) for t in offsets.eta_bar]
        phis = [(t.amplitude, t.rate) for t in offsets.v_star]
        constant = (
            _pair_integral(sig, sig, lambda v: P @ v)
            + 2.0 * _pair_integral(etas, bs, lambda v: v)
            - _pair_integral(phis, phis, lambda v: Sigma_bar @ v)
        )
        linear = 2.0 * float(offsets.eta_bar_at(0.0, spec.n) @ x)
        return ValueReport(quadratic, linear, constant)
    if isinstance(solution, (ClosedLoopNashSolution, OpenLoopNashSolution)):
        if spec.forcing:
            raise NotSolved("per-player values with forcing are not available for Nash solutions")
        Ph = solution.P1hat if player == 1 else solution.P2hat
        return ValueReport(float(x @ Ph @ x), 0.0, 0.0)
    raise DimensionMismatch(f"unknown solution type {type(solution).__name__}")


# ---------------------------------------------------------------------------
# equilibrium certificates


_KINDS = ("open_rep", "closed_nash", "zerosum_open_rep", "zerosum_closed")


def nash_certificate(spec, solution, kind: str, convexity_grid: dict | None = None) -> NashCertificate:
    """Recompute the algebraic side conditions of the matching theorem.

    Stationarity residuals and sign/range margins come from
    :func:`mflq.riccati.are_residuals`; the stabilizer certificate is
    rebuilt from scratch.  The representation kinds additionally attach
    the per-player convexity (zero-sum: convexity-concavity) reports.
    """
    if kind not in _KINDS:
        raise DimensionMismatch(f"kind must be one of {_KINDS}")
    rep = are_residuals(solution, spec)
    cert = check_stabilizer(spec, solution.theta, solution.theta_bar)
    convexity = None
    if kind in ("open_rep", "zerosum_open_rep"):
        game = spec.to_game() if isinstance(spec, ZeroSumSpec) else spec
        grid = convexity_grid or {}
        convexity = tuple(convexity_check(game, i, **grid) for i in (1, 2))
        if isinstance(spec, ZeroSumSpec):
            # report in the shared-cost convention: player 2's own-cost
            # convexity equals concavity of the shared functional
            convexity = (convexity[0], _flip(convexity[1]))
    return NashCertificate(
        stationarity_residuals=rep.equations,
        sign_margins=rep.sign_margins,
        range_residuals=rep.range_residuals,
        stabilizer=cert,
        convexity=convexity,
    )


def _flip(report: ConvexityReport) -> ConvexityReport:
    verdict = {"convex": "concave", "concave": "convex"}.get(report.verdict, report.verdict)
    return ConvexityReport(
        -report.max_eigenvalue, -report.min_eigenvalue, report.grid, verdict,
        report.margin, report.necessary_only,
    )


# ---------------------------------------------------------------------------
# convexity of the per-player cost functional


def _expm_pair(M, h):
    """(e^{M h}, int_0^h e^{M s} ds) via one augmented exponential."""
    n = M.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = M * h
    aug[:n, n:] = np.eye(n) * h
    E = scipy.linalg.expm(aug)
    return E[:n, :n], E[:n, n:]


def convexity_check(spec, player: int, T: float = 20.0, N: int = 200) -> ConvexityReport:
    """Extreme eigenvalues of the discretized per-player quadratic form.

    The form is J_i^0 restricted to piecewise-constant controls of two
    kinds on an N-interval grid over [0, T]: deterministic profiles and
    zero-mean profiles (a common standardized factor times a deterministic
    profile).  Mean and second-moment dynamics propagate exactly per step,
    so the restriction of the cost is an exact quadratic form in the
    control values; its Hessian is assembled blockwise.  This is a
    necessary condition for convexity over all adapted controls, not a
    sufficient one.
    """
    if isinstance(spec, ZeroSumSpec):
        spec = spec.to_game()
    if isinstance(spec, ControlSpec):
        raise DimensionMismatch("convexity check expects a game spec")
    if player not in (1, 2):
        raise DimensionMismatch("player must be 1 or 2")
    n = spec.n
    mi = spec.m1 if player == 1 else spec.m2
    if mi < 1:
        raise DimensionMismatch("selected player has no control channel")
    m1 = spec.m1
    p = spec.players[player - 1]
    h = hat(spec)
    ph = h.players[player - 1]
    Bi = spec.B1 if player == 1 else spec.B2
    Bih = Bi + (spec.B1bar if player == 1 else spec.B2bar)
    Di = spec.D1 if player == 1 else spec.D2
    Dih = Di + (spec.D1bar if player == 1 else spec.D2bar)
    sl = slice(0, m1) if player == 1 else slice(m1, spec.m)
    Sii, Sii_h = p.S[sl, :], (p.S + p.Sbar)[sl, :]
    Riii = p.R[sl, :][:, sl]
    Riii_h = (p.R + p.Rbar)[sl, :][:, sl]

    dt = T / N
    # shared backward weight: Xi' = -(A^T Xi + Xi A + C^T Xi C + Q_i), Xi(T) = 0
    A, C = spec.A, spec.C
    n2 = n * n
    Kmat = np.kron(np.eye(n), A.T) + np.kron(A.T, np.eye(n)) + np.kron(C.T, C.T)
    EK, FK = _expm_pair(Kmat, dt)
    q_vec = p.Q.reshape(-1, order="F")
    Xi = np.zeros((N + 1, n, n))
    v = np.zeros(n2)
    for j in range(N - 1, -1, -1):
        v = EK @ v + FK @ q_vec
        Xi[j] = v.reshape((n, n), order="F")
        if not np.all(np.isfinite(v)) or np.linalg.norm(v) > 1e12:
            raise UnstableHomogeneousSystem("second-moment weight diverged before T")

    def block(Am, Bm, Cs, Ds, Qx, Su, Ruu):
        E11, E12w = _expm_pair(Am, dt)
        E12 = E12w @ Bm
        K = N * mi
        H = np.zeros((K, K))
        X = np.zeros((n, K))
        for j in range(N):
            U = np.zeros((mi, K))
            U[:, j * mi:(j + 1) * mi] = np.eye(mi)
            S = Cs @ X + Ds @ U
            W = S.T @ (Xi[j] @ S) + X.T @ (Qx @ X)
            SX = Su @ X
            W += U.T @ SX + SX.T @ U + U.T @ (Ruu @ U)
            H += W
            if not np.all(np.isfinite(X)) or np.linalg.norm(X) > 1e12:
                raise UnstableHomogeneousSystem("mean propagation diverged before T")
            X = E11 @ X
            X[:, j * mi:(j + 1) * mi] += E12
        return dt * (H + H.T)  # doubled quadratic form, J(u) = u^T H u / 2

    H_det = block(h.Ahat, Bih, h.Chat, Dih, ph.Qhat, Sii_h, Riii_h)
    H_zm = block(A, Bi, C, Di, p.Q, Sii, Riii)
    eigs = np.concatenate([np.linalg.eigvalsh(H_det), np.linalg.eigvalsh(H_zm)])
    lo, hi = float(eigs.min()), float(eigs.max())
    scale = max(abs(lo), abs(hi), 1e-30)
    tol = 1e-7 * scale
    if lo >= -tol:
        verdict, margin = "convex", lo
    elif hi <= tol:
        verdict, margin = "concave", -hi
    else:
        verdict, margin = "indefinite", -min(abs(lo), abs(hi))
    return ConvexityReport(
        lo, hi, {"T": T, "N": N, "basis": 2 * N * mi}, verdict, margin
    )
