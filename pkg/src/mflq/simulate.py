"""Monte-Carlo validation of closed-loop strategies.

The mean trajectory is integrated deterministically (the linear mean-field
structure closes the equation for E[X] exactly), and each path follows
Euler-Maruyama for the deviation Y = X - E[X], whose mean is identically
zero; this removes the particle-approximation bias from E[X].  Brownian
increments come from counter-based per-path streams keyed by
(seed, pair index), with antithetic sign pairs by default, so ensembles
are bit-reproducible regardless of block scheduling or thread count.

The path stepping itself runs in a compiled kernel when the optional
extension built from ``_simcore.pyx`` is importable, else in the
vectorized numpy fallback with the same contract.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _simpy
from .errors import DimensionMismatch, NonFiniteState
from .model import (
    ControlSpec,
    FeedbackStrategy,
    GameSpec,
    OffsetTerm,
    ZeroSumSpec,
    control_as_game,
)
from .stabilizability import check_stabilizer

try:
    from . import _simcore
except ImportError:
    _simcore = None

USING_COMPILED_KERNEL = _simcore is not None

__all__ = [
    "SimOptions",
    "CostEstimate",
    "PathEnsemble",
    "DeviationRecord",
    "DeviationReport",
    "GainPerturbation",
    "simulate_closed_loop",
    "estimate_cost",
    "deviation_test",
    "default_perturbations",
    "gain_perturbations",
    "USING_COMPILED_KERNEL",
]


@dataclass(frozen=True)
class SimOptions:
    T: float = 20.0
    dt: float = 1e-2
    paths: int = 1000
    seed: int = 0
    antithetic: bool = True
    store_paths: bool | None = None  # None: store when the state array stays small
    kernel: str = "auto"  # auto | compiled | numpy


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    T: float
    dt: float
    paths: int
    tail_flag: bool


@dataclass(frozen=True)
class PathEnsemble:
    """Simulation output: grid, mean trajectory, per-path cost integrals."""

    t: np.ndarray  # (K+1,)
    xbar: np.ndarray  # (K+1, n) deterministic mean trajectory
    costs: np.ndarray  # (paths, players) per-path trapezoid cost integrals
    tail_costs: np.ndarray  # same, restricted to the last 10% of the horizon
    terminal: np.ndarray  # (paths, n) state at T
    mean_traj: np.ndarray  # (K+1, n) cross-path average of X
    se_traj: np.ndarray  # (K+1, n) per-component standard error of mean_traj
    states: np.ndarray | None  # (paths, K+1, n) full paths when stored
    players: int
    opts: SimOptions


def _as_game(spec) -> tuple[GameSpec, int]:
    if isinstance(spec, ControlSpec):
        return control_as_game(spec), 1
    if isinstance(spec, ZeroSumSpec):
        return spec.to_game(), 2
    if isinstance(spec, GameSpec):
        return spec, 2
    raise DimensionMismatch(f"cannot simulate a {type(spec).__name__}")


def _profiles_on_grid(forcing, kind, t, dim):
    return forcing.eval_kind(kind, t, dim)


def _mean_rhs(game, strategy, Ah_cl, Bh, t, x):
    v = strategy.offset_at(t)[0]
    b = game.forcing.eval_kind("b", t, game.n)[0]
    return Ah_cl @ x + Bh @ v + b


def _integrate_mean(game, strategy, x0, t):
    """Classical RK4 for the exact mean equation on the simulation grid."""
    n = game.n
    Ah_cl = (game.A + game.Abar) + (game.B + game.Bbar) @ strategy.theta_bar
    Bh = game.B + game.Bbar
    K = t.size - 1
    h = t[1] - t[0]
    xbar = np.empty((K + 1, n))
    xbar[0] = x0
    x = x0.astype(float).copy()
    for k in range(K):
        tk = t[k]
        k1 = _mean_rhs(game, strategy, Ah_cl, Bh, tk, x)
        k2 = _mean_rhs(game, strategy, Ah_cl, Bh, tk + 0.5 * h, x + 0.5 * h * k1)
        k3 = _mean_rhs(game, strategy, Ah_cl, Bh, tk + 0.5 * h, x + 0.5 * h * k2)
        k4 = _mean_rhs(game, strategy, Ah_cl, Bh, tk + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e150:
            raise NonFiniteState("mean trajectory left the representable range", t[k + 1])
        xbar[k + 1] = x
    return xbar


def _integrand_tables(game, strategy, t, xbar, players):
    """Reduce each player's integrand to g_det + c . Y + Y^T G Y."""
    n, m = game.n, game.m
    K1 = t.size
    theta, theta_bar = strategy.theta, strategy.theta_bar
    v = strategy.offset_at(t)  # (K+1, m)
    ubar = xbar @ theta_bar.T + v
    g_det = np.zeros((players, K1))
    c = np.zeros((players, K1, n))
    G = np.zeros((players, n, n))
    for i in range(players):
        p = game.players[i]
        Q, Qb, S, Sb, R, Rb = p.Q, p.Qbar, p.S, p.Sbar, p.R, p.Rbar
        qi = _profiles_on_grid(game.forcing, f"q{i + 1}", t, n)
        ri = _profiles_on_grid(game.forcing, f"rho{i + 1}", t, m)
        # deterministic part: full integrand along (xbar, ubar)
        g_det[i] = (
            np.einsum("ki,ij,kj->k", xbar, Q + Qb, xbar)
            + 2.0 * np.einsum("ki,ki->k", ubar @ (S + Sb), xbar)
            + np.einsum("ki,ij,kj->k", ubar, R + Rb, ubar)
            + 2.0 * (np.einsum("ki,ki->k", qi, xbar) + np.einsum("ki,ki->k", ri, ubar))
        )
        # linear part: a_k = 2(Q xbar + S^T ubar + q); b_k = 2(S xbar + R ubar + rho)
        a = 2.0 * (xbar @ Q + ubar @ S + qi)
        b = 2.0 * (xbar @ S.T + ubar @ R + ri)
        c[i] = a + b @ theta
        G[i] = Q + S.T @ theta + theta.T @ S + theta.T @ R @ theta
    return g_det, c, G


def _stream_normals(seed, stream_index, K):
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, stream_index], dtype=np.uint64)))
    return gen.standard_normal(K)


def _kernel(opts):
    if opts.kernel == "numpy":
        return _simpy.run_block
    if opts.kernel == "compiled":
        if _simcore is None:
            raise RuntimeError("compiled kernel requested but the extension is not built")
        return _simcore.run_block
    return _simcore.run_block if _simcore is not None else _simpy.run_block


def simulate_closed_loop(spec, strategy: FeedbackStrategy, x0, opts: SimOptions) -> PathEnsemble:
    """Simulate the closed-loop mean-field SDE under a feedback strategy.

    Emits a warning (and proceeds) when the strategy fails the
    stabilizer certificate.  Raises :class:`NonFiniteState` with the first
    blow-up time when a path or the mean trajectory overflows.
    """
    game, players = _as_game(spec)
    n, m = game.n, game.m
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (n,):
        raise DimensionMismatch(f"x0 must have shape ({n},)")
    if strategy.theta.shape != (m, n):
        raise DimensionMismatch(f"strategy gains must be {(m, n)}")
    K = int(round(opts.T / opts.dt))
    if K < 1 or abs(K * opts.dt - opts.T) > 1e-9 * max(1.0, opts.T):
        raise DimensionMismatch(f"horizon {opts.T} is not a multiple of dt {opts.dt}")
    if opts.paths < 2:
        raise DimensionMismatch("need at least 2 paths")

    cert = check_stabilizer(game, strategy.theta, strategy.theta_bar)
    if not cert.is_stabilizer:
        warnings.warn(
            f"strategy is not an MF-L2-stabilizer ({cert.failure_reason}); "
            "simulating to the finite horizon anyway",
            RuntimeWarning,
            stacklevel=2,
        )

    t = np.arange(K + 1) * opts.dt
    xbar = _integrate_mean(game, strategy, x0, t)

    # deterministic diffusion offset s_k = Chat_cl xbar + Dhat v + sigma
    Ch_cl = (game.C + game.Cbar) + (game.D + game.Dbar) @ strategy.theta_bar
    Dh = game.D + game.Dbar
    v = strategy.offset_at(t)
    sig = _profiles_on_grid(game.forcing, "sigma", t, n)
    s_nodes = xbar @ Ch_cl.T + v @ Dh.T + sig  # (K+1, n); kernel uses nodes 0..K-1

    g_det, c, G = _integrand_tables(game, strategy, t, xbar, players)
    AT = np.ascontiguousarray((game.A + game.B @ strategy.theta).T)
    CT = np.ascontiguousarray((game.C + game.D @ strategy.theta).T)
    s_arr = np.ascontiguousarray(s_nodes[:K])

    store = opts.store_paths
    if store is None:
        store = opts.paths * (K + 1) * n * 8 <= 256 * 2**20

    run = _kernel(opts)
    paths = opts.paths
    block_size = max(2, min(paths, int(np.ceil(4.0e6 / max(K, 1))) * 2))
    blocks = []
    start = 0
    while start < paths:
        stop = min(paths, start + block_size)
        blocks.append((start, stop))
        start = stop

    sqrt_h = np.sqrt(opts.dt)

    def make_dw(start, stop):
        dw = np.empty((stop - start, K))
        if opts.antithetic:
            for row, p in enumerate(range(start, stop)):
                z = _stream_normals(opts.seed, p // 2, K)
                dw[row] = z if (p % 2 == 0) else -z
        else:
            for row, p in enumerate(range(start, stop)):
                dw[row] = _stream_normals(opts.seed, p, K)
        return dw * sqrt_h

    def run_one(block):
        start, stop = block
        dw = make_dw(start, stop)
        return run(AT, CT, s_arr, dw, opts.dt, _tail_start(K), g_det, c, G, store)

    threads = int(os.environ.get("MFLQ_THREADS") or 0)
    if threads <= 0:
        threads = 1 if len(blocks) == 1 else min(4, os.cpu_count() or 1)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, blocks))
    else:
        results = [run_one(b) for b in blocks]

    costs = np.vstack([r[0] for r in results])
    tail = np.vstack([r[1] for r in results])
    YT = np.vstack([r[2] for r in results])
    sumY = sum(r[3] for r in results)
    sumYsq = sum(r[4] for r in results)
    bad = [r[6] for r in results if r[6] >= 0]
    if bad:
        raise NonFiniteState("path left the representable range", min(bad) * opts.dt)
    states = None
    if store:
        states = np.concatenate([r[5] for r in results], axis=0) + xbar[None, :, :]

    meanY = sumY / paths
    varY = np.maximum(sumYsq / paths - meanY**2, 0.0) * paths / max(paths - 1, 1)
    return PathEnsemble(
        t=t,
        xbar=xbar,
        costs=costs,
        tail_costs=tail,
        terminal=YT + xbar[-1],
        mean_traj=xbar + meanY,
        se_traj=np.sqrt(varY / paths),
        states=states,
        players=players,
        opts=opts,
    )


def _tail_start(K):
    return int(np.floor(0.9 * K))


def estimate_cost(ensemble: PathEnsemble, spec, strategy, player: int = 1) -> CostEstimate:
    """Mean and standard error of one player's simulated cost."""
    if player < 1 or player > ensemble.players:
        raise DimensionMismatch(f"player must be in 1..{ensemble.players}")
    col = ensemble.costs[:, player - 1]
    tail = ensemble.tail_costs[:, player - 1]
    paths = col.size
    mean = float(col.mean())
    stderr = float(col.std(ddof=1) / np.sqrt(paths))
    tail_mean = float(tail.mean())
    tail_flag = abs(tail_mean) > 0.01 * abs(mean) if mean != 0.0 else abs(tail_mean) > 0.0
    return CostEstimate(mean, stderr, ensemble.opts.T, ensemble.opts.dt, paths, tail_flag)


# ---------------------------------------------------------------------------
# deviation tests


@dataclass(frozen=True)
class GainPerturbation:
    """Adapted deviation probe: a constant bump of one player's feedback rows.

    Deterministic offset profiles cannot detect every non-equilibrium
    gain (the cost can be exactly flat along them), because a closed-loop
    strategy deviation corresponds to an adapted control deviation
    proportional to X - E[X]; bumping the gain realizes exactly that.
    """

    delta: np.ndarray  # (m_i, n) added to the player's rows of Theta


@dataclass(frozen=True)
class DeviationRecord:
    player: int
    kind: str  # offset | gain
    rate: float
    amplitude: np.ndarray
    delta_j: float
    stderr: float
    ok: bool


@dataclass(frozen=True)
class DeviationReport:
    kind: str
    records: tuple[DeviationRecord, ...]
    passed: bool


def default_perturbations(spec, scale: float = 0.5):
    """The default battery: offset profiles at rates (0.5, 1, 2) x signs, per player."""
    game, players = _as_game(spec)
    sizes = [game.m1, game.m2][:players]
    battery = []
    for i, mi in enumerate(sizes, start=1):
        if mi == 0:
            continue
        for rate in (0.5, 1.0, 2.0):
            for sign in (1.0, -1.0):
                battery.append((i, OffsetTerm(sign * scale * np.ones(mi), rate)))
    return battery


def gain_perturbations(spec, scale: float = 0.1):
    """Adapted probes: +/- constant bumps of each player's feedback rows."""
    game, players = _as_game(spec)
    sizes = [game.m1, game.m2][:players]
    battery = []
    for i, mi in enumerate(sizes, start=1):
        if mi == 0:
            continue
        for sign in (1.0, -1.0):
            battery.append((i, GainPerturbation(sign * scale * np.ones((mi, game.n)))))
    return battery


def deviation_test(spec, strategy: FeedbackStrategy, x0, kind: str,
                   perturbations=None, opts: SimOptions | None = None) -> DeviationReport:
    """Statistical unilateral-deviation test around a candidate strategy.

    Offset perturbations add a deterministic exponential profile to one
    player's open-loop offset; gain perturbations bump one player's
    feedback rows (an adapted deviation).  Baseline and perturbed runs
    share the same Brownian increments, so the paired difference
    estimator makes small cost changes visible.  Nash verdict: no player
    improves their own cost beyond 3 standard errors.  Saddle verdict:
    player 1 cannot lower the shared cost, player 2 cannot raise it,
    beyond 3 standard errors.
    """
    if kind not in ("nash", "saddle"):
        raise DimensionMismatch("kind must be 'nash' or 'saddle'")
    game, players = _as_game(spec)
    opts = opts or SimOptions()
    if perturbations is None:
        perturbations = default_perturbations(spec)
    base = simulate_closed_loop(game, strategy, x0, opts)
    m1 = game.m1
    records = []
    for player, term in perturbations:
        rows = slice(0, m1) if player == 1 else slice(m1, game.m)
        if isinstance(term, GainPerturbation):
            theta = strategy.theta.copy()
            theta[rows] += term.delta
            pert_strategy = FeedbackStrategy(theta, strategy.theta_bar, strategy.offset)
            pkind, rate, amp = "gain", 0.0, term.delta
        else:
            full = np.zeros(game.m)
            full[rows] = term.amplitude
            pert_strategy = FeedbackStrategy(
                strategy.theta, strategy.theta_bar,
                strategy.offset + (OffsetTerm(full, term.rate),),
            )
            pkind, rate, amp = "offset", term.rate, term.amplitude
        pert = simulate_closed_loop(game, pert_strategy, x0, opts)
        col = 0 if kind == "saddle" else player - 1  # saddle: the shared functional
        diff = pert.costs[:, col] - base.costs[:, col]
        delta = float(diff.mean())
        stderr = float(diff.std(ddof=1) / np.sqrt(diff.size))
        if kind == "nash" or player == 1:
            ok = delta >= -3.0 * stderr
        else:
            ok = delta <= 3.0 * stderr
        records.append(
            DeviationRecord(player, pkind, rate, np.array(amp, dtype=float), delta, stderr, ok)
        )
    return DeviationReport(kind, tuple(records), all(r.ok for r in records))
