"""Problem data for mean-field LQ control and two-player games.

A problem is a constant-coefficient linear SDE whose drift and diffusion
involve the state, the controls and their expectations,

    dX = (A X + Abar E[X] + sum_i (B_i u_i + Bbar_i E[u_i]) + b) dt
       + (C X + Cbar E[X] + sum_i (D_i u_i + Dbar_i E[u_i]) + sigma) dW,

together with one quadratic cost functional per player.  The "hat"
coefficients (plain + barred) govern the dynamics of E[X].

Nonhomogeneous terms are restricted to finite sums of decaying
exponentials c * exp(-rate * t) with rate > 0; this keeps them square
integrable on [0, inf) and makes every offset equation a finite linear
solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AsymmetryExceedsTolerance, DimensionMismatch, NonFinite, NotZeroSum

TAU_SYM = 1e-9
#: Frobenius tolerance for the intrinsic-equivalence null-space tests.
TAU_INTRINSIC = 1e-9

FORCING_KINDS = ("b", "sigma", "q1", "q2", "rho1", "rho2")


# ---------------------------------------------------------------------------
# small helpers


def _arr(x, shape, name):
    a = np.asarray(x, dtype=float)
    if a.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains non-finite entries")
    a = a.copy()
    a.flags.writeable = False
    return a


def _symmetrize(M, name, tol=TAU_SYM):
    if M.size and np.max(np.abs(M - M.T)) > tol:
        raise AsymmetryExceedsTolerance(
            f"{name} is asymmetric beyond {tol:g}: max |M - M^T| = {np.max(np.abs(M - M.T)):.3e}"
        )
    S = 0.5 * (M + np.asarray(M).T)
    S.flags.writeable = False
    return S


def _ro(a):
    a = np.asarray(a, dtype=float).copy()
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# forcing profiles


@dataclass(frozen=True)
class ForcingTerm:
    """One exponential profile amplitude * exp(-rate * t)."""

    kind: str
    amplitude: np.ndarray
    rate: float


@dataclass(frozen=True)
class Forcing:
    """Finite collection of exponential forcing profiles."""

    terms: tuple[ForcingTerm, ...] = ()

    def by_kind(self, kind: str) -> list[ForcingTerm]:
        return [t for t in self.terms if t.kind == kind]

    def eval_kind(self, kind: str, t, dim: int) -> np.ndarray:
        """Evaluate the summed profile of one kind at times ``t`` (shape (-1, dim))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, dim))
        for term in self.by_kind(kind):
            out += np.exp(-term.rate * t)[:, None] * term.amplitude[None, :]
        return out

    def __bool__(self):
        return bool(self.terms)


def _validate_forcing(forcing, n, m1, m2) -> Forcing:
    if forcing is None:
        return Forcing()
    if isinstance(forcing, Forcing):
        raw_terms = forcing.terms
    else:
        raw_terms = tuple(forcing)
    dims = {"b": n, "sigma": n, "q1": n, "q2": n, "rho1": m1 + m2, "rho2": m1 + m2}
    terms = []
    for t in raw_terms:
        if isinstance(t, ForcingTerm):
            kind, amp, rate = t.kind, t.amplitude, t.rate
        else:
            kind, amp, rate = t["kind"], t["amplitude"], t["rate"]
        if kind not in FORCING_KINDS:
            raise DimensionMismatch(f"unknown forcing kind {kind!r}")
        rate = float(rate)
        if not rate > 0.0:
            raise DimensionMismatch(f"forcing rate must be positive, got {rate}")
        amp = np.atleast_1d(np.asarray(amp, dtype=float))
        if amp.shape != (dims[kind],):
            raise DimensionMismatch(
                f"forcing {kind!r}: amplitude has shape {amp.shape}, expected ({dims[kind]},)"
            )
        if not np.all(np.isfinite(amp)):
            raise NonFinite(f"forcing {kind!r} amplitude is non-finite")
        terms.append(ForcingTerm(kind, _ro(amp), rate))
    return Forcing(tuple(terms))


# ---------------------------------------------------------------------------
# cost blocks


@dataclass(frozen=True)
class PlayerCost:
    """Quadratic cost blocks of one player (stacked control ordering u = (u1, u2))."""

    Q: np.ndarray
    Qbar: np.ndarray
    S1: np.ndarray
    S1bar: np.ndarray
    S2: np.ndarray
    S2bar: np.ndarray
    R11: np.ndarray
    R11bar: np.ndarray
    R12: np.ndarray
    R12bar: np.ndarray
    R22: np.ndarray
    R22bar: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return np.vstack([self.S1, self.S2])

    @property
    def Sbar(self) -> np.ndarray:
        return np.vstack([self.S1bar, self.S2bar])

    @property
    def R(self) -> np.ndarray:
        # R21 is stored implicitly as R12^T
        return np.block([[self.R11, self.R12], [self.R12.T, self.R22]])

    @property
    def Rbar(self) -> np.ndarray:
        return np.block([[self.R11bar, self.R12bar], [self.R12bar.T, self.R22bar]])

    def negated(self) -> "PlayerCost":
        return PlayerCost(*[_ro(-getattr(self, f.name)) for f in _PLAYER_FIELDS])


_PLAYER_FIELDS = PlayerCost.__dataclass_fields__.values()


def _validate_player(raw, n, m1, m2, label) -> PlayerCost:
    if isinstance(raw, PlayerCost):
        raw = {f.name: getattr(raw, f.name) for f in _PLAYER_FIELDS}
    shapes = {
        "Q": (n, n),
        "Qbar": (n, n),
        "S1": (m1, n),
        "S1bar": (m1, n),
        "S2": (m2, n),
        "S2bar": (m2, n),
        "R11": (m1, m1),
        "R11bar": (m1, m1),
        "R12": (m1, m2),
        "R12bar": (m1, m2),
        "R22": (m2, m2),
        "R22bar": (m2, m2),
    }
    vals = {}
    for name, shape in shapes.items():
        default = np.zeros(shape)
        vals[name] = _arr(raw.get(name, default), shape, f"{label}.{name}")
    for name in ("Q", "Qbar", "R11", "R11bar", "R22", "R22bar"):
        vals[name] = _symmetrize(vals[name], f"{label}.{name}")
    return PlayerCost(**vals)


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class GameSpec:
    """Validated two-player mean-field LQ game data."""

    n: int
    m1: int
    m2: int
    A: np.ndarray
    Abar: np.ndarray
    C: np.ndarray
    Cbar: np.ndarray
    B1: np.ndarray
    B1bar: np.ndarray
    D1: np.ndarray
    D1bar: np.ndarray
    B2: np.ndarray
    B2bar: np.ndarray
    D2: np.ndarray
    D2bar: np.ndarray
    players: tuple[PlayerCost, PlayerCost]
    forcing: Forcing = field(default_factory=Forcing)

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def B(self) -> np.ndarray:
        return np.hstack([self.B1, self.B2])

    @property
    def Bbar(self) -> np.ndarray:
        return np.hstack([self.B1bar, self.B2bar])

    @property
    def D(self) -> np.ndarray:
        return np.hstack([self.D1, self.D2])

    @property
    def Dbar(self) -> np.ndarray:
        return np.hstack([self.D1bar, self.D2bar])


@dataclass(frozen=True)
class ControlSpec:
    """Single-player specialization (m2 = 0) of the game data."""

    n: int
    m: int
    A: np.ndarray
    Abar: np.ndarray
    C: np.ndarray
    Cbar: np.ndarray
    B: np.ndarray
    Bbar: np.ndarray
    D: np.ndarray
    Dbar: np.ndarray
    Q: np.ndarray
    Qbar: np.ndarray
    S: np.ndarray
    Sbar: np.ndarray
    R: np.ndarray
    Rbar: np.ndarray
    forcing: Forcing = field(default_factory=Forcing)


@dataclass(frozen=True)
class ZeroSumSpec:
    """Shared-coefficient form of a zero-sum game (J1 = -J2 = J)."""

    n: int
    m1: int
    m2: int
    A: np.ndarray
    Abar: np.ndarray
    C: np.ndarray
    Cbar: np.ndarray
    B1: np.ndarray
    B1bar: np.ndarray
    D1: np.ndarray
    D1bar: np.ndarray
    B2: np.ndarray
    B2bar: np.ndarray
    D2: np.ndarray
    D2bar: np.ndarray
    cost: PlayerCost  # player 1's blocks; player 2 carries the negation
    forcing: Forcing = field(default_factory=Forcing)

    m = GameSpec.m
    B = GameSpec.B
    Bbar = GameSpec.Bbar
    D = GameSpec.D
    Dbar = GameSpec.Dbar

    @property
    def Q(self):
        return self.cost.Q

    @property
    def Qbar(self):
        return self.cost.Qbar

    @property
    def S(self):
        return self.cost.S

    @property
    def Sbar(self):
        return self.cost.Sbar

    @property
    def R(self):
        return self.cost.R

    @property
    def Rbar(self):
        return self.cost.Rbar

    def to_game(self) -> GameSpec:
        """Rebuild the equivalent two-player game (player 2 = negated blocks)."""
        return GameSpec(
            n=self.n,
            m1=self.m1,
            m2=self.m2,
            A=self.A,
            Abar=self.Abar,
            C=self.C,
            Cbar=self.Cbar,
            B1=self.B1,
            B1bar=self.B1bar,
            D1=self.D1,
            D1bar=self.D1bar,
            B2=self.B2,
            B2bar=self.B2bar,
            D2=self.D2,
            D2bar=self.D2bar,
            players=(self.cost, self.cost.negated()),
            forcing=self.forcing,
        )


def validate(raw) -> GameSpec:
    """Validate and normalize a game-spec record.

    ``raw`` is a mapping with integer fields ``n``, ``m1``, ``m2``, the
    dynamics matrices, a two-element ``players`` sequence of cost blocks
    and an optional ``forcing`` list.  Nominally symmetric blocks are
    checked against :data:`TAU_SYM` and then symmetrized exactly.
    """
    if isinstance(raw, GameSpec):
        raw = _game_as_dict(raw)
    n, m1, m2 = int(raw["n"]), int(raw["m1"]), int(raw["m2"])
    if n < 1 or m1 < 0 or m2 < 0 or m1 + m2 < 1:
        raise DimensionMismatch(f"invalid dimensions n={n}, m1={m1}, m2={m2}")
    dyn = {}
    for name, shape in (
        ("A", (n, n)),
        ("Abar", (n, n)),
        ("C", (n, n)),
        ("Cbar", (n, n)),
        ("B1", (n, m1)),
        ("B1bar", (n, m1)),
        ("D1", (n, m1)),
        ("D1bar", (n, m1)),
        ("B2", (n, m2)),
        ("B2bar", (n, m2)),
        ("D2", (n, m2)),
        ("D2bar", (n, m2)),
    ):
        dyn[name] = _arr(raw.get(name, np.zeros(shape)), shape, name)
    players = raw["players"]
    if len(players) != 2:
        raise DimensionMismatch(f"expected 2 player cost blocks, got {len(players)}")
    p1 = _validate_player(players[0], n, m1, m2, "player1")
    p2 = _validate_player(players[1], n, m1, m2, "player2")
    forcing = _validate_forcing(raw.get("forcing"), n, m1, m2)
    return GameSpec(n=n, m1=m1, m2=m2, players=(p1, p2), forcing=forcing, **dyn)


def validate_control(raw) -> ControlSpec:
    """Validate a single-player record (keys A..Rbar plus n, m)."""
    if isinstance(raw, ControlSpec):
        raw = {k: getattr(raw, k) for k in raw.__dataclass_fields__}
    n, m = int(raw["n"]), int(raw["m"])
    if n < 1 or m < 1:
        raise DimensionMismatch(f"invalid dimensions n={n}, m={m}")
    vals = {}
    for name, shape in (
        ("A", (n, n)),
        ("Abar", (n, n)),
        ("C", (n, n)),
        ("Cbar", (n, n)),
        ("B", (n, m)),
        ("Bbar", (n, m)),
        ("D", (n, m)),
        ("Dbar", (n, m)),
        ("Q", (n, n)),
        ("Qbar", (n, n)),
        ("S", (m, n)),
        ("Sbar", (m, n)),
        ("R", (m, m)),
        ("Rbar", (m, m)),
    ):
        vals[name] = _arr(raw.get(name, np.zeros(shape)), shape, name)
    for name in ("Q", "Qbar", "R", "Rbar"):
        vals[name] = _symmetrize(vals[name], name)
    forcing = _validate_forcing(raw.get("forcing"), n, m, 0)
    return ControlSpec(n=n, m=m, forcing=forcing, **vals)


def _game_as_dict(spec: GameSpec) -> dict:
    d = {k: getattr(spec, k) for k in ("n", "m1", "m2")}
    for k in ("A", "Abar", "C", "Cbar", "B1", "B1bar", "D1", "D1bar", "B2", "B2bar", "D2", "D2bar"):
        d[k] = getattr(spec, k)
    d["players"] = spec.players
    d["forcing"] = spec.forcing
    return d


def control_as_game(spec: ControlSpec) -> GameSpec:
    """View a control problem as a degenerate game with m2 = 0."""
    n, m = spec.n, spec.m
    z = np.zeros((n, 0))
    cost = PlayerCost(
        Q=spec.Q,
        Qbar=spec.Qbar,
        S1=spec.S,
        S1bar=spec.Sbar,
        S2=np.zeros((0, n)),
        S2bar=np.zeros((0, n)),
        R11=spec.R,
        R11bar=spec.Rbar,
        R12=np.zeros((m, 0)),
        R12bar=np.zeros((m, 0)),
        R22=np.zeros((0, 0)),
        R22bar=np.zeros((0, 0)),
    )
    remap = {"q1": "q1", "sigma": "sigma", "b": "b", "rho1": "rho1"}
    terms = tuple(t for t in spec.forcing.terms if t.kind in remap)
    return GameSpec(
        n=n,
        m1=m,
        m2=0,
        A=spec.A,
        Abar=spec.Abar,
        C=spec.C,
        Cbar=spec.Cbar,
        B1=spec.B,
        B1bar=spec.Bbar,
        D1=spec.D,
        D1bar=spec.Dbar,
        B2=z,
        B2bar=z,
        D2=z,
        D2bar=z,
        players=(cost, cost),  # second entry unused for m2 = 0
        forcing=Forcing(terms),
    )


# ---------------------------------------------------------------------------
# hat transform


@dataclass(frozen=True)
class PlayerHat:
    Qhat: np.ndarray
    Shat: np.ndarray
    Rhat: np.ndarray


@dataclass(frozen=True)
class HatCoefficients:
    """Plain-plus-barred sums that close the dynamics of E[X]."""

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Dhat: np.ndarray
    players: tuple[PlayerHat, ...]


def hat(spec) -> HatCoefficients:
    """Hat transform: every hatted field is plain + barred, entrywise."""
    if isinstance(spec, ControlSpec):
        ph = (PlayerHat(spec.Q + spec.Qbar, spec.S + spec.Sbar, spec.R + spec.Rbar),)
        return HatCoefficients(
            spec.A + spec.Abar, spec.B + spec.Bbar, spec.C + spec.Cbar, spec.D + spec.Dbar, ph
        )
    if isinstance(spec, ZeroSumSpec):
        c = spec.cost
        ph = (PlayerHat(c.Q + c.Qbar, c.S + c.Sbar, c.R + c.Rbar),)
    else:
        ph = tuple(
            PlayerHat(p.Q + p.Qbar, p.S + p.Sbar, p.R + p.Rbar) for p in spec.players
        )
    return HatCoefficients(
        spec.A + spec.Abar,
        spec.B + spec.Bbar,
        spec.C + spec.Cbar,
        spec.D + spec.Dbar,
        ph,
    )


# ---------------------------------------------------------------------------
# zero-sum reduction


def zero_sum_reduce(spec: GameSpec, tol: float = TAU_SYM) -> ZeroSumSpec:
    """Extract the shared coefficients of a zero-sum game (J1 + J2 = 0).

    Fails with :class:`NotZeroSum` when any pair of player blocks (or
    forcing profiles q_i, rho_i) does not cancel within ``tol``.
    """
    p1, p2 = spec.players
    for f in _PLAYER_FIELDS:
        a, b = getattr(p1, f.name), getattr(p2, f.name)
        if a.size and np.max(np.abs(a + b)) > tol:
            raise NotZeroSum(f"player blocks {f.name} do not cancel: max |sum| = {np.max(np.abs(a + b)):.3e}")
    for kind_a, kind_b in (("q1", "q2"), ("rho1", "rho2")):
        terms_a = {(t.rate,): t.amplitude for t in spec.forcing.by_kind(kind_a)}
        terms_b = {(t.rate,): t.amplitude for t in spec.forcing.by_kind(kind_b)}
        for key in set(terms_a) | set(terms_b):
            dim = terms_a.get(key, terms_b.get(key)).shape[0]
            s = terms_a.get(key, np.zeros(dim)) + terms_b.get(key, np.zeros(dim))
            if np.max(np.abs(s)) > tol:
                raise NotZeroSum(f"forcing {kind_a}+{kind_b} does not cancel at rate {key[0]}")
    shared = tuple(t for t in spec.forcing.terms if t.kind in ("b", "sigma", "q1", "rho1"))
    return ZeroSumSpec(
        n=spec.n,
        m1=spec.m1,
        m2=spec.m2,
        A=spec.A,
        Abar=spec.Abar,
        C=spec.C,
        Cbar=spec.Cbar,
        B1=spec.B1,
        B1bar=spec.B1bar,
        D1=spec.D1,
        D1bar=spec.D1bar,
        B2=spec.B2,
        B2bar=spec.B2bar,
        D2=spec.D2,
        D2bar=spec.D2bar,
        cost=p1,
        forcing=Forcing(shared),
    )


# ---------------------------------------------------------------------------
# feedback strategies and the closed-loop transform


@dataclass(frozen=True)
class OffsetTerm:
    amplitude: np.ndarray
    rate: float


@dataclass(frozen=True)
class FeedbackStrategy:
    """Feedback pair (Theta, ThetaBar) plus a deterministic open-loop offset.

    The control realized along a trajectory is
    ``u = Theta (X - E[X]) + ThetaBar E[X] + v(t)`` with
    ``v(t) = sum_k amplitude_k exp(-rate_k t)``.
    """

    theta: np.ndarray
    theta_bar: np.ndarray
    offset: tuple[OffsetTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "theta", _ro(np.atleast_2d(self.theta)))
        object.__setattr__(self, "theta_bar", _ro(np.atleast_2d(self.theta_bar)))
        terms = []
        for t in self.offset:
            if not t.rate > 0:
                raise DimensionMismatch(f"offset rate must be positive, got {t.rate}")
            terms.append(OffsetTerm(_ro(np.atleast_1d(t.amplitude)), float(t.rate)))
        object.__setattr__(self, "offset", tuple(terms))

    def offset_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        m = self.theta.shape[0]
        out = np.zeros((t.size, m))
        for term in self.offset:
            out += np.exp(-term.rate * t)[:, None] * term.amplitude[None, :]
        return out


@dataclass(frozen=True)
class ClosedLoopCoefficients:
    """Coefficients of the system/cost after substituting a feedback pair."""

    A_cl: np.ndarray
    Abar_cl: np.ndarray
    C_cl: np.ndarray
    Cbar_cl: np.ndarray
    Q_cl: tuple[np.ndarray, ...]
    Qbar_cl: tuple[np.ndarray, ...]
    S_cl: tuple[np.ndarray, ...]
    Sbar_cl: tuple[np.ndarray, ...]
    q_cl: tuple[tuple[OffsetTerm, ...], ...]

    @property
    def Ahat_cl(self):
        return self.A_cl + self.Abar_cl

    @property
    def Chat_cl(self):
        return self.C_cl + self.Cbar_cl

    @property
    def Qhat_cl(self):
        return tuple(q + qb for q, qb in zip(self.Q_cl, self.Qbar_cl))

    @property
    def Shat_cl(self):
        return tuple(s + sb for s, sb in zip(self.S_cl, self.Sbar_cl))


def _cost_blocks(spec):
    """Per-player (Q, Qbar, S, Sbar, R, Rbar) with stacked control ordering."""
    if isinstance(spec, ControlSpec):
        return [(spec.Q, spec.Qbar, spec.S, spec.Sbar, spec.R, spec.Rbar)]
    if isinstance(spec, ZeroSumSpec):
        c = spec.cost
        return [(c.Q, c.Qbar, c.S, c.Sbar, c.R, c.Rbar)]
    return [(p.Q, p.Qbar, p.S, p.Sbar, p.R, p.Rbar) for p in spec.players]


def closed_loop_transform(spec, strategy: FeedbackStrategy) -> ClosedLoopCoefficients:
    """Coefficient set of the system driven by ``v`` after closing the loop.

    Dynamics:  A_cl = A + B Theta,  Abar_cl = Abar + Bbar ThetaBar + B (ThetaBar - Theta),
    same pattern with (C, D); costs pick up the cross and quadratic feedback
    terms, and the linear state weight q absorbs Theta^T-weighted control
    offsets per forcing profile.
    """
    th, tb = strategy.theta, strategy.theta_bar
    n, m = spec.n, (spec.m if hasattr(spec, "m") else spec.m1 + spec.m2)
    if th.shape != (m, n) or tb.shape != (m, n):
        raise DimensionMismatch(f"feedback gains must be {(m, n)}, got {th.shape} and {tb.shape}")
    B, Bbar, D, Dbar = spec.B, spec.Bbar, spec.D, spec.Dbar
    A_cl = spec.A + B @ th
    Abar_cl = spec.Abar + Bbar @ tb + B @ (tb - th)
    C_cl = spec.C + D @ th
    Cbar_cl = spec.Cbar + Dbar @ tb + D @ (tb - th)
    Q_cl, Qbar_cl, S_cl, Sbar_cl, q_cl = [], [], [], [], []
    kinds_q = ["q1", "q2"]
    kinds_rho = ["rho1", "rho2"]
    blocks = _cost_blocks(spec)
    for i, (Q, Qbar, S, Sbar, R, Rbar) in enumerate(blocks):
        Sh, Rh = S + Sbar, R + Rbar
        Q_cl.append(Q + S.T @ th + th.T @ S + th.T @ R @ th)
        Qbar_cl.append(
            Qbar + Sh.T @ tb + tb.T @ Sh + tb.T @ Rh @ tb - S.T @ th - th.T @ S - th.T @ R @ th
        )
        S_cl.append(S + R @ th)
        Sbar_cl.append(Sbar + Rh @ tb - R @ th)
        # deterministic forcing: rho == E[rho], so q_cl = q + ThetaBar^T rho
        terms = {}
        for t in spec.forcing.by_kind(kinds_q[i] if i < 2 else "q1"):
            terms[t.rate] = terms.get(t.rate, 0.0) + t.amplitude
        for t in spec.forcing.by_kind(kinds_rho[i] if i < 2 else "rho1"):
            terms[t.rate] = terms.get(t.rate, 0.0) + tb.T @ t.amplitude
        q_cl.append(tuple(OffsetTerm(v, r) for r, v in sorted(terms.items())))
    return ClosedLoopCoefficients(
        A_cl, Abar_cl, C_cl, Cbar_cl, tuple(Q_cl), tuple(Qbar_cl), tuple(S_cl), tuple(Sbar_cl), tuple(q_cl)
    )


def intrinsically_same(s1: FeedbackStrategy, s2: FeedbackStrategy, spec, tol: float = TAU_INTRINSIC) -> bool:
    """Whether two strategies generate the same state process for every x.

    True iff the gain differences map into the common null space of the
    control injections, i.e. ``B (Theta - Theta') = D (Theta - Theta') = 0``,
    ``Bhat (ThetaBar - ThetaBar') = Dhat (ThetaBar - ThetaBar') = 0``, and
    each offset-difference profile satisfies the same null-space
    conditions termwise (Frobenius norms within ``tol``).
    """
    B, D = spec.B, spec.D
    Bh, Dh = B + spec.Bbar, D + spec.Dbar
    d_th = s1.theta - s2.theta
    d_tb = s1.theta_bar - s2.theta_bar
    checks = [B @ d_th, D @ d_th, Bh @ d_tb, Dh @ d_tb]
    diffs = {}
    for term in s1.offset:
        diffs[term.rate] = diffs.get(term.rate, 0.0) + term.amplitude
    for term in s2.offset:
        diffs[term.rate] = diffs.get(term.rate, 0.0) - term.amplitude
    for delta in diffs.values():
        # deterministic offsets: v - E[v] = 0, so the centered condition is
        # vacuous and E[v - v'] must lie in the null spaces of the barred
        # injections as well as the plain ones
        checks.extend([B @ delta, D @ delta, spec.Bbar @ delta, spec.Dbar @ delta])
    return all(np.linalg.norm(c) <= tol for c in checks)
