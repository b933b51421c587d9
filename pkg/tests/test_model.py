import numpy as np
import pytest

from mflq import model
from mflq.errors import AsymmetryExceedsTolerance, DimensionMismatch, NonFinite, NotZeroSum
from mflq.model import (
    FeedbackStrategy,
    OffsetTerm,
    closed_loop_transform,
    hat,
    intrinsically_same,
    validate,
    validate_control,
    zero_sum_reduce,
)


def minimal_game(n=1, m1=1, m2=1, **over):
    doc = dict(n=n, m1=m1, m2=m2, players=[{}, {}])
    doc.update(over)
    return doc


class TestValidate:
    def test_example_56_accepted(self, ex5_6):
        assert ex5_6.n == 2 and ex5_6.m1 == 1 and ex5_6.m2 == 1
        # nominally symmetric blocks come out exactly symmetric
        for p in ex5_6.players:
            assert np.array_equal(p.Q, p.Q.T)
            assert np.array_equal(p.Qbar, p.Qbar.T)

    def test_asymmetry_rejected(self):
        q = [[1.0, 0.001], [0.0, 1.0]]
        with pytest.raises(AsymmetryExceedsTolerance):
            validate(minimal_game(n=2, players=[{"Q": q}, {}]))

    def test_asymmetry_within_tolerance_symmetrized(self):
        q = [[1.0, 0.5 + 4e-10], [0.5, 1.0]]
        spec = validate(minimal_game(n=2, players=[{"Q": q}, {}]))
        Q = spec.players[0].Q
        assert np.array_equal(Q, Q.T)
        assert Q[0, 1] == pytest.approx(0.5 + 2e-10, abs=1e-12)

    def test_all_zero_blocks_accepted(self):
        spec = validate(minimal_game())
        assert spec.m == 2

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            validate(minimal_game(A=[[1.0, 0.0], [0.0, 1.0]]))

    def test_non_finite_rejected(self):
        with pytest.raises(NonFinite):
            validate(minimal_game(A=[[np.nan]]))

    def test_forcing_validation(self):
        with pytest.raises(DimensionMismatch):
            validate(minimal_game(forcing=[dict(kind="b", amplitude=[1.0], rate=-1.0)]))
        with pytest.raises(DimensionMismatch):
            validate(minimal_game(forcing=[dict(kind="rho1", amplitude=[1.0], rate=1.0)]))
        spec = validate(minimal_game(forcing=[dict(kind="rho1", amplitude=[1.0, 0.0], rate=1.0)]))
        assert spec.forcing

    def test_r21_stored_implicitly(self):
        spec = validate(minimal_game(players=[{"R12": [[0.7]]}, {}]))
        R = spec.players[0].R
        assert R[0, 1] == 0.7 and R[1, 0] == 0.7


class TestHat:
    def test_example_51_values(self, ex5_1):
        h = hat(ex5_1)
        assert h.Ahat[0, 0] == pytest.approx(-0.5)
        assert h.players[0].Qhat[0, 0] == pytest.approx(2.0)
        assert np.allclose(h.players[0].Rhat, np.diag([1.0, -1.0]))

    def test_zero_bars_identity(self):
        spec = validate(minimal_game(A=[[-1.0]], B1=[[1.0]], B2=[[0.5]]))
        h = hat(spec)
        assert np.array_equal(h.Ahat, spec.A)
        assert np.array_equal(h.Bhat, spec.B)

    def test_example_54_rhat(self, ex5_4):
        h = hat(ex5_4)
        assert np.allclose(h.players[0].Rhat, np.diag([2.5, -1.5]))

    def test_additivity_in_bar_scaling(self):
        gen = np.random.default_rng(0)
        base = dict(
            n=2, m1=1, m2=1,
            A=gen.normal(size=(2, 2)), Abar=gen.normal(size=(2, 2)),
            B1=gen.normal(size=(2, 1)), B1bar=gen.normal(size=(2, 1)),
        )
        for alpha in (0.0, 0.5, 2.0, -1.0):
            doc = dict(base)
            doc["Abar"] = alpha * base["Abar"]
            doc["B1bar"] = alpha * base["B1bar"]
            doc["players"] = [{}, {}]
            h = hat(validate(doc))
            assert np.allclose(h.Ahat, base["A"] + alpha * base["Abar"])
            assert np.allclose(h.Bhat[:, :1], base["B1"] + alpha * base["B1bar"])


class TestZeroSumReduce:
    def test_constructed_game_reduces(self, ex5_3):
        zs = zero_sum_reduce(ex5_3)
        assert zs.Q[0, 0] == pytest.approx(12.0)
        assert np.allclose(zs.R, np.diag([1.0, -1.0]))

    def test_roundtrip_identity(self, ex5_3):
        zs = zero_sum_reduce(ex5_3)
        again = zero_sum_reduce(zs.to_game())
        assert np.array_equal(zs.Q, again.Q)
        assert np.array_equal(zs.R, again.R)
        assert np.array_equal(zs.S, again.S)

    def test_non_zero_sum_rejected(self, ex5_6):
        with pytest.raises(NotZeroSum):
            zero_sum_reduce(ex5_6)

    def test_forcing_must_cancel(self):
        doc = minimal_game(forcing=[dict(kind="q1", amplitude=[1.0], rate=1.0)])
        with pytest.raises(NotZeroSum):
            zero_sum_reduce(validate(doc))
        doc2 = minimal_game(forcing=[
            dict(kind="q1", amplitude=[1.0], rate=1.0),
            dict(kind="q2", amplitude=[-1.0], rate=1.0),
        ])
        zs = zero_sum_reduce(validate(doc2))
        assert len(zs.forcing.terms) == 1  # the shared profile survives


class TestClosedLoopTransform:
    def test_zero_feedback_identity(self, ex5_5):
        m, n = ex5_5.m, ex5_5.n
        strat = FeedbackStrategy(np.zeros((m, n)), np.zeros((m, n)))
        cl = closed_loop_transform(ex5_5, strat)
        assert np.array_equal(cl.A_cl, ex5_5.A)
        assert np.array_equal(cl.Abar_cl, ex5_5.Abar)
        assert np.array_equal(cl.C_cl, ex5_5.C)
        for i, p in enumerate(ex5_5.players):
            assert np.array_equal(cl.Q_cl[i], p.Q)
            assert np.array_equal(cl.S_cl[i], p.S)

    def test_example_53_gains(self, ex5_3):
        strat = FeedbackStrategy(np.array([[1.0], [-3.0]]), np.array([[0.0], [-1.0]]))
        cl = closed_loop_transform(ex5_3, strat)
        assert cl.A_cl[0, 0] == pytest.approx(-4.0)  # -8 + (1,-1).(1,-3)
        assert cl.C_cl[0, 0] == pytest.approx(-2.0)  # 0 + (1,1).(1,-3)

    def test_scalar_arithmetic(self):
        spec = validate_control(dict(n=1, m=1, A=[[0.0]], B=[[1.0]], C=[[0.3]], D=[[1.0]]))
        strat = FeedbackStrategy(np.array([[-1.0]]), np.array([[-1.0]]))
        cl = closed_loop_transform(spec, strat)
        assert cl.A_cl[0, 0] == pytest.approx(-1.0)
        assert cl.C_cl[0, 0] == pytest.approx(0.3 - 1.0)

    def test_hatted_sums_close_under_the_transform(self):
        # the hatted closed-loop cost equals the hat-transformed cost closed
        # with the mean gain alone: Qhat_cl = Qhat + Shat^T Tb + Tb^T Shat
        # + Tb^T Rhat Tb, and likewise for Shat_cl and the dynamics
        gen = np.random.default_rng(8)
        for _ in range(10):
            doc = dict(
                n=2, m1=1, m2=1,
                A=gen.normal(size=(2, 2)), Abar=gen.normal(size=(2, 2)),
                C=gen.normal(size=(2, 2)), Cbar=gen.normal(size=(2, 2)),
                B1=gen.normal(size=(2, 1)), B1bar=gen.normal(size=(2, 1)),
                B2=gen.normal(size=(2, 1)), B2bar=gen.normal(size=(2, 1)),
                D1=gen.normal(size=(2, 1)), D1bar=gen.normal(size=(2, 1)),
                D2=gen.normal(size=(2, 1)), D2bar=gen.normal(size=(2, 1)),
                players=[
                    dict(Q=(lambda m: m @ m.T)(gen.normal(size=(2, 2))),
                         Qbar=(lambda m: m @ m.T)(gen.normal(size=(2, 2))),
                         S1=gen.normal(size=(1, 2)), S2=gen.normal(size=(1, 2)),
                         S1bar=gen.normal(size=(1, 2)), S2bar=gen.normal(size=(1, 2)),
                         R11=[[float(gen.normal())]], R22=[[float(gen.normal())]],
                         R11bar=[[float(gen.normal())]], R22bar=[[float(gen.normal())]]),
                    {},
                ],
            )
            spec = validate(doc)
            strat = FeedbackStrategy(gen.normal(size=(2, 2)), gen.normal(size=(2, 2)))
            cl = closed_loop_transform(spec, strat)
            h = hat(spec)
            tb = strat.theta_bar
            assert np.allclose(cl.Ahat_cl, h.Ahat + h.Bhat @ tb, atol=1e-12)
            assert np.allclose(cl.Chat_cl, h.Chat + h.Dhat @ tb, atol=1e-12)
            p = h.players[0]
            q_hat_direct = p.Qhat + p.Shat.T @ tb + tb.T @ p.Shat + tb.T @ p.Rhat @ tb
            s_hat_direct = p.Shat + p.Rhat @ tb
            assert np.allclose(cl.Qhat_cl[0], q_hat_direct, atol=1e-10)
            assert np.allclose(cl.Shat_cl[0], s_hat_direct, atol=1e-10)


class TestIntrinsicallySame:
    def test_reflexive_and_symmetric(self, ex5_6):
        gen = np.random.default_rng(1)
        s1 = FeedbackStrategy(gen.normal(size=(2, 2)), gen.normal(size=(2, 2)))
        s2 = FeedbackStrategy(gen.normal(size=(2, 2)), gen.normal(size=(2, 2)))
        assert intrinsically_same(s1, s1, ex5_6)
        assert intrinsically_same(s1, s2, ex5_6) == intrinsically_same(s2, s1, ex5_6)

    def test_example_56_gain_pairs_differ(self, ex5_6):
        from mflq.riccati import solve_closedloop_nash_are, solve_openloop_nash_are

        ol = solve_openloop_nash_are(ex5_6)
        cl = solve_closedloop_nash_are(ex5_6)
        s_open = FeedbackStrategy(ol.theta, ol.theta_bar)
        s_closed = FeedbackStrategy(cl.theta, cl.theta_bar)
        assert not intrinsically_same(s_open, s_closed, ex5_6)
        gap = ex5_6.B @ (cl.theta - ol.theta)
        assert 0.005 <= np.linalg.norm(gap) <= 0.03

    def test_null_space_makes_strategies_identical(self):
        # B = D = 0 for both players: every gain pair drives the same state
        spec = validate(minimal_game(A=[[-1.0]]))
        s1 = FeedbackStrategy(np.array([[1.0], [2.0]]), np.array([[0.5], [0.0]]))
        s2 = FeedbackStrategy(np.array([[-4.0], [0.1]]), np.array([[9.0], [1.0]]))
        assert intrinsically_same(s1, s2, spec)

    def test_invariant_under_null_direction(self):
        # column space of the gain difference inside null(B) cap null(D)
        spec = validate(minimal_game(
            n=2, m1=1, m2=1,
            A=[[-1.0, 0.0], [0.0, -1.0]],
            B1=[[1.0], [0.0]], D1=[[1.0], [0.0]],  # channel 2 unused
        ))
        base = np.zeros((2, 2))
        s1 = FeedbackStrategy(base, base)
        bump = np.array([[0.0, 0.0], [3.0, -2.0]])  # only the dead channel moves
        s2 = FeedbackStrategy(base + bump, base)
        assert intrinsically_same(s1, s2, spec)

    def test_offsets_in_null_space(self):
        spec = validate(minimal_game(A=[[-1.0]]))
        s1 = FeedbackStrategy(np.zeros((2, 1)), np.zeros((2, 1)),
                              (OffsetTerm(np.array([1.0, -1.0]), 1.0),))
        s2 = FeedbackStrategy(np.zeros((2, 1)), np.zeros((2, 1)))
        assert intrinsically_same(s1, s2, spec)  # B = D = 0 absorbs the offset

    def test_immutability(self, ex5_5):
        with pytest.raises(ValueError):
            ex5_5.A[0, 0] = 99.0
