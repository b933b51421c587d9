import numpy as np
import pytest

from mflq import linops
from mflq.model import validate, zero_sum_reduce
from mflq.riccati import (
    SolveOptions,
    are_residuals,
    solve_zerosum_are,
    solve_zerosum_openrep_are,
)


@pytest.fixture(scope="module")
def sol5_1(ex5_1):
    return solve_zerosum_are(zero_sum_reduce(ex5_1))


@pytest.fixture(scope="module")
def sol5_3(ex5_3):
    return solve_zerosum_are(zero_sum_reduce(ex5_3))


class TestExample51:
    def test_values(self, sol5_1):
        assert sol5_1.Pc[0, 0] == pytest.approx(-1.0 / 3.0, abs=1e-10)
        assert sol5_1.Pchat[0, 0] == pytest.approx(2.0, abs=1e-10)
        assert np.allclose(sol5_1.theta.ravel(), [-5.0 / 3.0, -1.0 / 3.0], atol=1e-10)

    def test_not_static_stabilizing(self, sol5_1):
        assert sol5_1.status == "not_static_stabilizing"
        assert sol5_1.stabilizer is not None
        assert sol5_1.stabilizer.failure_reason == "variance_system_unstable"

    def test_sign_margins(self, sol5_1):
        m = sol5_1.sign_margins
        assert m[0] == pytest.approx(2.0 / 3.0, abs=1e-10)
        assert m[1] == pytest.approx(2.0 / 3.0, abs=1e-10)
        assert m[2] == pytest.approx(-4.0 / 3.0, abs=1e-10)
        assert m[3] == pytest.approx(-4.0 / 3.0, abs=1e-10)

    def test_internal_sigma_inverse_closed_form(self, sol5_1):
        P = sol5_1.Pc[0, 0]
        expected = np.array([[-P + 1.0, P], [P, -P - 1.0]])
        assert np.linalg.norm(linops.pinv(sol5_1.Sigma_c).pinv - expected) <= 1e-12


class TestExample52:
    def test_degenerate_solution(self, ex5_2):
        zs = zero_sum_reduce(ex5_2)
        sol = solve_zerosum_are(zs)
        assert sol.Pc[0, 0] == pytest.approx(-1.0, abs=1e-8)
        assert sol.Pchat[0, 0] == pytest.approx(0.0, abs=1e-8)
        # Sigma_c vanishes entirely and the range conditions hold trivially
        assert np.linalg.norm(sol.Sigma_c) <= 1e-8
        assert sol.residuals["range1"] <= 1e-8
        assert sol.residuals["range2"] <= 1e-8
        # default free components give the zero gain pair, not a stabilizer
        assert np.linalg.norm(sol.theta) <= 1e-8
        assert sol.status == "not_static_stabilizing"

    def test_free_components_certify(self, ex5_2):
        zs = zero_sum_reduce(ex5_2)
        free = (np.array([[1.0], [2.0]]), np.zeros((2, 1)))
        sol = solve_zerosum_are(zs, SolveOptions(free_components=free))
        assert sol.status == "solved"
        # theta1^2 - 2 theta1 + 1/2 < theta2 certifies: 1 - 2 + 0.5 < 2
        assert np.allclose(sol.theta.ravel(), [1.0, 2.0], atol=1e-8)

    def test_other_free_components_also_certify(self, ex5_2):
        # uncountably many closed-loop saddle points: a second choice works too
        zs = zero_sum_reduce(ex5_2)
        free = (np.array([[0.5], [0.0]]), np.array([[3.0], [0.0]]))
        sol = solve_zerosum_are(zs, SolveOptions(free_components=free))
        assert sol.status == "solved"


class TestExample53:
    def test_all_three_roots_found(self, sol5_3):
        roots = sorted(float(r.ravel()[0]) for r in sol5_3.meta["roots"])
        expected = sorted([1.0, (-1 + np.sqrt(13)) / 2, (-1 - np.sqrt(13)) / 2])
        assert len(roots) == 3
        for got, want in zip(roots, expected):
            assert got == pytest.approx(want, abs=1e-8)

    def test_sign_filter_selects_unit_root(self, sol5_3):
        assert sol5_3.Pc[0, 0] == pytest.approx(1.0, abs=1e-8)
        m = sol5_3.sign_margins
        assert m[0] == pytest.approx(2.0, abs=1e-8)
        assert m[2] == pytest.approx(0.0, abs=1e-8)

    def test_saddle_gains(self, sol5_3):
        assert sol5_3.status == "solved"
        assert np.allclose(sol5_3.theta.ravel(), [1.0, -3.0], atol=1e-8)
        assert np.allclose(sol5_3.theta_bar.ravel(), [0.0, -1.0], atol=1e-8)
        assert sol5_3.stabilizer.is_stabilizer

    def test_residual_report_at_exact_values(self, ex5_3, sol5_3):
        rep = are_residuals(sol5_3, zero_sum_reduce(ex5_3))
        assert rep.max_equation_residual() <= 1e-9

    def test_perturbed_weight_residual(self, ex5_3, sol5_3):
        import dataclasses

        zs = zero_sum_reduce(ex5_3)
        tampered = dataclasses.replace(sol5_3, Pc=np.array([[1.1]]))
        rep = are_residuals(tampered, zs)
        # polynomial value |4 P^3 - 16 P + 12| at P = 1.1
        assert rep.equations["are1"] == pytest.approx(abs(4 * 1.1**3 - 16 * 1.1 + 12), abs=1e-12)

    def test_printed_coefficient_variant(self, ex5_3_printed):
        # With the coefficient table as printed (Q_bar = 52) the hat
        # equation has the double root 8 and the synthesized mean gain is
        # (0, -8), which leaves the mean system marginally stable; the
        # displayed gain (0, -1) is not reproducible from these data.
        zs = zero_sum_reduce(ex5_3_printed)
        sol = solve_zerosum_are(zs)
        assert sol.Pc[0, 0] == pytest.approx(1.0, abs=1e-8)
        assert sol.Pchat[0, 0] == pytest.approx(8.0, abs=1e-4)
        assert sol.theta_bar[0, 0] == pytest.approx(0.0, abs=1e-4)
        assert sol.theta_bar[1, 0] == pytest.approx(-8.0, abs=1e-3)
        # the mean closed loop sits on the stability boundary
        if sol.stabilizer is not None:
            assert abs(sol.stabilizer.hurwitz_abscissa) <= 1e-4


class TestExample54:
    def test_nearest_miss_root_pair(self, ex5_4):
        sol = solve_zerosum_are(zero_sum_reduce(ex5_4))
        assert sol.status == "not_static_stabilizing"
        assert np.allclose(sol.Pc, -np.eye(2), atol=1e-6)
        assert np.allclose(sol.Pchat, np.diag([1.0, -1.0]), atol=1e-6)
        assert np.allclose(sol.theta, [[2.0, 0.5], [-0.25, -1.0]], atol=1e-6)
        assert np.allclose(sol.theta_bar, np.diag([-8.0, -0.8]), atol=1e-6)

    def test_sign_margins(self, ex5_4):
        sol = solve_zerosum_are(zero_sum_reduce(ex5_4))
        assert np.allclose(sol.sign_margins, (1.0, 0.25, -2.0, -3.75), atol=1e-8)
        assert all(sol.sign_checks)


class TestExample55:
    def test_closed_loop_saddle(self, ex5_5):
        sol = solve_zerosum_are(zero_sum_reduce(ex5_5))
        assert sol.status == "solved"
        assert np.allclose(sol.Pc, np.diag([1.0, 0.1]), atol=1e-6)
        assert np.allclose(sol.Pchat, np.diag([1.0, 0.5]), atol=1e-6)
        assert np.allclose(sol.theta, [[-0.6667, -0.1667], [0.0263, 0.1053]], atol=2e-3)
        assert np.allclose(sol.theta_bar, np.diag([-1.0, 0.3956]), atol=2e-3)

    def test_open_representation_coincides(self, ex5_5):
        zs = zero_sum_reduce(ex5_5)
        closed = solve_zerosum_are(zs)
        open_rep = solve_zerosum_openrep_are(zs)
        assert open_rep.status == "solved"
        assert np.allclose(open_rep.Pc, closed.Pc, atol=1e-8)
        assert np.allclose(open_rep.Pchat, closed.Pchat, atol=1e-8)
        assert np.allclose(open_rep.theta, closed.theta, atol=1e-8)

    def test_openrep_has_no_sign_gate(self, ex5_1):
        # the scalar counterexample also fails openrep only at the stabilizer
        sol = solve_zerosum_openrep_are(zero_sum_reduce(ex5_1))
        assert sol.status == "not_static_stabilizing"
        assert sol.Pc[0, 0] == pytest.approx(-1.0 / 3.0, abs=1e-10)


class TestTrivial:
    def test_zero_cost_spec(self):
        p1 = dict(R11=[[1.0]], R22=[[-1.0]])
        players = [p1, {k: (-np.asarray(v)).tolist() for k, v in p1.items()}]
        g = validate(dict(n=1, m1=1, m2=1, A=[[-1.0]], B1=[[1.0]], B2=[[0.5]],
                          players=players))
        zs = zero_sum_reduce(g)
        for solver in (solve_zerosum_are, solve_zerosum_openrep_are):
            sol = solver(zs)
            assert sol.status == "solved"
            assert abs(sol.Pc[0, 0]) <= 1e-10
            assert abs(sol.Pchat[0, 0]) <= 1e-10
            assert np.linalg.norm(sol.theta) <= 1e-10

    def test_degenerate_gain_system_rank(self, ex5_2):
        sol = solve_zerosum_are(zero_sum_reduce(ex5_2))
        res = linops.pinv(sol.Sigma_c)
        assert res.rank == 0
        assert np.all(res.pinv == 0.0)
