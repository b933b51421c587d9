import json
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from mflq.cli import main

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def run_cli(args):
    return main([str(a) for a in args])


def solve(tmp_path, fixture, mode, name="report.json", extra=()):
    out = tmp_path / name
    rc = run_cli(["solve", "--problem", FIXTURES / fixture, "--mode", mode, "--out", out, *extra])
    return rc, out


class TestSolveCommand:
    def test_example_53_solved(self, tmp_path):
        rc, out = solve(tmp_path, "ex5_3.json", "zerosum-closed")
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["status"] == "solved"
        assert doc["solution"]["P_c"][0][0] == pytest.approx(1.0, abs=1e-8)

    def test_example_51_certified_nonexistence(self, tmp_path):
        rc, out = solve(tmp_path, "ex5_1.json", "zerosum-closed")
        assert rc == 2
        doc = json.loads(out.read_text())
        assert doc["status"] == "not_static_stabilizing"
        assert doc["solution"]["P_c"][0][0] == pytest.approx(-1.0 / 3.0, abs=1e-10)

    def test_schema_violation_exit_1(self, tmp_path, capsys):
        doc = json.loads((FIXTURES / "ex5_1.json").read_text())
        doc["dynamics"]["A"] = [[1.0, 2.0, 3.0]] * 3
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli(["solve", "--problem", bad, "--mode", "zerosum-closed"]) == 1

    def test_unknown_top_level_key_rejected(self, tmp_path):
        doc = json.loads((FIXTURES / "ex5_1.json").read_text())
        doc["surprise"] = 1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli(["solve", "--problem", bad, "--mode", "zerosum-closed"]) == 1

    def test_row_major_orientation(self, tmp_path):
        # a deliberately non-symmetric drift: A[0][1] must land in row 0
        doc = {
            "n": 2, "m1": 1, "m2": 0,
            "dynamics": {"A": [[-1.0, 7.0], [0.0, -2.0]], "B1": [[1.0], [0.0]]},
            "players": [{"Q": [[1.0, 0.0], [0.0, 1.0]], "R11": [[1.0]]}],
        }
        path = tmp_path / "asym.json"
        path.write_text(json.dumps(doc))
        from mflq.cli import load_problem

        spec, _ = load_problem(str(path))
        assert spec.A[0, 1] == 7.0 and spec.A[1, 0] == 0.0

    def test_theta_free_certifies_example_52(self, tmp_path):
        rc, out = solve(tmp_path, "ex5_2.json", "zerosum-closed")
        assert rc == 2  # default free components do not certify
        rc2, out2 = solve(
            tmp_path, "ex5_2.json", "zerosum-closed", name="free.json",
            extra=["--theta-free", FIXTURES / "ex5_2_theta_free.json"],
        )
        assert rc2 == 0
        doc = json.loads(out2.read_text())
        assert doc["status"] == "solved"
        assert doc["solution"]["Theta"][0][0] == pytest.approx(1.0, abs=1e-8)
        assert doc["solution"]["Theta"][1][0] == pytest.approx(2.0, abs=1e-8)

    def test_control_mode(self, tmp_path):
        doc = {
            "n": 1, "m1": 1, "m2": 0,
            "dynamics": {"A": [[-1.0]], "B1": [[1.0]]},
            "players": [{"Q": [[1.0]], "R11": [[1.0]]}],
        }
        path = tmp_path / "ctrl.json"
        path.write_text(json.dumps(doc))
        out = tmp_path / "ctrl_report.json"
        rc = run_cli(["solve", "--problem", path, "--mode", "control", "--out", out])
        assert rc == 0
        rep = json.loads(out.read_text())
        assert rep["solution"]["P"][0][0] == pytest.approx(np.sqrt(2) - 1, abs=1e-9)

    def test_determinism_modulo_wall_time(self, tmp_path):
        _, out1 = solve(tmp_path, "ex5_5.json", "zerosum-closed", name="a.json")
        _, out2 = solve(tmp_path, "ex5_5.json", "zerosum-closed", name="b.json")
        d1 = json.loads(out1.read_text())
        d2 = json.loads(out2.read_text())
        d1["solver_meta"].pop("wall_time_ms")
        d2["solver_meta"].pop("wall_time_ms")
        assert d1 == d2

    def test_report_roundtrip_17_digits(self, tmp_path):
        _, out = solve(tmp_path, "ex5_5.json", "zerosum-closed")
        doc = json.loads(out.read_text())
        from mflq.cli import dump_report

        again = tmp_path / "again.json"
        dump_report(doc, str(again))
        assert json.loads(again.read_text()) == doc


class TestVerifyCommand:
    def test_self_consistency(self, tmp_path):
        _, out = solve(tmp_path, "ex5_3.json", "zerosum-closed")
        assert run_cli(["verify", "--problem", FIXTURES / "ex5_3.json", "--solution", out]) == 0

    def test_tampered_weight_detected(self, tmp_path):
        _, out = solve(tmp_path, "ex5_3.json", "zerosum-closed")
        doc = json.loads(out.read_text())
        doc["solution"]["P_c"] = [[1.1]]
        tampered = tmp_path / "tampered.json"
        tampered.write_text(json.dumps(doc))
        assert run_cli(["verify", "--problem", FIXTURES / "ex5_3.json", "--solution", tampered]) == 2

    def test_dimension_mismatch_exit_1(self, tmp_path):
        _, out = solve(tmp_path, "ex5_3.json", "zerosum-closed")
        assert run_cli(["verify", "--problem", FIXTURES / "ex5_5.json", "--solution", out]) == 1

    def test_verify_nash_modes(self, tmp_path):
        for mode in ("nash-open", "nash-closed"):
            rc, out = solve(tmp_path, "ex5_6.json", mode, name=f"{mode}.json")
            assert rc == 0
            assert run_cli(["verify", "--problem", FIXTURES / "ex5_6.json", "--solution", out]) == 0


class TestSimulateCommand:
    def test_certified_run_with_value_reference(self, tmp_path):
        _, out = solve(tmp_path, "ex5_5.json", "zerosum-closed")
        sim_out = tmp_path / "sim.json"
        rc = run_cli([
            "simulate", "--problem", FIXTURES / "ex5_5.json", "--solution", out,
            "--x0", "1,1", "--horizon", "20", "--dt", "0.005", "--paths", "4000",
            "--seed", "42", "--out", sim_out,
        ])
        assert rc == 0
        doc = json.loads(sim_out.read_text())
        est = doc["players"]["player1"]
        assert abs(est["mean"] - 1.5) <= 3 * est["stderr"] + 0.015
        assert doc["value_reference"]["total"] == pytest.approx(1.5, abs=1e-6)

    def test_zero_initial_state(self, tmp_path):
        _, out = solve(tmp_path, "ex5_5.json", "zerosum-closed")
        rc = run_cli([
            "simulate", "--problem", FIXTURES / "ex5_5.json", "--solution", out,
            "--x0", "0,0", "--horizon", "5", "--dt", "0.005", "--paths", "500", "--seed", "7",
        ])
        assert rc == 0

    def test_uncertified_requires_force(self, tmp_path):
        _, out = solve(tmp_path, "ex5_4.json", "zerosum-closed")
        rc = run_cli([
            "simulate", "--problem", FIXTURES / "ex5_4.json", "--solution", out,
            "--x0", "1,1", "--horizon", "20", "--dt", "0.001", "--paths", "64", "--seed", "1",
        ])
        assert rc == 1

    def test_deviation_battery_flag(self, tmp_path):
        _, out = solve(tmp_path, "ex5_3.json", "zerosum-closed")
        sim_out = tmp_path / "dev.json"
        rc = run_cli([
            "simulate", "--problem", FIXTURES / "ex5_3.json", "--solution", out,
            "--x0", "1", "--horizon", "6", "--dt", "0.01", "--paths", "400",
            "--seed", "2", "--deviation-test", "--out", sim_out,
        ])
        assert rc == 0
        doc = json.loads(sim_out.read_text())
        assert doc["deviation"]["kind"] == "saddle"
        assert len(doc["deviation"]["records"]) == 12  # 6 profiles per player
        assert doc["deviation"]["passed"]

    def test_forcing_offsets_round_trip(self, tmp_path):
        prob = {
            "n": 1, "m1": 1, "m2": 0,
            "dynamics": {"A": [[-1.0]], "B1": [[1.0]]},
            "players": [{"Q": [[1.0]], "R11": [[1.0]]}],
            "forcing": [{"kind": "b", "amplitude": [1.0], "rate": 1.0}],
        }
        path = tmp_path / "forced.json"
        path.write_text(json.dumps(prob))
        out = tmp_path / "forced_report.json"
        assert run_cli(["solve", "--problem", path, "--mode", "control", "--out", out]) == 0
        rep = json.loads(out.read_text())
        assert len(rep["offset"]) == 1
        eta0 = 3 - 2 * np.sqrt(2)
        assert rep["value"]["total"] == pytest.approx(eta0 - eta0**2 / 2, abs=1e-9)
        sim_out = tmp_path / "forced_sim.json"
        rc = run_cli([
            "simulate", "--problem", path, "--solution", out, "--x0", "0",
            "--horizon", "16", "--dt", "0.002", "--paths", "16", "--seed", "1",
            "--out", sim_out,
        ])
        assert rc == 0
        doc = json.loads(sim_out.read_text())
        # deterministic problem: the estimate matches the value to quadrature error
        assert doc["players"]["player1"]["mean"] == pytest.approx(
            doc["value_reference"]["total"], abs=1e-4
        )

    def test_forced_unstable_blows_up_or_flags_tail(self, tmp_path, capsys):
        _, out = solve(tmp_path, "ex5_4.json", "zerosum-closed")
        sim_out = tmp_path / "sim54.json"
        rc = run_cli([
            "simulate", "--problem", FIXTURES / "ex5_4.json", "--solution", out,
            "--x0", "1,1", "--horizon", "20", "--dt", "0.001", "--paths", "64",
            "--seed", "1", "--force", "--out", sim_out,
        ])
        if rc == 3:
            assert "blow-up" in capsys.readouterr().err
        else:
            assert rc == 0
            doc = json.loads(sim_out.read_text())
            assert doc["players"]["player1"]["tail_flag"]


class TestGoldenReports:
    @pytest.mark.parametrize("name,mode", [
        ("ex5_1", "zerosum-closed"),
        ("ex5_2", "zerosum-closed"),
        ("ex5_3", "zerosum-closed"),
        ("ex5_4", "zerosum-closed"),
        ("ex5_5", "zerosum-closed"),
        ("ex5_5", "zerosum-open"),
        ("ex5_6", "nash-open"),
        ("ex5_6", "nash-closed"),
        ("ex5_7", "nash-open"),
        ("ex5_7", "nash-closed"),
    ])
    def test_matches_stored_expected_report(self, tmp_path, name, mode):
        out = tmp_path / "fresh.json"
        run_cli(["solve", "--problem", FIXTURES / f"{name}.json", "--mode", mode, "--out", out])
        fresh = json.loads(out.read_text())
        golden = json.loads((FIXTURES / "expected" / f"{name}.{mode}.json").read_text())
        fresh["solver_meta"]["wall_time_ms"] = 0.0
        assert fresh == golden


class TestConsoleEntryPoint:
    def test_module_invocation(self, tmp_path):
        out = tmp_path / "r.json"
        proc = subprocess.run(
            [sys.executable, "-m", "mflq.cli", "solve", "--problem",
             str(FIXTURES / "ex5_3.json"), "--mode", "zerosum-closed", "--out", str(out)],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0
        assert "solved" in proc.stdout
