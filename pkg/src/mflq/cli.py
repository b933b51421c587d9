"""Command-line interface: solve, verify, simulate.

Problem files are strict JSON (unknown top-level keys rejected, matrices
row-major); reports are JSON with every float rendered at 17 significant
digits so numeric fields round-trip losslessly.

Exit codes: 0 solved / verified, 1 input error, 2 the solver ran but no
certified solution exists at the requested mode, 3 simulation blow-up.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import equilibrium, riccati, simulate
from .errors import MFLQError, NonFiniteState
from .model import (
    ControlSpec,
    FeedbackStrategy,
    GameSpec,
    OffsetTerm,
    validate,
    validate_control,
    zero_sum_reduce,
)
from .riccati import (
    SOLVED,
    ClosedLoopNashSolution,
    ControlAreSolution,
    OpenLoopNashSolution,
    SolveOptions,
    ZeroSumSolution,
)

MODES = ("control", "nash-open", "nash-closed", "zerosum-open", "zerosum-closed")

_TOP_KEYS = {"n", "m1", "m2", "dynamics", "players", "forcing", "options"}
_DYN_KEYS = {
    "A", "A_bar", "C", "C_bar",
    "B1", "B1_bar", "D1", "D1_bar",
    "B2", "B2_bar", "D2", "D2_bar",
}
_PLAYER_KEYS = {
    "Q", "Q_bar", "S1", "S1_bar", "S2", "S2_bar",
    "R11", "R11_bar", "R12", "R12_bar", "R22", "R22_bar",
}
_OPTION_KEYS = {"are_tol", "ode_tol", "eps_min", "eps_chain_tol", "damping", "max_iter"}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# JSON with fixed 17-significant-digit floats


def _render(obj):
    if isinstance(obj, float):
        return float(format(obj, ".17g"))
    if isinstance(obj, (np.floating,)):
        return _render(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist())
    if isinstance(obj, dict):
        return {k: _render(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_render(v) for v in obj]
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class _Float17(float):
    def __repr__(self):
        return format(float(self), ".17g")


def _tag_floats(obj):
    if isinstance(obj, float):
        return _Float17(obj)
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_tag_floats(v) for v in obj]
    return obj


def dump_report(report: dict, path: str):
    text = json.dumps(_tag_floats(_render(report)), indent=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


# ---------------------------------------------------------------------------
# problem-file parsing


def _matrix(raw, rows, cols, name):
    if rows == 0 or cols == 0:
        if raw not in (None, []) and any(len(r) != cols for r in raw):
            raise InputError(f"{name}: expected a {rows}x{cols} matrix")
        return np.zeros((rows, cols))
    if raw is None:
        return np.zeros((rows, cols))
    if not isinstance(raw, list) or len(raw) != rows:
        raise InputError(f"{name}: expected {rows} rows, got {raw!r}")
    out = np.empty((rows, cols))
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != cols:
            raise InputError(f"{name}: row {i} must have {cols} entries")
        for j, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise InputError(f"{name}[{i}][{j}] is not a finite number")
            out[i, j] = float(v)
    return out


def load_problem(path: str):
    """Parse a problem file into a validated spec (game or control)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read problem file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("problem file must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise InputError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("n", "m1", "m2", "dynamics", "players"):
        if key not in doc:
            raise InputError(f"missing required key {key!r}")
    n, m1, m2 = doc["n"], doc["m1"], doc["m2"]
    for name, v in (("n", n), ("m1", m1), ("m2", m2)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise InputError(f"{name} must be a non-negative integer")
    dyn = doc["dynamics"]
    if not isinstance(dyn, dict) or set(dyn) - _DYN_KEYS:
        raise InputError("dynamics must contain only the documented matrix keys")
    players = doc["players"]
    if not isinstance(players, list) or len(players) not in (1, 2):
        raise InputError("players must be an array of 1 or 2 cost blocks")
    options = doc.get("options", {})
    if not isinstance(options, dict) or set(options) - _OPTION_KEYS:
        raise InputError("options must contain only solver option keys")

    shapes = {
        "A": (n, n), "A_bar": (n, n), "C": (n, n), "C_bar": (n, n),
        "B1": (n, m1), "B1_bar": (n, m1), "D1": (n, m1), "D1_bar": (n, m1),
        "B2": (n, m2), "B2_bar": (n, m2), "D2": (n, m2), "D2_bar": (n, m2),
    }
    mats = {k: _matrix(dyn.get(k), *shape, name=k) for k, shape in shapes.items()}

    def player_block(raw, label):
        if not isinstance(raw, dict) or set(raw) - _PLAYER_KEYS:
            raise InputError(f"{label} must contain only the documented cost keys")
        ps = {
            "Q": (n, n), "Q_bar": (n, n),
            "S1": (m1, n), "S1_bar": (m1, n), "S2": (m2, n), "S2_bar": (m2, n),
            "R11": (m1, m1), "R11_bar": (m1, m1),
            "R12": (m1, m2), "R12_bar": (m1, m2),
            "R22": (m2, m2), "R22_bar": (m2, m2),
        }
        out = {}
        for k, shape in ps.items():
            out[k.replace("_bar", "bar")] = _matrix(raw.get(k), *shape, name=f"{label}.{k}")
        return out

    forcing = doc.get("forcing", [])
    if not isinstance(forcing, list):
        raise InputError("forcing must be an array of terms")
    fterms = []
    for idx, t in enumerate(forcing):
        if not isinstance(t, dict) or set(t) != {"kind", "amplitude", "rate"}:
            raise InputError(f"forcing[{idx}] must have exactly kind/amplitude/rate")
        fterms.append(dict(kind=t["kind"], amplitude=t["amplitude"], rate=t["rate"]))

    opts = SolveOptions(**options)

    try:
        if len(players) == 1:
            if m2 != 0:
                raise InputError("single-player problems require m2 = 0")
            blk = player_block(players[0], "players[0]")
            spec = validate_control(dict(
                n=n, m=m1,
                A=mats["A"], Abar=mats["A_bar"], C=mats["C"], Cbar=mats["C_bar"],
                B=mats["B1"], Bbar=mats["B1_bar"], D=mats["D1"], Dbar=mats["D1_bar"],
                Q=blk["Q"], Qbar=blk["Qbar"], S=blk["S1"], Sbar=blk["S1bar"],
                R=blk["R11"], Rbar=blk["R11bar"], forcing=fterms,
            ))
        else:
            blocks = [player_block(p, f"players[{i}]") for i, p in enumerate(players)]
            spec = validate(dict(
                n=n, m1=m1, m2=m2,
                A=mats["A"], Abar=mats["A_bar"], C=mats["C"], Cbar=mats["C_bar"],
                B1=mats["B1"], B1bar=mats["B1_bar"], D1=mats["D1"], D1bar=mats["D1_bar"],
                B2=mats["B2"], B2bar=mats["B2_bar"], D2=mats["D2"], D2bar=mats["D2_bar"],
                players=blocks, forcing=fterms,
            ))
    except MFLQError as exc:
        raise InputError(str(exc)) from exc
    return spec, opts


# ---------------------------------------------------------------------------
# report assembly


def _stab_dict(cert):
    if cert is None:
        return None
    return {
        "is_stabilizer": cert.is_stabilizer,
        "min_eig_P0": cert.min_eig_P0,
        "min_eig_P0_bar": cert.min_eig_P0bar,
        "hurwitz_abscissa": cert.hurwitz_abscissa,
        "stochastic_abscissa": cert.stochastic_abscissa,
        "failure_reason": cert.failure_reason,
    }


def _solution_dict(mode, sol):
    if mode == "control":
        mats = {"P": sol.P, "P_hat": sol.Phat, "Theta": sol.theta, "Theta_bar": sol.theta_bar,
                "Sigma": sol.Sigma, "Sigma_bar": sol.Sigma_bar}
        margins = {}
    elif mode == "nash-open":
        mats = {"P1": sol.P1, "P2": sol.P2, "P1_hat": sol.P1hat, "P2_hat": sol.P2hat,
                "Theta": sol.theta, "Theta_bar": sol.theta_bar,
                "Sigma_stack": sol.Sigma_stack, "Sigma_bar_stack": sol.Sigma_bar_stack}
        margins = {}
    elif mode == "nash-closed":
        mats = {"P1": sol.P1, "P2": sol.P2, "P1_hat": sol.P1hat, "P2_hat": sol.P2hat,
                "Theta": sol.theta, "Theta_bar": sol.theta_bar,
                "Sigma1": sol.Sigma1, "Sigma2": sol.Sigma2,
                "Sigma1_bar": sol.Sigma1_bar, "Sigma2_bar": sol.Sigma2_bar}
        margins = {}
    else:
        mats = {"P_c": sol.Pc, "P_c_hat": sol.Pchat, "Theta": sol.theta, "Theta_bar": sol.theta_bar,
                "Sigma_c": sol.Sigma_c, "Sigma_c_bar": sol.Sigma_c_bar}
        margins = {
            "R11": sol.sign_margins[0], "R11_hat": sol.sign_margins[1],
            "R22": sol.sign_margins[2], "R22_hat": sol.sign_margins[3],
        }
    return {k: np.asarray(v) for k, v in mats.items()}, margins


def _dispatch_solve(mode, spec, opts):
    if mode == "control":
        if not isinstance(spec, ControlSpec):
            raise InputError("mode control requires a single-player problem")
        return riccati.solve_control_are(spec, opts), spec
    if not isinstance(spec, GameSpec):
        raise InputError(f"mode {mode} requires a two-player problem")
    if mode == "nash-open":
        return riccati.solve_openloop_nash_are(spec, opts), spec
    if mode == "nash-closed":
        return riccati.solve_closedloop_nash_are(spec, opts), spec
    try:
        zspec = zero_sum_reduce(spec)
    except MFLQError as exc:
        raise InputError(f"zero-sum reduction failed: {exc}") from exc
    if mode == "zerosum-open":
        return riccati.solve_zerosum_openrep_are(zspec, opts), zspec
    return riccati.solve_zerosum_are(zspec, opts), zspec


def _offset_list(strategy: FeedbackStrategy):
    return [{"amplitude": t.amplitude, "rate": t.rate} for t in strategy.offset]


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    spec, opts = load_problem(args.problem)
    if args.theta_free:
        with open(args.theta_free, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        import dataclasses

        opts = dataclasses.replace(
            opts, free_components=(np.asarray(doc["theta"], dtype=float),
                                   np.asarray(doc["theta_bar"], dtype=float))
        )
    sol, solved_spec = _dispatch_solve(args.mode, spec, opts)
    mats, margins = _solution_dict(args.mode, sol)
    rep = riccati.are_residuals(sol, solved_spec)
    value = None
    offset = []
    if sol.status == SOLVED:
        strategy = equilibrium.synthesize_strategy(sol, solved_spec)
        offset = _offset_list(strategy)
        if not isinstance(solved_spec, GameSpec):
            offsets = equilibrium.solve_offsets(solved_spec, sol) if solved_spec.forcing else None
            x0 = np.zeros(solved_spec.n)
            vr = equilibrium.value_function(solved_spec, sol, offsets, x0)
            value = {"quadratic": vr.quadratic, "linear": vr.linear,
                     "constant": vr.constant, "total": vr.total}
    report = {
        "mode": args.mode,
        "status": sol.status,
        "n": spec.n,
        "m1": spec.m1 if isinstance(spec, GameSpec) else spec.m,
        "m2": spec.m2 if isinstance(spec, GameSpec) else 0,
        "solution": mats,
        "offset": offset,
        "residuals": rep.equations,
        "range_residuals": rep.range_residuals,
        "sign_margins": margins or rep.sign_margins,
        "stabilizer": _stab_dict(sol.stabilizer),
        "value": value,
        "simulation": None,
        "tolerances": {"are_tol": opts.are_tol, "psd_tol": riccati.TAU_PSD},
        "solver_meta": {
            "iterations": int(sol.meta.get("iterations", 0)),
            "wall_time_ms": (time.perf_counter() - t0) * 1e3,
            "eps_chain": sol.meta.get("eps_chain"),
        },
    }
    if args.out:
        dump_report(report, args.out)
    print(f"status: {sol.status}")
    return 0 if sol.status == SOLVED else 2


# ---------------------------------------------------------------------------
# verify


def _solution_from_report(report, spec):
    mode = report["mode"]
    sol_m = {k: np.asarray(v, dtype=float) for k, v in report["solution"].items()}
    status = report["status"]
    if mode == "control":
        return ControlAreSolution(
            sol_m["P"], sol_m["P_hat"], sol_m["Sigma"], sol_m["Sigma_bar"],
            sol_m["Theta"], sol_m["Theta_bar"], dict(report["residuals"]), status,
        )
    if mode == "nash-open":
        return OpenLoopNashSolution(
            sol_m["P1"], sol_m["P2"], sol_m["P1_hat"], sol_m["P2_hat"],
            sol_m["Theta"], sol_m["Theta_bar"], sol_m["Sigma_stack"], sol_m["Sigma_bar_stack"],
            dict(report["residuals"]), status,
        )
    if mode == "nash-closed":
        return ClosedLoopNashSolution(
            sol_m["P1"], sol_m["P2"], sol_m["P1_hat"], sol_m["P2_hat"],
            sol_m["Theta"], sol_m["Theta_bar"],
            sol_m["Sigma1"], sol_m["Sigma2"], sol_m["Sigma1_bar"], sol_m["Sigma2_bar"],
            dict(report["residuals"]), status,
        )
    margins = report.get("sign_margins", {})
    mg = (margins.get("R11", 0.0), margins.get("R11_hat", 0.0),
          margins.get("R22", 0.0), margins.get("R22_hat", 0.0))
    checks = (mg[0] >= -riccati.TAU_PSD, mg[1] >= -riccati.TAU_PSD,
              mg[2] <= riccati.TAU_PSD, mg[3] <= riccati.TAU_PSD)
    return ZeroSumSolution(
        sol_m["P_c"], sol_m["P_c_hat"], sol_m["Sigma_c"], sol_m["Sigma_c_bar"],
        sol_m["Theta"], sol_m["Theta_bar"], checks, mg, dict(report["residuals"]), status,
    )


_MODE_TO_KIND = {
    "nash-open": "open_rep",
    "nash-closed": "closed_nash",
    "zerosum-open": "zerosum_open_rep",
    "zerosum-closed": "zerosum_closed",
}


def cmd_verify(args) -> int:
    spec, _ = load_problem(args.problem)
    try:
        with open(args.solution, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read solution file: {exc}") from exc
    mode = report.get("mode")
    if mode not in MODES:
        raise InputError(f"solution file has unknown mode {mode!r}")
    if mode == "control":
        if not isinstance(spec, ControlSpec):
            raise InputError("control solution paired with a game problem")
        check_spec = spec
    elif mode in ("zerosum-open", "zerosum-closed"):
        if not isinstance(spec, GameSpec):
            raise InputError("zero-sum solution requires a two-player problem")
        check_spec = zero_sum_reduce(spec)
    else:
        if not isinstance(spec, GameSpec):
            raise InputError(f"{mode} solution requires a two-player problem")
        check_spec = spec
    try:
        sol = _solution_from_report(report, check_spec)
        rep = riccati.are_residuals(sol, check_spec)
    except (KeyError, ValueError, MFLQError) as exc:
        raise InputError(f"solution file is inconsistent with the problem: {exc}") from exc

    are_tol = float(report.get("tolerances", {}).get("are_tol", 1e-8))
    gates = {"residuals": rep.max_equation_residual() <= are_tol}
    if mode == "control":
        gates["psd"] = min(rep.sign_margins.values()) >= -riccati.TAU_PSD
        gates["range"] = max(rep.range_residuals.values()) <= 1e-8
    elif mode == "zerosum-closed":
        m = rep.sign_margins
        gates["signs"] = (m["R11"] >= -riccati.TAU_PSD and m["R11_hat"] >= -riccati.TAU_PSD
                          and m["R22"] <= riccati.TAU_PSD and m["R22_hat"] <= riccati.TAU_PSD)
        gates["range"] = max(rep.range_residuals.values()) <= 1e-8
    elif mode == "zerosum-open":
        gates["range"] = max(rep.range_residuals.values()) <= 1e-8
    elif mode == "nash-open":
        gates["invertible"] = min(rep.sign_margins.values()) > riccati.TAU_SING
    elif mode == "nash-closed":
        gates["signs"] = min(rep.sign_margins.values()) >= -riccati.TAU_PSD
    from .stabilizability import check_stabilizer

    cert = check_stabilizer(check_spec, sol.theta, sol.theta_bar)
    gates["stabilizer"] = cert.is_stabilizer
    convexity = None
    if args.convexity and isinstance(spec, GameSpec):
        kind = _MODE_TO_KIND.get(mode)
        if kind in ("open_rep", "zerosum_open_rep"):
            nc = equilibrium.nash_certificate(check_spec, sol, kind)
            convexity = [
                {"player": i + 1, "verdict": r.verdict, "min_eig": r.min_eigenvalue,
                 "max_eig": r.max_eigenvalue}
                for i, r in enumerate(nc.convexity or ())
            ]
    out = {
        "mode": mode,
        "gates": gates,
        "residuals": rep.equations,
        "range_residuals": rep.range_residuals,
        "sign_margins": rep.sign_margins,
        "stabilizer": _stab_dict(cert),
        "convexity": convexity,
    }
    print(json.dumps(_tag_floats(_render(out)), indent=1))
    ok = all(gates.values())
    if not ok:
        worst = rep.max_equation_residual()
        print(f"verification failed (max equation residual {worst:.6g})", file=sys.stderr)
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    spec, _ = load_problem(args.problem)
    try:
        with open(args.solution, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read solution file: {exc}") from exc
    mode = report.get("mode")
    if mode not in MODES:
        raise InputError(f"solution file has unknown mode {mode!r}")
    if report.get("status") != SOLVED and not args.force:
        raise InputError("solution is not certified; pass --force to simulate anyway")
    if mode in ("zerosum-open", "zerosum-closed"):
        sim_spec = zero_sum_reduce(spec) if isinstance(spec, GameSpec) else spec
    else:
        sim_spec = spec
    sol = _solution_from_report(report, sim_spec)
    x0 = np.array([float(v) for v in args.x0.split(",")])
    offset = tuple(
        OffsetTerm(np.asarray(t["amplitude"], dtype=float), float(t["rate"]))
        for t in report.get("offset", [])
    )
    strategy = FeedbackStrategy(sol.theta, sol.theta_bar, offset)
    opts = simulate.SimOptions(
        T=args.horizon, dt=args.dt, paths=args.paths, seed=args.seed,
        antithetic=not args.no_antithetic,
    )
    import warnings as _warnings

    with _warnings.catch_warnings():
        if args.force:
            _warnings.simplefilter("ignore", RuntimeWarning)
        try:
            ens = simulate.simulate_closed_loop(sim_spec, strategy, x0, opts)
        except NonFiniteState as exc:
            print(f"simulation blow-up at t = {exc.time:.6g}", file=sys.stderr)
            return 3
    players = ens.players
    out = {"mode": mode, "players": {}}
    for i in range(1, players + 1):
        est = simulate.estimate_cost(ens, sim_spec, strategy, i)
        out["players"][f"player{i}"] = {
            "mean": est.mean, "stderr": est.stderr, "T": est.T, "dt": est.dt,
            "paths": est.paths, "tail_flag": est.tail_flag,
        }
    if report.get("status") == SOLVED and mode in ("control", "zerosum-open", "zerosum-closed"):
        offsets = equilibrium.solve_offsets(sim_spec, sol) if sim_spec.forcing else None
        vr = equilibrium.value_function(sim_spec, sol, offsets, x0)
        out["value_reference"] = {"total": vr.total, "quadratic": vr.quadratic,
                                  "linear": vr.linear, "constant": vr.constant}
    if args.deviation_test:
        kind = "saddle" if mode.startswith("zerosum") else "nash"
        battery = simulate.default_perturbations(sim_spec)
        rep_dev = simulate.deviation_test(sim_spec, strategy, x0, kind, battery, opts)
        out["deviation"] = {
            "kind": rep_dev.kind,
            "passed": rep_dev.passed,
            "records": [
                {"player": r.player, "kind": r.kind, "rate": r.rate,
                 "delta_j": r.delta_j, "stderr": r.stderr, "ok": r.ok}
                for r in rep_dev.records
            ],
        }
    text = json.dumps(_tag_floats(_render(out)), indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="mflq", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve a problem file")
    ps.add_argument("--problem", required=True)
    ps.add_argument("--mode", required=True, choices=MODES)
    ps.add_argument("--out", default=None)
    ps.add_argument("--theta-free", default=None,
                    help="JSON file with free components {theta, theta_bar}")
    ps.set_defaults(func=cmd_solve)

    pv = sub.add_parser("verify", help="recompute certificates for a report")
    pv.add_argument("--problem", required=True)
    pv.add_argument("--solution", required=True)
    pv.add_argument("--convexity", action="store_true")
    pv.set_defaults(func=cmd_verify)

    pm = sub.add_parser("simulate", help="Monte-Carlo validation of a report")
    pm.add_argument("--problem", required=True)
    pm.add_argument("--solution", required=True)
    pm.add_argument("--x0", required=True, help="initial state, comma separated")
    pm.add_argument("--horizon", type=float, default=20.0)
    pm.add_argument("--dt", type=float, default=1e-3)
    pm.add_argument("--paths", type=int, default=10000)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--no-antithetic", action="store_true")
    pm.add_argument("--deviation-test", action="store_true")
    pm.add_argument("--force", action="store_true")
    pm.add_argument("--out", default=None)
    pm.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MFLQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
