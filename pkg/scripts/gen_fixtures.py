"""Generate the golden problem fixtures (JSON) under fixtures/.

The commonly tabulated coefficient sets for two of these examples round
entries to four decimals; where the construction identities pin the exact
value (the solutions are exact by construction), the fixtures carry the
back-derived full-precision numbers so that tight tolerances are
attainable.  See notes in the repository README and the test suite.
"""

import json
import pathlib
import sys

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"


def fmt(x):
    if isinstance(x, float):
        return float(format(x, ".17g"))
    if isinstance(x, dict):
        return {k: fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt(v) for v in x]
    if isinstance(x, np.ndarray):
        return fmt(x.tolist())
    return x


def mirror_players(p1):
    p2 = {}
    for k, v in p1.items():
        p2[k] = (-np.asarray(v, dtype=float)).tolist()
    return [p1, p2]


def write(name, doc):
    path = OUT / name
    path.write_text(json.dumps(fmt(doc), indent=1) + "\n", encoding="utf-8")
    print("wrote", path)


def ex5_1():
    dyn = {"A": [[-0.5]], "D1": [[1.0]], "D2": [[1.0]]}
    p1 = {
        "Q": [[1.0]], "Q_bar": [[1.0]],
        "S1": [[1.0]], "S2": [[-1.0]],
        "S1_bar": [[-1.0]], "S2_bar": [[1.0]],
        "R11": [[1.0]], "R22": [[-1.0]],
    }
    return {"n": 1, "m1": 1, "m2": 1, "dynamics": dyn, "players": mirror_players(p1)}


def ex5_2():
    dyn = {"A": [[-0.25]], "B2": [[-0.5]], "C": [[-1.0]], "D1": [[1.0]]}
    p1 = {
        "Q": [[0.5]], "Q_bar": [[0.5]],
        "S1": [[-1.0]], "S2": [[-0.5]], "S2_bar": [[0.5]],
        "R11": [[1.0]], "R22_bar": [[-1.0]],
    }
    return {"n": 1, "m1": 1, "m2": 1, "dynamics": dyn, "players": mirror_players(p1)}


def ex5_3():
    # Q_bar back-derived so that the displayed saddle gains certify; the
    # tabulated value and the cost display disagree (52 vs -12), and
    # neither reproduces the displayed gain pair.
    dyn = {"A": [[-8.0]], "B1": [[1.0]], "B2": [[-1.0]], "D1": [[1.0]], "D2": [[1.0]]}
    p1 = {
        "Q": [[12.0]], "Q_bar": [[3.0]],
        "R11": [[1.0]], "R22": [[-1.0]],
        "R11_bar": [[1.0]], "R22_bar": [[-1.0]],
    }
    return {"n": 1, "m1": 1, "m2": 1, "dynamics": dyn, "players": mirror_players(p1)}


def ex5_3_printed():
    # the coefficient set as commonly tabulated (Q_bar = 52), kept as a companion
    doc = ex5_3()
    doc["players"][0]["Q_bar"] = [[52.0]]
    doc["players"][1]["Q_bar"] = [[-52.0]]
    return doc


_DYN_2D = {
    "B1": [[1.0], [0.0]], "B2": [[0.0], [1.0]],
    "B1_bar": [[2.5], [0.0]], "B2_bar": [[0.0], [0.5]],
    "C": [[1.0, 0.5], [0.5, 1.0]], "C_bar": [[0.0, -0.5], [-0.5, 0.0]],
    "D1": [[1.0], [0.0]], "D2": [[0.0], [1.0]],
    "D1_bar": [[0.5], [0.0]], "D2_bar": [[0.0], [0.5]],
}


def ex5_4():
    dyn = dict(_DYN_2D)
    dyn["A"] = [[1.0, 0.5], [0.5, 1.0]]
    dyn["A_bar"] = [[1.0, 0.0], [0.0, 1.0]]
    p1 = {
        "Q": [[7.125, 2.5], [2.5, 1.5]],
        "Q_bar": [[5.875, -2.5], [-2.5, 1.1]],
        "R11": [[2.0]], "R22": [[-1.0]],
        "R11_bar": [[0.5]], "R22_bar": [[-0.5]],
    }
    return {"n": 2, "m1": 1, "m2": 1, "dynamics": dyn, "players": mirror_players(p1)}


def ex5_5():
    # Q and Q_bar are exact: back-derived from the exact solution pair
    # P = diag(1, 0.1), P_hat = diag(1, 0.5) (tabulated values round to 4 dp)
    P = np.diag([1.0, 0.1])
    Ph = np.diag([1.0, 0.5])
    A = np.array([[-1.0, -1.0], [0.0, -3.0]])
    Abar = np.array([[-1.0, 0.0], [-1.0, -20.0]])
    C = np.array([[1.0, 0.5], [0.5, 1.0]])
    Cbar = np.array([[0.0, -0.5], [-0.5, 0.0]])
    R = np.diag([2.0, -2.0])
    Rbar = np.diag([0.75, -0.5])
    Ah, Ch = A + Abar, C + Cbar
    Sigma = R + P
    Sigma_h = (R + Rbar) + 2.25 * P
    V = P + P @ C
    Vh = np.diag([3.5, 1.5]) @ Ph + 1.5 * (P @ Ch)
    Q = V.T @ np.linalg.solve(Sigma, V) - (P @ A + A.T @ P) - C @ P @ C
    Qh = Vh.T @ np.linalg.solve(Sigma_h, Vh) - (Ph @ Ah + Ah.T @ Ph) - Ch @ P @ Ch
    Qbar = Qh - Q
    dyn = dict(_DYN_2D)
    dyn["A"] = A.tolist()
    dyn["A_bar"] = Abar.tolist()
    p1 = {
        "Q": Q.tolist(), "Q_bar": Qbar.tolist(),
        "R11": [[2.0]], "R22": [[-2.0]],
        "R11_bar": [[0.75]], "R22_bar": [[-0.5]],
    }
    return {"n": 2, "m1": 1, "m2": 1, "dynamics": dyn, "players": mirror_players(p1)}


def ex5_6():
    # Q1_bar[0,0] back-derived (2051/340); commonly tabulated rounded as 6.0324
    q1bar00 = 3.0 + 100.0 / 17.0 - 2.85
    dyn = dict(_DYN_2D)
    dyn["A"] = [[-1.0, -1.0], [0.0, -1.0]]
    dyn["A_bar"] = [[-1.0, 0.0], [-1.0, -1.0]]
    p1 = {
        "Q": [[2.85, 0.9], [0.9, 2.475]],
        "Q_bar": [[q1bar00, 0.6], [0.6, 0.325]],
        "R11": [[1.0]], "R22": [[1.0]],
        "R11_bar": [[1.0]], "R22_bar": [[1.0]],
    }
    p2 = {
        "Q": [[1.35, 0.4], [0.4, 2.5375]],
        "Q_bar": [[7.15, 1.6], [1.6, 2.8625]],
        "R11": [[1.0]], "R22": [[1.5]],
        "R11_bar": [[0.5]], "R22_bar": [[0.0]],
    }
    return {"n": 2, "m1": 1, "m2": 1, "dynamics": dyn, "players": [p1, p2]}


def ex5_7():
    s = float(np.sqrt(2.5))
    dyn = {
        "A": [[-1.0, -1.0], [0.0, -1.0]],
        "A_bar": [[-1.0, 0.0], [-1.0, -1.0]],
        "D1": [[1.0], [0.0]], "D2": [[0.0], [1.0]],
        "D1_bar": [[1.0], [0.0]], "D2_bar": [[0.0], [1.0]],
    }
    p1 = {
        "Q": [[2.0, 1.0], [1.0, 1.5]],
        "Q_bar": [[83.0 / 44.0, 1.0], [1.0, 105.0 / 44.0]],
        "S2": [[s, 0.0]],
        "R11": [[1.0]], "R22": [[1.0]],
        "R11_bar": [[1.0]], "R22_bar": [[1.0]],
    }
    p2 = {
        "Q": [[1.0, 0.5], [0.5, 3.0]],
        "Q_bar": [[3.0, 1.5], [1.5, 16.0 / 11.0]],
        "S2": [[0.0, s]],
        "R11": [[1.0]], "R22": [[1.5]],
        "R11_bar": [[0.5]], "R22_bar": [[0.0]],
    }
    return {"n": 2, "m1": 1, "m2": 1, "dynamics": dyn, "players": [p1, p2]}


def main():
    OUT.mkdir(exist_ok=True)
    write("ex5_1.json", ex5_1())
    write("ex5_2.json", ex5_2())
    write("ex5_3.json", ex5_3())
    write("ex5_3_printed_qbar.json", ex5_3_printed())
    write("ex5_4.json", ex5_4())
    write("ex5_5.json", ex5_5())
    write("ex5_6.json", ex5_6())
    write("ex5_7.json", ex5_7())
    # free components that certify the degenerate saddle of ex5_2
    write("ex5_2_theta_free.json", {"theta": [[1.0], [2.0]], "theta_bar": [[0.0], [0.0]]})


if __name__ == "__main__":
    sys.exit(main())
