"""Shared fixtures: analytic dynamics fixtures and their symbolic oracle."""

import pytest

from humanoidsim.robot_model import model_from_document

G = 9.81

SERVO_DOC = {
    "stiffness": 12.0,
    "max_p_gain": 32,
    "ticks_per_rev": 4096,
    "torque_limit": 50.0,
    "viscous_friction": 0.0,
    "rotor_inertia": 0.25,
    "gain_scale": 0.4,
    "gain_slew_per_tick": 4.0,
}

DP = {"m1": 1.2, "m2": 0.7, "l1": 0.4, "l2": 0.35, "c1": 0.25, "c2": 0.3, "i1": 0.004, "i2": 0.002}


def make_pendulum_model(mass=1.0, length=0.5):
    """Single revolute joint about y, point mass at the arm tip."""
    doc = {
        "name": "pendulum",
        "root_link": "base",
        "joints": [
            {
                "name": "pivot",
                "parent": "base",
                "child": "arm",
                "origin_xyz": [0, 0, 0],
                "axis": [0, 1, 0],
                "limits": [-6.28, 6.28],
                "servo": SERVO_DOC,
            }
        ],
        "links": [
            {"name": "arm", "mass": mass, "com": [0, 0, -length], "inertia": [1e-9, 1e-9, 1e-9]}
        ],
    }
    return model_from_document(doc, humanoid=False)


def make_double_pendulum_model():
    doc = {
        "name": "double-pendulum",
        "root_link": "base",
        "joints": [
            {
                "name": "shoulder",
                "parent": "base",
                "child": "link1",
                "origin_xyz": [0, 0, 0],
                "axis": [0, 1, 0],
                "limits": [-9, 9],
                "servo": SERVO_DOC,
            },
            {
                "name": "elbow",
                "parent": "link1",
                "child": "link2",
                "origin_xyz": [0, 0, -DP["l1"]],
                "axis": [0, 1, 0],
                "limits": [-9, 9],
                "servo": SERVO_DOC,
            },
        ],
        "links": [
            {"name": "link1", "mass": DP["m1"], "com": [0, 0, -DP["c1"]], "inertia": [DP["i1"]] * 3},
            {"name": "link2", "mass": DP["m2"], "com": [0, 0, -DP["c2"]], "inertia": [DP["i2"]] * 3},
        ],
    }
    return model_from_document(doc, humanoid=False)


@pytest.fixture(scope="session")
def double_pendulum_oracle():
    """Closed-form torques from a symbolic Lagrangian, independent of the
    recursive pass under test."""
    import sympy as sp

    q1, q2, dq1, dq2, ddq1, ddq2, t = sp.symbols("q1 q2 dq1 dq2 ddq1 ddq2 t")
    f1, f2 = sp.Function("f1")(t), sp.Function("f2")(t)
    th1 = f1
    th2 = f1 + f2  # absolute angle of link 2
    # A +y rotation swings the hanging (0, 0, -c) offset toward -x:
    # Ry(th) @ (0, 0, -c) = (-c sin th, 0, -c cos th).
    x1 = -DP["c1"] * sp.sin(th1)
    z1 = -DP["c1"] * sp.cos(th1)
    xe = -DP["l1"] * sp.sin(th1)
    ze = -DP["l1"] * sp.cos(th1)
    x2 = xe - DP["c2"] * sp.sin(th2)
    z2 = ze - DP["c2"] * sp.cos(th2)
    v1 = sp.diff(x1, t) ** 2 + sp.diff(z1, t) ** 2
    v2 = sp.diff(x2, t) ** 2 + sp.diff(z2, t) ** 2
    ke = (
        DP["m1"] * v1 / 2
        + DP["m2"] * v2 / 2
        + DP["i1"] * sp.diff(th1, t) ** 2 / 2
        + DP["i2"] * sp.diff(th2, t) ** 2 / 2
    )
    pe = G * (DP["m1"] * z1 + DP["m2"] * z2)
    lag = ke - pe
    torques_sym = [sp.diff(sp.diff(lag, sp.diff(f, t)), t) - sp.diff(lag, f) for f in (f1, f2)]
    subs = {
        sp.diff(f1, (t, 2)): ddq1,
        sp.diff(f2, (t, 2)): ddq2,
        sp.diff(f1, t): dq1,
        sp.diff(f2, t): dq2,
        f1: q1,
        f2: q2,
    }
    exprs = [sp.simplify(expr.subs(subs)) for expr in torques_sym]
    return sp.lambdify((q1, q2, dq1, dq2, ddq1, ddq2), exprs, "numpy")
