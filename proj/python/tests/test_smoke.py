import json
import os

import numpy as np
import pytest

import glehomog as gh


def test_version():
    assert gh.__version__ == "0.1.0"


def test_lyapunov_against_kronecker():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 4))
    A += (1.0 - np.linalg.eigvals(A).real.min()) * np.eye(4)
    B = rng.normal(size=(4, 4))
    Q = B @ B.T
    J = gh.solve_lyapunov(A, Q)
    K = np.kron(np.eye(4), A) + np.kron(A, np.eye(4))
    ref = np.linalg.solve(K, Q.reshape(-1, order="F")).reshape(4, 4, order="F")
    assert np.allclose(J, ref, atol=1e-10)


def test_sylvester_and_onsager():
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    B = np.array([[1.0]])
    C = np.array([[1.0], [2.0]])
    X = gh.solve_sylvester(A, B, C)
    assert np.allclose(A @ X + X @ B, C)
    o = gh.onsager(np.array([[1.0, -1.0], [1.0, 1.0]]), np.sqrt(2.0) * np.eye(2))
    assert np.allclose(o["J"], np.eye(2))
    assert np.allclose(o["Q"], [[0.0, -1.0], [1.0, 0.0]])


def test_errors_are_translated():
    with pytest.raises(gh.GleError):
        gh.solve_lyapunov(-np.eye(2), np.eye(2))
    with pytest.raises(gh.GleError):
        gh.eval_expr("1+*2")


def test_expressions_and_config():
    assert gh.eval_expr("1+2*3") == 7.0
    assert gh.eval_expr("k*x1", x=np.array([2.0]), params={"k": 1.5}) == 3.0
    text = gh.canonical_config("scenario: magnetic\nparams:\n  omega: 0.5\n")
    assert gh.canonical_config(text) == text


def test_scenarios_and_anomalies():
    assert "temperature_gradient" in gh.scenario_names()
    rep = gh.anomaly_report("temperature_gradient", {"dim": 2, "fast_skew": 2.0}, "markov")
    assert rep["sup_norms"]["Theta_A"] > 0.1
    rep = gh.anomaly_report("diagonal_nd", {"dim": 3}, "joint")
    assert rep["vanishing"]["lambda_A"]


def test_simulate_shapes():
    t, Z, blocks = gh.simulate("diagonal_nd", {"dim": 2}, "markov", eps=0.1, T=0.1, seed=2)
    assert Z.shape[0] == len(t)
    assert blocks["x"] == (0, 2)
    t2, Z2, _ = gh.simulate("diagonal_nd", {"dim": 2}, "markov", eps=0.1, T=0.1, seed=2)
    assert np.array_equal(Z, Z2)


def test_convergence_and_probes():
    r = gh.convergence("diagonal_nd", {"dim": 1, "state_dependent": 0}, "joint", [0.2, 0.05, 0.01], paths=8, T=0.5)
    errs = [p["mean"]["x"] for p in r["points"]]
    assert errs[-1] < errs[0]
    c = gh.commutativity_probe("temperature_gradient", {"dim": 2, "T1": 0.5, "gamma_slope": 0.5})
    assert c["drift_sup"] > 1e-3
    a = gh.area_demo(1.0, [0.05], paths=200, T=1.0, seed=4)
    assert abs(a["points"][0]["area"]["mean"] + 0.5) < 0.2


def test_run_command(tmp_path):
    out = str(tmp_path / "run")
    code, so, se = gh.run_command("reduce", scenario="temperature_gradient", procedure="markov", out=out)
    assert code == 0, se
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["command"] == "reduce"
    code, _, _ = gh.run_command("reduce", scenario="nope", out=out)
    assert code == 2
