"""Smoke tests for the _qlasso python module and the CLI."""

import json
import math
import os
import subprocess

import numpy as np
import pytest

import qlasso


def test_worked_example_values():
    vals = qlasso.example_sec4()
    assert vals["phi_sq_first"] == pytest.approx(2.0 / 13.0, abs=1e-8)
    assert vals["phi_sq_second"] <= 1e-6
    assert vals["gamma_effective_first"] == pytest.approx(6.5, abs=1e-8)
    assert vals["theta_first"] == pytest.approx(5.0 / 13.0, abs=1e-10)


def test_families_and_losses():
    logistic = qlasso.make_family("logistic")
    assert logistic.label == "logistic"
    assert qlasso.loss(logistic, 0.0, 0.0) == pytest.approx(math.log(2.0))
    assert qlasso.loss_derivative(logistic, 1.0, 0.0) == pytest.approx(-0.5)
    assert qlasso.regret(logistic, 0.5, 0.5) == 0.0
    gauss = qlasso.make_family("gaussian")
    assert qlasso.loss(gauss, 1.0, 0.0) == pytest.approx(0.5)
    constants = qlasso.condition_constants(logistic, 1.0, 0.5, 257)
    assert constants["C_h"] == pytest.approx(1.0)


def test_fit_matches_soft_threshold_on_orthonormal_design():
    rng = np.random.default_rng(7)
    n, p = 64, 8
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    X = math.sqrt(n) * q
    y = X[:, 0] * 0.4 + rng.standard_normal(n)
    lam_ls = 0.3
    closed = qlasso.soft_threshold_fit(X, y, lam_ls)
    z = X.T @ y / n
    expected = np.sign(z) * np.maximum(np.abs(z) - lam_ls / 2.0, 0.0)
    assert np.allclose(closed, expected, atol=1e-12)
    fitted = qlasso.fit(X, y, qlasso.make_family("gaussian"), lam_ls / 2.0,
                        kkt_tolerance=1e-10)
    assert fitted.converged
    assert np.max(np.abs(fitted.beta - expected)) <= 1e-8
    tau, viol, sign_ok = qlasso.kkt_residual(X, y, qlasso.make_family("gaussian"),
                                             lam_ls / 2.0, fitted.beta)
    assert viol <= 1e-6 and sign_ok
    assert fitted.active_set == [j + 1 for j in np.nonzero(expected)[0]]


def test_diagnostics_and_tuning():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 6))
    res = qlasso.compatibility_constant(X, [1, 4], 3.0)
    assert res.phi_sq > 0
    assert res.certificate_gap <= 1e-8
    assert res.method == "exact_qp_enumeration"
    assert qlasso.restricted_eigenvalue(X, [1, 4], 3.0) <= res.phi_sq + 1e-9
    sigma = X.T @ X / 40.0
    theta = qlasso.irrepresentable_theta(sigma, [1, 4])
    assert theta >= 0
    levels = qlasso.tuning_levels(sigma=1.0, kappa=0.0, K_X=1.0, K_0=0.0,
                                  C_h=1.0, C_V=2.0, L_h=0.0, L_g=0.0,
                                  n=100.0, p=math.e, t=0.0)
    assert levels["lambda_eps"] == pytest.approx(16.0 * math.sqrt(2.0 / 100.0))


def test_simulate_runs_a_theorem_check():
    cfg = {
        "n": 50, "p": 6, "s0": 2, "family": "gaussian",
        "design_law": "iid_gaussian", "error_law": "gaussian",
        "lambda_rule": "event_margin", "replications": 10,
        "master_seed": 5, "checks": ["thm1"], "threads": 1,
    }
    out = qlasso.simulate(cfg)
    thm1 = out["summary"]["theorems"][0]
    assert thm1["events"] == 10
    assert thm1["conditional_pass_rate"] == 1.0


def test_cli_example_sec4():
    cli = os.environ.get("QLASSO_CLI")
    if not cli:
        pytest.skip("QLASSO_CLI not set")
    proc = subprocess.run([cli, "example-sec4"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "2/13" in proc.stdout


def test_cli_fit_above_lambda_max_returns_zero(tmp_path):
    cli = os.environ.get("QLASSO_CLI")
    if not cli:
        pytest.skip("QLASSO_CLI not set")
    rng = np.random.default_rng(11)
    X = rng.standard_normal((20, 4))
    y = rng.standard_normal(20)
    design = tmp_path / "X.csv"
    resp = tmp_path / "y.csv"
    out = tmp_path / "fit.json"
    np.savetxt(design, X, delimiter=",", header="a,b,c,d", comments="")
    np.savetxt(resp, y, delimiter=",", header="y", comments="")
    lam = float(np.max(np.abs(X.T @ y)) / 20.0) * 1.01
    proc = subprocess.run(
        [cli, "fit", "--design", str(design), "--response", str(resp),
         "--family", "gaussian", "--lambda", str(lam), "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    result = json.loads(out.read_text())
    assert all(b == 0.0 for b in result["beta"])
    assert result["active_set"] == []
    assert result["converged"]


def test_compatibility_against_scipy_oracle():
    """Independent oracle: solve each sign-pattern QP with scipy SLSQP."""
    from scipy.optimize import minimize

    rng = np.random.default_rng(21)
    for trial in range(3):
        n, p = 6, 5
        X = rng.standard_normal((n, p))
        gram = X.T @ X / n
        S = [0, 2]  # zero-based here; qlasso takes one-based
        comp = [j for j in range(p) if j not in S]
        L = 3.0

        def solve_pattern(signs):
            # variables: u (=|beta_S|) then v (= beta on the complement)
            def objective(z):
                beta = np.zeros(p)
                beta[S] = signs * z[: len(S)]
                beta[comp] = z[len(S):]
                return beta @ gram @ beta

            cons = [
                {"type": "eq", "fun": lambda z: np.sum(z[: len(S)]) - 1.0},
                {"type": "ineq",
                 "fun": lambda z: L - np.sum(np.abs(z[len(S):]))},
            ]
            bounds = [(0.0, None)] * len(S) + [(-L, L)] * len(comp)
            best = np.inf
            for start in range(4):
                z0 = np.concatenate([
                    np.full(len(S), 1.0 / len(S)),
                    0.2 * rng.standard_normal(len(comp)) * start,
                ])
                z0[: len(S)] = np.abs(z0[: len(S)])
                z0[: len(S)] /= np.sum(z0[: len(S)])
                res = minimize(objective, z0, method="SLSQP", bounds=bounds,
                               constraints=cons,
                               options={"maxiter": 800, "ftol": 1e-14})
                if res.success:
                    best = min(best, res.fun)
            return best

        oracle = len(S) * min(solve_pattern(np.array(s))
                              for s in ([1, 1], [1, -1]))
        got = qlasso.compatibility_constant(X, [j + 1 for j in S], L)
        assert got.phi_sq == pytest.approx(oracle, abs=5e-7)
        assert got.certificate_gap <= 1e-8


def test_restricted_fit_and_average_regret_bindings():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 4))
    beta0 = np.array([1.0, 0.0, -0.5, 0.0])
    y = X @ beta0 + 0.1 * rng.standard_normal(30)
    fam = qlasso.make_family("gaussian")
    beta = qlasso.restricted_fit(X, y, fam, [1, 3])
    ls, *_ = np.linalg.lstsq(X[:, [0, 2]], y, rcond=None)
    assert beta[0] == pytest.approx(ls[0], abs=1e-9)
    assert beta[2] == pytest.approx(ls[1], abs=1e-9)
    assert beta[1] == 0.0 and beta[3] == 0.0

    logistic = qlasso.make_family("logistic")
    f = np.array([0.0, 1.0, -2.0])
    mu0 = np.array([0.5, 0.4, 0.6])
    avg = qlasso.average_regret(logistic, f, mu0)
    per = np.mean([qlasso.regret(logistic, 1.0 / (1.0 + math.exp(-z)), m)
                   for z, m in zip(f, mu0)])
    assert avg == pytest.approx(per, rel=1e-12)
