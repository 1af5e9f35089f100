import math

import numpy as np
import pytest

from topoproj.ccsa import CcsaOptions, OptimizerError, OptProblem, minimize


def quad_1d(x):
    return float((x[0] - 0.3) ** 2), np.array([2 * (x[0] - 0.3)])


def qp_objective(x):
    return float(x @ x), 2 * x


def qp_constraint(x):
    return 1.0 - x[0] - x[1], np.array([-1.0, -1.0])


def test_one_dimensional():
    x, hist = minimize(OptProblem(1, quad_1d), [0.9], CcsaOptions(max_outer=30))
    assert x[0] == pytest.approx(0.3, abs=1e-8)
    assert len(hist.loss) <= 31


def test_qp_kkt_point():
    x, hist = minimize(OptProblem(2, qp_objective, [qp_constraint]), [0.1, 0.9], CcsaOptions(max_outer=100))
    assert np.allclose(x, [0.5, 0.5], atol=1e-6)
    assert qp_objective(x)[0] == pytest.approx(0.5, abs=1e-6)


def test_infeasible_start_recovers():
    x, hist = minimize(OptProblem(2, qp_objective, [qp_constraint]), [0.0, 0.0], CcsaOptions(max_outer=100))
    assert hist.constraints[0][0] > 0
    assert qp_constraint(x)[0] <= 1e-9
    assert np.allclose(x, [0.5, 0.5], atol=1e-5)


def test_feasible_start_monotone_and_bounded():
    def rosen(x):
        f = (1 - x[0]) ** 2 + 10 * (x[1] - x[0] ** 2) ** 2
        return f, np.array([-2 * (1 - x[0]) - 40 * x[0] * (x[1] - x[0] ** 2), 20 * (x[1] - x[0] ** 2)])

    seen = []
    prob = OptProblem(2, rosen, [qp_constraint], lower=0.0, upper=0.8)
    x, hist = minimize(prob, [0.7, 0.7], CcsaOptions(max_outer=60),
                       callback=lambda k, xk, f, g: seen.append(xk.copy()))
    acc = [f for f, a in zip(hist.loss, hist.accepted) if a]
    # acceptance allows a 1e-14 relative slack on the model bound
    assert all(b <= a + 2e-14 * max(1.0, abs(b)) for a, b in zip(acc, acc[1:]))
    assert all(np.all((s >= 0) & (s <= 0.8)) for s in seen)
    assert all(g[0] <= 1e-12 for g in hist.constraints)


def test_deterministic():
    prob = OptProblem(2, qp_objective, [qp_constraint])
    a = minimize(prob, [0.2, 0.3], CcsaOptions(max_outer=20))
    b = minimize(prob, [0.2, 0.3], CcsaOptions(max_outer=20))
    assert np.array_equal(a[0], b[0]) and a[1].loss == b[1].loss


def test_nonfinite_aborts():
    bad = lambda x: (math.nan, np.zeros(1))
    with pytest.raises(OptimizerError):
        minimize(OptProblem(1, bad), [0.5])


def test_budget_flag_and_metadata():
    x, hist = minimize(OptProblem(1, quad_1d), [0.9], CcsaOptions(max_outer=2))
    assert not hist.converged and hist.reason == "max_outer"
    assert hist.options["sigma_grow"] == 1.2 and hist.options["sigma_shrink"] == 0.7
    rows = list(hist.rows())
    assert len(rows) == 3 and rows[0][0] == 0


def test_f_target_stops():
    x, hist = minimize(OptProblem(1, quad_1d), [0.9], CcsaOptions(f_target=1e-3))
    assert hist.converged and hist.loss[-1] < 1e-3


def test_bad_inputs():
    with pytest.raises(ValueError):
        minimize(OptProblem(2, qp_objective), [0.1])
    with pytest.raises(ValueError):
        OptProblem(2, qp_objective, lower=1.0, upper=0.0).bounds()
