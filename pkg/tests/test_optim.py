import numpy as np
import pytest

from hzreach import (BudgetExceededError, LinearProgram, MixedBinaryProgram,
                     lp_solve, milp_optimize)
from hzreach.optim import dump_lp_text

from oracles import lp_vertex_min


def _random_lp(rng, n=4, m=2):
    lower = -rng.uniform(0.5, 2.0, size=n)
    upper = rng.uniform(0.5, 2.0, size=n)
    a = rng.standard_normal((m, n))
    # anchor the rhs at an interior point so the program is feasible
    x0 = rng.uniform(lower, upper)
    return LinearProgram(rng.standard_normal(n), a, a @ x0, lower, upper)


def test_lp_solve_against_vertex_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(25):
        p = _random_lp(rng)
        res = lp_solve(p)
        assert res.optimal
        ref = lp_vertex_min(p.objective, p.eq_matrix, p.eq_rhs, p.lower, p.upper)
        assert ref is not None
        assert res.value <= ref + 1e-8
        # solver point is feasible, so it cannot beat the true optimum
        assert res.value >= ref - 1e-7


def test_lp_infeasible_status():
    # x1 + x2 = 5 has no solution in [-1, 1]^2
    p = LinearProgram([1.0, 0.0], [[1.0, 1.0]], [5.0], [-1, -1], [1, 1])
    res = lp_solve(p)
    assert res.status == "infeasible" and not res.optimal


def test_lp_requires_finite_bounds():
    with pytest.raises(ValueError):
        LinearProgram([1.0], np.zeros((0, 1)), [], [-np.inf], [1.0])


def test_binary_index_validation():
    lp = LinearProgram([1.0, 1.0], np.zeros((0, 2)), [], [-1, -1], [1, 1])
    with pytest.raises(ValueError):
        MixedBinaryProgram(lp, [2])


def test_milp_strategies_agree():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = 5
        lower, upper = -np.ones(n), np.ones(n)
        a = rng.standard_normal((1, n))
        xc = rng.uniform(-1, 1, size=n)
        xc[3:] = rng.choice([-1.0, 1.0], size=2)
        p = MixedBinaryProgram(
            LinearProgram(rng.standard_normal(n), a, a @ xc, lower, upper),
            [3, 4])
        r1 = milp_optimize(p, "enumerate")
        r2 = milp_optimize(p, "branch_and_bound")
        assert r1.status == r2.status
        if r1.optimal:
            assert abs(r1.value - r2.value) < 1e-7
            assert np.all(np.isin(r1.x[3:], (-1.0, 1.0)))
            assert np.all(np.isin(r2.x[3:], (-1.0, 1.0)))


def test_milp_no_binaries_is_plain_lp():
    lp = LinearProgram([1.0, -1.0], np.zeros((0, 2)), [], [-1, -1], [1, 1])
    res = milp_optimize(MixedBinaryProgram(lp))
    assert res.optimal and abs(res.value - (-2.0)) < 1e-9


def test_enumerate_budget_enforced():
    n = 6
    lp = LinearProgram(np.ones(n), np.zeros((0, n)), [], -np.ones(n), np.ones(n))
    p = MixedBinaryProgram(lp, np.arange(n))
    with pytest.raises(BudgetExceededError):
        milp_optimize(p, "enumerate", enumerate_budget=5)
    # the same program fits a budget of 6
    res = milp_optimize(p, "enumerate", enumerate_budget=6)
    assert res.optimal and abs(res.value - (-6.0)) < 1e-9


def test_milp_infeasible():
    lp = LinearProgram([1.0], [[1.0]], [0.5], [-1.0], [1.0])
    res = milp_optimize(MixedBinaryProgram(lp, [0]), "branch_and_bound")
    assert res.status == "infeasible"
    res = milp_optimize(MixedBinaryProgram(lp, [0]), "enumerate")
    assert res.status == "infeasible"


def test_dump_lp_text_mentions_all_parts():
    p = LinearProgram([1.0, 2.0], [[1.0, -1.0]], [0.25], [-1, 0], [1, 3])
    text = dump_lp_text(p)
    assert "min" in text and "= 0.25" in text and "x1 <= 3" in text
