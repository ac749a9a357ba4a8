import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occkit.exceptions import DimensionMismatch, InfeasibleQP
from occkit.kernels import KernelSpec, gram
from occkit.solver import BoxQP, SolverConfig, equality_multiplier, kkt_residual, solve

from oracles import active_set_oracle, grid_oracle


def test_symmetric_pair_frozen():
    qp = BoxQP(np.eye(2), 0.0, 0.0, 1.0, 1.0)
    sol = solve(qp)
    np.testing.assert_allclose(sol.coeffs, [0.5, 0.5], atol=1e-12)
    assert sol.dual_objective == pytest.approx(0.25)
    assert sol.multiplier == pytest.approx(0.5)
    assert sol.converged and sol.kkt_residual <= 1e-6


def test_bound_solution_multiplier_midpoint():
    # optimum puts everything on x0: g = (1, 0) with c = (1, 0); interval [1, inf) / (-inf, 0]
    qp = BoxQP(np.diag([1.0, 1.0]), [0.0, 2.0], 0.0, 1.0, 1.0)
    sol = solve(qp)
    np.testing.assert_allclose(sol.coeffs, [1.0, 0.0])
    # x0 at upper bound (g=1), x1 at lower bound (g=2): midpoint 1.5
    assert equality_multiplier(qp, sol.coeffs) == pytest.approx(1.5)


def test_single_variable():
    sol = solve(BoxQP(np.array([[2.0]]), 0.0, 0.0, 1.0, 1.0))
    assert sol.coeffs[0] == 1.0 and sol.iterations == 0


def test_infeasible():
    with pytest.raises(InfeasibleQP):
        BoxQP(np.eye(3), 0.0, 0.0, 0.2, 1.0)
    with pytest.raises(InfeasibleQP):
        BoxQP(np.eye(2), 0.0, [0.0, 1.0], [1.0, 0.5], 1.0)
    with pytest.raises(DimensionMismatch):
        BoxQP(np.ones((2, 3)), 0.0, 0.0, 1.0, 1.0)
    qp = BoxQP(np.eye(2), 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(InfeasibleQP):
        solve(qp, x0=[0.2, 0.2])


def test_iteration_cap_reports_nonconvergence():
    X = np.random.default_rng(0).normal(size=(60, 2))
    qp = BoxQP(gram(KernelSpec("rbf", 1.0), X), 0.0, 0.0, 1 / 6, 1.0)
    sol = solve(qp, SolverConfig(max_iterations=2))
    assert not sol.converged and sol.iterations == 2
    assert qp.is_feasible(sol.coeffs)


def random_qp(rng, n, lower_frac=0.0):
    X = rng.normal(size=(n, 2))
    G = gram(KernelSpec("rbf", float(rng.uniform(0.2, 2))), X).values
    c = 1.0 / (rng.uniform(0.3, 1.0) * n)
    return BoxQP(G, rng.normal(scale=0.1, size=n), -lower_frac * c, c, 1.0)


@pytest.mark.parametrize("seed", range(6))
def test_matches_grid_oracle_small(seed):
    rng = np.random.default_rng(seed)
    qp = random_qp(rng, 3, lower_frac=0.5)
    ref, _ = grid_oracle(qp.gram, qp.linear, qp.lower, qp.upper, 1.0)
    sol = solve(qp, SolverConfig(tolerance=1e-10))
    # the grid optimum is an upper bound within O(step) of the truth
    assert sol.dual_objective <= ref + 1e-12
    assert sol.dual_objective >= ref - 1e-3


@pytest.mark.parametrize("seed", range(6))
def test_active_set_agrees_with_grid(seed):
    qp = random_qp(np.random.default_rng(100 + seed), 3, lower_frac=1.0)
    exact, _ = active_set_oracle(qp.gram, qp.linear, qp.lower, qp.upper, 1.0)
    ref, _ = grid_oracle(qp.gram, qp.linear, qp.lower, qp.upper, 1.0)
    assert exact <= ref + 1e-12 and exact >= ref - 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 7), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_matches_active_set(n, lower_frac, seed):
    qp = random_qp(np.random.default_rng(seed), n, lower_frac)
    exact, c_ref = active_set_oracle(qp.gram, qp.linear, qp.lower, qp.upper, 1.0)
    sol = solve(qp, SolverConfig(tolerance=1e-10))
    assert qp.is_feasible(sol.coeffs)
    assert sol.dual_objective == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("shrinking", [True, False])
def test_kkt_and_debug(shrinking):
    rng = np.random.default_rng(3)
    qp = random_qp(rng, 200, lower_frac=0.5)
    sol = solve(qp, SolverConfig(tolerance=1e-6, shrinking=shrinking))
    assert sol.converged and kkt_residual(qp, sol.coeffs) <= 1e-6
    dbg = solve(qp, SolverConfig(tolerance=1e-6, debug=True))
    assert dbg.max_objective_rise <= 0.0
    assert np.all(np.diff(dbg.objective_trace) <= 1e-15)
    assert dbg.gradient_drift < 1e-9
    assert sol.dual_objective == pytest.approx(dbg.dual_objective, abs=1e-6)


def test_warm_start_idempotent():
    qp = random_qp(np.random.default_rng(9), 40)
    sol = solve(qp, SolverConfig(tolerance=1e-8))
    again = solve(qp, SolverConfig(tolerance=1e-8), x0=sol.coeffs)
    assert again.iterations == 0
