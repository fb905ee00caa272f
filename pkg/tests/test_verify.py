import numpy as np
import pytest

from hybrid_isaacs.discretize import make_grid
from hybrid_isaacs.solver import SolverConfig, solve
from hybrid_isaacs.verify import (dpp_consistency, isaacs_value_equality, obstacle_chain_check,
                                  operator_probes, post_impulse_strictness, run_all,
                                  two_sided_uniqueness)

from conftest import toy_spec


@pytest.fixture(scope="module")
def solved_impulse(impulse_toy):
    spec, grid_cfg, solver_cfg = impulse_toy
    grid = make_grid(spec, grid_cfg["points"])
    result = solve(spec, grid, SolverConfig(dt=solver_cfg["dt"],
                                            tolerance=solver_cfg["tolerance"]))
    return spec, grid, result


@pytest.fixture(scope="module")
def solved_balanced_loop(balanced_loop):
    spec, grid_cfg, solver_cfg = balanced_loop
    grid = make_grid(spec, grid_cfg["points"])
    result = solve(spec, grid, SolverConfig(tolerance=solver_cfg["tolerance"]))
    return spec, grid, result


# ---------------------------------------------------------------------------
# obstacle chain

def test_chain_holds_on_converged_fields(solved_impulse, solved_balanced_loop):
    for spec, grid, result in (solved_impulse, solved_balanced_loop):
        check = obstacle_chain_check(result.values, spec, grid, tol=1e-9,
                                     tables=result.tables)
        assert check.status == "pass", check.detail
        assert check.measured["max_violation"] <= 1e-9


def test_chain_detects_constructed_violation(solved_balanced_loop):
    spec, grid, result = solved_balanced_loop
    broken = result.values.copy()
    # push one entry above the player-2 switch ceiling
    broken[0, 0, 40] = broken[0, 1, 40] + spec.switch_cost_2[0, 1] + 1.0
    check = obstacle_chain_check(broken, spec, grid, tol=1e-9)
    assert check.status == "fail"
    assert check.measured["max_violation"] >= 0.99


def test_chain_vacuous_without_obstacles():
    spec = toy_spec(f="0", k="1")
    grid = make_grid(spec, 5)
    values = np.full((1, 1, 5), 1.0)
    check = obstacle_chain_check(values, spec, grid)
    assert check.status == "pass"
    assert "inactive" in check.detail


# ---------------------------------------------------------------------------
# post-impulse strictness

def test_strictness_on_impulse_toy(solved_impulse):
    spec, grid, result = solved_impulse
    check = post_impulse_strictness(result.values, spec, grid, tol=1e-6,
                                    tables=result.tables)
    assert check.status == "pass", check.detail
    assert check.measured["margin"] == pytest.approx(0.5)
    assert check.measured["binding_points"] > 0
    assert check.measured["min_post_gap"] >= 0.5 - 1e-6


def test_strictness_not_applicable_without_impulses():
    spec = toy_spec()
    grid = make_grid(spec, 5)
    check = post_impulse_strictness(np.zeros((1, 1, 5)), spec, grid)
    assert check.status == "not-applicable"


def test_strictness_not_applicable_without_matching_sums():
    spec = toy_spec(box=((-2.0, 2.0),), impulses=(([-0.7], 0.5),))
    grid = make_grid(spec, 9)
    check = post_impulse_strictness(np.zeros((1, 1, 9)), spec, grid)
    assert check.status == "not-applicable"


# ---------------------------------------------------------------------------
# saddle-order equality / two-sided agreement

def test_isaacs_equality_on_separated_spec(drift_1d):
    spec, grid_cfg, solver_cfg = drift_1d
    grid = make_grid(spec, 81)
    check = isaacs_value_equality(spec, grid, SolverConfig(tolerance=1e-9), seed=0)
    assert check.status == "pass", check.detail
    assert check.measured["order_gap"] == 0.0
    assert check.measured["value_difference"] <= 1e-12


def test_isaacs_equality_skipped_for_coupled_controls():
    spec = toy_spec(f="u1*u2", k="0.1 + 0.05*x0^2", u1=(-1.0, 1.0), u2=(-1.0, 1.0))
    grid = make_grid(spec, 9)
    check = isaacs_value_equality(spec, grid, SolverConfig(tolerance=1e-8), seed=0)
    assert check.status == "skipped"
    assert check.measured["order_gap"] >= 2.0


def test_isaacs_equality_singleton_controls():
    spec = toy_spec(f="u1*u2 + 0.2", k="0.5 + 0.1*x0^2", u1=(0.7,), u2=(-0.3,))
    grid = make_grid(spec, 9)
    check = isaacs_value_equality(spec, grid, SolverConfig(tolerance=1e-9), seed=0)
    assert check.status == "pass"


def test_two_sided_on_balanced_loop(solved_balanced_loop):
    spec, grid, low = solved_balanced_loop
    check = two_sided_uniqueness(spec, grid, SolverConfig(tolerance=1e-9), low=low)
    assert check.status == "pass", check.detail
    assert check.measured["difference"] <= 1e-8


def test_two_sided_fails_on_noncovergence():
    spec = toy_spec(f="0", k="1", lam=0.5)
    grid = make_grid(spec, 5)
    check = two_sided_uniqueness(spec, grid,
                                 SolverConfig(dt=0.01, tolerance=1e-12, max_iterations=2))
    assert check.status == "fail"


# ---------------------------------------------------------------------------
# operator probes / multi-step consistency

def test_probes_clean_on_obstacle_free_spec():
    spec = toy_spec(f="0.5*u1 - 0.5*u2", k="x0^2 + 0.1*(1 + u1)",
                    u1=(-1.0, 1.0), u2=(-1.0, 1.0))
    grid = make_grid(spec, 5)
    check = operator_probes(spec, grid, trials=100, seed=0)
    assert check.status == "pass", check.detail
    assert check.measured["monotone_violations"] == 0
    assert check.measured["nonexpansive_violations"] == 0
    assert check.measured["contraction_violations"] == 0
    assert check.measured["shift_identity_error"] <= 1e-12


def test_probes_clean_with_obstacles(balanced_loop):
    spec, _, _ = balanced_loop
    grid = make_grid(spec, 5)
    check = operator_probes(spec, grid, trials=50, seed=3)
    assert check.status == "pass", check.detail
    assert "contraction_violations" not in check.measured


def test_probes_deterministic(balanced_loop):
    spec, _, _ = balanced_loop
    grid = make_grid(spec, 5)
    a = operator_probes(spec, grid, trials=20, seed=11)
    b = operator_probes(spec, grid, trials=20, seed=11)
    assert a.measured == b.measured


def test_dpp_consistency_on_solved_fields(solved_impulse, solved_balanced_loop):
    for spec, grid, result in (solved_impulse, solved_balanced_loop):
        check = dpp_consistency(result.values, spec, grid, steps=(1, 10, 100),
                                tables=result.tables)
        assert check.status == "pass", check.detail
        eps = check.measured["one_step_residual"]
        assert check.measured["residual_m1"] <= eps + 1e-16
        assert check.measured["residual_m100"] <= 100 * eps + 1e-10


# ---------------------------------------------------------------------------
# full run

def test_run_all_passes_on_bundled(impulse_toy):
    spec, grid_cfg, solver_cfg = impulse_toy
    grid = make_grid(spec, grid_cfg["points"])
    report = run_all(spec, grid, SolverConfig(dt=solver_cfg["dt"], tolerance=1e-9),
                     seed=0, trials=25)
    assert report.passed, report.to_text()
    names = {c.name for c in report.checks}
    assert {"obstacle-chain", "post-impulse-strictness", "multi-step-consistency",
            "saddle-order-equality", "two-sided-agreement", "operator-probes"} <= names


def test_run_all_suite_filter(constant_cost):
    spec, grid_cfg, solver_cfg = constant_cost
    grid = make_grid(spec, 21)
    report = run_all(spec, grid, SolverConfig(dt=0.5, tolerance=1e-9), suites={"chain"})
    assert [c.name for c in report.checks] == ["obstacle-chain"]


def test_report_serialization_is_diff_stable(constant_cost):
    spec, grid_cfg, solver_cfg = constant_cost
    grid = make_grid(spec, 21)
    config = SolverConfig(dt=0.5, tolerance=1e-9)
    a = run_all(spec, grid, config, seed=5, trials=10)
    b = run_all(spec, grid, config, seed=5, trials=10)
    assert a.to_kv() == b.to_kv()
    assert a.to_text() == b.to_text()
    kv_lines = a.to_kv().splitlines(keepends=True)
    assert kv_lines == sorted(kv_lines)
