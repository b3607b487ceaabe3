# File: tests/test_validation_suite.py
import math

import pytest

from services import validation_suite
from services.validation_suite import (
    CheckResult,
    at_most,
    check_closed_form_fluxes,
    check_jacobians,
    check_layered_bvp,
    check_lyapunov_quadrature,
    check_mu_convergence,
    check_normalized_bumps,
    check_poisson_order,
    check_scaling_and_reflection,
    check_stable_form,
    run_check,
    within,
)
from utils.errors import NotConverged


def test_threshold_helpers():
    assert at_most("a", 1e-12, 1e-10).passed
    assert not at_most("a", math.nan, 1e-10).passed
    assert within("b", 2.0, 1.8, 2.2) == CheckResult("b", 2.0, "in [1.8, 2.2]", True)


@pytest.mark.parametrize("check", [
    check_closed_form_fluxes,
    check_scaling_and_reflection,
    check_lyapunov_quadrature,
    check_mu_convergence,
    check_poisson_order,
])
def test_cheap_checks_pass(check):
    results = check(seed=0)
    results = results if isinstance(results, list) else [results]
    assert all(result.passed for result in results), results


def test_sampled_checks_pass_with_fewer_draws():
    assert check_stable_form(seed=1, draws=100).passed
    assert check_jacobians(seed=1, draws=50).passed
    assert all(result.passed for result in check_normalized_bumps(seed=1, count=10))


def test_run_check_turns_domain_errors_into_failed_rows(monkeypatch):
    def broken(seed):
        raise NotConverged("sem convergência")

    monkeypatch.setitem(validation_suite.VALIDATION_CHECKS, "broken", broken)
    [row] = run_check("broken", 0)
    assert row.check == "broken"
    assert row.threshold == "NotConverged"
    assert not row.passed
    assert run_check("closed_form_fluxes", 0)[0].passed


def test_layered_checks_use_sup_norm_and_order_window():
    layered = {row.check: row for row in check_layered_bvp(seed=0)}
    assert layered["composite_vs_bvp_sup"].threshold == "<= 0.05"
    assert layered["composite_vs_bvp_sup"].passed
    order = {row.check: row for row in check_mu_convergence(seed=0)}["mu_convergence_order"]
    assert order.threshold == "in [0.7, 1.3]"
    assert order.passed
