# File: tests/test_bvp_solver.py
import math

import numpy as np
import pytest

from services.bvp_solver import (
    DiscreteSolution,
    Mesh,
    SolverOptions,
    build_layer_mesh,
    continuation_schedule,
    exact_equal_k_solution,
    extract_fluxes,
    mu_convergence_study,
    solve_steady_bvp,
)
from services.geometry import ChannelProfile
from services.problem import BoundaryData, IonSpecies, SteadyProblem
from utils.errors import BadParameters, InvalidProblem, NotConverged


def test_uniform_mesh():
    mesh = build_layer_mesh(10, grading="uniform")
    np.testing.assert_allclose(mesh.nodes, np.arange(11) / 10, atol=1e-15)
    assert mesh.N == 10


def test_layer_mesh_concentrates_nodes():
    mesh = build_layer_mesh(801, mu=0.01)
    nodes = mesh.nodes
    assert np.count_nonzero(nodes <= 0.08) >= 200
    assert np.count_nonzero(nodes >= 0.92) >= 200
    assert np.max(np.abs(nodes + nodes[::-1] - 1.0)) <= 1e-14
    assert np.all(np.diff(nodes) > 0)
    assert mesh.layer_width == pytest.approx(0.08)


def test_mesh_validation():
    with pytest.raises(BadParameters):
        build_layer_mesh(9)
    with pytest.raises(BadParameters):
        build_layer_mesh(100, mu=0.0)
    with pytest.raises(BadParameters):
        build_layer_mesh(100, mu=0.01, grading="cosine")
    with pytest.raises(BadParameters):
        Mesh(np.array([0.0, 0.6, 0.5, 1.0]))
    with pytest.raises(BadParameters):
        SolverOptions(N=10)
    with pytest.raises(BadParameters):
        SolverOptions(continuation_ratio=1.0)


def test_continuation_schedule():
    schedule = continuation_schedule(0.01, 0.5, 0.5)
    assert schedule[0] == 0.5
    assert schedule[-1] == 0.01
    assert all(b < a for a, b in zip(schedule, schedule[1:]))
    assert continuation_schedule(0.8, 0.5, 0.5) == [0.8]


def test_standard_problem_flux(standard_problem):
    solution = solve_steady_bvp(standard_problem.with_mu(0.005))
    fluxes = extract_fluxes(solution)
    assert fluxes.J1 == pytest.approx(-1.0, rel=0.02)
    assert fluxes.J2 == pytest.approx(-1.0, rel=0.02)
    assert solution.converged
    assert solution.flux_spread < 1e-6
    assert all(stage["iterations"] <= 50 for stage in solution.stages)
    np.testing.assert_allclose(solution.c1, 1.0 + solution.mesh.nodes, atol=1e-6)


@pytest.mark.parametrize("profile", [
    ChannelProfile.constant(1.0),
    ChannelProfile.affine(1.0, 1.0),
    ChannelProfile.bump(1.0, 0.5, 0.2),
])
@pytest.mark.parametrize("mu", [0.1, 0.01])
def test_equal_k_solution_is_exact(profile, mu):
    problem = SteadyProblem(profile, IonSpecies(1.0, 2.0), BoundaryData(0.7, 2.0, 1.0, 2.0, 1.0), mu)
    solution = solve_steady_bvp(problem, SolverOptions(N=200))
    phi, c1, c2 = exact_equal_k_solution(problem, solution.mesh.nodes)
    np.testing.assert_allclose(solution.phi, phi, atol=1e-6)
    np.testing.assert_allclose(solution.c1, c1, atol=1e-6)
    np.testing.assert_allclose(solution.c2, c2, atol=1e-6)


def test_exact_equal_k_requires_common_charge(standard_problem):
    with pytest.raises(InvalidProblem):
        exact_equal_k_solution(standard_problem, np.linspace(0.0, 1.0, 5))


def test_layered_solution_respects_invariant_region(layered_problem):
    solution = solve_steady_bvp(layered_problem.with_mu(0.01))
    assert np.min(solution.c1) > 0 and np.min(solution.c2) > 0
    assert max(np.max(solution.c1), np.max(solution.c2)) <= 4.0 + 1e-8
    limit = 2.0 * (1.0 + math.log(2.0))
    assert extract_fluxes(solution).J1 == pytest.approx(limit, rel=5 * 0.01)


def test_mu_convergence_on_layered_problem(layered_problem):
    table = mu_convergence_study(layered_problem, [0.04, 0.02, 0.01])
    assert list(table.columns) == ["mu", "J1_num", "J2_num", "rel_err", "order", "status"]
    assert (table["status"] == "ok").all()
    errors = table["rel_err"].to_numpy()
    assert np.all(np.diff(errors) < 0)
    assert 0.7 <= table["order"].iloc[-1] <= 1.3
    assert math.isnan(table["order"].iloc[0])


def test_mu_convergence_rejects_bad_lists(layered_problem):
    with pytest.raises(BadParameters):
        mu_convergence_study(layered_problem, [0.01, 0.02])
    with pytest.raises(BadParameters):
        mu_convergence_study(layered_problem, [0.02, 0.0])


def test_solver_requires_positive_mu(standard_problem):
    with pytest.raises(InvalidProblem):
        solve_steady_bvp(standard_problem)


def test_extract_fluxes_requires_convergence(unit_species):
    nodes = np.linspace(0.0, 1.0, 3)
    solution = DiscreteSolution(
        mesh=Mesh(nodes), phi=np.zeros(3), c1=np.ones(3), c2=np.ones(3), J1_cell=np.zeros(2),
        J2_cell=np.zeros(2), converged=False, residual=1.0, iterations=50, mu=0.1, species=unit_species,
    )
    with pytest.raises(NotConverged):
        extract_fluxes(solution)


def test_mesh_refinement_leaves_fluxes_unchanged(standard_problem):
    problem = standard_problem.with_mu(0.01)
    coarse = extract_fluxes(solve_steady_bvp(problem, SolverOptions(N=400)))
    fine = extract_fluxes(solve_steady_bvp(problem, SolverOptions(N=800)))
    assert fine.J1 == pytest.approx(coarse.J1, rel=1e-3)
    assert fine.J2 == pytest.approx(coarse.J2, rel=1e-3)
    assert fine.J1 == pytest.approx(-1.0, rel=1e-3)
