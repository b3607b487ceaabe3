# File: services/validation_suite.py
"""Bateria de verificações numéricas do comando ``validate``.

Cada verificação recebe a semente base e devolve uma ou mais linhas
``CheckResult``; nenhuma depende das outras, então podem rodar em paralelo.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from services.bvp_solver import (
    Mesh,
    SolverOptions,
    build_layer_mesh,
    exact_equal_k_solution,
    extract_fluxes,
    mu_convergence_study,
    solve_steady_bvp,
)
from services.fast_dynamics import (
    FastState,
    eigen_normal,
    fast_field,
    integrate_layer,
    manifold_membership,
    tail_decay_rate,
)
from services.geometry import (
    ChannelProfile,
    WallFunction,
    build_foliation,
    geometry_factor,
    jacobian_products,
    normalize_volume,
    wall_normal_derivative,
)
from services.problem import BoundaryData, IonSpecies, SteadyProblem
from services.steady_asymptotics import direct_flux_quotient, limiting_fluxes, log_ratios, singular_orbit
from services.transient_solver import (
    TransientOptions,
    TransientState,
    invariant_region_bound,
    lyapunov,
    lyapunov_decay_fit,
    poisson_solve,
    run_transient,
)
from utils.errors import PnpError

logger = logging.getLogger(__name__)

UNIT = IonSpecies(1.0, 1.0)


@dataclass(frozen=True)
class CheckResult:
    check: str
    value: float
    threshold: str
    passed: bool


def at_most(check: str, value: float, limit: float) -> CheckResult:
    value = float(value)
    return CheckResult(check, value, f"<= {limit:g}", bool(math.isfinite(value) and value <= limit))


def within(check: str, value: float, low: float, high: float) -> CheckResult:
    value = float(value)
    return CheckResult(check, value, f"in [{low:g}, {high:g}]", bool(low <= value <= high))


def standard_problem(mu: float = 0.0) -> SteadyProblem:
    """h = 1, l = (1, 1), r = (2, 2), phi0 = 0: c = 1 + x, phi = 0, J = -1."""
    return SteadyProblem(ChannelProfile.constant(1.0), UNIT, BoundaryData(0.0, 1.0, 1.0, 2.0, 2.0), mu)


def layered_problem(mu: float = 0.0, phi0: float = 1.0) -> SteadyProblem:
    """Camada à esquerda, lado direito eletroneutro e s = 0."""
    return SteadyProblem(ChannelProfile.constant(1.0), UNIT, BoundaryData(phi0, 4.0, 1.0, 2.0, 2.0), mu)


def _relative(value, reference) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


# --- fluxos limites ---

def check_closed_form_fluxes(seed: int) -> list:
    standard = limiting_fluxes(standard_problem())
    layered = limiting_fluxes(layered_problem())
    target = 2.0 * (1.0 + math.log(2.0))
    return [
        at_most("standard_limit_flux", max(abs(standard.J1 + 1.0), abs(standard.J2 + 1.0)), 1e-12),
        at_most("zero_s_limit_flux", max(_relative(layered.J1, target), _relative(layered.J2, -target)), 1e-12),
    ]


def check_stable_form(seed: int, draws: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, used = 0.0, 0
    while used < draws:
        species = IonSpecies(*rng.uniform(0.5, 3.0, 2))
        boundary = BoundaryData(rng.uniform(-2.0, 2.0), *rng.uniform(0.2, 5.0, 4))
        problem = SteadyProblem(ChannelProfile.constant(1.0), species, boundary)
        if abs(log_ratios(problem).s) <= 1e-3:
            continue
        stable = limiting_fluxes(problem, rho0=1.0)
        direct = direct_flux_quotient(problem, rho0=1.0)
        worst = max(worst, _relative(stable.J1, direct.J1), _relative(stable.J2, direct.J2))
        used += 1
    return at_most("stable_vs_direct_quotient", worst, 1e-10)


def check_scaling_and_reflection(seed: int) -> list:
    rng = np.random.default_rng(seed)
    scaling, reflection = 0.0, 0.0
    for _ in range(20):
        a, b = rng.uniform(0.5, 2.0), rng.uniform(-0.4, 1.0)
        profile = ChannelProfile.affine(a, b)
        boundary = BoundaryData(rng.uniform(-1.0, 1.0), *rng.uniform(0.5, 3.0, 4))
        problem = SteadyProblem(profile, UNIT, boundary)
        base = limiting_fluxes(problem)
        scaled = limiting_fluxes(SteadyProblem(profile.scaled(3.0), UNIT, boundary))
        scaling = max(scaling, _relative(3.0 * scaled.J1, base.J1), _relative(3.0 * scaled.J2, base.J2))

        # canal espelhado x -> 1 - x com o potencial deslocado por -phi0
        mirrored = SteadyProblem(
            ChannelProfile.affine(a + b, -b), UNIT,
            BoundaryData(-boundary.phi0, boundary.r1, boundary.r2, boundary.l1, boundary.l2),
        )
        rho0 = geometry_factor(profile).rho0
        back = limiting_fluxes(mirrored, rho0=rho0)
        scale = max(abs(base.J1), abs(base.J2))
        reflection = max(reflection, abs(back.J1 + base.J1) / scale, abs(back.J2 + base.J2) / scale)
    return [
        at_most("flux_scaling_covariance", scaling, 1e-9),
        at_most("flux_reflection_antisymmetry", reflection, 1e-12),
    ]


def check_normalized_bumps(seed: int, count: int = 100) -> list:
    rng = np.random.default_rng(seed)
    boundary = BoundaryData(0.3, 1.0, 2.0, 3.0, 0.5)
    deficit, products = 0.0, []
    for _ in range(count):
        base = rng.uniform(0.2, 1.0)
        profile = ChannelProfile.bump(base, rng.uniform(-0.9 * base, 2.0), rng.uniform(0.05, 0.5),
                                      rng.uniform(0.2, 0.8))
        profile = normalize_volume(profile)
        rho0 = geometry_factor(profile).rho0
        deficit = max(deficit, 1.0 - rho0)
        products.append(limiting_fluxes(SteadyProblem(profile, UNIT, boundary), rho0).J1 * rho0)
    products = np.asarray(products)
    spread = np.max(np.abs(products - products[0])) / abs(products[0])
    return [
        at_most("normalized_rho0_deficit", max(deficit, 0.0), 1e-10),
        at_most("flux_times_rho0_spread", spread, 1e-12),
    ]


# --- solver estacionário ---

def check_equal_k(seed: int) -> CheckResult:
    species = IonSpecies(1.0, 2.0)
    boundary = BoundaryData(0.7, 2.0, 1.0, 2.0, 1.0)
    worst = 0.0
    for profile in (ChannelProfile.constant(1.0), ChannelProfile.affine(1.0, 1.0),
                    ChannelProfile.bump(1.0, 0.5, 0.2)):
        for mu in (0.1, 0.01):
            problem = SteadyProblem(profile, species, boundary, mu)
            solution = solve_steady_bvp(problem, SolverOptions(N=200))
            phi, c1, c2 = exact_equal_k_solution(problem, solution.mesh.nodes)
            worst = max(worst, np.max(np.abs(solution.phi - phi)), np.max(np.abs(solution.c1 - c1)),
                        np.max(np.abs(solution.c2 - c2)))
    return at_most("equal_k_exact_solution", worst, 1e-6)


def check_standard_bvp(seed: int) -> list:
    solution = solve_steady_bvp(standard_problem(0.005))
    fluxes = extract_fluxes(solution)
    error = max(abs(fluxes.J1 + 1.0), abs(fluxes.J2 + 1.0))
    return [
        at_most("standard_bvp_flux_error", error, 0.02),
        at_most("standard_bvp_flux_spread", solution.flux_spread, 1e-6),
    ]


def composite_gap(problem: SteadyProblem, solution) -> float:
    """Distância sup entre a solução composta e a solução numérica em todos os nós."""
    composite = singular_orbit(problem).composite(solution.mesh.nodes)
    return float(max(np.max(np.abs(composite["phi"] - solution.phi)),
                     np.max(np.abs(composite["c1"] - solution.c1)),
                     np.max(np.abs(composite["c2"] - solution.c2))))


def check_layered_bvp(seed: int) -> list:
    problem = layered_problem(0.01)
    solution = solve_steady_bvp(problem)
    M = 4.0
    excursion = max(-np.min(solution.c1), -np.min(solution.c2),
                    np.max(solution.c1) - M, np.max(solution.c2) - M)
    return [
        at_most("layered_bvp_region_excursion", max(excursion, 0.0), 1e-8),
        at_most("layered_bvp_flux_spread", solution.flux_spread, 1e-6),
        at_most("composite_vs_bvp_sup", composite_gap(problem, solution), 5.0 * problem.mu),
    ]


def check_mu_convergence(seed: int) -> list:
    table = mu_convergence_study(layered_problem(), [0.04, 0.02, 0.01])
    errors = table["rel_err"].to_numpy()
    monotone = bool(np.all(table["status"] == "ok") and np.all(np.diff(errors) < 0))
    return [
        CheckResult("mu_convergence_monotone", float(errors[-1]), "decrescente", monotone),
        within("mu_convergence_order", table["order"].iloc[-1], 0.7, 1.3),
    ]


def check_meshes(seed: int) -> list:
    uniform = build_layer_mesh(10, grading="uniform").nodes
    graded = build_layer_mesh(801, mu=0.01).nodes
    return [
        at_most("uniform_mesh_nodes", np.max(np.abs(uniform - np.arange(11) / 10)), 1e-15),
        CheckResult("layer_mesh_nodes_near_left", float(np.count_nonzero(graded <= 0.08)), ">= 200",
                    bool(np.count_nonzero(graded <= 0.08) >= 200)),
        at_most("layer_mesh_symmetry", np.max(np.abs(graded + graded[::-1] - 1.0)), 1e-14),
    ]


# --- sistema rápido e camadas ---

def check_layers(seed: int) -> list:
    results = []
    cases = (
        ("left", BoundaryData(0.0, 4.0, 1.0, 2.0, 2.0), math.log(2.0)),
        ("right", BoundaryData(0.0, 2.0, 2.0, 1.0, 4.0), -math.log(2.0)),
    )
    for side, boundary, phi_star in cases:
        problem = SteadyProblem(ChannelProfile.constant(1.0), UNIT, boundary)
        orbit = integrate_layer(problem, side)
        target = np.array([phi_star, 0.0, 0.0, 4.0])
        results.append(at_most(f"{side}_layer_landing", np.max(np.abs(orbit.terminal.as_array()[:4] - target)), 1e-6))
        results.append(at_most(f"{side}_layer_integral_drift", np.max(orbit.drift), 1e-8))
        results.append(at_most(f"{side}_layer_tail_rate", abs(tail_decay_rate(orbit) / -2.0 - 1.0), 0.05))
        members = all(
            manifold_membership(FastState.from_array(row), orbit.landing, problem.profile, UNIT)
            for row in orbit.states[:: max(1, len(orbit.states) // 20)]
        )
        off = FastState.from_array(orbit.states[0] + np.array([0.0, 0.0, 0.0, 1e-3, 0.0, 0.0, 0.0]))
        rejected = not manifold_membership(off, orbit.landing, problem.profile, UNIT)
        results.append(CheckResult(f"{side}_layer_membership", float(members and rejected), "== 1",
                                   bool(members and rejected)))
    return results


def check_eigenvectors(seed: int, draws: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    step = 1e-6
    for _ in range(draws):
        species = IonSpecies(*rng.uniform(0.5, 3.0, 2))
        profile = ChannelProfile.constant(rng.uniform(0.3, 3.0))
        equilibrium = FastState(rng.uniform(-1.0, 1.0), 0.0, 0.0, rng.uniform(0.5, 5.0),
                                rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.5)
        base = equilibrium.as_array()
        jac = np.empty((7, 7))
        for j in range(7):
            e = np.zeros(7)
            e[j] = step
            plus = fast_field(FastState.from_array(base + e), profile, species).as_array()
            minus = fast_field(FastState.from_array(base - e), profile, species).as_array()
            jac[:, j] = (plus - minus) / (2.0 * step)
        eig = eigen_normal(equilibrium, species, profile)
        for lam, n in ((eig.lambda_plus, eig.n_plus), (eig.lambda_minus, eig.n_minus)):
            worst = max(worst, np.linalg.norm(jac @ n - lam * n) / np.linalg.norm(lam * n))
    return at_most("eigenvector_linearization", worst, 1e-6)


# --- geometria do domínio fino ---

def check_jacobians(seed: int, draws: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        g = rng.uniform(0.1, 3.0)
        result = jacobian_products(g, rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
        worst = max(worst, abs(result.det_J_inv - g * g) / (g * g))
    return at_most("jacobian_determinant", worst, 1e-13)


def check_foliation(seed: int) -> CheckResult:
    wall = WallFunction.cosine(0.1)
    foliation = build_foliation(lambda X: 1.0 + 0.5 * math.sin(math.pi * X) ** 2, wall)
    worst = max(
        abs(wall_normal_derivative(foliation, X, theta))
        for X in (0.2, 0.5, 0.7) for theta in (0.0, 1.3)
    )
    return at_most("foliation_wall_normal_derivative", worst, 1e-5)


# --- evolução temporal ---

def random_initial_data(problem: SteadyProblem, x: np.ndarray, rng: np.random.Generator, amplitude: float = 0.5):
    """Perfis lineares com perturbação senoidal aleatória, recortados para a região invariante."""
    bd, sp = problem.boundary, problem.species
    M = invariant_region_bound(bd, sp)
    out = []
    for left, right, alpha in ((bd.l1, bd.r1, sp.alpha1), (bd.l2, bd.r2, sp.alpha2)):
        shape = sum(rng.uniform(-1.0, 1.0) * np.sin(m * np.pi * x) / m for m in range(1, 5))
        c = (left + (right - left) * x) * (1.0 + amplitude * shape)
        out.append(np.clip(c, 1e-3 * M / alpha, M / alpha))
    return out


def check_invariant_region(seed: int, runs: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    mesh = Mesh(np.linspace(0.0, 1.0, 51))
    options = TransientOptions(dt0=1e-3)
    worst = 0.0
    for _ in range(runs):
        species = IonSpecies(*rng.choice([1.0, 2.0], 2))
        if rng.uniform() < 0.5:
            profile = ChannelProfile.constant(1.0)
        else:
            profile = ChannelProfile.bump(1.0, rng.uniform(-0.5, 1.0), rng.uniform(0.1, 0.3))
        boundary = BoundaryData(rng.uniform(-1.0, 1.0), *rng.uniform(0.5, 2.0, 4))
        problem = SteadyProblem(profile, species, boundary, 0.1)
        c1, c2 = random_initial_data(problem, mesh.nodes, rng)
        result = run_transient(problem, c1, c2, 0.05, options, mesh)
        monitor = result.monitor
        worst = max(worst, -monitor.min_charge, monitor.max_charge - monitor.M)
    return at_most("transient_invariant_region", max(worst, 0.0), 1e-10)


def check_lyapunov_decay(seed: int) -> list:
    mu = 0.01
    problem = SteadyProblem(ChannelProfile.constant(1.0), UNIT, BoundaryData(1.0, 1.0, 1.0, 1.0, 1.0), mu)
    mesh = build_layer_mesh(200, mu)
    c1 = 1.0 - 0.1 * np.sin(np.pi * mesh.nodes)
    c2 = np.ones_like(c1)
    run = run_transient(problem, c1, c2, 1.5, TransientOptions(dt0=1e-4, dt_max=1e-2), mesh)
    trace = run.lyapunov
    values = np.asarray(trace.values)
    slope, r2 = lyapunov_decay_fit(trace)
    sup = max(np.max(np.abs(run.final.c1 - trace.c1_ref)), np.max(np.abs(run.final.c2 - trace.c2_ref)),
              np.max(np.abs(run.final.phi - trace.phi_ref)))
    return [
        at_most("lyapunov_max_increase", np.max(np.diff(values)), 1e-12),
        at_most("lyapunov_final_value", values[-1], 1e-10),
        CheckResult("lyapunov_decay_slope", slope, "< 0", bool(slope < 0)),
        CheckResult("lyapunov_decay_r2", r2, "> 0.99", bool(r2 > 0.99)),
        at_most("lyapunov_final_sup_error", sup, 1e-5),
    ]


def check_lyapunov_quadrature(seed: int) -> CheckResult:
    nodes = np.linspace(0.0, 1.0, 4001)
    state = TransientState(0.0, Mesh(nodes), 1.0 + 0.1 * np.sin(np.pi * nodes), np.ones_like(nodes),
                           np.zeros_like(nodes))
    value = lyapunov(state, 1.0, ChannelProfile.constant(1.0), UNIT)
    oracle = integrate.quad(lambda x: 0.1 * math.sin(math.pi * x) * math.log1p(0.1 * math.sin(math.pi * x)),
                            0.0, 1.0, epsabs=1e-14)[0]
    return at_most("lyapunov_quadrature", _relative(value, oracle), 1e-6)


def check_poisson_order(seed: int) -> CheckResult:
    phi0, lam = 0.4, 100.0
    profile = ChannelProfile.constant(1.0)
    errors, sizes = [], (20, 40, 80)
    for N in sizes:
        mesh = Mesh(np.linspace(0.0, 1.0, N + 1))
        x = mesh.nodes
        c2 = np.ones_like(x)
        c1 = c2 + math.pi**2 * np.sin(math.pi * x) / lam
        phi = poisson_solve(c1, c2, mesh, profile, UNIT, lam, phi0)
        errors.append(np.max(np.abs(phi - (np.sin(math.pi * x) + phi0 * (1.0 - x)))))
    order = math.log(errors[-2] / errors[-1]) / math.log(2.0)
    return within("poisson_manufactured_order", order, 1.8, 2.2)


VALIDATION_CHECKS = {
    "closed_form_fluxes": check_closed_form_fluxes,
    "stable_form": check_stable_form,
    "scaling_and_reflection": check_scaling_and_reflection,
    "normalized_bumps": check_normalized_bumps,
    "equal_k": check_equal_k,
    "standard_bvp": check_standard_bvp,
    "layered_bvp": check_layered_bvp,
    "mu_convergence": check_mu_convergence,
    "meshes": check_meshes,
    "layers": check_layers,
    "eigenvectors": check_eigenvectors,
    "jacobians": check_jacobians,
    "foliation": check_foliation,
    "invariant_region": check_invariant_region,
    "lyapunov_decay": check_lyapunov_decay,
    "lyapunov_quadrature": check_lyapunov_quadrature,
    "poisson_order": check_poisson_order,
}


def run_check(name: str, seed: int) -> list:
    """Executa uma verificação; erros do domínio viram uma linha reprovada."""
    try:
        result = VALIDATION_CHECKS[name](seed)
    except PnpError as e:
        logger.error(f"Verificação '{name}' falhou com {type(e).__name__}: {e}")
        return [CheckResult(name, math.nan, type(e).__name__, False)]
    return result if isinstance(result, list) else [result]
