# File: utils/problem_utils.py
"""Converte blocos de configuração em objetos do domínio."""
from dataclasses import replace

import numpy as np

from services.bvp_solver import DiscreteSolution, Mesh, SolverOptions, build_layer_mesh, solve_steady_bvp
from services.geometry import ChannelProfile, normalize_volume
from services.problem import SteadyProblem
from utils.config_utils import InitialData, ProblemConfig
from utils.errors import ValidationError


def build_problem(config: ProblemConfig) -> SteadyProblem:
    profile = normalize_volume(config.geometry) if config.normalize else config.geometry
    return SteadyProblem(profile, config.species, config.boundary, config.mu)


def sweep_variant(config: ProblemConfig, axis: str, value: float) -> ProblemConfig:
    """Cópia do problema com o eixo da varredura fixado em ``value``."""
    if axis == "mu":
        if not value > 0:
            raise ValidationError("Valores de mu na varredura devem ser positivos")
        return replace(config, mu=value)
    if axis == "phi0":
        return replace(config, boundary=replace(config.boundary, phi0=value))
    if axis == "bump_amplitude":
        if config.geometry.kind != "bump":
            raise ValidationError("A varredura 'bump_amplitude' exige geometria do tipo 'bump'")
        base, _, width, center = config.geometry.params
        return replace(config, geometry=ChannelProfile.bump(base, value, width, center))
    raise ValidationError(f"Eixo de varredura desconhecido: '{axis}'")


def initial_concentrations(problem: SteadyProblem, nodes: np.ndarray, initial: InitialData, seed: int,
                           solver: SolverOptions = None):
    """Dados iniciais dentro da região 0 <= alpha c <= M."""
    bd, sp = problem.boundary, problem.species
    c1 = bd.l1 + (bd.r1 - bd.l1) * nodes
    c2 = bd.l2 + (bd.r2 - bd.l2) * nodes
    M = max(sp.alpha1 * bd.l1, sp.alpha1 * bd.r1, sp.alpha2 * bd.l2, sp.alpha2 * bd.r2)
    bump = np.sin(np.pi * nodes)

    if initial.kind == "perturbed":
        # perturbação para baixo: a região invariante limita alpha c por M
        c1 = c1 * (1.0 - initial.amplitude * bump)
    elif initial.kind == "random":
        rng = np.random.default_rng(seed)
        shape = np.zeros_like(nodes)
        for mode in range(1, initial.modes + 1):
            shape += rng.uniform(-1.0, 1.0) * np.sin(mode * np.pi * nodes) / mode
        c1 = c1 * (1.0 + initial.amplitude * shape)
        c2 = c2 * (1.0 + initial.amplitude * rng.uniform(-1.0, 1.0) * bump)
    elif initial.kind == "steady":
        solution = steady_reference(problem, nodes, solver)
        c1, c2 = solution.c1.copy(), solution.c2.copy()

    low = 1e-3 * M
    c1 = np.clip(c1, low / sp.alpha1, M / sp.alpha1)
    c2 = np.clip(c2, low / sp.alpha2, M / sp.alpha2)
    return c1, c2


def steady_reference(problem: SteadyProblem, nodes: np.ndarray, solver: SolverOptions = None) -> DiscreteSolution:
    """Solução estacionária na mesma malha da evolução temporal."""
    solver = solver or SolverOptions(N=max(nodes.size - 1, 11))
    return solve_steady_bvp(problem, solver, mesh=Mesh(nodes, "custom"))


def transient_mesh(problem: SteadyProblem, N: int, solver: SolverOptions):
    return build_layer_mesh(N, problem.mu, solver.grading, solver.layer_fraction, solver.layer_width)
