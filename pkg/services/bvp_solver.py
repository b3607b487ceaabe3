# File: services/bvp_solver.py
"""Solver do problema estacionário com mu > 0 em malha graduada nas camadas.

Newton amortecido sobre o sistema de volumes finitos completo, com
continuação geométrica em mu a partir de ``mu_start``.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from services.finite_volume import CellGeometry, PnpSystem, newton_solve
from services.geometry import inverse_area_integral
from services.problem import SteadyProblem
from services.steady_asymptotics import FluxPair, limiting_fluxes, singular_orbit
from utils.errors import BadParameters, InvalidProblem, NonConvergence, NotConverged

logger = logging.getLogger(__name__)

GRADINGS = ("uniform", "tanh")
_STRETCH = 2.0


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    grading: str = "uniform"
    layer_width: float = 0.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.size < 2 or nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise BadParameters("A malha deve ser estritamente crescente de 0 a 1")
        object.__setattr__(self, "nodes", nodes)

    @property
    def N(self) -> int:
        return self.nodes.size - 1


def build_layer_mesh(N: int, mu: float = 0.0, grading: str = "tanh",
                     fraction: float = 0.5, width: float = 8.0) -> Mesh:
    """Malha com ``fraction`` dos nós a até ``width * mu`` das extremidades."""
    if N < 10:
        raise BadParameters(f"N deve ser >= 10 (recebido {N})")
    if grading not in GRADINGS:
        raise BadParameters(f"Graduação desconhecida: '{grading}'")
    if grading == "uniform":
        return Mesh(np.arange(N + 1) / N, "uniform", 0.0)
    if not mu > 0:
        raise BadParameters("A malha graduada exige mu > 0")
    if not 0 < fraction < 1:
        raise BadParameters("fraction deve estar em (0, 1)")

    q = fraction / 2.0
    sigma = min(width * mu, q)
    k = np.arange(N + 1)
    t = np.minimum(k, N - k) / N
    inside = t <= q
    x = np.empty(N + 1)
    ratio = np.tanh(_STRETCH * (1.0 - t[inside] / q)) / math.tanh(_STRETCH)
    x[inside] = sigma * (1.0 - ratio)
    x[~inside] = sigma + (t[~inside] - q) * (1.0 - 2.0 * sigma) / (1.0 - 2.0 * q)
    nodes = np.where(k <= N - k, x, 1.0 - x)
    nodes[0], nodes[-1] = 0.0, 1.0
    return Mesh(nodes, "tanh", sigma)


@dataclass(frozen=True)
class SolverOptions:
    N: int = 801
    newton_tol: float = 1e-10
    max_newton: int = 50
    min_damping: float = 2.0**-20
    mu_start: float = 0.5
    continuation_ratio: float = 0.5
    initial_guess: str = "linear"
    grading: str = "tanh"
    layer_fraction: float = 0.5
    layer_width: float = 8.0

    def __post_init__(self):
        if self.N < 11:
            raise BadParameters(f"N deve ser >= 11 (recebido {self.N})")
        for name in ("newton_tol", "max_newton", "min_damping", "mu_start", "layer_width"):
            if not getattr(self, name) > 0:
                raise BadParameters(f"{name} deve ser positivo")
        if not 0 < self.continuation_ratio < 1:
            raise BadParameters("continuation_ratio deve estar em (0, 1)")
        if self.initial_guess not in ("linear", "composite"):
            raise BadParameters(f"initial_guess desconhecido: '{self.initial_guess}'")
        if self.grading not in GRADINGS:
            raise BadParameters(f"Graduação desconhecida: '{self.grading}'")


@dataclass(eq=False)
class DiscreteSolution:
    mesh: Mesh
    phi: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    J1_cell: np.ndarray
    J2_cell: np.ndarray
    converged: bool
    residual: float
    iterations: int
    mu: float
    species: object
    stages: list = field(default_factory=list)

    @property
    def flux_spread(self) -> float:
        spreads = []
        for J in (self.J1_cell, self.J2_cell):
            mean = np.mean(J)
            spreads.append(np.max(np.abs(J - mean)) / max(abs(mean), 1e-12))
        return float(max(spreads))


def continuation_schedule(mu: float, mu_start: float, ratio: float) -> list:
    schedule = []
    value = mu_start
    while value > mu * (1.0 + 1e-12):
        schedule.append(value)
        value *= ratio
    schedule.append(mu)
    return schedule


def _initial_guess(problem: SteadyProblem, nodes: np.ndarray, mode: str):
    bd = problem.boundary
    if mode == "composite":
        fields = singular_orbit(problem).composite(nodes)
        phi, c1, c2 = fields["phi"], fields["c1"], fields["c2"]
        if np.all(c1 > 0) and np.all(c2 > 0):
            return phi, c1, c2
        logger.warning("Aproximação composta com concentração não positiva; usando chute linear")
    phi = bd.phi0 * (1.0 - nodes)
    c1 = bd.l1 + (bd.r1 - bd.l1) * nodes
    c2 = bd.l2 + (bd.r2 - bd.l2) * nodes
    return phi, c1, c2


def solve_steady_bvp(problem: SteadyProblem, options: SolverOptions = None, mesh: Mesh = None) -> DiscreteSolution:
    """Resolve o problema estacionário em mu = problem.mu por continuação."""
    options = options or SolverOptions()
    if not problem.mu > 0:
        raise InvalidProblem("solve_steady_bvp exige mu > 0")
    if mesh is None:
        mesh = build_layer_mesh(options.N, problem.mu, options.grading,
                                options.layer_fraction, options.layer_width)
    geometry = CellGeometry.build(mesh.nodes, problem.profile)

    phi, c1, c2 = _initial_guess(problem, mesh.nodes, options.initial_guess)
    schedule = continuation_schedule(problem.mu, options.mu_start, options.continuation_ratio)
    if options.initial_guess == "composite":
        schedule = [problem.mu]

    stages = []
    x = None
    residual, total = math.inf, 0
    for mu in schedule:
        system = PnpSystem(geometry, problem.species, problem.boundary, mu)
        if x is None:
            x = system.pack(phi, c1, c2)
        try:
            x, residual, its = newton_solve(
                system, x, options.newton_tol, options.max_newton, options.min_damping,
                label=f" (mu={mu:.4g})",
            )
        except NonConvergence as e:
            logger.warning(f"Continuação parou em mu={mu:.4g}: {e}")
            raise
        total += its
        stages.append({"mu": mu, "iterations": its, "residual": residual})
        logger.info(f"Estágio mu={mu:.4g}: {its} iterações, resíduo {residual:.2e}")

    phi, c1, c2 = system.expand(x)
    J1, J2 = system.fluxes(phi, c1, c2)
    return DiscreteSolution(
        mesh=mesh, phi=phi, c1=c1, c2=c2, J1_cell=J1, J2_cell=J2,
        converged=residual <= options.newton_tol, residual=residual, iterations=total,
        mu=problem.mu, species=problem.species, stages=stages,
    )


def extract_fluxes(solution: DiscreteSolution) -> FluxPair:
    if not solution.converged:
        raise NotConverged("A solução discreta não convergiu; fluxos indisponíveis")
    return FluxPair.from_scaled(float(np.mean(solution.J1_cell)), float(np.mean(solution.J2_cell)),
                                solution.species)


def exact_equal_k_solution(problem: SteadyProblem, nodes: np.ndarray):
    """(phi, c1, c2) exatos quando alpha1 l1 = alpha2 l2 = alpha1 r1 = alpha2 r2 = k."""
    k = problem.boundary.is_equal_k(problem.species)
    if k is None:
        raise InvalidProblem("Os dados de contorno não têm carga comum k")
    I = inverse_area_integral(problem.profile, nodes)
    rho0 = I[-1]
    phi = problem.boundary.phi0 * (rho0 - I) / rho0
    c1 = np.full_like(phi, k / problem.species.alpha1)
    c2 = np.full_like(phi, k / problem.species.alpha2)
    return phi, c1, c2


def _relative_error(value: float, reference: float) -> float:
    if reference == 0.0:
        return abs(value)
    return abs(value - reference) / abs(reference)


def mu_convergence_study(problem: SteadyProblem, mu_list, options: SolverOptions = None) -> pd.DataFrame:
    """Fluxos numéricos por mu contra os limites; ordem empírica entre linhas vizinhas."""
    mu_list = [float(m) for m in mu_list]
    if any(m <= 0 for m in mu_list) or any(b >= a for a, b in zip(mu_list, mu_list[1:])):
        raise BadParameters("mu_list deve ser positiva e estritamente decrescente")
    reference = limiting_fluxes(problem)
    rows = []
    for mu in mu_list:
        row = {"mu": mu, "J1_num": np.nan, "J2_num": np.nan, "rel_err": np.nan, "order": np.nan,
               "status": "ok"}
        try:
            numeric = extract_fluxes(solve_steady_bvp(problem.with_mu(mu), options))
        except (NonConvergence, NotConverged) as e:
            logger.warning(f"mu={mu:g} falhou: {e}")
            row["status"] = "failed"
            rows.append(row)
            continue
        row["J1_num"], row["J2_num"] = numeric.J1, numeric.J2
        row["rel_err"] = max(_relative_error(numeric.J1, reference.J1),
                             _relative_error(numeric.J2, reference.J2))
        rows.append(row)

    for prev, cur in zip(rows, rows[1:]):
        if prev["status"] == cur["status"] == "ok" and prev["rel_err"] > 0 and cur["rel_err"] > 0:
            cur["order"] = math.log(prev["rel_err"] / cur["rel_err"]) / math.log(prev["mu"] / cur["mu"])
    return pd.DataFrame(rows, columns=["mu", "J1_num", "J2_num", "rel_err", "order", "status"])
