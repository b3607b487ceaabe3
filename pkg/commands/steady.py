# File: commands/steady.py
import logging
from dataclasses import asdict

import pandas as pd

from cli.client import CommandGroup, command
from services.bvp_solver import build_layer_mesh, extract_fluxes, solve_steady_bvp
from services.geometry import geometry_factor
from services.steady_asymptotics import limiting_fluxes, log_ratios, singular_orbit
from utils.config_utils import SETTINGS, RunConfig
from utils.problem_utils import build_problem
from utils.report_utils import RunReport, flux_block

logger = logging.getLogger(__name__)


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference) if reference != 0 else abs(value)


def steady_asymptotic_run(config: RunConfig) -> RunReport:
    """Fluxos limites, pontos de pouso, camada regular e aproximação composta."""
    problem = build_problem(config.problem)
    summary = geometry_factor(problem.profile)
    orbit = singular_orbit(problem, config.layers.xi_max, config.layers.tol, config.layers.xi_span)
    report = RunReport(command="steady-asymptotic", config={})
    report.outputs = {
        "geometry": asdict(summary),
        "log_ratios": asdict(log_ratios(problem)),
        "fluxes": flux_block(orbit.fluxes, problem.species),
        "endpoints": {"left": asdict(orbit.left), "right": asdict(orbit.right)},
        "mu": problem.mu,
    }

    points = int(SETTINGS["output"]["profile_points"])
    x = [i / (points - 1) for i in range(points)]
    report.add_table("regular_layer.csv", pd.DataFrame(orbit.regular.profile_table(x),
                                                       columns=["x", "phi", "c1", "c2", "w", "p"]))
    nodes = build_layer_mesh(points - 1, problem.mu, "tanh").nodes
    report.add_table("composite.csv", pd.DataFrame(orbit.composite(nodes), columns=["x", "phi", "c1", "c2"]))
    return report


def steady_bvp_run(config: RunConfig) -> RunReport:
    """Solução numérica com mu finito e comparação com os fluxos limites."""
    problem = build_problem(config.problem)
    solution = solve_steady_bvp(problem, config.solver)
    numeric = extract_fluxes(solution)
    limit = limiting_fluxes(problem)
    report = RunReport(command="steady-bvp", config={})
    report.outputs = {
        "fluxes": flux_block(numeric, problem.species),
        "limiting_fluxes": flux_block(limit, problem.species),
        "relative_error": {
            "J1": _relative(numeric.J1, limit.J1),
            "J2": _relative(numeric.J2, limit.J2),
        },
        "solver": {
            "N": solution.mesh.N,
            "mu": solution.mu,
            "converged": solution.converged,
            "residual": solution.residual,
            "iterations": solution.iterations,
            "flux_spread": solution.flux_spread,
            "stages": solution.stages,
        },
    }
    report.add_table("solution.csv", pd.DataFrame({
        "x": solution.mesh.nodes, "phi": solution.phi, "c1": solution.c1, "c2": solution.c2,
    }))
    return report


class SteadyCommands(CommandGroup):
    @command("steady-asymptotic")
    async def steady_asymptotic(self, config: RunConfig) -> RunReport:
        return await self.client.run_blocking(steady_asymptotic_run, config)

    @command("steady-bvp")
    async def steady_bvp(self, config: RunConfig) -> RunReport:
        return await self.client.run_blocking(steady_bvp_run, config)


async def setup(client):
    client.add_group(SteadyCommands(client))
