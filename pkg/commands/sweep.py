# File: commands/sweep.py
import asyncio
import logging
import math

import numpy as np
import pandas as pd

from cli.client import CommandGroup, command
from services.bvp_solver import extract_fluxes, solve_steady_bvp
from services.geometry import geometry_factor
from services.steady_asymptotics import limiting_fluxes
from utils.config_utils import RunConfig
from utils.errors import PnpError, ValidationError
from utils.problem_utils import build_problem, sweep_variant
from utils.report_utils import RunReport

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["value", "seed", "status", "rho0", "J1", "J2", "jbar1", "jbar2", "current"]
BVP_COLUMNS = ["J1_num", "J2_num", "rel_err"]


def point_seeds(seed: int, count: int) -> list:
    """Sementes independentes por ponto, derivadas da semente base."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def sweep_point(config: RunConfig, value: float, seed: int) -> dict:
    """Avalia um ponto; falhas numéricas viram linha com status do erro."""
    row = {"value": value, "seed": seed, "status": "ok"}
    row.update({name: math.nan for name in SWEEP_COLUMNS[3:] + BVP_COLUMNS})
    try:
        problem = build_problem(sweep_variant(config.problem, config.sweep.axis, value))
        limit = limiting_fluxes(problem)
        row.update(
            rho0=geometry_factor(problem.profile).rho0,
            J1=limit.J1, J2=limit.J2, jbar1=limit.Jbar1, jbar2=limit.Jbar2,
            current=limit.current(problem.species),
        )
        if config.sweep.method == "bvp":
            numeric = extract_fluxes(solve_steady_bvp(problem, config.solver))
            scale = max(abs(limit.J1), abs(limit.J2), 1e-300)
            row.update(
                J1_num=numeric.J1, J2_num=numeric.J2,
                rel_err=max(abs(numeric.J1 - limit.J1), abs(numeric.J2 - limit.J2)) / scale,
            )
    except ValidationError:
        raise
    except PnpError as e:
        logger.warning(f"Ponto {config.sweep.axis}={value:g} falhou: {e}")
        row["status"] = type(e).__name__
    return row


class SweepCommands(CommandGroup):
    @command("sweep")
    async def sweep(self, config: RunConfig) -> RunReport:
        if config.sweep.axis is None or not config.sweep.values:
            raise ValidationError("O comando 'sweep' exige 'sweep.axis' e 'sweep.values'")
        values = config.sweep.values
        seeds = point_seeds(config.seed, len(values))
        rows = await asyncio.gather(*(
            self.client.run_blocking(sweep_point, config, value, seed) for value, seed in zip(values, seeds)
        ))

        columns = SWEEP_COLUMNS + (BVP_COLUMNS if config.sweep.method == "bvp" else [])
        frame = pd.DataFrame(rows)[columns]
        failed = int((frame["status"] != "ok").sum())
        report = RunReport(command="sweep", config={})
        report.outputs = {
            "axis": config.sweep.axis,
            "method": config.sweep.method,
            "points": len(values),
            "failed_points": failed,
        }
        report.add_table("sweep.csv", frame)
        return report


async def setup(client):
    client.add_group(SweepCommands(client))
