# File: commands/layers.py
import math
from dataclasses import asdict

import numpy as np
import pandas as pd

from cli.client import CommandGroup, command
from services.fast_dynamics import LayerOrbit, integral_values, integrate_layer, tail_decay_rate
from services.steady_asymptotics import boundary_layer_endpoint
from utils.config_utils import RunConfig
from utils.problem_utils import build_problem
from utils.report_utils import RunReport

LAYER_COLUMNS = ["xi", "phi", "u", "v", "w", "H1", "H2", "H3"]


def orbit_frame(orbit: LayerOrbit, species) -> pd.DataFrame:
    s = orbit.states
    H1, H2, H3 = integral_values(s[:, 0], s[:, 1], s[:, 2], s[:, 3], orbit.h_side,
                                  species.alpha1, species.alpha2)
    return pd.DataFrame({
        "xi": orbit.xi, "phi": s[:, 0], "u": s[:, 1], "v": s[:, 2], "w": s[:, 3],
        "H1": H1, "H2": H2, "H3": H3,
    }, columns=LAYER_COLUMNS)


def layers_run(config: RunConfig) -> RunReport:
    problem = build_problem(config.problem)
    report = RunReport(command="layers", config={})
    for side in ("left", "right"):
        endpoint = boundary_layer_endpoint(problem, side)
        orbit = integrate_layer(problem, side, config.layers.xi_max, config.layers.tol, config.layers.xi_span)
        gap = orbit.terminal.as_array()[:4] - orbit.landing.as_array()[:4]
        report.outputs[side] = {
            "endpoint": asdict(endpoint),
            "terminal": asdict(orbit.terminal),
            "landing": asdict(orbit.landing),
            "terminal_error": float(np.max(np.abs(gap))),
            "integral_drift": {"H1": orbit.drift[0], "H2": orbit.drift[1], "H3": orbit.drift[2]},
            "tail_decay_rate": tail_decay_rate(orbit) if endpoint.has_layer else None,
            "expected_decay_rate": -math.sqrt(endpoint.w_limit),
            "samples": int(orbit.xi.size),
        }
        report.add_table(f"{side}_layer.csv", orbit_frame(orbit, problem.species))
    return report


class LayersCommands(CommandGroup):
    @command("layers")
    async def layers(self, config: RunConfig) -> RunReport:
        return await self.client.run_blocking(layers_run, config)


async def setup(client):
    client.add_group(LayersCommands(client))
