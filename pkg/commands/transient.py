# File: commands/transient.py
import numpy as np
import pandas as pd

from cli.client import CommandGroup, command
from services.transient_solver import TransientRun, lyapunov_decay_fit, run_transient
from utils.config_utils import RunConfig
from utils.problem_utils import build_problem, initial_concentrations, transient_mesh
from utils.report_utils import RunReport


def trajectory_frame(run: TransientRun) -> pd.DataFrame:
    """Formato longo: uma linha por (t, x)."""
    frames = [
        pd.DataFrame({"t": state.t, "x": state.mesh.nodes, "c1": state.c1, "c2": state.c2, "phi": state.phi})
        for state in run.trajectory
    ]
    return pd.concat(frames, ignore_index=True)


def transient_run(config: RunConfig) -> RunReport:
    problem = build_problem(config.problem)
    settings = config.transient
    mesh = transient_mesh(problem, settings.N, config.solver)
    c1, c2 = initial_concentrations(problem, mesh.nodes, settings.initial, config.seed, config.solver)
    run = run_transient(problem, c1, c2, settings.T, settings.options, mesh)

    report = RunReport(command="transient", config={})
    report.outputs = {
        "final_time": run.final.t,
        "accepted_steps": run.accepted,
        "rejected_steps": run.rejected,
        "invariant_region": run.monitor.summary(),
        "recorded_states": len(run.trajectory),
    }
    report.add_table("trajectory.csv", trajectory_frame(run))

    if run.lyapunov is not None:
        trace = run.lyapunov
        values = np.asarray(trace.values)
        slope, r2 = lyapunov_decay_fit(trace)
        report.outputs["lyapunov"] = {
            "k": trace.k,
            "initial": float(values[0]),
            "final": float(values[-1]),
            "max_increase": float(np.max(np.diff(values), initial=0.0)),
            "decay_slope": slope,
            "decay_r2": r2,
            "final_sup_error": float(max(np.max(np.abs(run.final.c1 - trace.c1_ref)),
                                         np.max(np.abs(run.final.c2 - trace.c2_ref)),
                                         np.max(np.abs(run.final.phi - trace.phi_ref)))),
        }
        report.add_table("lyapunov.csv", pd.DataFrame({"t": trace.times, "L": trace.values}))
    else:
        report.outputs["lyapunov"] = None
    return report


class TransientCommands(CommandGroup):
    @command("transient")
    async def transient(self, config: RunConfig) -> RunReport:
        return await self.client.run_blocking(transient_run, config)


async def setup(client):
    client.add_group(TransientCommands(client))
