# File: commands/validate.py
import asyncio
import logging
from dataclasses import asdict

import pandas as pd

from cli.client import CommandGroup, command
from services.validation_suite import VALIDATION_CHECKS, run_check
from utils.config_utils import RunConfig
from utils.errors import ValidationError
from utils.report_utils import RunReport

logger = logging.getLogger(__name__)


class ValidateCommands(CommandGroup):
    @command("validate")
    async def validate(self, config: RunConfig) -> RunReport:
        names = sorted(VALIDATION_CHECKS)
        groups = await asyncio.gather(*(self.client.run_blocking(run_check, name, config.seed) for name in names))
        rows = [asdict(result) for group in groups for result in group]
        frame = pd.DataFrame(rows, columns=["check", "value", "threshold", "passed"])

        failed = frame.loc[~frame["passed"], "check"].tolist()
        report = RunReport(command="validate", config={})
        report.outputs = {
            "checks": len(frame),
            "passed": int(frame["passed"].sum()),
            "failed": failed,
        }
        report.add_table("validation.csv", frame)
        if failed:
            logger.warning(f"{len(failed)} verificações reprovadas: {', '.join(failed)}")
            report.status = "failed"
            report.exit_code = ValidationError.exit_code
        return report


async def setup(client):
    client.add_group(ValidateCommands(client))
