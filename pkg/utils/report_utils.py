# File: utils/report_utils.py
"""Relatório de execução e escrita determinística dos arquivos de saída."""
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from utils.config_utils import SETTINGS, VERSION
from utils.errors import OutputError

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
FLUX_UNITS = {
    "J": "fluxo escalado J = Jbar/D (adimensional)",
    "jbar": "densidade de fluxo física Jbar = D J (adimensional)",
}


@dataclass
class RunReport:
    """Saída de um comando: resumo JSON, tabelas CSV e manifesto.

    Tudo que depende do relógio fica isolado em ``timing``.
    """

    command: str
    config: dict
    version: str = VERSION
    status: str = "ok"
    exit_code: int = 0
    outputs: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    error: dict = None
    manifest: list = field(default_factory=list)

    def add_table(self, name: str, frame: pd.DataFrame):
        self.tables[name] = frame

    def summary(self) -> dict:
        data = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "status": self.status,
            "exit_code": self.exit_code,
            "outputs": self.outputs,
            "manifest": self.manifest,
            "timing": self.timing,
        }
        if self.error is not None:
            data["error"] = self.error
        return data

    @classmethod
    def failure(cls, command: str, config: dict, error: Exception, exit_code: int) -> "RunReport":
        return cls(
            command=command,
            config=config,
            status="failed",
            exit_code=exit_code,
            error={"type": type(error).__name__, "message": str(error)},
        )


def to_builtin(value):
    """Converte escalares numpy e não finitos para tipos JSON estáveis."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def flux_block(fluxes, species) -> dict:
    return {
        "J1": fluxes.J1,
        "J2": fluxes.J2,
        "jbar1": fluxes.Jbar1,
        "jbar2": fluxes.Jbar2,
        "current": fluxes.current(species),
        "units": FLUX_UNITS,
    }


def write_outputs(report: RunReport, directory: str) -> list:
    """Escreve as tabelas e o summary.json; devolve o manifesto."""
    float_format = SETTINGS["output"]["csv_float_format"]
    report.manifest = sorted(report.tables) + [SUMMARY_FILE]
    try:
        os.makedirs(directory, exist_ok=True)
        for name in sorted(report.tables):
            path = os.path.join(directory, name)
            report.tables[name].to_csv(path, index=False, float_format=float_format, lineterminator="\n")
        text = json.dumps(to_builtin(report.summary()), indent=2, sort_keys=True, ensure_ascii=False)
        with open(os.path.join(directory, SUMMARY_FILE), "w", encoding="utf8", newline="\n") as f:
            f.write(text + "\n")
    except OSError as e:
        raise OutputError(f"Falha ao escrever saídas em '{directory}': {e}") from e
    logger.info(f"{len(report.manifest)} arquivos escritos em {directory}")
    return report.manifest
