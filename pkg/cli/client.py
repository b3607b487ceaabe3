# File: cli/client.py
import asyncio
import importlib
import inspect
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from functools import partial

from utils.config_utils import RunConfig, config_to_dict
from utils.errors import NumericalError, PnpError, ValidationError
from utils.report_utils import RunReport

logger = logging.getLogger(__name__)

COMMANDS_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "commands")


def command(name: str):
    """Marca um método de ``CommandGroup`` como o comando ``name``."""
    def decorator(func):
        func.__command_name__ = name
        return func
    return decorator


class CommandGroup:
    """Grupo de comandos carregado dinamicamente a partir de commands/."""

    def __init__(self, client: "PnpClient"):
        self.client = client


class PnpClient:
    """Registra os grupos de comandos e despacha execuções.

    O trabalho numérico roda em um ThreadPoolExecutor limitado por
    PNP_NUM_THREADS; os handlers são corrotinas.
    """

    def __init__(self, max_workers: int = None):
        if max_workers is None:
            max_workers = int(os.getenv("PNP_NUM_THREADS", "0") or 0) or (os.cpu_count() or 1)
        self.max_workers = max(1, max_workers)
        self.executor = ThreadPoolExecutor(max_workers=self.max_workers)
        self.commands = {}

    async def __aenter__(self):
        return self

    async def __aexit__(self, *exc):
        self.executor.shutdown(wait=True)

    def add_group(self, group: CommandGroup):
        for _, method in inspect.getmembers(group, inspect.ismethod):
            name = getattr(method, "__command_name__", None)
            if name is not None:
                self.commands[name] = method
                logger.debug(f"Comando '{name}' registrado por {type(group).__name__}")

    async def load_extension(self, module_name: str):
        module = importlib.import_module(module_name)
        await module.setup(self)

    async def load_extensions(self):
        # Carrega todos os grupos de comandos presentes na pasta commands/
        for filename in sorted(os.listdir(COMMANDS_DIR)):
            if filename.endswith(".py") and filename != "__init__.py":
                extension = f"commands.{filename[:-3]}"
                await self.load_extension(extension)
                logger.debug(f"Extensão {extension} carregada.")

    async def run_blocking(self, func, *args, **kwargs):
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(self.executor, partial(func, *args, **kwargs))

    async def dispatch(self, name: str, config: RunConfig) -> RunReport:
        """Executa o comando e converte erros conhecidos em relatório de falha."""
        started = datetime.now(timezone.utc).isoformat()
        clock = time.perf_counter()
        echo = config_to_dict(config)
        try:
            handler = self.commands.get(name)
            if handler is None:
                raise ValidationError(f"Comando desconhecido: '{name}'")
            report = await handler(config)
            report.config = echo
        except PnpError as e:
            logger.error(f"Comando '{name}' falhou ({type(e).__name__}): {e}")
            report = RunReport.failure(name, echo, e, e.exit_code)
        except (ArithmeticError, ValueError) as e:
            # LinAlgError é subclasse de ValueError
            error = NumericalError(f"{type(e).__name__}: {e}")
            logger.error(f"Comando '{name}' falhou com erro numérico não tratado: {error}")
            report = RunReport.failure(name, echo, error, error.exit_code)
        report.timing = {"started": started, "elapsed_s": round(time.perf_counter() - clock, 6)}
        return report
