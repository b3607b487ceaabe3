# File: cli/main.py
import argparse
import asyncio
import logging
import os
import sys

from dotenv import load_dotenv

# Adiciona a raiz do projeto ao sys.path para que 'commands' e 'services' sejam encontrados
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from cli.client import PnpClient  # noqa: E402
from utils.config_utils import parse_config, with_overrides  # noqa: E402
from utils.errors import OutputError, PnpError  # noqa: E402
from utils.report_utils import write_outputs  # noqa: E402

COMMANDS = ("steady-asymptotic", "steady-bvp", "layers", "transient", "sweep", "validate")

logger = logging.getLogger("pnp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnp",
        description="Sistema PNP unidimensional limite para canais tubulares estreitos.",
    )
    parser.add_argument("command", choices=COMMANDS, help="comando a executar")
    parser.add_argument("--config", required=True, help="arquivo JSON de configuração")
    parser.add_argument("--out", default=None, help="diretório de saída (sobrepõe output_dir)")
    parser.add_argument("--seed", type=int, default=None, help="semente base (sobrepõe seed)")
    return parser


def configure_logging():
    level = os.getenv("PNP_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=level, format="[%(levelname)s] %(name)s: %(message)s")


async def main(argv=None) -> int:
    load_dotenv()  # Carrega as variáveis do .env
    configure_logging()
    args = build_parser().parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf8") as f:
            text = f.read()
    except OSError as e:
        logger.error(f"Não foi possível ler a configuração '{args.config}': {e}")
        return OutputError.exit_code
    try:
        config = with_overrides(parse_config(text), args.out, args.seed)
    except PnpError as e:
        logger.error(f"Configuração inválida: {e}")
        return e.exit_code

    async with PnpClient() as client:
        await client.load_extensions()
        report = await client.dispatch(args.command, config)

    try:
        write_outputs(report, config.output_dir)
    except OutputError as e:
        logger.error(str(e))
        return e.exit_code
    if report.exit_code == 0:
        logger.info(f"Comando '{args.command}' concluído: saídas em {config.output_dir}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
