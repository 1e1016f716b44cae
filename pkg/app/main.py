import argparse
import sys
from typing import List, Optional

from app.commands import COMMANDS
from app.config import settings
from app.exceptions import AmodError
from app.utils.logger import configure_logging, get_logger

logger = get_logger("app.main")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amod-rebalance",
        description=f"{settings.PROJECT_NAME} v{settings.VERSION}",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING o ERROR")
    subparsers = parser.add_subparsers(dest="command", metavar="<comando>")
    subparsers.required = True

    # Registrar subcomandos
    for comando in COMMANDS:
        comando.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Punto de entrada. Códigos de salida: 0 éxito, 1 falla, 2 error de uso.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help sale con 0 y los errores de argparse con 2
        return int(e.code or 0)

    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except AmodError as e:
        logger.error("%s: %s", type(e).__name__, e.detail)
        return e.exit_code
    except Exception as e:
        logger.exception("Error inesperado: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
