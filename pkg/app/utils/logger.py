import logging
import sys

_FORMATO = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: str = "INFO") -> None:
    """Configura el logger raíz una sola vez (lo llama la CLI)"""
    raiz = logging.getLogger("app")
    if not raiz.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMATO))
        raiz.addHandler(handler)
    raiz.setLevel(level.upper())


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
