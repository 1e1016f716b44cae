# app/commands/__init__.py
"""
Subcomandos de la CLI. Cada módulo expone register(subparsers) y su cmd_*.
"""
from app.commands import compare, ingest, simulate, train

COMMANDS = [ingest, train, simulate, compare]

__all__ = ["COMMANDS"]
