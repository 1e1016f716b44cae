# app/models/__init__.py
"""
Importar todos los modelos aquí para que SQLAlchemy los conozca.
"""

from app.models.run_record import RunRecord

__all__ = [
    "RunRecord",
]
