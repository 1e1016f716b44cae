from typing import Optional


class AmodError(Exception):
    """
    Error base del sistema.
    Lleva un código de salida y un detalle legible,
    como status_code y detail en una respuesta HTTP.
    """

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(AmodError):
    """Argumentos o configuración inválidos"""
    exit_code = 2


class InvariantViolation(AmodError):
    """Un tipo de dominio no cumple sus invariantes"""


class DomainError(AmodError):
    """Parámetros u observaciones fuera del soporte de una distribución"""


class IngestIOError(AmodError):
    """No se pudo leer la fuente de viajes"""


class FormatError(AmodError):
    """Demasiadas filas malformadas en la fuente de viajes"""


class InsufficientDataError(AmodError):
    """No hay suficientes días históricos"""


class ForecastInputError(AmodError):
    """Ventana de rezagos incompleta o de forma inválida"""


class TrainingDiverged(AmodError):
    """La pérdida de entrenamiento se volvió NaN"""


class InfeasibleSetError(AmodError):
    """El conjunto de incertidumbre es vacío en algún intervalo"""


class NumericalFailure(AmodError):
    """El simplex superó el límite de iteraciones"""

    def __init__(self, detail: str, diagnostics: Optional[dict] = None):
        super().__init__(detail)
        self.diagnostics = diagnostics or {}


class InstanceTooLarge(AmodError):
    """El oráculo min-max solo acepta instancias pequeñas"""
