import numpy as np

from app.exceptions import InvariantViolation


def check_square(nombre: str, matriz: np.ndarray, n: int) -> np.ndarray:
    """Valida que la matriz sea n x n y finita"""
    matriz = np.asarray(matriz, dtype=float)
    if matriz.shape != (n, n):
        raise InvariantViolation(f"{nombre} debe ser {n}x{n}, se recibió {matriz.shape}")
    if not np.all(np.isfinite(matriz)):
        raise InvariantViolation(f"{nombre} tiene valores no finitos")
    return matriz


def check_nonnegative(nombre: str, valores: np.ndarray) -> None:
    if np.any(np.asarray(valores) < 0):
        raise InvariantViolation(f"{nombre} tiene valores negativos")


def check_zero_diagonal(nombre: str, matriz: np.ndarray) -> None:
    if np.any(np.diag(matriz) != 0):
        raise InvariantViolation(f"{nombre} debe tener diagonal cero")


def check_row_complete(P: np.ndarray, Q: np.ndarray, tol: float = 1e-9) -> None:
    """Cada fila de P + Q debe sumar 1"""
    if np.any(P < 0) or np.any(Q < 0) or np.any(P > 1) or np.any(Q > 1):
        raise InvariantViolation("P y Q deben estar en [0, 1]")
    filas = P.sum(axis=1) + Q.sum(axis=1)
    if np.any(np.abs(filas - 1.0) > tol):
        raise InvariantViolation("Las filas de P + Q deben sumar 1")
