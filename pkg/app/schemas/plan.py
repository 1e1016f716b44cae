from typing import Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.exceptions import InvariantViolation
from app.schemas.demand import TransitionMatrices
from app.schemas.network import TimeGrid, ZoneNetwork
from app.schemas.uncertainty import UncertaintySet


class MivrInstance(BaseModel):
    """
    Instancia del modelo de rebalanceo con matching integrado.
    demand es (n, κ) para la versión determinista; uncertainty para la robusta.
    """
    net: ZoneNetwork
    grid: TimeGrid
    V0: np.ndarray
    O0: np.ndarray
    transitions: TransitionMatrices
    demand: Optional[np.ndarray] = None
    uncertainty: Optional[UncertaintySet] = None
    beta: float = Field(1.0, gt=0)
    gamma: float = Field(100.0, gt=0)
    n_vehicles: Optional[float] = None
    distance_unit_m: float = Field(1000.0, gt=0)
    demand_convention: str = "customer_first"

    class Config:
        arbitrary_types_allowed = True

    @field_validator("V0", "O0", "demand", mode="before")
    @classmethod
    def a_reales(cls, v):
        return None if v is None else np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def validar_instancia(self):
        n = self.net.n
        if self.V0.shape != (n,) or self.O0.shape != (n,):
            raise InvariantViolation("V0 y O0 deben tener largo n")
        if np.any(self.V0 < 0) or np.any(self.O0 < 0):
            raise InvariantViolation("V0 y O0 deben ser no negativos")
        if self.n_vehicles is not None and self.V0.sum() + self.O0.sum() > self.n_vehicles + 1e-9:
            raise InvariantViolation("V0 + O0 supera el tamaño de la flota")
        if self.transitions.P.shape != (n, n):
            raise InvariantViolation("Las matrices de transición no calzan con la red")
        if self.demand is not None and self.demand.shape != (n, self.grid.kappa):
            raise InvariantViolation("demand debe ser (n, κ)")
        if self.uncertainty is not None and self.uncertainty.lb.shape != (n, self.grid.kappa):
            raise InvariantViolation("El conjunto de incertidumbre debe ser (n, κ)")
        if self.demand_convention not in ("customer_first", "paper_verbatim"):
            raise InvariantViolation(f"Convención desconocida: {self.demand_convention}")
        return self

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def kappa(self) -> int:
        return self.grid.kappa


class RebalancePlan(BaseModel):
    """
    Decisiones a ejecutar: x (n, n) enteros del primer intervalo.
    y_planned (n, n, κ) queda solo como diagnóstico.
    """
    x: np.ndarray
    y_planned: Optional[np.ndarray] = None
    objective: float = 0.0
    status: str = "optimal"
    fallback: bool = False

    class Config:
        arbitrary_types_allowed = True

    @field_validator("x", mode="before")
    @classmethod
    def a_enteros(cls, v):
        return np.asarray(v, dtype=np.int64)

    @classmethod
    def empty(cls, n: int, status: str = "empty") -> "RebalancePlan":
        return cls(x=np.zeros((n, n), dtype=np.int64), status=status)

    def moves(self) -> Iterator[Tuple[int, int, int, int]]:
        """(k, i, j, x) para cada flujo positivo; k = 1"""
        for i, j in zip(*np.nonzero(self.x)):
            yield 1, int(i), int(j), int(self.x[i, j])

    @property
    def total_moves(self) -> int:
        return int(self.x.sum())
