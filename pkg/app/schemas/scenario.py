from typing import List, Optional

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from app.exceptions import InvariantViolation
from app.schemas.demand import HistoricalMoments, ParsedTrips, TransitionMatrices
from app.schemas.network import ZoneNetwork


class Scenario(BaseModel):
    """
    Todo lo que una corrida necesita además de la configuración:
    red, matrices de transición, momentos históricos del día completo,
    conteos realizados del día simulado y los viajes que generan pasajeros.
    """
    net: ZoneNetwork
    transitions: TransitionMatrices
    moments: HistoricalMoments
    observed: np.ndarray
    requests: ParsedTrips
    day_start: int = 0
    true_rates: Optional[np.ndarray] = None
    initial_regions: Optional[List[int]] = None

    class Config:
        arbitrary_types_allowed = True

    @field_validator("observed", "true_rates", mode="before")
    @classmethod
    def a_reales(cls, v):
        return None if v is None else np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def validar_escenario(self):
        n = self.net.n
        if self.moments.mu.shape[0] != n or self.observed.shape[0] != n:
            raise InvariantViolation("Momentos y conteos observados deben tener n filas")
        if self.moments.mu.shape != self.observed.shape:
            raise InvariantViolation("Momentos y conteos observados deben cubrir el mismo día")
        if self.true_rates is not None and self.true_rates.shape != self.observed.shape:
            raise InvariantViolation("true_rates debe tener la forma de observed")
        if self.initial_regions is not None and any(not 0 <= r < n for r in self.initial_regions):
            raise InvariantViolation("initial_regions fuera de la red")
        return self

    @property
    def intervals_per_day(self) -> int:
        return self.observed.shape[1]
