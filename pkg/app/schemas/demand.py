from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.exceptions import InvariantViolation
from app.utils.validations import check_row_complete


class TripRecord(BaseModel):
    pickup_time: int = Field(..., description="Epoch (s), hora local de pared")
    dropoff_time: int
    pickup_zone: int
    dropoff_zone: int

    @model_validator(mode="after")
    def validar_orden(self):
        if self.dropoff_time < self.pickup_time:
            raise InvariantViolation("dropoff_time no puede ser anterior a pickup_time")
        return self


class ParsedTrips(BaseModel):
    """
    Viajes aceptados en forma columnar más el conteo de filas descartadas.
    Las columnas de zona guardan ids de zona, no índices.
    """
    pickup_time: np.ndarray
    dropoff_time: np.ndarray
    pickup_zone: np.ndarray
    dropoff_zone: np.ndarray
    skipped: int = 0

    class Config:
        arbitrary_types_allowed = True

    @field_validator("pickup_time", "dropoff_time", "pickup_zone", "dropoff_zone", mode="before")
    @classmethod
    def a_enteros(cls, v):
        return np.asarray(v, dtype=np.int64)

    @model_validator(mode="after")
    def validar_largos(self):
        largos = {len(self.pickup_time), len(self.dropoff_time), len(self.pickup_zone), len(self.dropoff_zone)}
        if len(largos) != 1:
            raise InvariantViolation("Las columnas de viajes tienen largos distintos")
        return self

    def __len__(self) -> int:
        return len(self.pickup_time)

    @property
    def records(self) -> List[TripRecord]:
        return [
            TripRecord.model_construct(
                pickup_time=int(a), dropoff_time=int(b), pickup_zone=int(c), dropoff_zone=int(d)
            )
            for a, b, c, d in zip(self.pickup_time, self.dropoff_time, self.pickup_zone, self.dropoff_zone)
        ]

    @classmethod
    def from_records(cls, records: List[TripRecord], skipped: int = 0) -> "ParsedTrips":
        return cls(
            pickup_time=[r.pickup_time for r in records],
            dropoff_time=[r.dropoff_time for r in records],
            pickup_zone=[r.pickup_zone for r in records],
            dropoff_zone=[r.dropoff_zone for r in records],
            skipped=skipped,
        )

    def subset(self, mask: np.ndarray) -> "ParsedTrips":
        return ParsedTrips(
            pickup_time=self.pickup_time[mask],
            dropoff_time=self.dropoff_time[mask],
            pickup_zone=self.pickup_zone[mask],
            dropoff_zone=self.dropoff_zone[mask],
            skipped=0,
        )


class DemandTensor(BaseModel):
    """Conteos r_i^k por (región de origen, intervalo) y, opcional, el tensor OD"""
    counts: np.ndarray
    od: Optional[np.ndarray] = None
    window_start: int = 0
    delta: int = 300

    class Config:
        arbitrary_types_allowed = True

    @field_validator("counts", "od", mode="before")
    @classmethod
    def a_enteros(cls, v):
        return None if v is None else np.asarray(v, dtype=np.int64)

    @model_validator(mode="after")
    def validar_conteos(self):
        if self.counts.ndim != 2:
            raise InvariantViolation("counts debe ser n x Ω")
        if np.any(self.counts < 0):
            raise InvariantViolation("counts tiene valores negativos")
        if self.od is not None:
            n, omega = self.counts.shape
            if self.od.shape != (n, n, omega):
                raise InvariantViolation("od debe ser n x n x Ω")
            if not np.array_equal(self.od.sum(axis=1), self.counts):
                raise InvariantViolation("od no suma a counts por origen")
        return self

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def omega(self) -> int:
        return self.counts.shape[1]


class HistoricalMoments(BaseModel):
    """Media μ y desviación σ por (región, intervalo del día) sobre m días"""
    mu: np.ndarray
    sigma: np.ndarray
    m: int

    class Config:
        arbitrary_types_allowed = True

    @field_validator("mu", "sigma", mode="before")
    @classmethod
    def a_reales(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def validar_momentos(self):
        if self.mu.shape != self.sigma.shape:
            raise InvariantViolation("mu y sigma deben tener la misma forma")
        if np.any(self.sigma < 0):
            raise InvariantViolation("sigma no puede ser negativa")
        return self


class TransitionMatrices(BaseModel):
    """P: ocupado→ocupado, Q: ocupado→vacante, matrices estáticas"""
    P: np.ndarray
    Q: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @field_validator("P", "Q", mode="before")
    @classmethod
    def a_reales(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def validar_filas(self):
        if self.P.shape != self.Q.shape or self.P.ndim != 2 or self.P.shape[0] != self.P.shape[1]:
            raise InvariantViolation("P y Q deben ser n x n")
        check_row_complete(self.P, self.Q)
        return self

    @classmethod
    def identity(cls, n: int) -> "TransitionMatrices":
        """Sin observaciones: todo vehículo ocupado queda libre en su zona"""
        return cls(P=np.zeros((n, n)), Q=np.eye(n))


class TripColumns(BaseModel):
    """Nombres de columnas del CSV de viajes (por defecto, formato TLC)"""
    pickup_time: str = "pickup_datetime"
    dropoff_time: str = "dropoff_datetime"
    pickup_zone: str = "PULocationID"
    dropoff_zone: str = "DOLocationID"


class DemandSidecar(BaseModel):
    """Metadatos de la grilla que acompañan a cada CSV de demanda"""
    day: str
    window_start: int
    delta: int
    n_intervals: int
    zone_ids: List[int]
    total_trips: int
