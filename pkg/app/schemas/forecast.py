from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.exceptions import DomainError


class DistForecast(BaseModel):
    """
    Pronóstico distribucional: familia + parámetros θ por (región, paso del horizonte).
    params tiene forma (n, K, aridad), mean tiene forma (n, K).
    """
    family: str
    params: np.ndarray
    mean: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @field_validator("params", "mean", mode="before")
    @classmethod
    def a_reales(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def validar_pronostico(self):
        if self.params.ndim != 3 or self.params.shape[:2] != self.mean.shape:
            raise DomainError("params debe ser (n, K, aridad) y mean (n, K)")
        if not np.all(np.isfinite(self.mean)):
            raise DomainError("La media del pronóstico no es finita")
        return self

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @property
    def horizon(self) -> int:
        return self.mean.shape[1]


class ModelMeta(BaseModel):
    family: str
    n_zones: int
    lag: int = Field(12, ge=1)
    horizon: int = Field(6, ge=1)
    gcn_layers: int = Field(2, ge=1)
    gcn_hidden: int = Field(32, ge=1)
    lstm_hidden: int = Field(32, ge=1)
    input_scale: float = Field(1.0, gt=0)


class ModelWeightsFile(BaseModel):
    """Esquema JSON de pesos: nombre de capa -> matriz por filas"""
    meta: ModelMeta
    weights: Dict[str, List]


class MetricsRow(BaseModel):
    family: str
    pi: float
    nll: float
    mae: float
    mape: float
    mpiw: float
    picp: float
