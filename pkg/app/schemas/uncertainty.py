import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.exceptions import InfeasibleSetError, InvariantViolation


class UncertaintySet(BaseModel):
    """
    Conjunto caja + presupuesto por intervalo:
    lb ≤ r ≤ ub por celda y |Σ_i (r_i − μ_i)| ≤ Γ en cada intervalo.
    Arreglos de forma (n, K).
    """
    lb: np.ndarray
    mu: np.ndarray
    ub: np.ndarray
    budget: float = Field(..., ge=0)
    clamp_mean: bool = True

    class Config:
        arbitrary_types_allowed = True

    @field_validator("lb", "mu", "ub", mode="before")
    @classmethod
    def a_reales(cls, v):
        return np.atleast_2d(np.asarray(v, dtype=float))

    @model_validator(mode="after")
    def validar_conjunto(self):
        if not (self.lb.shape == self.mu.shape == self.ub.shape):
            raise InvariantViolation("lb, mu y ub deben tener la misma forma")
        if np.any(self.lb < 0):
            raise InvariantViolation("lb debe ser no negativo")
        if np.any(self.lb > self.ub):
            raise InvariantViolation("lb no puede superar ub")
        if self.clamp_mean:
            self.mu = np.clip(self.mu, self.lb, self.ub)

        vacios = [k for k in range(self.n_intervals) if not self.nonempty(k)]
        if vacios:
            raise InfeasibleSetError(f"Conjunto vacío en los intervalos {vacios}")
        return self

    @property
    def n(self) -> int:
        return self.lb.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.lb.shape[1]

    def nonempty(self, k: int) -> bool:
        suma_lb = self.lb[:, k].sum()
        suma_ub = self.ub[:, k].sum()
        suma_mu = self.mu[:, k].sum()
        return suma_lb <= suma_mu + self.budget + 1e-12 and suma_ub >= suma_mu - self.budget - 1e-12
