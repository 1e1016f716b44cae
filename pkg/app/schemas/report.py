from datetime import datetime
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field


class SimReport(BaseModel):
    """Resultado de una corrida de simulación"""
    engine: str
    pi: Optional[float] = None
    budget: Optional[float] = None
    rho: Optional[float] = None
    avg_wait_s: float = 0.0
    avg_travel_s: float = 0.0
    leaving_rate_pct: float = 0.0
    generated: int = 0
    served: int = 0
    left: int = 0
    waiting_at_end: int = 0
    no_served: bool = False
    fallbacks: int = 0
    incidents: int = 0
    decision_ms: List[float] = Field(default_factory=list)
    events: List[Tuple] = Field(default_factory=list)

    @property
    def decision_ms_p50(self) -> float:
        if not self.decision_ms:
            return 0.0
        return float(np.median(self.decision_ms))

    def to_row(self) -> dict:
        return {
            "engine": self.engine,
            "PI": self.pi,
            "Gamma": self.budget,
            "rho": self.rho,
            "avg_wait_s": round(self.avg_wait_s, 6),
            "avg_travel_s": round(self.avg_travel_s, 6),
            "leaving_rate_pct": round(self.leaving_rate_pct, 6),
            "decision_ms_p50": round(self.decision_ms_p50, 3),
        }


class RunManifest(BaseModel):
    config_hash: str
    seed: int
    engine_grid: List[dict]
    output_dir: str
    started_at: datetime
    finished_at: Optional[datetime] = None
