from datetime import datetime, timezone

from sqlalchemy import Column, DateTime, Float, Integer, String

from app.database import Base


class RunRecord(Base):
    """Una fila por corrida de simulación (registro de auditoría)"""
    __tablename__ = "run_records"

    id = Column(Integer, primary_key=True, index=True)
    engine = Column(String(10), nullable=False, index=True)
    pi = Column(Float, nullable=True)
    budget = Column(Float, nullable=True)
    rho = Column(Float, nullable=True)
    seed = Column(Integer, nullable=False)
    config_hash = Column(String(64), nullable=False, index=True)
    avg_wait_s = Column(Float, nullable=False)
    avg_travel_s = Column(Float, nullable=False)
    leaving_rate_pct = Column(Float, nullable=False)
    decision_ms_p50 = Column(Float, nullable=False)
    generated = Column(Integer, nullable=False)
    served = Column(Integer, nullable=False)
    left = Column(Integer, nullable=False)
    created_at = Column(DateTime, default=lambda: datetime.now(timezone.utc))
