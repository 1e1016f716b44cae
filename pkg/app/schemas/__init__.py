# app/schemas/__init__.py
"""
Tipos de dominio validados con pydantic.
"""
from app.schemas.demand import DemandTensor, HistoricalMoments, ParsedTrips, TransitionMatrices, TripRecord
from app.schemas.forecast import DistForecast, MetricsRow, ModelMeta
from app.schemas.network import TimeGrid, ZoneNetwork
from app.schemas.plan import MivrInstance, RebalancePlan
from app.schemas.report import RunManifest, SimReport
from app.schemas.uncertainty import UncertaintySet

__all__ = [
    "DemandTensor",
    "DistForecast",
    "HistoricalMoments",
    "MetricsRow",
    "MivrInstance",
    "ModelMeta",
    "ParsedTrips",
    "RebalancePlan",
    "RunManifest",
    "SimReport",
    "TimeGrid",
    "TransitionMatrices",
    "TripRecord",
    "UncertaintySet",
    "ZoneNetwork",
]
