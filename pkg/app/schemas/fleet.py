import enum
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


class VehicleStatus(str, enum.Enum):
    idle = "idle"
    rebalancing = "rebalancing"
    pickup = "pickup"
    occupied = "occupied"


class PassengerStatus(str, enum.Enum):
    waiting = "waiting"
    picked_up = "picked_up"
    served = "served"
    left = "left"


@dataclass
class Vehicle:
    id: int
    status: VehicleStatus = VehicleStatus.idle
    region: int = 0
    destination: int = 0
    remaining_s: float = 0.0
    # viaje ocupado en curso
    trip_total_s: float = 0.0
    trip_origin: int = 0
    passenger_id: Optional[int] = None


@dataclass
class Passenger:
    id: int
    origin: int
    destination: int
    request_time: int
    status: PassengerStatus = PassengerStatus.waiting
    wait_s: float = 0.0
    trip_s: Optional[float] = None
    travel_s: Optional[float] = None
    vehicle_id: Optional[int] = None


@dataclass
class FleetState:
    """
    Estado de la flota: registros por vehículo más conteos por región.
    V cuenta vehículos libres, O cuenta vehículos ocupados.
    """
    n: int
    vehicles: List[Vehicle] = field(default_factory=list)
    clock: int = 0

    @property
    def V(self) -> np.ndarray:
        return self._count(VehicleStatus.idle)

    @property
    def O(self) -> np.ndarray:
        return self._count(VehicleStatus.occupied)

    @property
    def in_transit(self) -> int:
        return sum(
            1 for v in self.vehicles
            if v.status in (VehicleStatus.pickup, VehicleStatus.rebalancing)
        )

    @property
    def size(self) -> int:
        return len(self.vehicles)

    def _count(self, status: VehicleStatus) -> np.ndarray:
        conteo = np.zeros(self.n, dtype=np.int64)
        for v in self.vehicles:
            if v.status == status:
                conteo[v.region] += 1
        return conteo

    def idle_by_region(self) -> List[List[Vehicle]]:
        """Vehículos libres por región, ordenados por id"""
        por_region: List[List[Vehicle]] = [[] for _ in range(self.n)]
        for v in sorted(self.vehicles, key=lambda v: v.id):
            if v.status == VehicleStatus.idle:
                por_region[v.region].append(v)
        return por_region

    def conserved(self, total: int) -> bool:
        return int(self.V.sum() + self.O.sum()) + self.in_transit == total
