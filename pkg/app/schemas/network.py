from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator
from scipy.spatial import cKDTree

from app.exceptions import InvariantViolation
from app.utils.validations import check_nonnegative, check_square, check_zero_diagonal


class ZoneNetwork(BaseModel):
    """
    Red de zonas: centroides planos (metros), distancias, tiempos de viaje
    y grafo de adyacencia con auto-lazos.
    """
    zone_ids: Optional[List[int]] = None
    centroids: np.ndarray
    dist: np.ndarray
    tt: np.ndarray
    adjacency: np.ndarray

    _tree: Optional[cKDTree] = PrivateAttr(default=None)
    _index: Optional[dict] = PrivateAttr(default=None)

    class Config:
        arbitrary_types_allowed = True

    @field_validator("centroids", "dist", "tt", "adjacency", mode="before")
    @classmethod
    def a_arreglo(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def validar_invariantes(self):
        n = self.centroids.shape[0]
        if self.centroids.shape != (n, 2):
            raise InvariantViolation("centroids debe ser n x 2")
        check_square("dist", self.dist, n)
        check_square("tt", self.tt, n)
        check_square("adjacency", self.adjacency, n)
        check_nonnegative("dist", self.dist)
        check_nonnegative("tt", self.tt)
        check_zero_diagonal("dist", self.dist)
        check_zero_diagonal("tt", self.tt)

        A = self.adjacency
        if not np.all((A == 0) | (A == 1)):
            raise InvariantViolation("adjacency debe ser binaria")
        if not np.array_equal(A, A.T):
            raise InvariantViolation("adjacency debe ser simétrica")
        if not np.all(np.diag(A) == 1):
            raise InvariantViolation("adjacency debe tener auto-lazos")

        if self.zone_ids is None:
            self.zone_ids = list(range(n))
        if len(self.zone_ids) != n or len(set(self.zone_ids)) != n:
            raise InvariantViolation("zone_ids debe tener n identificadores únicos")
        return self

    @property
    def n(self) -> int:
        return self.centroids.shape[0]

    @property
    def degree(self) -> np.ndarray:
        """Matriz diagonal de grados D̃"""
        return np.diag(self.adjacency.sum(axis=1))

    def zone_index(self, zone_id: int) -> int:
        if self._index is None:
            self._index = {z: i for i, z in enumerate(self.zone_ids)}
        if zone_id not in self._index:
            raise KeyError(f"Zona desconocida: {zone_id}")
        return self._index[zone_id]

    def index_array(self, zone_ids) -> np.ndarray:
        """Mapea ids de zona a índices; -1 para ids desconocidos"""
        if self._index is None:
            self._index = {z: i for i, z in enumerate(self.zone_ids)}
        return np.array([self._index.get(int(z), -1) for z in zone_ids], dtype=np.int64)

    def nearest_zone(self, points: np.ndarray) -> np.ndarray:
        """Zona cuyo centroide está más cerca de cada punto"""
        if self._tree is None:
            self._tree = cKDTree(self.centroids)
        _, idx = self._tree.query(np.atleast_2d(points))
        return np.asarray(idx, dtype=np.int64)


class TimeGrid(BaseModel):
    delta: int = Field(300, gt=0, description="Largo del intervalo de rebalanceo Δ (s)")
    omega: int = Field(24, gt=0, description="Intervalos simulados Ω")
    kappa: int = Field(6, ge=1, description="Horizonte κ")
    match_tick: int = Field(30, gt=0, description="Intervalo de matching δ (s)")
    max_wait: float = Field(300.0, gt=0, description="Abandono ω̃ (s)")
    max_pickup: float = Field(30.0, gt=0, description="Recogida máxima ω̄ (s)")

    @model_validator(mode="after")
    def validar_ticks(self):
        if self.delta % self.match_tick != 0:
            raise InvariantViolation("delta debe ser múltiplo de match_tick")
        return self

    @property
    def ticks_per_interval(self) -> int:
        return self.delta // self.match_tick


class NetworkSidecar(BaseModel):
    """Red con la que se agregaron los datos; train y simulate la reconstruyen desde aquí"""
    zone_ids: List[int]
    edges: List[List[int]] = Field(default_factory=list, description="Pares zone_id_a, zone_id_b")
    mean_speed: float = Field(6.0, gt=0)
    k_neighbors: int = Field(4, ge=1)
