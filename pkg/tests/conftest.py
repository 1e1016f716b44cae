import numpy as np
import pytest

from app.config import SimConfig
from app.schemas.network import TimeGrid, ZoneNetwork
from app.services.network_service import build_network


def manual_network(tt, adjacency=None) -> ZoneNetwork:
    """Red con tiempos de viaje dados a mano (dist = tt, velocidad 1 m/s)"""
    tt = np.asarray(tt, dtype=float)
    n = tt.shape[0]
    return ZoneNetwork(
        centroids=np.column_stack([np.arange(n) * 100.0, np.zeros(n)]),
        dist=tt,
        tt=tt,
        adjacency=np.ones((n, n)) if adjacency is None else adjacency,
    )


@pytest.fixture
def line_net() -> ZoneNetwork:
    """Tres zonas en línea cada 150 m, adyacencia de camino, 6 m/s"""
    centroides = np.array([[0.0, 0.0], [150.0, 0.0], [300.0, 0.0]])
    camino = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
    return build_network(centroides, adjacency=camino, mean_speed=6.0)


@pytest.fixture
def grid() -> TimeGrid:
    return TimeGrid()


@pytest.fixture
def small_config() -> SimConfig:
    return SimConfig(
        n_vehicles=6,
        omega=4,
        kappa=2,
        start_interval=96,
        seed=3,
        record_timing=False,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20190627)


@pytest.fixture
def db_url(tmp_path) -> str:
    return f"sqlite:///{tmp_path / 'runs.db'}"


def write_zones_csv(path, n: int = 4) -> None:
    """Zonas en una grilla chica cerca de Manhattan"""
    filas = ["zone_id,lat,lon"]
    for z in range(n):
        filas.append(f"{z + 1},{40.75 + 0.001 * (z // 2):.6f},{-73.99 + 0.001 * (z % 2):.6f}")
    path.write_text("\n".join(filas) + "\n", encoding="utf-8")


def write_trips_csv(path, days: int = 4, zones: int = 4, seed: int = 0) -> int:
    """Viajes de varios días en formato TLC; devuelve cuántos escribió"""
    rng = np.random.default_rng(seed)
    filas = ["pickup_datetime,dropoff_datetime,PULocationID,DOLocationID"]
    for d in range(days):
        for minuto in range(0, 24 * 60, 7):
            o, dz = rng.integers(1, zones + 1, size=2)
            inicio = np.datetime64("2019-06-20T00:00") + np.timedelta64(d, "D") + np.timedelta64(minuto, "m")
            fin = inicio + np.timedelta64(int(rng.integers(1, 5)), "m")
            filas.append(f"{str(inicio).replace('T', ' ')}:00,{str(fin).replace('T', ' ')}:00,{o},{dz}")
    path.write_text("\n".join(filas) + "\n", encoding="utf-8")
    return len(filas) - 1
