from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree

from app.exceptions import IngestIOError, InvariantViolation
from app.schemas.network import NetworkSidecar, TimeGrid, ZoneNetwork
from app.utils.logger import get_logger

logger = get_logger(__name__)

EARTH_RADIUS_M = 6_371_000.0
NETWORK_FILE = "network.json"


def normalized_adjacency(net: ZoneNetwork) -> np.ndarray:
    """
    D̃^{-1/2} Ã D̃^{-1/2}, la matriz de propagación de la convolución de grafos.
    """
    A = net.adjacency
    grados = A.sum(axis=1)
    if np.any(grados <= 0):
        raise InvariantViolation("Nodo con grado cero en la adyacencia")
    inv_raiz = 1.0 / np.sqrt(grados)
    return inv_raiz[:, None] * A * inv_raiz[None, :]


def rebalance_feasibility(net: ZoneNetwork, grid: TimeGrid) -> np.ndarray:
    """a[i][j] = 0 si el rebalanceo i→j cabe en un intervalo Δ"""
    return (net.tt > grid.delta).astype(np.int64)


def match_feasibility(net: ZoneNetwork, grid: TimeGrid) -> np.ndarray:
    """b[i][j] = 0 si un vehículo en j alcanza a recoger en i dentro de ω̄"""
    return (net.tt.T > grid.max_pickup).astype(np.int64)


def project_latlon(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    '''
    Proyección equirectangular alrededor de la latitud media, en metros.
    '''
    lat = np.radians(np.asarray(lat, dtype=float))
    lon = np.radians(np.asarray(lon, dtype=float))
    lat0 = lat.mean() if lat.size else 0.0
    x = EARTH_RADIUS_M * (lon - (lon.mean() if lon.size else 0.0)) * np.cos(lat0)
    y = EARTH_RADIUS_M * (lat - lat0)
    return np.column_stack([x, y])


def knn_adjacency(centroids: np.ndarray, k: int = 4) -> np.ndarray:
    """Adyacencia de k vecinos más cercanos, simetrizada y con auto-lazos"""
    n = len(centroids)
    A = np.eye(n)
    if n <= 1:
        return A
    k_eff = min(k, n - 1)
    _, idx = cKDTree(centroids).query(centroids, k=k_eff + 1)
    for i in range(n):
        for j in np.atleast_1d(idx[i])[1:]:
            A[i, j] = 1.0
            A[j, i] = 1.0
    return A


def build_network(
    centroids: np.ndarray,
    adjacency: Optional[np.ndarray] = None,
    mean_speed: float = 6.0,
    k_neighbors: int = 4,
    zone_ids=None,
) -> ZoneNetwork:
    '''
    Construye la red a partir de centroides planos.
    La distancia es el camino más corto sobre el grafo de adyacencia con aristas
    euclidianas; pares desconectados usan la línea recta.
    '''
    centroids = np.asarray(centroids, dtype=float)
    n = len(centroids)
    if adjacency is None:
        adjacency = knn_adjacency(centroids, k_neighbors)
    adjacency = np.asarray(adjacency, dtype=float)
    adjacency = np.maximum(adjacency, adjacency.T)
    np.fill_diagonal(adjacency, 1.0)

    recta = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
    pesos = np.where(adjacency > 0, recta, 0.0)
    np.fill_diagonal(pesos, 0.0)
    dist = shortest_path(csr_matrix(pesos), method="D", directed=False)
    desconectados = ~np.isfinite(dist)
    if desconectados.any():
        logger.warning("Red desconectada: %d pares usan distancia recta", int(desconectados.sum()))
        dist = np.where(desconectados, recta, dist)
    np.fill_diagonal(dist, 0.0)

    return ZoneNetwork(
        zone_ids=None if zone_ids is None else [int(z) for z in zone_ids],
        centroids=centroids,
        dist=dist,
        tt=dist / float(mean_speed),
        adjacency=adjacency,
    )


def adjacency_from_edges(zone_ids, edges: Iterable[Tuple[int, int]]) -> np.ndarray:
    """Adyacencia simétrica con auto-lazos; aristas con zonas desconocidas se ignoran"""
    indice = {z: i for i, z in enumerate(zone_ids)}
    adjacency = np.eye(len(indice))
    for a, b in edges:
        if a in indice and b in indice:
            adjacency[indice[a], indice[b]] = 1.0
            adjacency[indice[b], indice[a]] = 1.0
    return adjacency


def _read_zones(zones_path: str) -> Tuple[list, np.ndarray]:
    try:
        zonas = pd.read_csv(zones_path)
    except (OSError, pd.errors.ParserError) as e:
        raise IngestIOError(f"No se pudo leer {zones_path}: {e}")

    faltantes = {"zone_id", "lat", "lon"} - set(zonas.columns)
    if faltantes:
        raise IngestIOError(f"Faltan columnas en {zones_path}: {sorted(faltantes)}")

    zonas = zonas.sort_values("zone_id").reset_index(drop=True)
    ids = zonas["zone_id"].astype(int).tolist()
    return ids, project_latlon(zonas["lat"].to_numpy(), zonas["lon"].to_numpy())


def load_zones(
    zones_path: str,
    adjacency_path: Optional[str] = None,
    mean_speed: float = 6.0,
    k_neighbors: int = 4,
) -> ZoneNetwork:
    """
    Lee zonas desde CSV `zone_id,lat,lon` y, opcional, aristas `zone_id_a,zone_id_b`.
    """
    ids, centroids = _read_zones(zones_path)

    adjacency = None
    if adjacency_path:
        try:
            aristas = pd.read_csv(adjacency_path)
        except (OSError, pd.errors.ParserError) as e:
            raise IngestIOError(f"No se pudo leer {adjacency_path}: {e}")
        adjacency = adjacency_from_edges(ids, zip(aristas["zone_id_a"].astype(int), aristas["zone_id_b"].astype(int)))

    red = build_network(centroids, adjacency, mean_speed=mean_speed, k_neighbors=k_neighbors, zone_ids=ids)
    logger.info("Red cargada: %d zonas", red.n)
    return red


def write_network(net: ZoneNetwork, path: Path, mean_speed: float = 6.0, k_neighbors: int = 4) -> None:
    """Guarda la adyacencia como lista de aristas junto con la velocidad media"""
    ids = np.asarray(net.zone_ids)
    i, j = np.nonzero(np.triu(net.adjacency, k=1))
    sidecar = NetworkSidecar(
        zone_ids=list(net.zone_ids),
        edges=[[int(a), int(b)] for a, b in zip(ids[i], ids[j])],
        mean_speed=mean_speed,
        k_neighbors=k_neighbors,
    )
    Path(path).write_text(sidecar.model_dump_json(indent=2), encoding="utf-8")


def read_network(zones_path: str, path: Path) -> ZoneNetwork:
    """Reconstruye la red de ingest: centroides del CSV de zonas, aristas y velocidad del JSON"""
    try:
        sidecar = NetworkSidecar.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IngestIOError(f"No se pudo leer {path}: {e}")
    ids, centroids = _read_zones(zones_path)
    if ids != sidecar.zone_ids:
        raise InvariantViolation(f"Las zonas de {zones_path} no coinciden con las de {path}")

    adjacency = adjacency_from_edges(ids, [tuple(e) for e in sidecar.edges])
    return build_network(centroids, adjacency, mean_speed=sidecar.mean_speed, zone_ids=ids)


def load_data_network(
    zones_path: str,
    data_dir: Path,
    mean_speed: float = 6.0,
    k_neighbors: int = 4,
) -> ZoneNetwork:
    '''
    La red de un directorio de ingest. Si existe network.json manda sobre
    mean_speed y k_neighbors; si no, se arma la red kNN de siempre.
    '''
    ruta = Path(data_dir) / NETWORK_FILE
    if ruta.exists():
        return read_network(zones_path, ruta)
    logger.warning("Sin %s en %s, se usa la red kNN", NETWORK_FILE, data_dir)
    return load_zones(zones_path, mean_speed=mean_speed, k_neighbors=k_neighbors)
