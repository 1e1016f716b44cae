from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from app.schemas.fleet import Passenger, Vehicle
from app.schemas.network import ZoneNetwork

EXACT_LIMIT = 2 ** 53


def _passenger_order(passengers: Sequence[Passenger]) -> List[Passenger]:
    """Primero los que llevan más tiempo esperando"""
    return sorted(passengers, key=lambda p: (-p.wait_s, p.request_time, p.id))


def _component_costs(pickup_ms: np.ndarray, feasible: np.ndarray) -> Tuple[np.ndarray, float]:
    '''
    Costos lexicográficos: (1) cardinalidad, (2) tiempo total de recogida,
    (3) rango del pasajero, (4) rango del vehículo. Enteros exactos si caben en
    2^53; si no, pesos reales pequeños para los desempates.
    '''
    n_p, n_v = pickup_ms.shape
    pares = min(n_p, n_v)
    k_vehiculo = 1
    k_pasajero = pares * n_v + 1
    k_tiempo = (pares * n_p + 1) * k_pasajero
    max_par = int(pickup_ms.max(initial=0)) * k_tiempo + n_p * k_pasajero + n_v
    grande = pares * max_par + 1

    rango_p = np.arange(n_p)[:, None]
    rango_v = np.arange(n_v)[None, :]
    if grande * (pares + 1) < EXACT_LIMIT:
        costo = pickup_ms * k_tiempo + rango_p * k_pasajero + rango_v * k_vehiculo - grande
    else:
        grande = float(pickup_ms.max(initial=0)) * (pares + 1) + 1.0
        costo = pickup_ms + 1e-3 * rango_p / max(n_p, 1) + 1e-6 * rango_v / max(n_v, 1) - grande
    return np.where(feasible, costo, 0).astype(float), grande


def match_tick(
    waiting: Sequence[Passenger],
    idle: Sequence[Vehicle],
    net: ZoneNetwork,
    max_pickup: float,
    max_wait: float = np.inf,
) -> List[Tuple[Passenger, Vehicle, float]]:
    '''
    Asignación de máxima cardinalidad y mínimo tiempo total de recogida.
    Un par es factible si tt[zona vehículo][zona pasajero] ≤ ω̄ y el pasajero
    alcanza a ser recogido antes de ω̃. Empates: pasajero que más espera, luego menor id de vehículo.
    Devuelve (pasajero, vehículo, tiempo de recogida) ordenado por id de pasajero.
    '''
    pasajeros = _passenger_order(waiting)
    vehiculos = sorted(idle, key=lambda v: v.id)
    if not pasajeros or not vehiculos:
        return []

    origen = np.array([p.origin for p in pasajeros])
    espera = np.array([p.wait_s for p in pasajeros], dtype=float)
    region = np.array([v.region for v in vehiculos])
    tt = net.tt[region[None, :], origen[:, None]]
    factible = (tt <= max_pickup) & (espera[:, None] + tt <= max_wait)
    if not factible.any():
        return []

    n_p, n_v = factible.shape
    pi, vj = np.nonzero(factible)
    grafo = csr_matrix((np.ones(pi.size), (pi, n_p + vj)), shape=(n_p + n_v, n_p + n_v))
    _, etiqueta = connected_components(grafo, directed=False)
    etiqueta_p, etiqueta_v = etiqueta[:n_p], etiqueta[n_p:]

    asignaciones = []
    for c in np.unique(etiqueta_p[factible.any(axis=1)]):
        filas = np.flatnonzero(etiqueta_p == c)
        columnas = np.flatnonzero(etiqueta_v == c)
        sub_factible = factible[np.ix_(filas, columnas)]
        pickup_ms = np.rint(tt[np.ix_(filas, columnas)] * 1000).astype(np.int64)
        costo, _ = _component_costs(pickup_ms, sub_factible)
        fila_idx, col_idx = linear_sum_assignment(costo)
        for r, q in zip(fila_idx, col_idx):
            if sub_factible[r, q]:
                i, j = filas[r], columnas[q]
                asignaciones.append((pasajeros[i], vehiculos[j], float(tt[i, j])))

    return sorted(asignaciones, key=lambda a: a[0].id)
