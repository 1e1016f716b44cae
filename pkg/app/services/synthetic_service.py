"""
Ciudades sintéticas con demanda Poisson, para pruebas y experimentos de escritorio.
"""
from typing import Tuple

import numpy as np

from app.schemas.demand import HistoricalMoments, ParsedTrips
from app.schemas.network import TimeGrid, ZoneNetwork
from app.schemas.scenario import Scenario
from app.services.ingest_service import estimate_transitions, historical_moments
from app.services.network_service import build_network
from app.utils.dates import SECONDS_PER_DAY


def _sample_day(
    rates: np.ndarray,
    destinations: np.ndarray,
    net: ZoneNetwork,
    day_start: int,
    delta: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, ParsedTrips]:
    '''
    Conteos Poisson por (zona, intervalo) y un viaje por conteo, con hora
    uniforme dentro del intervalo y destino según la fila de `destinations`.
    '''
    conteos = rng.poisson(rates)
    origen, intervalo = np.nonzero(conteos)
    repeticiones = conteos[origen, intervalo]
    origen = np.repeat(origen, repeticiones)
    intervalo = np.repeat(intervalo, repeticiones)

    inicio = day_start + intervalo * delta + rng.integers(0, delta, size=origen.size)
    acumulada = np.cumsum(destinations, axis=1)
    u = rng.random(origen.size)
    destino = np.minimum((u[:, None] > acumulada[origen]).sum(axis=1), net.n - 1)
    duracion = np.rint(net.tt[origen, destino]).astype(np.int64)

    orden = np.argsort(inicio, kind="stable")
    ids = np.asarray(net.zone_ids)
    viajes = ParsedTrips(
        pickup_time=inicio[orden],
        dropoff_time=(inicio + duracion)[orden],
        pickup_zone=ids[origen[orden]],
        dropoff_zone=ids[destino[orden]],
    )
    return conteos, viajes


def _scenario_from_rates(
    net: ZoneNetwork,
    rates: np.ndarray,
    destinations: np.ndarray,
    history_days: int,
    delta: int,
    rng: np.random.Generator,
    initial_regions=None,
) -> Scenario:
    grid = TimeGrid(delta=delta)
    historia, viajes_historia = [], []
    for h in range(history_days):
        conteos, viajes = _sample_day(rates, destinations, net, h * SECONDS_PER_DAY, delta, rng)
        historia.append(conteos)
        viajes_historia.append(viajes)

    todos = ParsedTrips(
        pickup_time=np.concatenate([v.pickup_time for v in viajes_historia]),
        dropoff_time=np.concatenate([v.dropoff_time for v in viajes_historia]),
        pickup_zone=np.concatenate([v.pickup_zone for v in viajes_historia]),
        dropoff_zone=np.concatenate([v.dropoff_zone for v in viajes_historia]),
    )
    transiciones = estimate_transitions(todos, net, grid)

    dia = history_days * SECONDS_PER_DAY
    observados, pedidos = _sample_day(rates, destinations, net, dia, delta, rng)
    return Scenario(
        net=net,
        transitions=transiciones,
        moments=historical_moments(historia),
        observed=observados,
        requests=pedidos,
        day_start=dia,
        true_rates=rates,
        initial_regions=initial_regions,
    )


def synthetic_city(
    n_zones: int = 10,
    seed: int = 0,
    history_days: int = 18,
    delta: int = 300,
    spacing_m: float = 150.0,
    trips_per_interval: float = 6.0,
    hot_zones: int = 2,
    mean_speed: float = 6.0,
) -> Scenario:
    '''
    Zonas en una grilla de dos filas. La demanda se concentra en `hot_zones`
    zonas y sigue un perfil diario suave; los destinos se reparten al azar.
    '''
    rng = np.random.default_rng(seed)
    columnas = int(np.ceil(n_zones / 2))
    centroides = np.array([[(z % columnas) * spacing_m, (z // columnas) * spacing_m] for z in range(n_zones)])
    net = build_network(centroides, mean_speed=mean_speed)

    pesos = np.ones(n_zones)
    calientes = rng.choice(n_zones, size=min(hot_zones, n_zones), replace=False)
    pesos[calientes] = 6.0
    pesos /= pesos.sum()

    T = SECONDS_PER_DAY // delta
    t = np.arange(T)
    perfil = 1.0 + 0.6 * np.sin(2 * np.pi * (t - T / 4) / T)
    rates = trips_per_interval * pesos[:, None] * perfil[None, :]

    destinos = rng.dirichlet(np.ones(n_zones), size=n_zones)
    return _scenario_from_rates(net, rates, destinos, history_days, delta, rng)


def two_cluster_city(
    zones_per_cluster: int = 2,
    gap_m: float = 1500.0,
    spacing_m: float = 100.0,
    rate: float = 0.5,
    seed: int = 0,
    history_days: int = 3,
    delta: int = 300,
    mean_speed: float = 6.0,
    truthful: bool = True,
) -> Scenario:
    '''
    Dos grupos de zonas separados por `gap_m`: toda la demanda nace y termina en A
    y todos los vehículos parten en B. Con truthful=True los momentos son las
    tasas reales (σ = 0).
    '''
    rng = np.random.default_rng(seed)
    a = [[i * spacing_m, 0.0] for i in range(zones_per_cluster)]
    b = [[gap_m + i * spacing_m, 0.0] for i in range(zones_per_cluster)]
    net = build_network(np.array(a + b), mean_speed=mean_speed)
    n = net.n

    T = SECONDS_PER_DAY // delta
    rates = np.zeros((n, T))
    rates[:zones_per_cluster] = rate
    destinos = np.zeros((n, n))
    destinos[:, :zones_per_cluster] = 1.0 / zones_per_cluster

    escenario = _scenario_from_rates(
        net, rates, destinos, history_days, delta, rng,
        initial_regions=list(range(zones_per_cluster, n)),
    )
    if truthful:
        escenario.moments = HistoricalMoments(mu=rates, sigma=np.zeros_like(rates), m=history_days)
    return escenario


