"""
Simulador de flota en tiempo discreto.

Cada intervalo Δ el motor propone un plan y se despachan los rebalanceos; luego
corren Δ/δ ticks de matching. En cada tick: avanzan vehículos y esperas (con
abandono), llegan los pasajeros nuevos y se hace el matching. Tras Ω intervalos
se drena el sistema sin nuevas llegadas hasta que nadie espera ni viaja.
"""
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import SimConfig
from app.exceptions import InvariantViolation
from app.schemas.demand import ParsedTrips
from app.schemas.fleet import FleetState, Passenger, PassengerStatus, Vehicle, VehicleStatus
from app.schemas.network import TimeGrid, ZoneNetwork
from app.schemas.plan import RebalancePlan
from app.schemas.report import SimReport
from app.schemas.scenario import Scenario
from app.services.engine_service import DecisionInput, Engine
from app.services.matching_service import match_tick
from app.utils.logger import get_logger

logger = get_logger(__name__)

MAX_DRAIN_TICKS = 100_000


def initial_fleet(n: int, n_vehicles: int, rng: np.random.Generator, regions: Optional[Sequence[int]] = None) -> FleetState:
    """Vehículos libres ubicados uniformemente al azar (o en las regiones dadas)"""
    if regions is None:
        regions = rng.integers(0, n, size=n_vehicles)
    else:
        regions = [regions[i % len(regions)] for i in range(n_vehicles)]
    return FleetState(n=n, vehicles=[Vehicle(id=i, region=int(r)) for i, r in enumerate(regions)])


def generate_passengers(
    trips: ParsedTrips,
    net: ZoneNetwork,
    t0: int,
    t1: int,
    first_id: int = 0,
    use_recorded_durations: bool = False,
) -> List[Passenger]:
    '''
    Un pasajero por viaje con recogida en [t0, t1); la hora de solicitud es la hora de recogida.
    Se respeta el orden de los viajes (ordenados por tiempo).
    '''
    dentro = np.flatnonzero((trips.pickup_time >= t0) & (trips.pickup_time < t1))
    if dentro.size == 0:
        return []
    dentro = dentro[np.argsort(trips.pickup_time[dentro], kind="stable")]
    origen = net.index_array(trips.pickup_zone[dentro])
    destino = net.index_array(trips.dropoff_zone[dentro])

    pasajeros = []
    for fila, o, d in zip(dentro, origen, destino):
        if o < 0 or d < 0:
            continue
        duracion = (
            float(trips.dropoff_time[fila] - trips.pickup_time[fila])
            if use_recorded_durations else float(net.tt[o, d])
        )
        pasajeros.append(Passenger(
            id=first_id + len(pasajeros),
            origin=int(o),
            destination=int(d),
            request_time=int(trips.pickup_time[fila]),
            trip_s=duracion,
        ))
    return pasajeros


def advance(
    state: FleetState,
    passengers: Dict[int, Passenger],
    dt: float,
    grid: TimeGrid,
    events: Optional[list] = None,
) -> FleetState:
    '''
    Avanza el reloj dt segundos: cuentas regresivas de vehículos (llegadas de
    rebalanceo, recogidas, bajadas) y esperas de pasajeros con abandono si superan ω̃.
    '''
    events = events if events is not None else []
    state.clock += int(dt)

    for v in state.vehicles:
        if v.status == VehicleStatus.idle:
            continue
        v.remaining_s -= dt
        while v.status != VehicleStatus.idle and v.remaining_s <= 0:
            if v.status == VehicleStatus.rebalancing:
                v.status, v.region, v.remaining_s = VehicleStatus.idle, v.destination, 0.0
                events.append((state.clock, "arrive", v.id, v.region))
            elif v.status == VehicleStatus.pickup:
                p = passengers[v.passenger_id]
                v.status = VehicleStatus.occupied
                v.region = v.trip_origin = p.origin
                v.destination = p.destination
                v.trip_total_s = p.trip_s
                v.remaining_s += p.trip_s
                events.append((state.clock, "pickup", p.id, v.id))
            else:
                p = passengers[v.passenger_id]
                p.status = PassengerStatus.served
                p.travel_s = p.trip_s
                v.status, v.region, v.remaining_s, v.passenger_id = VehicleStatus.idle, v.destination, 0.0, None
                events.append((state.clock, "dropoff", p.id, v.id))

    for p in passengers.values():
        if p.status != PassengerStatus.waiting:
            continue
        p.wait_s += dt
        if p.wait_s > grid.max_wait:
            p.status = PassengerStatus.left
            events.append((state.clock, "left", p.id, p.origin))
    return state


def lp_inputs(state: FleetState, net: ZoneNetwork, passengers: Dict[int, Passenger]) -> Tuple[np.ndarray, np.ndarray]:
    '''
    V¹: libres más los que rebalancean, contados en su destino.
    O¹: ocupados en su zona interpolada más los que van a recoger, en la zona del pasajero.
    '''
    V = np.zeros(net.n)
    O = np.zeros(net.n)
    origenes, destinos, fracciones = [], [], []
    for v in state.vehicles:
        if v.status == VehicleStatus.idle:
            V[v.region] += 1
        elif v.status == VehicleStatus.rebalancing:
            V[v.destination] += 1
        elif v.status == VehicleStatus.pickup:
            O[passengers[v.passenger_id].origin] += 1
        else:
            total = max(v.trip_total_s, 1e-9)
            origenes.append(v.trip_origin)
            destinos.append(v.destination)
            fracciones.append(min(max(1.0 - v.remaining_s / total, 0.0), 1.0))
    if origenes:
        c = net.centroids
        puntos = c[origenes] + np.asarray(fracciones)[:, None] * (c[destinos] - c[origenes])
        np.add.at(O, net.nearest_zone(puntos), 1.0)
    return V, O


def dispatch(state: FleetState, plan: RebalancePlan, net: ZoneNetwork, events: list) -> int:
    """Envía vehículos libres según el plan, menor id primero. Devuelve cuántos salieron."""
    por_region = state.idle_by_region()
    enviados = 0
    for _, i, j, cantidad in plan.moves():
        for v in por_region[i][:cantidad]:
            v.status = VehicleStatus.rebalancing
            v.destination = j
            v.remaining_s = float(net.tt[i, j])
            enviados += 1
            events.append((state.clock, "rebalance", v.id, f"{i}->{j}"))
        por_region[i] = por_region[i][cantidad:]
    return enviados


def _match(state: FleetState, passengers: Dict[int, Passenger], net: ZoneNetwork, grid: TimeGrid, events: list) -> None:
    esperando = [p for p in passengers.values() if p.status == PassengerStatus.waiting]
    if not esperando:
        return
    libres = [v for v in state.vehicles if v.status == VehicleStatus.idle]
    for p, v, tt in match_tick(esperando, libres, net, grid.max_pickup, grid.max_wait):
        p.status = PassengerStatus.picked_up
        p.vehicle_id = v.id
        p.wait_s += tt
        v.status = VehicleStatus.pickup
        v.passenger_id = p.id
        v.remaining_s = tt
        events.append((state.clock, "match", p.id, v.id))


def _tick(
    state: FleetState,
    passengers: Dict[int, Passenger],
    nuevos: List[Passenger],
    net: ZoneNetwork,
    grid: TimeGrid,
    events: list,
) -> None:
    advance(state, passengers, grid.match_tick, grid, events)
    for p in nuevos:
        p.wait_s = float(state.clock - p.request_time)
        passengers[p.id] = p
        events.append((p.request_time, "request", p.id, p.origin))
        if p.wait_s > grid.max_wait:
            p.status = PassengerStatus.left
            events.append((state.clock, "left", p.id, p.origin))
    _match(state, passengers, net, grid, events)


def run_simulation(config: SimConfig, engine: Engine, scenario: Scenario) -> SimReport:
    '''
    Corre Ω intervalos con el motor dado y arma el reporte.
    Determinista dado el seed; con record_timing=False el reporte es reproducible byte a byte.
    '''
    grid = config.time_grid()
    net = scenario.net
    rng = np.random.default_rng(config.seed)
    state = initial_fleet(net.n, config.n_vehicles, rng, scenario.initial_regions)
    total = state.size
    inicio = scenario.day_start + config.start_interval * grid.delta
    state.clock = inicio

    passengers: Dict[int, Passenger] = {}
    events: list = []
    # solo se informan las perillas que el motor usa
    report = SimReport(
        engine=engine.name,
        pi=config.pi if engine.name == "duro" else None,
        budget=config.budget if engine.name in ("duro", "ro") else None,
        rho=config.rho if engine.name == "ro" else None,
    )
    generados = 0

    for q in range(grid.omega):
        k = config.start_interval + q
        V, O = lp_inputs(state, net, passengers)
        entrada = DecisionInput(k=k, V=V, O=O, observed=scenario.observed[:, :k])
        t0 = time.perf_counter()
        try:
            plan, respaldo = engine.decide(entrada)
        except Exception as e:
            logger.warning("Falla del motor %s en el intervalo %d: %s", engine.name, k, e)
            plan, respaldo = RebalancePlan.empty(net.n, status="incident"), False
            report.incidents += 1
            events.append((state.clock, "incident", k, type(e).__name__))
        report.decision_ms.append((time.perf_counter() - t0) * 1000.0 if config.record_timing else 0.0)
        report.fallbacks += int(respaldo)
        dispatch(state, plan, net, events)

        for _ in range(grid.ticks_per_interval):
            nuevos = generate_passengers(
                scenario.requests, net, state.clock, state.clock + grid.match_tick,
                first_id=generados, use_recorded_durations=config.use_recorded_durations,
            )
            generados += len(nuevos)
            _tick(state, passengers, nuevos, net, grid, events)
            if not state.conserved(total):
                raise InvariantViolation(f"Flota no conservada en t={state.clock}")

    for _ in range(MAX_DRAIN_TICKS):
        activos = any(p.status in (PassengerStatus.waiting, PassengerStatus.picked_up) for p in passengers.values())
        if not activos:
            break
        _tick(state, passengers, [], net, grid, events)

    return _report(report, passengers, events)


def _report(report: SimReport, passengers: Dict[int, Passenger], events: list) -> SimReport:
    atendidos = [p for p in passengers.values() if p.status == PassengerStatus.served]
    report.generated = len(passengers)
    report.served = len(atendidos)
    report.left = sum(1 for p in passengers.values() if p.status == PassengerStatus.left)
    report.waiting_at_end = sum(1 for p in passengers.values() if p.status == PassengerStatus.waiting)
    report.no_served = not atendidos
    if atendidos:
        report.avg_wait_s = float(np.mean([p.wait_s for p in atendidos]))
        report.avg_travel_s = float(np.mean([p.travel_s for p in atendidos]))
    if report.generated:
        report.leaving_rate_pct = 100.0 * report.left / report.generated
    report.events = events
    logger.info(
        "%s: %d pasajeros, %d atendidos, %d abandonos", report.engine, report.generated, report.served, report.left
    )
    return report
