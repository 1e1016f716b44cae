"""
ingest: viajes crudos -> tensores de demanda por día, matrices de transición y red
"""
import argparse
from pathlib import Path

from app.exceptions import UsageError
from app.schemas.network import TimeGrid
from app.services.ingest_service import (
    aggregate_demand,
    estimate_transitions,
    parse_trips,
    split_days,
    write_demand,
    write_transitions,
)
from app.services.network_service import NETWORK_FILE, load_zones, write_network
from app.utils.dates import SECONDS_PER_DAY, format_day, intervals_per_day
from app.utils.logger import get_logger

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("ingest", help="Agregar viajes en tensores de demanda")
    parser.add_argument("--trips", required=True, help="CSV de viajes")
    parser.add_argument("--zones", required=True, help="CSV zone_id,lat,lon")
    parser.add_argument("--out", required=True, help="Directorio de salida")
    parser.add_argument("--interval-sec", type=int, default=300, help="Largo del intervalo Δ (s)")
    parser.add_argument("--adjacency", help="CSV de aristas zone_id_a,zone_id_b")
    parser.add_argument("--k-neighbors", type=int, default=4)
    parser.add_argument("--mean-speed", type=float, default=6.0, help="Velocidad media (m/s)")
    parser.set_defaults(handler=cmd_ingest)


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.interval_sec <= 0 or SECONDS_PER_DAY % args.interval_sec:
        raise UsageError(f"--interval-sec debe dividir el día: {args.interval_sec}")
    if args.mean_speed <= 0 or args.k_neighbors < 1:
        raise UsageError("--mean-speed debe ser positiva y --k-neighbors al menos 1")
    net = load_zones(args.zones, args.adjacency, mean_speed=args.mean_speed, k_neighbors=args.k_neighbors)
    grid = TimeGrid(delta=args.interval_sec, omega=intervals_per_day(args.interval_sec), match_tick=args.interval_sec)
    trips = parse_trips(args.trips, net=net)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    dias = split_days(trips)
    for inicio, viajes in sorted(dias.items()):
        tensor = aggregate_demand(viajes, net, grid, window_start=inicio)
        write_demand(tensor, net, out, format_day(inicio))
    write_transitions(estimate_transitions(trips, net, grid), net, out / "transitions.csv")
    write_network(net, out / NETWORK_FILE, mean_speed=args.mean_speed, k_neighbors=args.k_neighbors)

    logger.info("%d viajes en %d días escritos en %s (%d filas descartadas)", len(trips), len(dias), out, trips.skipped)
    return 0
