"""
Flags y carga de escenarios compartidos por simulate y compare.
"""
import argparse
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple

from app.config import ENGINES, SimConfig, config_hash, load_config
from app.exceptions import UsageError
from app.schemas.demand import TransitionMatrices
from app.schemas.report import RunManifest
from app.schemas.scenario import Scenario
from app.services.forecast_model import load_weights
from app.services.forecast_service import Forecaster, NeuralForecaster, RateForecaster
from app.services.ingest_service import (
    historical_moments,
    list_demand_days,
    read_demand,
    read_od,
    read_transitions,
    trips_from_od,
)
from app.services.network_service import load_data_network, normalized_adjacency
from app.services.synthetic_service import synthetic_city
from app.utils.dates import format_day, parse_day
from app.utils.logger import get_logger

logger = get_logger(__name__)

# flag de la CLI -> campo de SimConfig
FLAG_FIELDS = {
    "engine": "engine",
    "pi": "pi",
    "budget": "budget",
    "rho": "rho",
    "beta": "beta",
    "gamma": "gamma",
    "seed": "seed",
    "family": "family",
    "omega": "omega",
    "kappa": "kappa",
    "regions": "n_regions",
    "n_vehicles": "n_vehicles",
    "history_days": "m_history",
    "start_interval": "start_interval",
    "solver": "solver_backend",
    "convention": "demand_convention",
    "zones": "zones_path",
    "data": "data_dir",
    "model": "model_path",
    "day": "sim_day",
}


def add_scenario_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Archivo clave=valor con los parámetros (nombres de la tabla)")
    parser.add_argument("--zones", help="CSV zone_id,lat,lon")
    parser.add_argument("--data", help="Directorio de salida de ingest")
    parser.add_argument("--model", help="Pesos JSON del pronosticador")
    parser.add_argument("--day", help="Día a simular (YYYY-MM-DD); por defecto el último")
    parser.add_argument("--synthetic", action="store_true", help="Usar una ciudad sintética")
    parser.add_argument("--noise", type=float, default=0.2, help="Ruido del pronóstico sintético")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--gamma", type=float, help="Penalidad por viaje no atendido")
    parser.add_argument("--omega", type=int, help="Intervalos simulados")
    parser.add_argument("--kappa", type=int, help="Horizonte")
    parser.add_argument("--regions", type=int, help="Zonas de la ciudad sintética")
    parser.add_argument("--n-vehicles", type=int)
    parser.add_argument("--history-days", type=int)
    parser.add_argument("--start-interval", type=int)
    parser.add_argument("--solver", choices=["simplex", "highs"])
    parser.add_argument("--convention", choices=["customer_first", "paper_verbatim"])
    parser.add_argument("--family", choices=["poisson", "normal", "tnormal", "zpoisson", "nb"])
    parser.add_argument("--out", default="out", help="Directorio de salida")
    parser.add_argument("--no-db", action="store_true", help="No registrar las corridas en la BD")
    parser.add_argument("--db", help="URL de la BD de auditoría (por defecto DATABASE_URL)")
    parser.add_argument("--no-timing", action="store_true", help="Escribir 0.0 como tiempo de decisión")


def config_from_args(args: argparse.Namespace, **extra) -> SimConfig:
    overrides = {campo: getattr(args, flag, None) for flag, campo in FLAG_FIELDS.items()}
    if getattr(args, "no_timing", False):
        overrides["record_timing"] = False
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return load_config(args.config, overrides)


def load_scenario(config: SimConfig, synthetic: bool = False) -> Scenario:
    if synthetic:
        return synthetic_city(
            n_zones=config.n_regions,
            seed=config.seed,
            history_days=config.m_history,
            delta=config.delta_s,
            mean_speed=config.mean_speed_mps,
        )
    if not config.zones_path or not config.data_dir:
        raise UsageError("Se necesitan --zones y --data (o --synthetic)")

    net = load_data_network(
        config.zones_path, config.data_dir, mean_speed=config.mean_speed_mps, k_neighbors=config.k_neighbors
    )
    dias = list_demand_days(config.data_dir)
    if not dias:
        raise UsageError(f"No hay días de demanda en {config.data_dir}")
    nombres = [p.stem for p in dias]
    dia = format_day(parse_day(config.sim_day)) if config.sim_day else nombres[-1]
    if dia not in nombres:
        raise UsageError(f"Día {dia} no encontrado en {config.data_dir}")
    posicion = nombres.index(dia)

    historia = [read_demand(p, net) for p in dias[max(0, posicion - config.m_history):posicion]]
    simulado = read_demand(dias[posicion], net)
    od_path = Path(config.data_dir) / "od" / f"{dia}.csv"
    od = read_od(od_path, net, simulado.omega)

    transiciones_path = Path(config.data_dir) / "transitions.csv"
    if transiciones_path.exists():
        transiciones = read_transitions(transiciones_path, net)
    else:
        logger.warning("Sin transitions.csv, se usa Q = I")
        transiciones = TransitionMatrices.identity(net.n)

    return Scenario(
        net=net,
        transitions=transiciones,
        moments=historical_moments(historia),
        observed=simulado.counts,
        requests=trips_from_od(od, net, simulado.window_start, simulado.delta),
        day_start=simulado.window_start,
    )


def load_forecaster(config: SimConfig, scenario: Scenario, synthetic: bool, noise: float = 0.2) -> Optional[Forecaster]:
    if synthetic and scenario.true_rates is not None:
        return RateForecaster(scenario.true_rates, noise=noise, seed=config.seed)
    if config.model_path:
        model = load_weights(config.model_path, normalized_adjacency(scenario.net))
        return NeuralForecaster(model, scenario.moments.mu)
    return None


def engine_names(valores) -> Tuple[str, ...]:
    desconocidos = [e for e in valores if e not in ENGINES]
    if desconocidos:
        raise UsageError(f"Motores desconocidos: {desconocidos}")
    return tuple(valores)


def grid_point(config: SimConfig) -> dict:
    return {"engine": config.engine, "PI": config.pi, "Gamma": config.budget, "rho": config.rho}


def write_manifest(config: SimConfig, configs: List[SimConfig], out_dir: Path, started_at: datetime) -> Path:
    manifest = RunManifest(
        config_hash=config_hash(config),
        seed=config.seed,
        engine_grid=[grid_point(c) for c in configs],
        output_dir=str(out_dir),
        started_at=started_at,
        finished_at=datetime.now(timezone.utc),
    )
    ruta = Path(out_dir) / "manifest.json"
    ruta.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return ruta
