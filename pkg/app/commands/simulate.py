"""
simulate: una corrida de simulación con un motor
"""
import argparse
from datetime import datetime, timezone
from pathlib import Path

from app.commands.common import (
    add_scenario_arguments,
    config_from_args,
    load_forecaster,
    load_scenario,
    write_manifest,
)
from app.config import ENGINES, SimConfig
from app.schemas.report import SimReport
from app.schemas.scenario import Scenario
from app.services.engine_service import build_engine
from app.services.forecast_service import Forecaster
from app.services.report_service import write_events_log, write_report_csv
from app.services.run_service import record_runs
from app.services.simulator_service import run_simulation
from app.utils.logger import get_logger

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="Simular un día con un motor de rebalanceo")
    parser.add_argument("--engine", choices=list(ENGINES))
    parser.add_argument("--pi", type=float, help="Nivel del intervalo de predicción (duro)")
    parser.add_argument("--budget", type=float, help="Presupuesto de incertidumbre Γ")
    parser.add_argument("--rho", type=float, help="Ancho de las cajas μ ± ρσ (ro)")
    add_scenario_arguments(parser)
    parser.set_defaults(handler=cmd_simulate)


def simulate_one(config: SimConfig, scenario: Scenario, forecaster: Forecaster = None) -> SimReport:
    engine = build_engine(config, scenario, forecaster)
    return run_simulation(config, engine, scenario)


def cmd_simulate(args: argparse.Namespace) -> int:
    inicio = datetime.now(timezone.utc)
    config = config_from_args(args)
    scenario = load_scenario(config, args.synthetic)
    forecaster = load_forecaster(config, scenario, args.synthetic, args.noise)

    report = simulate_one(config, scenario, forecaster)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv([report], out / "report.csv")
    write_events_log(report, out / "events.log")
    write_manifest(config, [config], out, inicio)
    if not args.no_db:
        record_runs([(config, report)], args.db)

    logger.info(
        "%s: espera media %.1f s, abandono %.2f%%", report.engine, report.avg_wait_s, report.leaving_rate_pct
    )
    return 0
