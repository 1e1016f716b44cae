"""
compare: grilla de motores x (PI, Γ, ρ) con mapas de calor y tabla de reducciones
"""
import argparse
import itertools
from datetime import datetime, timezone
from multiprocessing import Pool
from pathlib import Path
from typing import List, Optional

from app.commands.common import (
    add_scenario_arguments,
    config_from_args,
    engine_names,
    load_forecaster,
    load_scenario,
    write_manifest,
)
from app.commands.simulate import simulate_one
from app.config import SimConfig
from app.exceptions import UsageError
from app.schemas.report import SimReport
from app.schemas.scenario import Scenario
from app.services.forecast_service import Forecaster
from app.services.report_service import write_comparison
from app.services.run_service import record_runs
from app.utils.logger import get_logger

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("compare", help="Comparar motores sobre una grilla de parámetros")
    parser.add_argument("--engines", nargs="+", default=["dohv", "ro", "duro"])
    parser.add_argument("--pis", type=float, nargs="+", help="Niveles PI para duro")
    parser.add_argument("--budgets", type=float, nargs="+", help="Valores de Γ para ro y duro")
    parser.add_argument("--rhos", type=float, nargs="+", help="Valores de ρ para ro")
    parser.add_argument("--baseline", default="dohv", help="Motor contra el que se calculan reducciones")
    parser.add_argument("--jobs", type=int, default=1, help="Procesos en paralelo")
    parser.add_argument("--svg", action="store_true", help="Escribir también los mapas de calor en SVG")
    add_scenario_arguments(parser)
    parser.set_defaults(handler=cmd_compare)


def build_grid(
    base: SimConfig,
    engines,
    pis: Optional[List[float]] = None,
    budgets: Optional[List[float]] = None,
    rhos: Optional[List[float]] = None,
) -> List[SimConfig]:
    '''
    Un SimConfig por punto, en orden determinista: motor, luego PI o ρ, luego Γ.
    Los motores sin perillas aparecen una sola vez.
    '''
    pis = pis or [base.pi]
    budgets = budgets or [base.budget]
    rhos = rhos or [base.rho]
    grilla: List[SimConfig] = []
    for engine in engines:
        if engine == "duro":
            puntos = [{"pi": p, "budget": g} for p, g in itertools.product(pis, budgets)]
        elif engine == "ro":
            puntos = [{"rho": r, "budget": g} for r, g in itertools.product(rhos, budgets)]
        else:
            puntos = [{}]
        grilla.extend(base.model_copy(update={"engine": engine, **p}) for p in puntos)
    return grilla


def _run_point(tarea) -> SimReport:
    config, scenario, forecaster = tarea
    return simulate_one(config, scenario, forecaster)


def run_grid(configs: List[SimConfig], scenario: Scenario, forecaster: Optional[Forecaster], jobs: int = 1) -> List[SimReport]:
    """Corre la grilla; el resultado respeta el orden de configs con cualquier número de procesos"""
    tareas = [(c, scenario, forecaster) for c in configs]
    if jobs <= 1:
        return [_run_point(t) for t in tareas]
    with Pool(processes=jobs) as pool:
        return pool.map(_run_point, tareas)


def cmd_compare(args: argparse.Namespace) -> int:
    inicio = datetime.now(timezone.utc)
    if args.jobs < 1:
        raise UsageError("--jobs debe ser al menos 1")
    engines = list(engine_names(args.engines))
    if args.baseline not in engines:
        engines.insert(0, engine_names([args.baseline])[0])

    base = config_from_args(args)
    scenario = load_scenario(base, args.synthetic)
    forecaster = load_forecaster(base, scenario, args.synthetic, args.noise)
    if forecaster is None and {"donn", "duro"} & set(engines):
        raise UsageError("donn y duro necesitan --model o --synthetic")

    configs = build_grid(base, engines, args.pis, args.budgets, args.rhos)
    logger.info("Grilla de %d corridas con %d procesos", len(configs), args.jobs)
    reports = run_grid(configs, scenario, forecaster, args.jobs)

    out = Path(args.out)
    write_comparison(reports, out, baseline=args.baseline, svg=args.svg)
    write_manifest(base, configs, out, inicio)
    if not args.no_db:
        record_runs(list(zip(configs, reports)), args.db)
    return 0
