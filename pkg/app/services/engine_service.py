"""
Motores de rebalanceo: cada uno arma la entrada de demanda para el horizonte
y resuelve el MIVR correspondiente.

  dohv  determinista sobre el promedio histórico
  donn  determinista sobre la media del pronosticador
  ro    robusto con cajas μ ± ρσ
  duro  robusto con los intervalos del pronosticador
  none  sin rebalanceo
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Type

import numpy as np

from app.config import SimConfig
from app.exceptions import UsageError
from app.schemas.plan import MivrInstance, RebalancePlan
from app.schemas.scenario import Scenario
from app.services.forecast_service import Forecaster
from app.services.mivr_service import solve_deterministic, solve_robust_with_fallback
from app.services.uncertainty_service import build_duro_set, build_ro_set


@dataclass
class DecisionInput:
    """Estado que ve el motor al inicio del intervalo k (del día)"""
    k: int
    V: np.ndarray
    O: np.ndarray
    observed: np.ndarray


class Engine(ABC):
    name: str = ""

    def __init__(self, config: SimConfig, scenario: Scenario, forecaster: Optional[Forecaster] = None):
        self.config = config
        self.scenario = scenario
        self.grid = config.time_grid()
        self.forecaster = forecaster

    def instance(self, inp: DecisionInput, **demand) -> MivrInstance:
        return MivrInstance(
            net=self.scenario.net,
            grid=self.grid,
            V0=inp.V,
            O0=inp.O,
            transitions=self.scenario.transitions,
            beta=self.config.beta,
            gamma=self.config.gamma,
            n_vehicles=self.config.n_vehicles,
            distance_unit_m=self.config.distance_unit_m,
            demand_convention=self.config.demand_convention,
            **demand,
        )

    def _window(self, matriz: np.ndarray, k: int) -> np.ndarray:
        return np.take(matriz, np.arange(k, k + self.grid.kappa), axis=1, mode="wrap")

    @abstractmethod
    def decide(self, inp: DecisionInput) -> Tuple[RebalancePlan, bool]:
        """Plan del intervalo actual y si se usó el respaldo determinista"""


class NoRebalanceEngine(Engine):
    name = "none"

    def decide(self, inp):
        return RebalancePlan.empty(self.scenario.net.n), False


class DeterministicEngine(Engine):
    def point_demand(self, inp: DecisionInput) -> np.ndarray:
        raise NotImplementedError

    def decide(self, inp):
        demanda = self.point_demand(inp)
        plan = solve_deterministic(
            self.instance(inp, demand=demanda),
            tolerance=self.config.lp_tolerance,
            backend=self.config.solver_backend,
        )
        return plan, False


class DohvEngine(DeterministicEngine):
    name = "dohv"

    def point_demand(self, inp):
        return self._window(self.scenario.moments.mu, inp.k)


class DonnEngine(DeterministicEngine):
    name = "donn"

    def point_demand(self, inp):
        return self.forecaster.forecast(inp.k, inp.observed, self.grid.kappa).mean


class RobustEngine(Engine):
    def uncertainty_set(self, inp: DecisionInput):
        raise NotImplementedError

    def decide(self, inp):
        conjunto = self.uncertainty_set(inp)
        return solve_robust_with_fallback(
            self.instance(inp, uncertainty=conjunto),
            tolerance=self.config.lp_tolerance,
            backend=self.config.solver_backend,
        )


class RoEngine(RobustEngine):
    name = "ro"

    def uncertainty_set(self, inp):
        return build_ro_set(
            self.scenario.moments, self.config.rho, self.config.budget, start=inp.k, horizon=self.grid.kappa
        )


class DuroEngine(RobustEngine):
    name = "duro"

    def uncertainty_set(self, inp):
        pronostico = self.forecaster.forecast(inp.k, inp.observed, self.grid.kappa)
        return build_duro_set(pronostico, self.config.pi, self.config.budget, clamp_mean=self.config.clamp_mean)


ENGINES: Dict[str, Type[Engine]] = {
    e.name: e for e in (DohvEngine, DonnEngine, RoEngine, DuroEngine, NoRebalanceEngine)
}


def build_engine(config: SimConfig, scenario: Scenario, forecaster: Optional[Forecaster] = None) -> Engine:
    if config.engine not in ENGINES:
        raise UsageError(f"Motor desconocido: {config.engine}")
    if config.engine in ("donn", "duro") and forecaster is None:
        raise UsageError(f"El motor {config.engine} necesita un pronosticador (--model o --synthetic)")
    return ENGINES[config.engine](config, scenario, forecaster)
