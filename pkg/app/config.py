import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings

from app.exceptions import UsageError
from app.schemas.network import TimeGrid


class Settings(BaseSettings):
    PROJECT_NAME: str = "Rebalanceo Robusto AMoD"
    VERSION: str = "1.0.0"

    DATABASE_URL: str = "sqlite:///./runs.db"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "./out"

    class Config:
        env_file = ".env"


settings = Settings()


ENGINES = ("dohv", "donn", "ro", "duro", "none")
FAMILIES = ("poisson", "normal", "tnormal", "zpoisson", "nb")


class SimConfig(BaseModel):
    """
    Parámetros de la simulación.
    Cada campo acepta también su nombre de la tabla de parámetros
    (beta, gamma, Omega, Delta, delta, omega_bar, omega_tilde, n, kappa, m, N_v).
    """

    # Tabla de parámetros
    beta: float = Field(1.0, gt=0, description="Peso de la distancia de recogida")
    gamma: float = Field(100.0, gt=0, description="Penalidad por viaje no atendido")
    omega: int = Field(24, alias="Omega", ge=1, description="Intervalos simulados")
    delta_s: int = Field(300, alias="Delta", gt=0, description="Intervalo de rebalanceo (s)")
    match_tick_s: int = Field(30, alias="delta", gt=0, description="Intervalo de matching (s)")
    max_pickup_s: float = Field(30.0, alias="omega_bar", gt=0, description="Tiempo máximo de recogida (s)")
    max_wait_s: float = Field(300.0, alias="omega_tilde", gt=0, description="Espera máxima del pasajero (s)")
    n_regions: int = Field(63, alias="n", ge=1)
    kappa: int = Field(6, ge=1, description="Horizonte de anticipación")
    m_history: int = Field(18, alias="m", ge=2, description="Días históricos")
    n_vehicles: int = Field(2000, alias="N_v", ge=0)

    # Motor y sus perillas
    engine: Literal["dohv", "donn", "ro", "duro", "none"] = "duro"
    pi: float = Field(95.0, alias="PI", gt=0, lt=100)
    budget: float = Field(9.0, alias="Gamma", ge=0)
    rho: float = Field(1.5, gt=0)
    family: Literal["poisson", "normal", "tnormal", "zpoisson", "nb"] = "poisson"
    seed: int = 0

    # Red y optimización
    mean_speed_mps: float = Field(6.0, gt=0)
    k_neighbors: int = Field(4, ge=1)
    distance_unit_m: float = Field(1000.0, gt=0)
    solver_backend: Literal["simplex", "highs"] = "simplex"
    demand_convention: Literal["customer_first", "paper_verbatim"] = "customer_first"
    lp_tolerance: float = Field(1e-7, gt=0)
    clamp_mean: bool = True

    # Simulación
    start_interval: int = Field(84, ge=0, description="Intervalo del día en que parte la simulación")
    use_recorded_durations: bool = False
    record_timing: bool = True

    # Rutas de datos
    zones_path: Optional[str] = None
    data_dir: Optional[str] = None
    model_path: Optional[str] = None
    sim_day: Optional[str] = None

    class Config:
        populate_by_name = True
        extra = "forbid"

    @model_validator(mode="after")
    def validar_ticks(self):
        if self.delta_s % self.match_tick_s != 0:
            raise UsageError("Delta debe ser múltiplo de delta")
        return self

    def time_grid(self) -> TimeGrid:
        return TimeGrid(
            delta=self.delta_s,
            omega=self.omega,
            kappa=self.kappa,
            match_tick=self.match_tick_s,
            max_wait=self.max_wait_s,
            max_pickup=self.max_pickup_s,
        )


def _alias_map() -> Dict[str, str]:
    mapa = {}
    for nombre, campo in SimConfig.model_fields.items():
        mapa[nombre] = nombre
        if campo.alias:
            mapa[campo.alias] = nombre
    return mapa


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> SimConfig:
    """
    Carga el archivo clave=valor (si existe) y aplica encima los flags de la CLI.
    Valores None en overrides se ignoran.
    """
    mapa = _alias_map()
    valores: Dict[str, Any] = {}

    if path:
        if not Path(path).exists():
            raise UsageError(f"Archivo de configuración no encontrado: {path}")
        for clave, valor in dotenv_values(path).items():
            if clave not in mapa:
                raise UsageError(f"Clave desconocida en {path}: {clave}")
            valores[mapa[clave]] = valor

    for clave, valor in (overrides or {}).items():
        if valor is None:
            continue
        if clave not in mapa:
            raise UsageError(f"Parámetro desconocido: {clave}")
        valores[mapa[clave]] = valor

    try:
        return SimConfig(**valores)
    except ValidationError as e:
        raise UsageError(f"Configuración inválida: {e}")


def config_hash(config: SimConfig) -> str:
    """SHA-256 del JSON canónico (claves ordenadas)"""
    canonico = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonico.encode("utf-8")).hexdigest()
