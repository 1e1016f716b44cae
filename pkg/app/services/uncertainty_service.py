"""
Conjuntos de incertidumbre para el rebalanceo robusto y sus cotas de peor caso.

El presupuesto Γ limita la desviación total |Σ_i (r_i − μ_i)| de cada intervalo,
así que las cotas de peor caso tienen forma cerrada y solo dependen de Σμ.
"""
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from app.exceptions import FormatError, InfeasibleSetError, InvariantViolation
from app.schemas.demand import HistoricalMoments
from app.schemas.forecast import DistForecast
from app.schemas.uncertainty import UncertaintySet
from app.services.distributions import interval


def build_duro_set(forecast: DistForecast, pi: float, budget: float, clamp_mean: bool = True) -> UncertaintySet:
    """Cajas desde los intervalos del pronóstico al PI%, con piso en 0"""
    lb, ub = interval(forecast.family, forecast.params, pi)
    lb = np.maximum(np.asarray(lb, dtype=float), 0.0)
    ub = np.maximum(np.asarray(ub, dtype=float), 0.0)
    return UncertaintySet(lb=lb, mu=forecast.mean, ub=ub, budget=budget, clamp_mean=clamp_mean)


def build_ro_set(
    moments: HistoricalMoments,
    rho: float,
    budget: float,
    start: int = 0,
    horizon: Optional[int] = None,
) -> UncertaintySet:
    '''
    Cajas μ ± ρσ con piso en 0. start/horizon recortan los intervalos del día
    (dando la vuelta al final).
    '''
    if rho <= 0:
        raise InvariantViolation("rho debe ser positivo")
    mu, sigma = moments.mu, moments.sigma
    if horizon is not None:
        columnas = np.arange(start, start + horizon)
        mu = np.take(mu, columnas, axis=1, mode="wrap")
        sigma = np.take(sigma, columnas, axis=1, mode="wrap")
    return UncertaintySet(
        lb=np.maximum(mu - rho * sigma, 0.0),
        mu=mu,
        ub=mu + rho * sigma,
        budget=budget,
    )


def _check(s: UncertaintySet, k: int) -> None:
    if not 0 <= k < s.n_intervals:
        raise InvariantViolation(f"Intervalo {k} fuera del conjunto")
    if not s.nonempty(k):
        raise InfeasibleSetError(f"Conjunto vacío en el intervalo {k}")


def worst_case_min(s: UncertaintySet, k: int, i: int) -> float:
    """min r_i en el intervalo k sobre el conjunto"""
    _check(s, k)
    resto_ub = s.ub[:, k].sum() - s.ub[i, k]
    return float(max(s.lb[i, k], s.mu[:, k].sum() - s.budget - resto_ub))


def worst_case_sum_max(s: UncertaintySet, k: int) -> float:
    """max Σ_i r_i en el intervalo k sobre el conjunto"""
    _check(s, k)
    return float(min(s.ub[:, k].sum(), s.mu[:, k].sum() + s.budget))


def worst_case_min_matrix(s: UncertaintySet) -> np.ndarray:
    """worst_case_min para todas las celdas, (n, K)"""
    for k in range(s.n_intervals):
        _check(s, k)
    resto_ub = s.ub.sum(axis=0)[None, :] - s.ub
    return np.maximum(s.lb, s.mu.sum(axis=0)[None, :] - s.budget - resto_ub)


def worst_case_sum_max_vector(s: UncertaintySet) -> np.ndarray:
    for k in range(s.n_intervals):
        _check(s, k)
    return np.minimum(s.ub.sum(axis=0), s.mu.sum(axis=0) + s.budget)


# --- CSV de auditoría ---

def write_set_csv(s: UncertaintySet, path: Path, zone_ids: Optional[Sequence[int]] = None) -> None:
    '''
    Primera línea `Gamma,<valor>`; luego la tabla region,interval,lb,mu,ub.
    '''
    ids = np.arange(s.n) if zone_ids is None else np.asarray(zone_ids)
    regiones, intervalos = np.meshgrid(np.arange(s.n), np.arange(s.n_intervals), indexing="ij")
    tabla = pd.DataFrame({
        "region": ids[regiones.ravel()],
        "interval": intervalos.ravel(),
        "lb": s.lb.ravel(),
        "mu": s.mu.ravel(),
        "ub": s.ub.ravel(),
    })
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"Gamma,{s.budget!r}\n")
        tabla.to_csv(f, index=False)


def read_set_csv(path: Path, zone_ids: Optional[Sequence[int]] = None, clamp_mean: bool = True) -> UncertaintySet:
    with open(path, encoding="utf-8") as f:
        cabecera = f.readline().strip().split(",")
        if len(cabecera) != 2 or cabecera[0] != "Gamma":
            raise FormatError(f"{path}: falta la fila de cabecera Gamma")
        tabla = pd.read_csv(f)

    ids = list(zone_ids) if zone_ids is not None else sorted(tabla["region"].unique())
    indice = {int(z): i for i, z in enumerate(ids)}
    n, K = len(ids), int(tabla["interval"].max()) + 1
    lb, mu, ub = np.zeros((n, K)), np.zeros((n, K)), np.zeros((n, K))
    filas = tabla["region"].map(lambda z: indice[int(z)]).to_numpy()
    columnas = tabla["interval"].to_numpy()
    lb[filas, columnas] = tabla["lb"].to_numpy()
    mu[filas, columnas] = tabla["mu"].to_numpy()
    ub[filas, columnas] = tabla["ub"].to_numpy()
    return UncertaintySet(lb=lb, mu=mu, ub=ub, budget=float(cabecera[1]), clamp_mean=clamp_mean)
