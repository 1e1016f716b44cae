from pathlib import Path
from typing import Iterable, Tuple

import numpy as np
import pandas as pd

from app.exceptions import DomainError
from app.schemas.forecast import DistForecast, MetricsRow
from app.services import distributions

METRIC_COLUMNS = ["family", "PI", "NLL", "MAE", "MAPE", "MPIW", "PICP"]


def _validar(*arreglos) -> Tuple[np.ndarray, ...]:
    salida = tuple(np.asarray(a, dtype=float).ravel() for a in arreglos)
    if any(a.size == 0 for a in salida):
        raise DomainError("Métricas sobre una entrada vacía")
    if len({a.size for a in salida}) != 1:
        raise DomainError("Las entradas de métricas no están alineadas")
    return salida


def mpiw(lb, ub) -> float:
    """Ancho medio de los intervalos"""
    lb, ub = _validar(lb, ub)
    return float(np.mean(ub - lb))


def picp(lb, ub, truth) -> float:
    """Fracción de observaciones dentro de [lb, ub]"""
    lb, ub, y = _validar(lb, ub, truth)
    return float(np.mean((y >= lb) & (y <= ub)))


def mae(pred, truth) -> float:
    pred, y = _validar(pred, truth)
    return float(np.mean(np.abs(pred - y)))


def mape(pred, truth) -> float:
    '''
    Error porcentual absoluto medio, en %.
    Las celdas con valor real 0 se excluyen; si no queda ninguna se devuelve NaN.
    '''
    pred, y = _validar(pred, truth)
    positivos = y != 0
    if not positivos.any():
        return float("nan")
    return float(np.mean(np.abs(pred[positivos] - y[positivos]) / np.abs(y[positivos])) * 100.0)


def metrics(forecast: DistForecast, intervals: Tuple, truth) -> dict:
    '''
    NLL, MAE, MAPE, MPIW y PICP de un pronóstico contra la realidad.
    intervals es el par (lb, ub) con la misma forma que forecast.mean.
    '''
    lb, ub = intervals
    y = np.asarray(truth, dtype=float)
    if y.size == 0:
        raise DomainError("Métricas sobre una entrada vacía")
    if y.shape != forecast.mean.shape:
        raise DomainError("truth no calza con el pronóstico")
    arity = forecast.params.shape[-1]
    nll = distributions.nll(forecast.family, forecast.params.reshape(-1, arity), y.ravel())
    return {
        "NLL": float(np.mean(nll)),
        "MAE": mae(forecast.mean, y),
        "MAPE": mape(forecast.mean, y),
        "MPIW": mpiw(lb, ub),
        "PICP": picp(lb, ub, y),
    }


def metrics_row(forecast: DistForecast, truth, pi: float) -> MetricsRow:
    lb, ub = distributions.interval(forecast.family, forecast.params, pi)
    valores = metrics(forecast, (lb, ub), truth)
    return MetricsRow(
        family=forecast.family,
        pi=pi,
        nll=valores["NLL"],
        mae=valores["MAE"],
        mape=valores["MAPE"],
        mpiw=valores["MPIW"],
        picp=valores["PICP"],
    )


def write_metrics_csv(rows: Iterable[MetricsRow], path: Path) -> None:
    registros = [
        {
            "family": r.family, "PI": r.pi, "NLL": round(r.nll, 6), "MAE": round(r.mae, 6),
            "MAPE": round(r.mape, 6), "MPIW": round(r.mpiw, 6), "PICP": round(r.picp, 6),
        }
        for r in rows
    ]
    pd.DataFrame(registros, columns=METRIC_COLUMNS).to_csv(path, index=False)
