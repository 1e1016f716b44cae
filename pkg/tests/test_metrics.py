import math

import numpy as np
import pandas as pd
import pytest

from app.exceptions import DomainError
from app.schemas.forecast import DistForecast
from app.services.metrics_service import mae, mape, metrics, metrics_row, mpiw, picp, write_metrics_csv


def test_mpiw():
    assert mpiw([1, 2], [3, 6]) == pytest.approx(3.0)


def test_picp():
    assert picp([1, 6], [3, 7], [2, 5]) == pytest.approx(0.5)


def test_mae_y_mape():
    assert mae([1.0, 4.0], [2.0, 2.0]) == pytest.approx(1.5)
    # la celda con valor real 0 no cuenta
    assert mape([1.0, 3.0, 9.0], [2.0, 0.0, 6.0]) == pytest.approx(50.0)
    assert math.isnan(mape([1.0], [0.0]))


def test_entrada_vacia():
    with pytest.raises(DomainError):
        mpiw([], [])
    with pytest.raises(DomainError):
        picp([1], [2], [])


def test_metrics_poisson():
    forecast = DistForecast(family="poisson", params=np.full((2, 1, 1), 4.0), mean=np.full((2, 1), 4.0))
    valores = metrics(forecast, (np.array([[1], [1]]), np.array([[8], [8]])), np.array([[4], [10]]))
    assert valores["MPIW"] == pytest.approx(7.0)
    assert valores["PICP"] == pytest.approx(0.5)
    assert valores["MAE"] == pytest.approx(3.0)
    assert set(valores) == {"NLL", "MAE", "MAPE", "MPIW", "PICP"}


def test_metrics_forma_incorrecta():
    forecast = DistForecast(family="poisson", params=np.full((2, 1, 1), 4.0), mean=np.full((2, 1), 4.0))
    with pytest.raises(DomainError):
        metrics(forecast, (np.zeros((2, 1)), np.ones((2, 1))), np.zeros(3))


def test_csv_de_metricas(tmp_path):
    forecast = DistForecast(family="poisson", params=np.full((3, 2, 1), 4.0), mean=np.full((3, 2), 4.0))
    truth = np.array([[4, 2], [9, 0], [3, 5]])
    filas = [metrics_row(forecast, truth, pi) for pi in (50, 75, 95)]
    ruta = tmp_path / "metrics.csv"
    write_metrics_csv(filas, ruta)
    df = pd.read_csv(ruta)
    assert list(df.columns) == ["family", "PI", "NLL", "MAE", "MAPE", "MPIW", "PICP"]
    assert df["PI"].tolist() == [50, 75, 95]
    assert df["MPIW"].is_monotonic_increasing
    assert df.loc[2, "MPIW"] == pytest.approx(7.0)
