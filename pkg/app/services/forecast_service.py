"""
Proveedores de pronóstico que consumen los motores de rebalanceo.
Cada uno entrega un DistForecast para los κ intervalos que parten en k.
"""
from abc import ABC, abstractmethod

import numpy as np

from app.exceptions import ForecastInputError
from app.schemas.forecast import DistForecast
from app.services.distributions import forecast_mean
from app.services.forecast_model import ForecastModel, model_forward


def _window(matriz: np.ndarray, k: int, largo: int) -> np.ndarray:
    """Columnas k..k+largo-1, dando la vuelta al final del día"""
    return np.take(matriz, np.arange(k, k + largo), axis=1, mode="wrap")


class Forecaster(ABC):
    @abstractmethod
    def forecast(self, k: int, observed: np.ndarray, horizon: int) -> DistForecast:
        """k: intervalo del día; observed: conteos realizados (n, ≥k) del día"""


class NeuralForecaster(Forecaster):
    def __init__(self, model: ForecastModel, hist_mu: np.ndarray):
        self.model = model
        self.hist_mu = np.asarray(hist_mu, dtype=float)

    def forecast(self, k, observed, horizon):
        lag = self.model.meta.lag
        if horizon != self.model.meta.horizon:
            raise ForecastInputError(
                f"El modelo pronostica {self.model.meta.horizon} pasos, se pidieron {horizon}"
            )
        if k < lag or observed.shape[1] < k:
            raise ForecastInputError(f"Faltan rezagos para el intervalo {k} (se necesitan {lag})")
        lags = np.asarray(observed[:, k - lag:k], dtype=float)
        return model_forward(self.model, lags, _window(self.hist_mu, k, horizon))


class RateForecaster(Forecaster):
    '''
    Pronóstico Poisson a partir de tasas conocidas con ruido multiplicativo log-normal.
    El ruido depende solo de (seed, k), así que es reproducible sin importar el orden de las llamadas.
    '''

    def __init__(self, rates: np.ndarray, noise: float = 0.2, seed: int = 0):
        self.rates = np.asarray(rates, dtype=float)
        self.noise = noise
        self.seed = seed

    def forecast(self, k, observed, horizon):
        tasas = _window(self.rates, k, horizon)
        if self.noise > 0:
            rng = np.random.default_rng([self.seed, k])
            tasas = tasas * rng.lognormal(mean=0.0, sigma=self.noise, size=tasas.shape)
        params = np.maximum(tasas, 1e-6)[..., None]
        return DistForecast(family="poisson", params=params, mean=forecast_mean("poisson", params))
