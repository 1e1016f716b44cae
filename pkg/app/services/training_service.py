import copy
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field

from app.exceptions import InsufficientDataError, TrainingDiverged
from app.schemas.forecast import DistForecast
from app.services.forecast_model import ForecastModel
from app.utils.logger import get_logger

logger = get_logger(__name__)


class TrainConfig(BaseModel):
    epochs: int = Field(20, ge=0)
    lr: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    patience: int = Field(5, ge=1)
    clip_norm: float = Field(5.0, gt=0)
    seed: int = 0


class LossTrace(BaseModel):
    train: List[float] = Field(default_factory=list)
    validation: List[float] = Field(default_factory=list)
    best_epoch: Optional[int] = None
    best_validation: Optional[float] = None


class DemandDataset:
    '''
    Muestras (rezagos, promedio histórico, objetivo) agrupadas por día.
    days: lista de conteos (n, T) de días completos en orden cronológico.
    hist_mu: (n, T) promedio histórico por intervalo del día.
    '''

    def __init__(self, days: Sequence[np.ndarray], hist_mu: np.ndarray, lag: int, horizon: int):
        self.lag = lag
        self.horizon = horizon
        self.hist_mu = np.asarray(hist_mu, dtype=float)
        self.batches: List[Tuple[torch.Tensor, torch.Tensor, torch.Tensor]] = []
        for conteos in days:
            lote = self._day_samples(np.asarray(conteos, dtype=float))
            if lote is not None:
                self.batches.append(lote)

    def _day_samples(self, conteos: np.ndarray):
        T = conteos.shape[1]
        inicios = range(self.lag, T - self.horizon + 1)
        if len(inicios) == 0:
            return None
        lags = np.stack([conteos[:, t - self.lag:t] for t in inicios])
        hist = np.stack([self.hist_mu[:, t:t + self.horizon] for t in inicios])
        y = np.stack([conteos[:, t:t + self.horizon] for t in inicios])
        return torch.as_tensor(lags), torch.as_tensor(hist), torch.as_tensor(y)

    def __len__(self) -> int:
        return len(self.batches)

    @property
    def empty(self) -> bool:
        return not self.batches

    def targets(self) -> np.ndarray:
        return np.concatenate([y.numpy().ravel() for _, _, y in self.batches]) if self.batches else np.zeros(0)


def chronological_split(days: Sequence, val_days: int = 2, test_days: int = 1) -> Tuple[list, list, list]:
    """Entrenamiento, validación y prueba en orden cronológico; la prueba son los últimos días"""
    days = list(days)
    if len(days) < val_days + test_days + 1:
        raise InsufficientDataError(
            f"Se necesitan al menos {val_days + test_days + 1} días para dividir, hay {len(days)}"
        )
    corte_test = len(days) - test_days
    corte_val = corte_test - val_days
    return days[:corte_val], days[corte_val:corte_test], days[corte_test:]


def dataset_nll(model: ForecastModel, dataset: DemandDataset) -> float:
    """NLL promedio por celda"""
    total, celdas = 0.0, 0
    with torch.no_grad():
        for lags, hist, y in dataset.batches:
            theta = model(lags, hist)
            perdida = model.family.nll(theta, y)
            total += float(perdida.sum())
            celdas += perdida.numel()
    return total / max(celdas, 1)


def train(
    model: ForecastModel,
    train_set: DemandDataset,
    validation_set: Optional[DemandDataset] = None,
    config: Optional[TrainConfig] = None,
) -> Tuple[ForecastModel, LossTrace]:
    '''
    Descenso de gradiente con momentum, un día por lote y parada temprana sobre
    la NLL de validación. Devuelve el mejor punto de control.
    '''
    config = config or TrainConfig()
    trace = LossTrace()
    if config.epochs == 0 or train_set.empty:
        return model, trace

    torch.manual_seed(config.seed)
    hilos = torch.get_num_threads()
    torch.set_num_threads(1)
    generador = torch.Generator().manual_seed(config.seed)
    optimizador = torch.optim.SGD(model.parameters(), lr=config.lr, momentum=config.momentum)

    validar = validation_set is not None and not validation_set.empty
    mejor_estado = copy.deepcopy(model.state_dict())
    mejor = math.inf
    sin_mejora = 0

    try:
        for epoca in range(config.epochs):
            orden = torch.randperm(len(train_set), generator=generador).tolist()
            acumulado = 0.0
            for b in orden:
                lags, hist, y = train_set.batches[b]
                optimizador.zero_grad()
                perdida = model.family.nll(model(lags, hist), y).mean()
                if not torch.isfinite(perdida):
                    raise TrainingDiverged(f"Pérdida no finita en la época {epoca}, lote {b}")
                perdida.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip_norm)
                optimizador.step()
                acumulado += float(perdida)
            trace.train.append(acumulado / len(orden))

            actual = dataset_nll(model, validation_set) if validar else trace.train[-1]
            if not math.isfinite(actual):
                raise TrainingDiverged(f"NLL de validación no finita en la época {epoca}")
            trace.validation.append(actual)
            logger.info("Época %d: train %.4f, validación %.4f", epoca, trace.train[-1], actual)

            if actual < mejor:
                mejor, sin_mejora = actual, 0
                trace.best_epoch = epoca
                mejor_estado = copy.deepcopy(model.state_dict())
            else:
                sin_mejora += 1
                if sin_mejora >= config.patience:
                    logger.info("Parada temprana en la época %d", epoca)
                    break
    finally:
        torch.set_num_threads(hilos)

    model.load_state_dict(mejor_estado)
    trace.best_validation = mejor
    return model, trace


def dataset_forecast(model: ForecastModel, dataset: DemandDataset) -> Tuple[DistForecast, np.ndarray]:
    '''
    Pronóstico de todas las muestras del conjunto, apiladas sobre el eje del horizonte:
    params (n, B*K, aridad) y la realidad (n, B*K) alineada.
    '''
    if dataset.empty:
        raise InsufficientDataError("Conjunto sin muestras para evaluar")
    thetas, reales = [], []
    with torch.no_grad():
        for lags, hist, y in dataset.batches:
            thetas.append(model(lags, hist))
            reales.append(y)
    theta = torch.cat(thetas).permute(1, 0, 2, 3)
    y = torch.cat(reales).permute(1, 0, 2)
    n, B, K, aridad = theta.shape
    theta = theta.reshape(n, B * K, aridad)
    media = model.family.mean(theta)
    forecast = DistForecast(family=model.family.name, params=theta.numpy(), mean=media.numpy())
    return forecast, y.reshape(n, B * K).numpy()
