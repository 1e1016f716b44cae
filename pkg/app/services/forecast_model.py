"""
Pronosticador GCN + LSTM con dos cabezas lineales.

Por cada rezago se propagan los conteos por la red (capas GCN compartidas),
una celda LSTM por zona recorre los rezagos y su estado final alimenta la cabeza
de demanda reciente. La cabeza de promedio histórico se suma antes del enlace
de la familia.
"""
import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import torch
from torch import nn

from app.exceptions import ForecastInputError, IngestIOError
from app.schemas.forecast import DistForecast, ModelMeta, ModelWeightsFile
from app.services.distributions import get_family

DTYPE = torch.float64


def gcn_forward(H: torch.Tensor, A_hat: torch.Tensor, W: torch.Tensor) -> torch.Tensor:
    """H' = ReLU(Â H W)"""
    if A_hat.shape[-1] != H.shape[-2] or H.shape[-1] != W.shape[0]:
        raise ForecastInputError(
            f"Formas incompatibles en GCN: Â {tuple(A_hat.shape)}, H {tuple(H.shape)}, W {tuple(W.shape)}"
        )
    return torch.relu(A_hat @ H @ W)


def lstm_step(
    x: torch.Tensor,
    h: torch.Tensor,
    c: torch.Tensor,
    W_ih: torch.Tensor,
    W_hh: torch.Tensor,
    b: torch.Tensor,
) -> Tuple[torch.Tensor, torch.Tensor]:
    '''
    Un paso de la celda LSTM canónica. Compuertas en el orden (i, f, g, o):
    i, f, o sigmoides; g candidato con tanh; h' = o * tanh(c').
    '''
    hidden = h.shape[-1]
    if W_ih.shape != (x.shape[-1], 4 * hidden) or W_hh.shape != (hidden, 4 * hidden) or b.shape[-1] != 4 * hidden:
        raise ForecastInputError("Formas incompatibles en la celda LSTM")
    if c.shape != h.shape:
        raise ForecastInputError("h y c deben tener la misma forma")

    z = x @ W_ih + h @ W_hh + b
    i, f, g, o = z.split(hidden, dim=-1)
    c_nueva = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
    h_nueva = torch.sigmoid(o) * torch.tanh(c_nueva)
    return h_nueva, c_nueva


class ForecastModel(nn.Module):
    """
    lags: (B, n, L) conteos recientes; hist: (B, n, K) promedio histórico de las celdas objetivo.
    forward devuelve θ con forma (B, n, K, aridad).
    """

    def __init__(self, meta: ModelMeta, A_hat: np.ndarray, seed: int = 0):
        super().__init__()
        self.meta = meta
        self.family = get_family(meta.family)
        generador = torch.Generator().manual_seed(seed)

        def uniforme(*forma):
            limite = 1.0 / np.sqrt(forma[0])
            return nn.Parameter((torch.rand(*forma, generator=generador, dtype=DTYPE) * 2 - 1) * limite)

        dims = [1] + [meta.gcn_hidden] * meta.gcn_layers
        self.gcn_weights = nn.ParameterList([uniforme(dims[l], dims[l + 1]) for l in range(meta.gcn_layers)])

        H = meta.lstm_hidden
        self.lstm_W_ih = uniforme(meta.gcn_hidden, 4 * H)
        self.lstm_W_hh = uniforme(H, 4 * H)
        self.lstm_b = nn.Parameter(torch.zeros(4 * H, dtype=DTYPE))

        salida = meta.horizon * self.family.arity
        self.recent_weight = uniforme(H, salida)
        self.recent_bias = nn.Parameter(torch.zeros(salida, dtype=DTYPE))
        self.hist_weight = uniforme(meta.horizon, salida)

        self.register_buffer("A_hat", torch.as_tensor(np.asarray(A_hat, dtype=float), dtype=DTYPE))
        self.register_buffer("input_scale", torch.tensor(float(meta.input_scale), dtype=DTYPE))

    @property
    def n_zones(self) -> int:
        return self.meta.n_zones

    def raw_output(self, lags: torch.Tensor, hist: torch.Tensor, A_hat: Optional[torch.Tensor] = None) -> torch.Tensor:
        A_hat = self.A_hat if A_hat is None else A_hat
        B, n, L = lags.shape
        escala = self.input_scale
        h = lags.new_zeros(B, n, self.meta.lstm_hidden)
        c = lags.new_zeros(B, n, self.meta.lstm_hidden)

        for paso in range(L):
            x = lags[:, :, paso:paso + 1] / escala
            for W in self.gcn_weights:
                x = gcn_forward(x, A_hat, W)
            h, c = lstm_step(x, h, c, self.lstm_W_ih, self.lstm_W_hh, self.lstm_b)

        crudo = h @ self.recent_weight + self.recent_bias + (hist / escala) @ self.hist_weight
        return crudo.reshape(B, n, self.meta.horizon, self.family.arity)

    def forward(self, lags: torch.Tensor, hist: torch.Tensor, A_hat: Optional[torch.Tensor] = None) -> torch.Tensor:
        return self.family.link(self.raw_output(lags, hist, A_hat))

    def init_output_bias(self, theta0: np.ndarray) -> None:
        """Fija el sesgo de salida para que, con pesos nulos, θ = theta0 en todo el horizonte"""
        crudo = np.atleast_1d(self.family.unlink(np.asarray(theta0, dtype=float)))
        with torch.no_grad():
            self.recent_bias.copy_(torch.as_tensor(np.tile(crudo, self.meta.horizon)))


def initial_theta(family: str, mean: float, var: float) -> np.ndarray:
    '''
    θ inicial de cada familia a partir de la media y varianza de los datos de entrenamiento.
    '''
    mean = max(float(mean), 1e-3)
    std = max(float(np.sqrt(max(var, 0.0))), 1e-3)
    nombre = get_family(family).name
    if nombre in ("normal", "tnormal"):
        return np.array([mean, std])
    if nombre == "poisson":
        return np.array([mean])
    if nombre == "zpoisson":
        return np.array([0.05, mean / 0.95])
    dispersion = mean ** 2 / (var - mean) if var > mean else 100.0
    return np.array([mean, max(dispersion, 1e-2)])


def _as_batch(arr, nombre: str, n: int) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(arr, dtype=float))
    if t.ndim == 2:
        t = t.unsqueeze(0)
    if t.ndim != 3 or t.shape[1] != n:
        raise ForecastInputError(f"{nombre} debe tener forma (n, ·) con n={n}, se recibió {tuple(t.shape)}")
    if not torch.all(torch.isfinite(t)):
        raise ForecastInputError(f"{nombre} tiene valores faltantes")
    return t


def model_forward(model: ForecastModel, lags, hist) -> DistForecast:
    '''
    Pronóstico para una ventana: lags (n, L) y hist (n, K).
    Devuelve parámetros θ y media por celda del horizonte.
    '''
    meta = model.meta
    lags_t = _as_batch(lags, "lags", meta.n_zones)
    hist_t = _as_batch(hist, "hist", meta.n_zones)
    if lags_t.shape[2] != meta.lag:
        raise ForecastInputError(f"Se esperaban {meta.lag} rezagos, hay {lags_t.shape[2]}")
    if hist_t.shape[2] != meta.horizon:
        raise ForecastInputError(f"Se esperaban {meta.horizon} pasos históricos, hay {hist_t.shape[2]}")

    with torch.no_grad():
        theta = model(lags_t, hist_t)[0]
        media = model.family.mean(theta)
    return DistForecast(family=model.family.name, params=theta.numpy(), mean=media.numpy())


# --- persistencia de pesos ---

def save_weights(model: ForecastModel, path: Path) -> None:
    pesos = {
        nombre: p.detach().cpu().numpy().tolist()
        for nombre, p in model.named_parameters()
    }
    archivo = ModelWeightsFile(meta=model.meta, weights=pesos)
    Path(path).write_text(json.dumps(archivo.model_dump(mode="json"), indent=1), encoding="utf-8")


def load_weights(path: Path, A_hat: np.ndarray) -> ForecastModel:
    try:
        texto = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IngestIOError(f"No se pudo leer el modelo {path}: {e}")
    archivo = ModelWeightsFile.model_validate_json(texto)
    model = ForecastModel(archivo.meta, A_hat)

    esperados = dict(model.named_parameters())
    faltantes = set(esperados) - set(archivo.weights)
    if faltantes:
        raise ForecastInputError(f"Faltan pesos en {path}: {sorted(faltantes)}")
    with torch.no_grad():
        for nombre, p in esperados.items():
            valor = torch.as_tensor(np.asarray(archivo.weights[nombre], dtype=float))
            if valor.shape != p.shape:
                raise ForecastInputError(f"Forma inválida para {nombre}: {tuple(valor.shape)}")
            p.copy_(valor)
    return model
