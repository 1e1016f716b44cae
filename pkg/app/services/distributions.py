"""
Cabezas de verosimilitud para la demanda.

Cada familia define su enlace (parámetros crudos -> θ en dominio), su NLL exacta
en torch, su media y sus cuantiles (scipy) para cortar intervalos.
θ siempre va en el último eje: (..., aridad).
"""
import math
from abc import ABC, abstractmethod
from typing import Dict, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from scipy import stats

from app.exceptions import DomainError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _inv_softplus(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.where(v > 30.0, v, np.log(np.expm1(np.maximum(v, 1e-12))))


class Family(ABC):
    name: str
    arity: int
    discrete: bool

    @abstractmethod
    def link(self, raw: torch.Tensor) -> torch.Tensor:
        ...

    @abstractmethod
    def unlink(self, theta: np.ndarray) -> np.ndarray:
        """Inversa del enlace, para inicializar sesgos"""

    @abstractmethod
    def nll(self, theta: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        ...

    @abstractmethod
    def mean(self, theta: torch.Tensor) -> torch.Tensor:
        ...

    @abstractmethod
    def ppf(self, theta: np.ndarray, q: float) -> np.ndarray:
        ...

    @abstractmethod
    def cdf(self, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def sample(self, theta: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
        ...

    @abstractmethod
    def in_domain(self, theta: np.ndarray) -> bool:
        ...

    def in_support(self, y: np.ndarray) -> bool:
        y = np.asarray(y, dtype=float)
        if self.discrete:
            return bool(np.all((y >= 0) & (np.floor(y) == y)))
        return True


class Normal(Family):
    name, arity, discrete = "normal", 2, False

    def link(self, raw):
        return torch.stack([raw[..., 0], F.softplus(raw[..., 1])], dim=-1)

    def unlink(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([theta[..., 0], _inv_softplus(theta[..., 1])], axis=-1)

    def nll(self, theta, y):
        mu, sigma = theta[..., 0], theta[..., 1]
        z = (y - mu) / sigma
        return LOG_SQRT_2PI + torch.log(sigma) + 0.5 * z * z

    def mean(self, theta):
        return theta[..., 0]

    def ppf(self, theta, q):
        return stats.norm.ppf(q, loc=theta[..., 0], scale=theta[..., 1])

    def cdf(self, theta, y):
        return stats.norm.cdf(y, loc=theta[..., 0], scale=theta[..., 1])

    def sample(self, theta, size, rng):
        return rng.normal(theta[0], theta[1], size=size)

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(np.isfinite(theta)) and np.all(theta[..., 1] > 0))


class TruncatedNormal(Normal):
    """Normal truncada por la izquierda en 0"""
    name = "tnormal"

    def nll(self, theta, y):
        mu, sigma = theta[..., 0], theta[..., 1]
        return super().nll(theta, y) + torch.special.log_ndtr(mu / sigma)

    def mean(self, theta):
        mu, sigma = theta[..., 0], theta[..., 1]
        a = mu / sigma
        log_phi = -0.5 * a * a - LOG_SQRT_2PI
        return mu + sigma * torch.exp(log_phi - torch.special.log_ndtr(a))

    def _frozen(self, theta):
        mu, sigma = theta[..., 0], theta[..., 1]
        return stats.truncnorm(a=-mu / sigma, b=np.inf, loc=mu, scale=sigma)

    def ppf(self, theta, q):
        return self._frozen(theta).ppf(q)

    def cdf(self, theta, y):
        return self._frozen(theta).cdf(y)

    def sample(self, theta, size, rng):
        return self._frozen(np.asarray(theta)).rvs(size=size, random_state=rng)

    def in_support(self, y):
        return bool(np.all(np.asarray(y, dtype=float) >= 0))


class Poisson(Family):
    name, arity, discrete = "poisson", 1, True

    def link(self, raw):
        return F.softplus(raw[..., :1])

    def unlink(self, theta):
        return _inv_softplus(theta)

    def nll(self, theta, y):
        lam = theta[..., 0]
        return lam - y * torch.log(lam) + torch.lgamma(y + 1.0)

    def mean(self, theta):
        return theta[..., 0]

    def ppf(self, theta, q):
        return stats.poisson.ppf(q, theta[..., 0])

    def cdf(self, theta, y):
        return stats.poisson.cdf(y, theta[..., 0])

    def sample(self, theta, size, rng):
        return rng.poisson(theta[0], size=size)

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(np.isfinite(theta)) and np.all(theta[..., 0] > 0))


class ZeroInflatedPoisson(Family):
    """θ = (π, λ): con prob. π el conteo es cero estructural"""
    name, arity, discrete = "zpoisson", 2, True

    def link(self, raw):
        return torch.stack([torch.sigmoid(raw[..., 0]), F.softplus(raw[..., 1])], dim=-1)

    def unlink(self, theta):
        theta = np.asarray(theta, dtype=float)
        pi = np.clip(theta[..., 0], 1e-12, 1 - 1e-12)
        return np.stack([np.log(pi / (1 - pi)), _inv_softplus(theta[..., 1])], axis=-1)

    def nll(self, theta, y):
        pi, lam = theta[..., 0], theta[..., 1]
        cero = -torch.log(pi + (1.0 - pi) * torch.exp(-lam))
        positivo = -torch.log1p(-pi) + lam - y * torch.log(lam) + torch.lgamma(y + 1.0)
        return torch.where(y == 0, cero, positivo)

    def mean(self, theta):
        return (1.0 - theta[..., 0]) * theta[..., 1]

    def ppf(self, theta, q):
        pi, lam = np.asarray(theta[..., 0], dtype=float), np.asarray(theta[..., 1], dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            q_pois = np.clip((q - pi) / (1.0 - pi), 0.0, 1.0)
        resto = stats.poisson.ppf(q_pois, lam)
        return np.where(q <= pi, 0.0, np.maximum(resto, 0.0))

    def cdf(self, theta, y):
        pi, lam = theta[..., 0], theta[..., 1]
        return np.where(np.asarray(y) < 0, 0.0, pi + (1.0 - pi) * stats.poisson.cdf(y, lam))

    def sample(self, theta, size, rng):
        ceros = rng.random(size) < theta[0]
        return np.where(ceros, 0, rng.poisson(theta[1], size=size))

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(
            np.all(np.isfinite(theta))
            and np.all((theta[..., 0] >= 0) & (theta[..., 0] <= 1))
            and np.all(theta[..., 1] > 0)
        )


class NegativeBinomial(Family):
    """θ = (μ, r): media y dispersión"""
    name, arity, discrete = "nb", 2, True

    def link(self, raw):
        return F.softplus(raw[..., :2])

    def unlink(self, theta):
        return _inv_softplus(theta)

    def nll(self, theta, y):
        mu, r = theta[..., 0], theta[..., 1]
        log_total = torch.log(r + mu)
        return -(
            torch.lgamma(y + r) - torch.lgamma(r) - torch.lgamma(y + 1.0)
            + r * (torch.log(r) - log_total)
            + y * (torch.log(mu) - log_total)
        )

    def mean(self, theta):
        return theta[..., 0]

    @staticmethod
    def _np(theta):
        mu, r = theta[..., 0], theta[..., 1]
        return r, r / (r + mu)

    def ppf(self, theta, q):
        r, p = self._np(theta)
        return stats.nbinom.ppf(q, r, p)

    def cdf(self, theta, y):
        r, p = self._np(theta)
        return stats.nbinom.cdf(y, r, p)

    def sample(self, theta, size, rng):
        r, p = self._np(np.asarray(theta, dtype=float))
        return rng.negative_binomial(r, p, size=size)

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(np.isfinite(theta)) and np.all(theta[..., 0] > 0) and np.all(theta[..., 1] > 0))


FAMILIES: Dict[str, Family] = {
    f.name: f for f in (Normal(), TruncatedNormal(), Poisson(), ZeroInflatedPoisson(), NegativeBinomial())
}


def get_family(family: Union[str, Family]) -> Family:
    if isinstance(family, Family):
        return family
    clave = str(family).lower()
    if clave not in FAMILIES:
        raise DomainError(f"Familia desconocida: {family}")
    return FAMILIES[clave]


def nll(family, theta, y):
    '''
    −log densidad (o masa) de y bajo θ.
    Con tensores de entrada devuelve un tensor diferenciable; si no, un float o arreglo.
    '''
    fam = get_family(family)
    es_tensor = isinstance(theta, torch.Tensor)
    theta_t = theta if es_tensor else torch.as_tensor(np.asarray(theta, dtype=float))
    y_t = y if isinstance(y, torch.Tensor) else torch.as_tensor(np.asarray(y, dtype=float))

    if not fam.in_domain(theta_t.detach().cpu().numpy()):
        raise DomainError(f"θ fuera de dominio para {fam.name}")
    if not fam.in_support(y_t.detach().cpu().numpy()):
        raise DomainError(f"y fuera del soporte de {fam.name}")

    valor = fam.nll(theta_t, y_t.to(theta_t.dtype))
    if es_tensor:
        return valor
    valor = valor.numpy()
    return float(valor) if valor.ndim == 0 else valor


def interval(family, theta, pi: float) -> Tuple:
    '''
    Intervalo de colas iguales al PI%: LB es el menor punto del soporte con
    CDF ≥ (1−PI)/2 y UB el menor con CDF ≥ 1−(1−PI)/2.
    Familias de conteo devuelven enteros.
    '''
    fam = get_family(family)
    theta = np.asarray(theta, dtype=float)
    if not 0 < pi < 100:
        raise DomainError(f"PI debe estar en (0, 100), se recibió {pi}")
    if not fam.in_domain(theta):
        raise DomainError(f"θ fuera de dominio para {fam.name}")

    cola = (1.0 - pi / 100.0) / 2.0
    lb = fam.ppf(theta, cola)
    ub = fam.ppf(theta, 1.0 - cola)
    if fam.discrete:
        lb, ub = np.asarray(lb).astype(np.int64), np.asarray(ub).astype(np.int64)
    if np.ndim(lb) == 0:
        return (int(lb), int(ub)) if fam.discrete else (float(lb), float(ub))
    return lb, ub


def forecast_mean(family, theta: np.ndarray) -> np.ndarray:
    fam = get_family(family)
    with torch.no_grad():
        return fam.mean(torch.as_tensor(np.asarray(theta, dtype=float))).numpy()
