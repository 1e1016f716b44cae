from datetime import datetime, timezone

import numpy as np
from dateutil import parser as date_parser

SECONDS_PER_DAY = 86400


def parse_day(texto: str) -> int:
    '''
    Convierte una fecha (ej: 2019-06-27) en el epoch del inicio de ese día.
    Los timestamps se tratan como hora local de pared, sin zona horaria.
    '''
    fecha = date_parser.parse(texto)
    inicio = datetime(fecha.year, fecha.month, fecha.day, tzinfo=timezone.utc)
    return int(inicio.timestamp())


def day_start(epoch) -> np.ndarray:
    return (np.asarray(epoch, dtype=np.int64) // SECONDS_PER_DAY) * SECONDS_PER_DAY


def format_day(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%d")


def interval_index(epoch, window_start: int, delta: int) -> np.ndarray:
    '''
    Índice del intervalo de largo delta que contiene cada epoch, contado desde window_start.
    '''
    return (np.asarray(epoch, dtype=np.int64) - int(window_start)) // int(delta)


def intervals_per_day(delta: int) -> int:
    return SECONDS_PER_DAY // int(delta)
