from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.exceptions import FormatError, IngestIOError, InsufficientDataError
from app.schemas.demand import (
    DemandSidecar,
    DemandTensor,
    HistoricalMoments,
    ParsedTrips,
    TransitionMatrices,
    TripColumns,
    TripRecord,
)
from app.schemas.network import TimeGrid, ZoneNetwork
from app.utils.dates import day_start, interval_index
from app.utils.logger import get_logger

logger = get_logger(__name__)

MAX_MALFORMED_RATIO = 0.5


def _epoch_seconds(serie: pd.Series) -> Tuple[np.ndarray, np.ndarray]:
    """Segundos desde epoch tratando la hora como hora de pared; máscara de válidos"""
    fechas = pd.to_datetime(serie, errors="coerce")
    validas = fechas.notna().to_numpy()
    segundos = np.zeros(len(serie), dtype=np.int64)
    if validas.any():
        delta = fechas[validas] - pd.Timestamp("1970-01-01")
        segundos[validas] = (delta // pd.Timedelta(seconds=1)).to_numpy(dtype=np.int64)
    return segundos, validas


def _zone_column(serie: pd.Series) -> Tuple[np.ndarray, np.ndarray]:
    numeros = pd.to_numeric(serie, errors="coerce").to_numpy(dtype=float)
    validas = np.isfinite(numeros) & (np.floor(numeros) == numeros)
    zonas = np.where(validas, numeros, 0).astype(np.int64)
    return zonas, validas


def parse_trips(
    source,
    columns: Optional[TripColumns] = None,
    net: Optional[ZoneNetwork] = None,
) -> ParsedTrips:
    '''
    Lee un CSV de viajes (ruta o stream de bytes).
    Las filas malformadas se descartan y se cuentan; si superan la mitad, es error de formato.
    '''
    columns = columns or TripColumns()
    try:
        df = pd.read_csv(source, dtype=str)
    except pd.errors.EmptyDataError:
        return ParsedTrips(pickup_time=[], dropoff_time=[], pickup_zone=[], dropoff_zone=[], skipped=0)
    except (OSError, UnicodeDecodeError) as e:
        raise IngestIOError(f"No se pudo leer la fuente de viajes: {e}")
    except pd.errors.ParserError as e:
        raise FormatError(f"CSV de viajes ilegible: {e}")

    requeridas = [columns.pickup_time, columns.dropoff_time, columns.pickup_zone, columns.dropoff_zone]
    faltantes = [c for c in requeridas if c not in df.columns]
    if faltantes:
        raise FormatError(f"Faltan columnas en el CSV de viajes: {faltantes}")

    total = len(df)
    pickup, ok_pickup = _epoch_seconds(df[columns.pickup_time])
    dropoff, ok_dropoff = _epoch_seconds(df[columns.dropoff_time])
    pu_zone, ok_pu = _zone_column(df[columns.pickup_zone])
    do_zone, ok_do = _zone_column(df[columns.dropoff_zone])

    validas = ok_pickup & ok_dropoff & ok_pu & ok_do & (dropoff >= pickup)
    if net is not None:
        validas &= (net.index_array(pu_zone) >= 0) & (net.index_array(do_zone) >= 0)

    skipped = int(total - validas.sum())
    if total and skipped / total > MAX_MALFORMED_RATIO:
        raise FormatError(f"{skipped} de {total} filas malformadas")
    if skipped:
        logger.warning("Se descartaron %d filas malformadas de %d", skipped, total)

    return ParsedTrips(
        pickup_time=pickup[validas],
        dropoff_time=dropoff[validas],
        pickup_zone=pu_zone[validas],
        dropoff_zone=do_zone[validas],
        skipped=skipped,
    )


def _as_trips(trips: Union[ParsedTrips, Sequence[TripRecord]]) -> ParsedTrips:
    if isinstance(trips, ParsedTrips):
        return trips
    return ParsedTrips.from_records(list(trips))


def split_days(trips: ParsedTrips) -> Dict[int, ParsedTrips]:
    """Agrupa los viajes por día calendario de la recogida"""
    trips = _as_trips(trips)
    dias = day_start(trips.pickup_time)
    return {int(d): trips.subset(dias == d) for d in np.unique(dias)}


def aggregate_demand(
    trips: Union[ParsedTrips, Sequence[TripRecord]],
    net: ZoneNetwork,
    grid: TimeGrid,
    window_start: int,
    n_intervals: Optional[int] = None,
) -> DemandTensor:
    '''
    Cuenta recogidas por (zona, intervalo) y por (origen, destino, intervalo)
    dentro de la ventana [window_start, window_start + n_intervals * Δ).
    '''
    trips = _as_trips(trips)
    n_intervals = grid.omega if n_intervals is None else int(n_intervals)

    k = interval_index(trips.pickup_time, window_start, grid.delta)
    origen = net.index_array(trips.pickup_zone)
    destino = net.index_array(trips.dropoff_zone)
    dentro = (k >= 0) & (k < n_intervals) & (origen >= 0) & (destino >= 0)

    od = np.zeros((net.n, net.n, n_intervals), dtype=np.int64)
    np.add.at(od, (origen[dentro], destino[dentro], k[dentro]), 1)
    return DemandTensor(counts=od.sum(axis=1), od=od, window_start=int(window_start), delta=grid.delta)


def historical_moments(tensors: Sequence[Union[DemandTensor, np.ndarray]], ddof: int = 0) -> HistoricalMoments:
    '''
    Media y desviación por celda sobre m días.
    ddof=0 es la desviación poblacional (divisor m).
    '''
    conteos = [t.counts if isinstance(t, DemandTensor) else np.asarray(t) for t in tensors]
    m = len(conteos)
    if m < 2:
        raise InsufficientDataError(f"Se necesitan al menos 2 días históricos, hay {m}")
    pila = np.stack(conteos).astype(float)
    return HistoricalMoments(mu=pila.mean(axis=0), sigma=pila.std(axis=0, ddof=ddof), m=m)


def estimate_transitions(
    trips: Union[ParsedTrips, Sequence[TripRecord]],
    net: ZoneNetwork,
    grid: TimeGrid,
) -> TransitionMatrices:
    '''
    Estima P y Q estáticas. Cada viaje activo en un borde de intervalo se ubica en la
    zona más cercana a su posición interpolada; después de Δ sigue en ruta (P) o ya
    terminó en su zona de destino (Q).
    '''
    trips = _as_trips(trips)
    n = net.n
    P = np.zeros((n, n))
    Q = np.zeros((n, n))

    origen = net.index_array(trips.pickup_zone)
    destino = net.index_array(trips.dropoff_zone)
    inicio = trips.pickup_time
    fin = trips.dropoff_time
    validos = (origen >= 0) & (destino >= 0) & (fin > inicio)
    origen, destino, inicio, fin = origen[validos], destino[validos], inicio[validos], fin[validos]

    delta = grid.delta
    primer_borde = -(-inicio // delta) * delta
    cuantos = np.where(fin > primer_borde, -(-(fin - primer_borde) // delta), 0)

    if cuantos.sum() > 0:
        viaje = np.repeat(np.arange(len(inicio)), cuantos)
        desfase = np.arange(cuantos.sum()) - np.repeat(np.cumsum(cuantos) - cuantos, cuantos)
        borde = primer_borde[viaje] + desfase * delta

        duracion = (fin - inicio)[viaje].astype(float)
        c_origen = net.centroids[origen[viaje]]
        c_destino = net.centroids[destino[viaje]]

        frac = ((borde - inicio[viaje]) / duracion)[:, None]
        zona_i = net.nearest_zone(c_origen + frac * (c_destino - c_origen))

        despues = borde + delta
        en_ruta = despues < fin[viaje]
        frac2 = ((despues - inicio[viaje]) / duracion)[:, None]
        zona_j = net.nearest_zone(c_origen + frac2 * (c_destino - c_origen))

        np.add.at(P, (zona_i[en_ruta], zona_j[en_ruta]), 1.0)
        np.add.at(Q, (zona_i[~en_ruta], destino[viaje][~en_ruta]), 1.0)

    totales = P.sum(axis=1) + Q.sum(axis=1)
    vacias = totales == 0
    totales[vacias] = 1.0
    P = P / totales[:, None]
    Q = Q / totales[:, None]
    Q[vacias, vacias] = 1.0
    if vacias.any():
        logger.info("%d zonas sin observaciones de viajes ocupados", int(vacias.sum()))
    return TransitionMatrices(P=P, Q=Q)


# --- persistencia en CSV / JSON ---

def write_demand(tensor: DemandTensor, net: ZoneNetwork, out_dir: Path, day: str) -> None:
    out_dir = Path(out_dir)
    (out_dir / "demand").mkdir(parents=True, exist_ok=True)
    (out_dir / "od").mkdir(parents=True, exist_ok=True)

    regiones, intervalos = np.meshgrid(np.arange(tensor.n), np.arange(tensor.omega), indexing="ij")
    pd.DataFrame({
        "region": np.asarray(net.zone_ids)[regiones.ravel()],
        "interval": intervalos.ravel(),
        "count": tensor.counts.ravel(),
    }).to_csv(out_dir / "demand" / f"{day}.csv", index=False)

    if tensor.od is not None:
        o, d, k = np.nonzero(tensor.od)
        ids = np.asarray(net.zone_ids)
        pd.DataFrame({
            "origin": ids[o], "destination": ids[d], "interval": k, "count": tensor.od[o, d, k],
        }).to_csv(out_dir / "od" / f"{day}.csv", index=False)

    sidecar = DemandSidecar(
        day=day,
        window_start=tensor.window_start,
        delta=tensor.delta,
        n_intervals=tensor.omega,
        zone_ids=list(net.zone_ids),
        total_trips=int(tensor.counts.sum()),
    )
    (out_dir / "demand" / f"{day}.json").write_text(sidecar.model_dump_json(indent=2), encoding="utf-8")


def read_demand(path: Path, net: ZoneNetwork) -> DemandTensor:
    """Lee un CSV `region,interval,count` con su JSON hermano"""
    path = Path(path)
    sidecar = DemandSidecar.model_validate_json(path.with_suffix(".json").read_text(encoding="utf-8"))
    df = pd.read_csv(path)
    counts = np.zeros((net.n, sidecar.n_intervals), dtype=np.int64)
    idx = net.index_array(df["region"].to_numpy())
    ok = idx >= 0
    counts[idx[ok], df["interval"].to_numpy()[ok]] = df["count"].to_numpy()[ok]
    return DemandTensor(counts=counts, window_start=sidecar.window_start, delta=sidecar.delta)


def list_demand_days(data_dir: Path) -> List[Path]:
    return sorted((Path(data_dir) / "demand").glob("*.csv"))


def write_transitions(tm: TransitionMatrices, net: ZoneNetwork, path: Path) -> None:
    ids = np.asarray(net.zone_ids)
    i, j = np.nonzero((tm.P > 0) | (tm.Q > 0))
    pd.DataFrame({"i": ids[i], "j": ids[j], "P": tm.P[i, j], "Q": tm.Q[i, j]}).to_csv(path, index=False)


def read_transitions(path: Path, net: ZoneNetwork) -> TransitionMatrices:
    df = pd.read_csv(path)
    P = np.zeros((net.n, net.n))
    Q = np.zeros((net.n, net.n))
    i = net.index_array(df["i"].to_numpy())
    j = net.index_array(df["j"].to_numpy())
    P[i, j] = df["P"].to_numpy()
    Q[i, j] = df["Q"].to_numpy()
    return TransitionMatrices(P=P, Q=Q)


def read_od(path: Path, net: ZoneNetwork, n_intervals: int) -> np.ndarray:
    """Lee `origin,destination,interval,count` como tensor (n, n, Ω)"""
    df = pd.read_csv(path)
    od = np.zeros((net.n, net.n, n_intervals), dtype=np.int64)
    o = net.index_array(df["origin"].to_numpy())
    d = net.index_array(df["destination"].to_numpy())
    k = df["interval"].to_numpy()
    ok = (o >= 0) & (d >= 0) & (k >= 0) & (k < n_intervals)
    od[o[ok], d[ok], k[ok]] = df["count"].to_numpy()[ok]
    return od


def trips_from_od(od: np.ndarray, net: ZoneNetwork, window_start: int, delta: int) -> ParsedTrips:
    '''
    Reconstruye viajes desde un tensor OD: c viajes de una celda se reparten
    parejos dentro del intervalo, con duración tt[o][d].
    '''
    o, d, k = np.nonzero(od)
    c = od[o, d, k]
    o, d, k = np.repeat(o, c), np.repeat(d, c), np.repeat(k, c)
    posicion = np.arange(c.sum()) - np.repeat(np.cumsum(c) - c, c)
    inicio = window_start + k * delta + ((posicion + 0.5) * delta / np.repeat(c, c)).astype(np.int64)
    orden = np.lexsort((d, o, inicio))
    ids = np.asarray(net.zone_ids)
    return ParsedTrips(
        pickup_time=inicio[orden],
        dropoff_time=(inicio + np.rint(net.tt[o, d]).astype(np.int64))[orden],
        pickup_zone=ids[o[orden]],
        dropoff_zone=ids[d[orden]],
    )
