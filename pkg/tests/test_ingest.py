import io

import numpy as np
import pytest

from app.exceptions import FormatError, IngestIOError, InsufficientDataError, InvariantViolation
from app.schemas.demand import DemandTensor, ParsedTrips, TripColumns
from app.schemas.network import TimeGrid
from app.services.ingest_service import (
    aggregate_demand,
    estimate_transitions,
    historical_moments,
    list_demand_days,
    parse_trips,
    read_demand,
    read_od,
    read_transitions,
    split_days,
    trips_from_od,
    write_demand,
    write_transitions,
)
from app.utils.dates import parse_day

ENCABEZADO = "pickup_datetime,dropoff_datetime,PULocationID,DOLocationID\n"
DIA = parse_day("2019-06-27")


def _csv(*filas: str) -> io.BytesIO:
    return io.BytesIO((ENCABEZADO + "".join(f + "\n" for f in filas)).encode("utf-8"))


def _viajes(*tuplas) -> ParsedTrips:
    columnas = list(zip(*tuplas)) if tuplas else [[], [], [], []]
    return ParsedTrips(
        pickup_time=columnas[0], dropoff_time=columnas[1], pickup_zone=columnas[2], dropoff_zone=columnas[3]
    )


def test_parse_una_fila_valida():
    trips = parse_trips(_csv("2019-06-27 08:00:00,2019-06-27 08:10:00,1,2"))
    assert len(trips) == 1
    assert trips.skipped == 0


def test_parse_descarta_bajada_antes_de_subida():
    trips = parse_trips(_csv(
        "2019-06-27 08:00:00,2019-06-27 08:10:00,1,2",
        "2019-06-27 09:00:00,2019-06-27 08:59:00,1,2",
        "2019-06-27 10:00:00,2019-06-27 10:05:00,2,1",
    ))
    assert len(trips) == 2
    assert trips.skipped == 1


def test_parse_valores_exactos():
    trips = parse_trips(_csv(
        "2019-06-27 00:05:00,2019-06-27 00:20:00,4,7",
        "2019-06-27 13:00:30,2019-06-27 13:01:00,7,7",
        "2019-06-28 23:59:59,2019-06-29 00:10:00,1,4",
    ))
    assert trips.pickup_time.tolist() == [DIA + 300, DIA + 13 * 3600 + 30, DIA + 86400 + 86399]
    assert trips.dropoff_time.tolist() == [DIA + 1200, DIA + 13 * 3600 + 60, DIA + 2 * 86400 + 600]
    assert trips.pickup_zone.tolist() == [4, 7, 1]
    assert trips.dropoff_zone.tolist() == [7, 7, 4]


def test_parse_columnas_configurables():
    fuente = io.BytesIO(b"a,b,c,d\n2019-06-27 08:00:00,2019-06-27 08:01:00,3,4\n")
    trips = parse_trips(fuente, TripColumns(pickup_time="a", dropoff_time="b", pickup_zone="c", dropoff_zone="d"))
    assert trips.pickup_zone.tolist() == [3]


def test_parse_mayoria_malformada_es_error_de_formato():
    with pytest.raises(FormatError):
        parse_trips(_csv(
            "basura,2019-06-27 08:10:00,1,2",
            "2019-06-27 08:00:00,2019-06-27 08:10:00,x,2",
            "2019-06-27 08:00:00,2019-06-27 08:10:00,1,2",
        ))


def test_parse_faltan_columnas():
    with pytest.raises(FormatError):
        parse_trips(io.BytesIO(b"pickup_datetime,PULocationID\n2019-06-27 08:00:00,1\n"))


def test_parse_fuente_ilegible(tmp_path):
    with pytest.raises(IngestIOError):
        parse_trips(tmp_path / "no_existe.csv")


def test_parse_zonas_desconocidas_cuentan_como_malformadas(line_net):
    trips = parse_trips(_csv(
        "2019-06-27 08:00:00,2019-06-27 08:10:00,0,1",
        "2019-06-27 08:00:00,2019-06-27 08:10:00,1,2",
        "2019-06-27 08:00:00,2019-06-27 08:10:00,1,99",
    ), net=line_net)
    assert len(trips) == 2
    assert trips.skipped == 1


def test_split_days():
    trips = _viajes((DIA + 10, DIA + 20, 0, 1), (DIA + 86400 + 5, DIA + 86400 + 50, 1, 2))
    dias = split_days(trips)
    assert sorted(dias) == [DIA, DIA + 86400]
    assert len(dias[DIA]) == 1


def test_aggregate_sin_viajes(line_net):
    tensor = aggregate_demand(_viajes(), line_net, TimeGrid(omega=4), DIA)
    assert tensor.counts.shape == (3, 4)
    assert tensor.counts.sum() == 0


def test_aggregate_dos_viajes_misma_celda(line_net):
    trips = _viajes((DIA + 310, DIA + 400, 1, 2), (DIA + 599, DIA + 700, 1, 0))
    tensor = aggregate_demand(trips, line_net, TimeGrid(omega=4), DIA)
    assert tensor.counts[1, 1] == 2
    assert tensor.od[1, 2, 1] == 1
    assert tensor.od[1, 0, 1] == 1
    assert np.array_equal(tensor.od.sum(axis=1), tensor.counts)


def test_aggregate_dia_de_diez_viajes(line_net):
    inicios = [0, 10, 299, 300, 301, 650, 900, 905, 1199, 1200]
    origenes = [0, 0, 0, 1, 1, 2, 0, 2, 2, 1]
    trips = _viajes(*[(DIA + t, DIA + t + 60, o, (o + 1) % 3) for t, o in zip(inicios, origenes)])
    tensor = aggregate_demand(trips, line_net, TimeGrid(omega=4), DIA)
    esperado = np.array([
        [3, 0, 0, 1],
        [0, 2, 0, 0],
        [0, 0, 1, 2],
    ])
    # el viaje en t=1200 cae fuera de la ventana de 4 intervalos
    assert np.array_equal(tensor.counts, esperado)
    assert tensor.counts.sum() == 9


def test_historical_moments_divisor_m():
    momentos = historical_moments([np.array([[2.0]]), np.array([[4.0]])])
    assert momentos.mu[0, 0] == pytest.approx(3.0)
    assert momentos.sigma[0, 0] == pytest.approx(1.0)
    assert momentos.m == 2


def test_historical_moments_dias_iguales_y_celdas_nulas():
    dia = np.array([[0, 5], [1, 0]])
    momentos = historical_moments([dia, dia, dia])
    assert np.all(momentos.sigma == 0)
    assert momentos.mu[0, 0] == 0


def test_historical_moments_pocos_dias():
    with pytest.raises(InsufficientDataError):
        historical_moments([np.zeros((2, 2))])


def test_transitions_viaje_corto_desde_borde(line_net):
    trips = _viajes((DIA, DIA + 100, 1, 2))
    tm = estimate_transitions(trips, line_net, TimeGrid())
    assert tm.Q[1, 2] == pytest.approx(1.0)
    assert np.all(tm.P[1] == 0)


def test_transitions_sin_viajes(line_net):
    tm = estimate_transitions(_viajes(), line_net, TimeGrid())
    assert np.all(tm.P == 0)
    assert np.array_equal(tm.Q, np.eye(3))


def test_transitions_dos_destinos(line_net):
    trips = _viajes((DIA, DIA + 100, 0, 1), (DIA, DIA + 100, 0, 2))
    tm = estimate_transitions(trips, line_net, TimeGrid())
    assert tm.Q[0, 1] == pytest.approx(0.5)
    assert tm.Q[0, 2] == pytest.approx(0.5)


def test_transitions_viaje_largo_sigue_en_ruta(line_net):
    # 0 -> 2 en 900 s: en t=0 está en 0, en t=300 a un tercio del camino
    trips = _viajes((DIA, DIA + 900, 0, 2))
    tm = estimate_transitions(trips, line_net, TimeGrid())
    assert tm.P[0, 1] == pytest.approx(1.0)
    assert tm.P[1, 1] == pytest.approx(0.5)
    assert tm.Q[1, 2] == pytest.approx(0.5)
    assert tm.Q[2, 2] == pytest.approx(1.0)


def test_transitions_filas_completas(line_net, rng):
    inicio = DIA + rng.integers(0, 7200, size=200)
    trips = _viajes(*zip(inicio, inicio + rng.integers(1, 1500, size=200), rng.integers(0, 3, 200), rng.integers(0, 3, 200)))
    tm = estimate_transitions(trips, line_net, TimeGrid())
    assert np.allclose(tm.P.sum(axis=1) + tm.Q.sum(axis=1), 1.0, atol=1e-9)


def test_persistencia_de_demanda(line_net, tmp_path):
    trips = _viajes((DIA + 10, DIA + 100, 0, 2), (DIA + 10, DIA + 100, 0, 2), (DIA + 400, DIA + 500, 2, 1))
    tensor = aggregate_demand(trips, line_net, TimeGrid(omega=3), DIA)
    write_demand(tensor, line_net, tmp_path, "2019-06-27")
    dias = list_demand_days(tmp_path)
    assert [p.stem for p in dias] == ["2019-06-27"]

    leido = read_demand(dias[0], line_net)
    assert np.array_equal(leido.counts, tensor.counts)
    assert leido.window_start == DIA
    assert np.array_equal(read_od(tmp_path / "od" / "2019-06-27.csv", line_net, 3), tensor.od)


def test_persistencia_de_transiciones(line_net, tmp_path):
    tm = estimate_transitions(_viajes((DIA, DIA + 100, 0, 1), (DIA, DIA + 100, 0, 2)), line_net, TimeGrid())
    write_transitions(tm, line_net, tmp_path / "transitions.csv")
    leido = read_transitions(tmp_path / "transitions.csv", line_net)
    assert np.allclose(leido.Q, tm.Q)


def test_trips_from_od_reparte_en_el_intervalo(line_net):
    od = np.zeros((3, 3, 2), dtype=np.int64)
    od[0, 1, 1] = 2
    trips = trips_from_od(od, line_net, DIA, 300)
    assert trips.pickup_time.tolist() == [DIA + 375, DIA + 525]
    assert trips.dropoff_time.tolist() == [DIA + 400, DIA + 550]
    assert trips.pickup_zone.tolist() == [0, 0]
    tensor = aggregate_demand(trips, line_net, TimeGrid(omega=2), DIA)
    assert np.array_equal(tensor.od, od)


def test_demand_tensor_rechaza_negativos():
    with pytest.raises(InvariantViolation):
        DemandTensor(counts=[[-1, 0]])
