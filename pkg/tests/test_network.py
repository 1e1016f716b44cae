import numpy as np
import pytest

from app.exceptions import IngestIOError, InvariantViolation
from app.schemas.network import TimeGrid, ZoneNetwork
from app.services.network_service import (
    build_network,
    load_data_network,
    load_zones,
    match_feasibility,
    normalized_adjacency,
    read_network,
    rebalance_feasibility,
    write_network,
)
from tests.conftest import manual_network, write_zones_csv


def test_normalized_adjacency_un_nodo():
    net = manual_network([[0.0]], adjacency=np.array([[1.0]]))
    assert normalized_adjacency(net).tolist() == [[1.0]]


def test_normalized_adjacency_dos_nodos_completos():
    net = manual_network([[0, 10], [10, 0]])
    assert np.allclose(normalized_adjacency(net), 0.5)


def test_normalized_adjacency_camino_contra_producto_denso(line_net):
    A = line_net.adjacency
    D = np.diag(1.0 / np.sqrt(A.sum(axis=1)))
    esperado = D @ A @ D
    obtenido = normalized_adjacency(line_net)
    assert np.allclose(obtenido, esperado, atol=1e-15)
    assert np.allclose(obtenido, obtenido.T, atol=1e-12)
    assert np.max(np.abs(np.linalg.eigvalsh(obtenido))) <= 1 + 1e-9


def test_degree_es_suma_de_filas(line_net):
    assert np.array_equal(np.diag(line_net.degree), line_net.adjacency.sum(axis=1))
    assert np.count_nonzero(line_net.degree - np.diag(np.diag(line_net.degree))) == 0


def test_rebalance_feasibility_borde():
    net = manual_network([[0, 300], [301, 0]])
    a = rebalance_feasibility(net, TimeGrid(delta=300))
    assert a.tolist() == [[0, 0], [1, 0]]


def test_match_feasibility_usa_tt_transpuesto():
    net = manual_network([[0, 30], [31, 0]])
    b = match_feasibility(net, TimeGrid(max_pickup=30))
    # b[i][j]: vehículo en j recoge en i
    assert b[0][0] == 0
    assert b[0][1] == 1
    assert b[1][0] == 0


def test_adyacencia_no_simetrica_es_invalida():
    with pytest.raises(InvariantViolation):
        manual_network([[0, 1], [1, 0]], adjacency=np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_diagonal_no_nula_es_invalida():
    with pytest.raises(InvariantViolation):
        ZoneNetwork(
            centroids=[[0, 0], [1, 0]],
            dist=[[1, 1], [1, 0]],
            tt=[[0, 1], [1, 0]],
            adjacency=np.ones((2, 2)),
        )


def test_time_grid_delta_multiplo_de_tick():
    with pytest.raises(InvariantViolation):
        TimeGrid(delta=300, match_tick=70)


def test_build_network_camino_mas_corto(line_net):
    assert line_net.dist[0, 2] == pytest.approx(300.0)
    assert line_net.tt[0, 2] == pytest.approx(50.0)
    assert np.all(np.diag(line_net.tt) == 0)


def test_build_network_desconectada_usa_recta():
    centroides = np.array([[0.0, 0.0], [100.0, 0.0]])
    net = build_network(centroides, adjacency=np.eye(2))
    assert net.dist[0, 1] == pytest.approx(100.0)


def test_load_zones_knn(tmp_path):
    ruta = tmp_path / "zones.csv"
    write_zones_csv(ruta, n=5)
    net = load_zones(str(ruta), k_neighbors=2)
    assert net.n == 5
    assert net.zone_ids == [1, 2, 3, 4, 5]
    assert np.array_equal(net.adjacency, net.adjacency.T)
    assert np.all(np.diag(net.adjacency) == 1)
    assert net.zone_index(3) == 2


def test_load_zones_con_aristas(tmp_path):
    zonas = tmp_path / "zones.csv"
    write_zones_csv(zonas, n=3)
    aristas = tmp_path / "edges.csv"
    aristas.write_text("zone_id_a,zone_id_b\n1,2\n", encoding="utf-8")
    net = load_zones(str(zonas), str(aristas))
    assert net.adjacency.tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]


def test_nearest_zone(line_net):
    puntos = np.array([[10.0, 5.0], [160.0, 0.0], [290.0, -3.0]])
    assert line_net.nearest_zone(puntos).tolist() == [0, 1, 2]


def test_red_de_ingest_se_reconstruye(tmp_path):
    zonas = tmp_path / "zones.csv"
    write_zones_csv(zonas, n=3)
    aristas = tmp_path / "edges.csv"
    aristas.write_text("zone_id_a,zone_id_b\n1,2\n", encoding="utf-8")
    original = load_zones(str(zonas), str(aristas), mean_speed=3.0)

    write_network(original, tmp_path / "network.json", mean_speed=3.0)
    leida = read_network(str(zonas), tmp_path / "network.json")
    assert leida.adjacency.tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]
    np.testing.assert_allclose(leida.tt, original.tt)

    # el JSON manda sobre la velocidad pedida
    desde_datos = load_data_network(str(zonas), tmp_path, mean_speed=10.0)
    np.testing.assert_allclose(desde_datos.tt, original.tt)


def test_red_de_ingest_con_otras_zonas(tmp_path):
    zonas = tmp_path / "zones.csv"
    write_zones_csv(zonas, n=3)
    write_network(load_zones(str(zonas)), tmp_path / "network.json")
    write_zones_csv(zonas, n=4)
    with pytest.raises(InvariantViolation):
        read_network(str(zonas), tmp_path / "network.json")
    with pytest.raises(IngestIOError):
        read_network(str(zonas), tmp_path / "no.json")


def test_sin_red_de_ingest_usa_knn(tmp_path):
    zonas = tmp_path / "zones.csv"
    write_zones_csv(zonas, n=4)
    net = load_data_network(str(zonas), tmp_path)
    assert np.all(net.adjacency == 1)
