import numpy as np
import pytest

from app.exceptions import FormatError, InfeasibleSetError, InvariantViolation
from app.schemas.demand import HistoricalMoments
from app.schemas.forecast import DistForecast
from app.schemas.uncertainty import UncertaintySet
from app.services.mivr_service import set_vertices
from app.services.uncertainty_service import (
    build_duro_set,
    build_ro_set,
    read_set_csv,
    worst_case_min,
    worst_case_min_matrix,
    worst_case_sum_max,
    worst_case_sum_max_vector,
    write_set_csv,
)


def _momentos(mu, sigma):
    return HistoricalMoments(mu=np.atleast_2d(mu), sigma=np.atleast_2d(sigma), m=5)


# --- construcción ---

def test_ro_caja_mu_mas_menos_rho_sigma():
    s = build_ro_set(_momentos([[10.0]], [[3.0]]), rho=1.0, budget=2.0)
    assert s.lb[0, 0] == 7.0
    assert s.ub[0, 0] == 13.0
    assert s.budget == 2.0


def test_ro_sigma_cero_es_un_punto():
    s = build_ro_set(_momentos([[4.0, 2.0]], [[0.0, 0.0]]), rho=2.0, budget=0.0)
    np.testing.assert_array_equal(s.lb, s.ub)
    np.testing.assert_array_equal(s.mu, [[4.0, 2.0]])


def test_ro_piso_en_cero():
    s = build_ro_set(_momentos([[1.0]], [[3.0]]), rho=1.0, budget=1.0)
    assert s.lb[0, 0] == 0.0
    assert s.ub[0, 0] == 4.0


def test_ro_rho_invalido():
    with pytest.raises(InvariantViolation):
        build_ro_set(_momentos([[1.0]], [[1.0]]), rho=0.0, budget=1.0)


def test_ro_ventana_da_la_vuelta():
    mu = np.array([[0.0, 1.0, 2.0, 3.0]])
    s = build_ro_set(_momentos(mu, np.ones_like(mu)), rho=1.0, budget=1.0, start=3, horizon=2)
    np.testing.assert_array_equal(s.mu, [[3.0, 0.0]])


def test_duro_poisson_95():
    fc = DistForecast(family="poisson", params=np.full((2, 3, 1), 4.0), mean=np.full((2, 3), 4.0))
    s = build_duro_set(fc, pi=95, budget=1.0)
    assert np.all(s.lb == 1.0)
    assert np.all(s.ub == 8.0)
    assert np.all(s.mu == 4.0)


def test_duro_pi_degenerado_colapsa_en_la_mediana():
    fc = DistForecast(family="poisson", params=np.full((1, 1, 1), 4.0), mean=np.full((1, 1), 4.0))
    s = build_duro_set(fc, pi=1e-6, budget=0.0)
    assert s.lb[0, 0] == s.ub[0, 0] == 4.0


def test_duro_normal_con_piso():
    fc = DistForecast(family="normal", params=np.array([[[0.5, 2.0]]]), mean=np.array([[0.5]]))
    s = build_duro_set(fc, pi=95, budget=1.0)
    assert s.lb[0, 0] == 0.0
    assert s.ub[0, 0] == pytest.approx(0.5 + 1.959964 * 2.0, rel=1e-5)


def test_conjunto_vacio_sin_recorte_de_media():
    with pytest.raises(InfeasibleSetError):
        UncertaintySet(lb=[[2.0], [2.0]], mu=[[1.0], [1.0]], ub=[[3.0], [3.0]], budget=0.0, clamp_mean=False)


def test_recorte_de_media_evita_el_vacio():
    s = UncertaintySet(lb=[[2.0], [2.0]], mu=[[1.0], [1.0]], ub=[[3.0], [3.0]], budget=0.0)
    np.testing.assert_array_equal(s.mu, [[2.0], [2.0]])


def test_lb_mayor_que_ub():
    with pytest.raises(InvariantViolation):
        UncertaintySet(lb=[[3.0]], mu=[[3.0]], ub=[[2.0]], budget=1.0)


# --- cotas de peor caso ---

def test_worst_case_min_ejemplos():
    s = UncertaintySet(lb=[[0.0], [0.0]], mu=[[2.0], [2.0]], ub=[[4.0], [4.0]], budget=1.0)
    assert worst_case_min(s, 0, 0) == 0.0

    s = UncertaintySet(lb=[[0.0], [0.0]], mu=[[2.0], [2.0]], ub=[[4.0], [2.0]], budget=1.0)
    # r_0 + r_1 ≥ 3 con r_1 ≤ 2
    assert worst_case_min(s, 0, 0) == 1.0


def test_worst_case_sum_max_ejemplos():
    s = UncertaintySet(lb=[[0.0], [0.0]], mu=[[2.0], [2.0]], ub=[[4.0], [4.0]], budget=1.0)
    assert worst_case_sum_max(s, 0) == 5.0
    holgado = UncertaintySet(lb=s.lb, mu=s.mu, ub=s.ub, budget=10.0)
    assert worst_case_sum_max(holgado, 0) == 8.0


def test_conjunto_puntual():
    s = UncertaintySet(lb=[[2.0], [3.0]], mu=[[2.0], [3.0]], ub=[[2.0], [3.0]], budget=0.0)
    assert worst_case_min(s, 0, 0) == 2.0
    assert worst_case_min(s, 0, 1) == 3.0
    assert worst_case_sum_max(s, 0) == 5.0


def test_intervalo_fuera_de_rango():
    s = UncertaintySet(lb=[[0.0]], mu=[[1.0]], ub=[[2.0]], budget=1.0)
    with pytest.raises(InvariantViolation):
        worst_case_min(s, 1, 0)


def _vertex_oracle(lb, mu, ub, budget):
    """min r_i y max Σr enumerando los vértices del conjunto de un intervalo"""
    vertices = set_vertices(lb, mu, ub, budget)
    return vertices.min(axis=0), vertices.sum(axis=1).max()


@pytest.mark.parametrize("semilla", range(70))
def test_cotas_contra_enumeracion_de_vertices(semilla):
    rng = np.random.default_rng(semilla)
    n, K = int(rng.integers(1, 5)), 3
    lb = rng.uniform(0, 3, size=(n, K))
    ub = lb + rng.uniform(0, 4, size=(n, K))
    mu = rng.uniform(lb, ub)
    budget = float(rng.uniform(0, 3))
    s = UncertaintySet(lb=lb, mu=mu, ub=ub, budget=budget)

    mins = worst_case_min_matrix(s)
    maxs = worst_case_sum_max_vector(s)
    for k in range(K):
        esperado_min, esperado_max = _vertex_oracle(lb[:, k], mu[:, k], ub[:, k], budget)
        np.testing.assert_allclose(mins[:, k], esperado_min, rtol=0, atol=1e-9)
        assert maxs[k] == pytest.approx(esperado_max, abs=1e-9)
        for i in range(n):
            assert worst_case_min(s, k, i) == pytest.approx(mins[i, k])


def test_monotonia_en_el_presupuesto():
    lb, mu, ub = np.array([[0.0], [1.0], [0.5]]), np.array([[2.0], [2.0], [1.0]]), np.array([[5.0], [3.0], [4.0]])
    previo_min, previo_max = np.inf, -np.inf
    for budget in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]:
        s = UncertaintySet(lb=lb, mu=mu, ub=ub, budget=budget)
        actual_min = worst_case_min_matrix(s).sum()
        actual_max = worst_case_sum_max(s, 0)
        assert actual_min <= previo_min + 1e-12
        assert actual_max >= previo_max - 1e-12
        previo_min, previo_max = actual_min, actual_max


# --- CSV ---

def test_csv_persistencia(tmp_path):
    s = build_ro_set(_momentos([[3.0, 1.0], [0.5, 2.0]], [[1.0, 0.5], [2.0, 0.0]]), rho=1.5, budget=0.75)
    ruta = tmp_path / "set.csv"
    write_set_csv(s, ruta, zone_ids=[10, 20])
    assert ruta.read_text(encoding="utf-8").splitlines()[0] == "Gamma,0.75"

    leido = read_set_csv(ruta, zone_ids=[10, 20])
    assert leido.budget == 0.75
    np.testing.assert_allclose(leido.lb, s.lb)
    np.testing.assert_allclose(leido.mu, s.mu)
    np.testing.assert_allclose(leido.ub, s.ub)


def test_csv_sin_cabecera(tmp_path):
    ruta = tmp_path / "set.csv"
    ruta.write_text("region,interval,lb,mu,ub\n0,0,1,2,3\n", encoding="utf-8")
    with pytest.raises(FormatError):
        read_set_csv(ruta)
