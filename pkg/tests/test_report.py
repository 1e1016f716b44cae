import pandas as pd
import pytest

from app.config import SimConfig
from app.schemas.report import SimReport
from app.services.report_service import (
    REPORT_COLUMNS,
    heatmaps,
    reduction_table,
    write_comparison,
    write_events_log,
    write_report_csv,
)
from app.services.run_service import list_runs, record_runs


def _grilla():
    reports = [SimReport(engine="dohv", avg_wait_s=100.0, leaving_rate_pct=20.0)]
    for pi in (75.0, 95.0):
        for budget in (1.0, 9.0):
            reports.append(SimReport(
                engine="duro", pi=pi, budget=budget,
                avg_wait_s=pi + budget, leaving_rate_pct=budget,
            ))
    return reports


def test_decision_ms_p50():
    assert SimReport(engine="none").decision_ms_p50 == 0.0
    assert SimReport(engine="none", decision_ms=[5.0, 1.0, 3.0]).decision_ms_p50 == 3.0
    assert SimReport(engine="none", decision_ms=[4.0, 1.0, 3.0, 2.0]).decision_ms_p50 == 2.5


def test_report_csv(tmp_path):
    ruta = tmp_path / "report.csv"
    write_report_csv(_grilla(), ruta)
    tabla = pd.read_csv(ruta)
    assert list(tabla.columns) == REPORT_COLUMNS
    assert len(tabla) == 5
    assert tabla.loc[0, "engine"] == "dohv"
    assert pd.isna(tabla.loc[0, "PI"])


def test_events_log(tmp_path):
    report = SimReport(engine="none", events=[(30, "arrive", 4, 2), (60, "rebalance", 1, "0->2")])
    ruta = tmp_path / "events.log"
    write_events_log(report, ruta)
    assert ruta.read_text(encoding="utf-8").splitlines() == [
        "time\tevent\tid\tdetail",
        "30\tarrive\t4\t2",
        "60\trebalance\t1\t0->2",
    ]


def test_heatmaps_pi_por_gamma():
    tablas = heatmaps(_grilla())
    assert set(tablas) == {"avg_wait_s", "leaving_rate_pct"}
    espera = tablas["avg_wait_s"]
    assert list(espera.index) == [75.0, 95.0]
    assert list(espera.columns) == [1.0, 9.0]
    assert espera.loc[95.0, 9.0] == 104.0
    assert heatmaps(_grilla(), engine="ro") == {}


def test_reduction_table():
    tabla = reduction_table(_grilla(), baseline="dohv")
    assert len(tabla) == 4
    fila = tabla[(tabla["PI"] == 75.0) & (tabla["Gamma"] == 1.0)].iloc[0]
    # espera 76 contra 100; abandono 1 contra 20
    assert fila["wait_reduction_pct"] == pytest.approx(24.0)
    assert fila["leaving_reduction_pct"] == pytest.approx(95.0)


def test_reduction_sin_motor_base():
    tabla = reduction_table(_grilla()[1:], baseline="dohv")
    assert tabla.empty
    assert "wait_reduction_pct" in tabla.columns


def test_write_comparison(tmp_path):
    rutas = write_comparison(_grilla(), tmp_path / "cmp", baseline="dohv", svg=True)
    nombres = sorted(p.name for p in rutas)
    assert nombres == sorted([
        "report.csv", "heatmap_avg_wait_s.csv", "heatmap_avg_wait_s.svg",
        "heatmap_leaving_rate_pct.csv", "heatmap_leaving_rate_pct.svg", "reduction.csv",
    ])
    assert all(p.exists() for p in rutas)
    assert (tmp_path / "cmp" / "heatmap_avg_wait_s.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_record_y_list_runs(db_url):
    config = SimConfig(seed=7)
    reports = _grilla()
    assert record_runs([(config, r) for r in reports], db_url) == 5

    todos = list_runs(db_url)
    assert len(todos) == 5
    assert todos[0].engine == "dohv"
    assert todos[0].seed == 7
    assert len(todos[0].config_hash) == 64

    duro = list_runs(db_url, engine="duro")
    assert len(duro) == 4
    assert {(r.pi, r.budget) for r in duro} == {(75.0, 1.0), (75.0, 9.0), (95.0, 1.0), (95.0, 9.0)}
