from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from app.schemas.report import SimReport
from app.utils.logger import get_logger

logger = get_logger(__name__)

REPORT_COLUMNS = ["engine", "PI", "Gamma", "rho", "avg_wait_s", "avg_travel_s", "leaving_rate_pct", "decision_ms_p50"]
HEATMAP_METRICS = ("avg_wait_s", "leaving_rate_pct")


def report_frame(reports: Sequence[SimReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports], columns=REPORT_COLUMNS)


def write_report_csv(reports: Sequence[SimReport], path: Path) -> None:
    report_frame(reports).to_csv(path, index=False, encoding="utf-8")


def write_events_log(report: SimReport, path: Path) -> None:
    """Un evento por línea, campos separados por tabulación"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("time\tevent\tid\tdetail\n")
        for evento in report.events:
            f.write("\t".join(str(c) for c in evento) + "\n")


def heatmaps(reports: Sequence[SimReport], engine: str = "duro") -> Dict[str, pd.DataFrame]:
    '''
    Una tabla por métrica con PI en las filas y Γ en las columnas.
    '''
    df = report_frame([r for r in reports if r.engine == engine])
    if df.empty:
        return {}
    return {
        metrica: df.pivot_table(index="PI", columns="Gamma", values=metrica, aggfunc="mean").sort_index()
        for metrica in HEATMAP_METRICS
    }


def reduction_table(reports: Sequence[SimReport], baseline: str = "dohv") -> pd.DataFrame:
    '''
    Reducción porcentual de espera media y tasa de abandono de cada corrida
    respecto del motor base. Si el base no está en la grilla la tabla queda vacía.
    '''
    df = report_frame(reports)
    columnas = ["engine", "PI", "Gamma", "rho", "wait_reduction_pct", "leaving_reduction_pct"]
    base = df[df["engine"] == baseline]
    if base.empty:
        logger.warning("El motor base %s no está en la grilla", baseline)
        return pd.DataFrame(columns=columnas)
    espera_base = float(base["avg_wait_s"].iloc[0])
    abandono_base = float(base["leaving_rate_pct"].iloc[0])

    def reduccion(valor: float, referencia: float) -> float:
        return round(100.0 * (referencia - valor) / referencia, 6) if referencia else 0.0

    filas: List[dict] = []
    for _, fila in df[df["engine"] != baseline].iterrows():
        filas.append({
            "engine": fila["engine"], "PI": fila["PI"], "Gamma": fila["Gamma"], "rho": fila["rho"],
            "wait_reduction_pct": reduccion(fila["avg_wait_s"], espera_base),
            "leaving_reduction_pct": reduccion(fila["leaving_rate_pct"], abandono_base),
        })
    return pd.DataFrame(filas, columns=columnas)


def write_heatmap_svg(tabla: pd.DataFrame, metric: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "amod"
    fig, ax = plt.subplots(figsize=(6, 4))
    imagen = ax.imshow(tabla.to_numpy(dtype=float), aspect="auto", origin="lower", cmap="viridis")
    ax.set_xticks(range(len(tabla.columns)), [f"{c:g}" for c in tabla.columns])
    ax.set_yticks(range(len(tabla.index)), [f"{i:g}" for i in tabla.index])
    ax.set_xlabel("Γ")
    ax.set_ylabel("PI (%)")
    ax.set_title(metric)
    fig.colorbar(imagen, ax=ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_comparison(
    reports: Sequence[SimReport],
    out_dir: Path,
    baseline: str = "dohv",
    svg: bool = False,
) -> List[Path]:
    '''
    report.csv, heatmap_<métrica>.csv, reduction.csv y, opcional, los SVG.
    Devuelve las rutas escritas.
    '''
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    escritos = [out_dir / "report.csv"]
    write_report_csv(reports, escritos[0])

    for metrica, tabla in heatmaps(reports).items():
        ruta = out_dir / f"heatmap_{metrica}.csv"
        tabla.rename_axis(columns=None).to_csv(ruta, encoding="utf-8")
        escritos.append(ruta)
        if svg:
            ruta_svg = out_dir / f"heatmap_{metrica}.svg"
            write_heatmap_svg(tabla, metrica, ruta_svg)
            escritos.append(ruta_svg)

    ruta = out_dir / "reduction.csv"
    reduction_table(reports, baseline).to_csv(ruta, index=False, encoding="utf-8")
    escritos.append(ruta)
    return escritos
