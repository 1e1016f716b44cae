"""
train: ajusta el pronosticador GCN + LSTM y escribe la tabla de métricas
"""
import argparse
from pathlib import Path

import numpy as np

from app.exceptions import UsageError
from app.schemas.forecast import ModelMeta
from app.services.forecast_model import ForecastModel, initial_theta, save_weights
from app.services.ingest_service import list_demand_days, read_demand
from app.services.metrics_service import metrics_row, write_metrics_csv
from app.services.network_service import load_data_network, normalized_adjacency
from app.services.training_service import (
    DemandDataset,
    TrainConfig,
    chronological_split,
    dataset_forecast,
    train,
)
from app.utils.logger import get_logger

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Entrenar el pronosticador de demanda")
    parser.add_argument("--data", required=True, help="Directorio de salida de ingest")
    parser.add_argument("--zones", required=True, help="CSV zone_id,lat,lon")
    parser.add_argument("--family", default="poisson", choices=["poisson", "normal", "tnormal", "zpoisson", "nb"])
    parser.add_argument("--pi", type=float, nargs="+", default=[95.0], help="Niveles del intervalo de predicción")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--lag", type=int, default=12)
    parser.add_argument("--horizon", type=int, default=6)
    parser.add_argument("--hidden", type=int, default=32)
    parser.add_argument("--val-days", type=int, default=2)
    parser.add_argument("--test-days", type=int, default=1)
    parser.add_argument("--out", default="model.json", help="Archivo de pesos")
    parser.add_argument("--metrics", default="metrics.csv", help="CSV de métricas")
    parser.set_defaults(handler=cmd_train)


def cmd_train(args: argparse.Namespace) -> int:
    net = load_data_network(args.zones, args.data)
    dias = [read_demand(p, net).counts for p in list_demand_days(args.data)]
    if not dias:
        raise UsageError(f"No hay días de demanda en {args.data}")
    entrenamiento, validacion, prueba = chronological_split(dias, args.val_days, args.test_days)

    pila = np.stack(entrenamiento).astype(float)
    hist_mu = pila.mean(axis=0)
    meta = ModelMeta(
        family=args.family,
        n_zones=net.n,
        lag=args.lag,
        horizon=args.horizon,
        gcn_hidden=args.hidden,
        lstm_hidden=args.hidden,
        input_scale=max(1.0, float(pila.mean())),
    )
    model = ForecastModel(meta, normalized_adjacency(net), seed=args.seed)
    model.init_output_bias(initial_theta(args.family, pila.mean(), pila.var()))

    conjuntos = [DemandDataset(d, hist_mu, args.lag, args.horizon) for d in (entrenamiento, validacion, prueba)]
    config = TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed)
    model, trace = train(model, conjuntos[0], conjuntos[1], config)
    save_weights(model, Path(args.out))

    evaluar = conjuntos[2] if not conjuntos[2].empty else conjuntos[0]
    forecast, truth = dataset_forecast(model, evaluar)
    filas = [metrics_row(forecast, truth, pi) for pi in args.pi]
    write_metrics_csv(filas, Path(args.metrics))

    logger.info("Modelo %s guardado en %s (mejor época %s)", args.family, args.out, trace.best_epoch)
    return 0
