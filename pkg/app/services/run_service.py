from typing import List, Optional

from app.config import SimConfig, config_hash
from app.database import create_tables, get_db, make_engine
from app.models.run_record import RunRecord
from app.schemas.report import SimReport
from app.utils.logger import get_logger

logger = get_logger(__name__)


def record_runs(items: List[tuple], db_url: Optional[str] = None) -> int:
    '''
    Guarda una fila RunRecord por (config, reporte). Devuelve cuántas se guardaron.
    '''
    bind = make_engine(db_url) if db_url else None
    create_tables(bind)
    with get_db(bind) as db:
        for config, report in items:
            db.add(_to_record(config, report))
    logger.info("%d corridas registradas", len(items))
    return len(items)


def _to_record(config: SimConfig, report: SimReport) -> RunRecord:
    return RunRecord(
        engine=report.engine,
        pi=report.pi,
        budget=report.budget,
        rho=report.rho,
        seed=config.seed,
        config_hash=config_hash(config),
        avg_wait_s=report.avg_wait_s,
        avg_travel_s=report.avg_travel_s,
        leaving_rate_pct=report.leaving_rate_pct,
        decision_ms_p50=report.decision_ms_p50,
        generated=report.generated,
        served=report.served,
        left=report.left,
    )


def list_runs(db_url: Optional[str] = None, engine: Optional[str] = None) -> List[RunRecord]:
    bind = make_engine(db_url) if db_url else None
    create_tables(bind)
    with get_db(bind) as db:
        consulta = db.query(RunRecord)
        if engine:
            consulta = consulta.filter(RunRecord.engine == engine)
        registros = consulta.order_by(RunRecord.id).all()
        db.expunge_all()
    return registros
