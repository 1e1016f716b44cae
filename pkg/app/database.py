from contextlib import contextmanager

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from app.config import settings

# URL de conexión (sqlite por defecto)
# Formato: sqlite:///./runs.db
DATABASE_URL = settings.DATABASE_URL

# Crear engine de SQLAlchemy
engine = create_engine(DATABASE_URL)

# Crear SessionLocal class
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

# Base class para los modelos
Base = declarative_base()


def make_engine(url: str):
    """Engine propio para una URL distinta a la de settings (ej: --db en la CLI o tests)"""
    return create_engine(url)


@contextmanager
def get_db(bind=None):
    """
    Provee una sesión de BD; hace commit al salir y rollback si hubo error.
    """
    db = SessionLocal() if bind is None else sessionmaker(autocommit=False, autoflush=False, bind=bind)()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()


# Función para crear todas las tablas
def create_tables(bind=None):
    """
    Crear todas las tablas en la BD.
    """
    # Importar todos los modelos para que SQLAlchemy los registre
    from app.models.run_record import RunRecord  # noqa: F401

    Base.metadata.create_all(bind=bind or engine)
