# ============================================================
#  app/config.py — Configuración general: entorno, logging y FastAPI
# ============================================================
# Este módulo define:
#   - Settings: variables de entorno (.env vía python-dotenv).
#   - configure_logging(): handler único con formato fijo.
#   - create_app(): instancia FastAPI con CORS, usada por main.py.
# Solo ONEBIT_OUTPUT_DIR y ONEBIT_WORKERS influyen en los experimentos.
# ============================================================

import logging
import os
from dataclasses import dataclass
from typing import List, Optional

from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
DEFAULT_OUTPUT_DIR = os.path.join("data", "results")

logger = logging.getLogger(__name__)


# ============================================================
#  Carga de variables de entorno (.env)
# ============================================================
load_dotenv()


@dataclass(frozen=True)
class Settings:
    output_dir: Optional[str]
    workers: Optional[int]
    log_level: str
    allowed_origins: List[str]
    port: int

    @classmethod
    def from_env(cls) -> "Settings":
        workers = os.getenv("ONEBIT_WORKERS")
        origins = os.getenv("ALLOWED_ORIGINS", "")
        return cls(
            output_dir=os.getenv("ONEBIT_OUTPUT_DIR") or None,
            workers=int(workers) if workers else None,
            log_level=os.getenv("ONEBIT_LOG_LEVEL", "INFO").upper(),
            allowed_origins=[o.strip() for o in origins.split(",") if o.strip()],
            port=int(os.getenv("PORT", 8000)),
        )

    def resolve_output_dir(self, configured: Optional[str], run_name: str) -> str:
        """
        Directorio de una corrida. Con ONEBIT_OUTPUT_DIR la corrida se
        guarda en ese directorio base conservando su nombre.
        """
        name = os.path.basename(os.path.normpath(configured)) if configured else run_name
        if self.output_dir:
            return os.path.join(self.output_dir, name)
        return configured or os.path.join(DEFAULT_OUTPUT_DIR, run_name)

    def results_root(self) -> str:
        return self.output_dir or DEFAULT_OUTPUT_DIR


def get_settings() -> Settings:
    return Settings.from_env()


# ============================================================
#  Función: configure_logging()
# ------------------------------------------------------------
# Instala un único StreamHandler en el logger raíz. Llamarla dos
# veces no duplica handlers.
# ============================================================
def configure_logging(level: Optional[str] = None) -> None:
    level = (level or get_settings().log_level).upper()
    root = logging.getLogger()
    if not any(getattr(h, "_onebit", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._onebit = True
        root.addHandler(handler)
    root.setLevel(level)


# ============================================================
#  Función principal: create_app()
# ------------------------------------------------------------
# Crea la instancia FastAPI y habilita CORS para los orígenes locales
# más los definidos en ALLOWED_ORIGINS (separados por comas).
# ============================================================
def create_app() -> FastAPI:
    app = FastAPI(title="One-bit Tessellation API")

    origins = ["http://localhost:5173", "http://localhost:8000"]
    for origin in get_settings().allowed_origins:
        if origin not in origins:
            origins.append(origin)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    logger.info("CORS habilitado para: %s", origins)
    return app
