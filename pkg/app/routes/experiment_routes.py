# ============================================================
# app/routes/experiment_routes.py — Ejecución y descarga de corridas
# ============================================================
# Se registra en `main.py` con el prefijo `/api/experiments`:
#   - POST → /api/experiments/run
#   - GET  → /api/experiments/download/{run}/{filename}
# ============================================================

from typing import Any, Dict, Optional

from fastapi import APIRouter, Body, HTTPException
from fastapi.responses import FileResponse

from app.config import get_settings
from app.harness.experiment_config import parse_config
from app.harness.runner import run_experiment
from app.utils.file_utils import read_manifest, resolve_result_file

router = APIRouter()


# ============================================================
# Ruta: POST /api/experiments/run
# ------------------------------------------------------------
# Flujo:
#   1️ Valida el cuerpo con el mismo esquema que los YAML.
#   2️ Ejecuta la corrida (workers según ONEBIT_WORKERS o config).
#   3️ Devuelve el manifiesto y el nombre de la corrida.
# ============================================================
@router.post("/run")
def run_route(config: Dict[str, Any] = Body(...), workers: Optional[int] = None):
    """Ejecuta un experimento descrito como JSON."""
    try:
        parsed = parse_config(config)
        result = run_experiment(parsed, workers=workers)
        return {
            "run": result.output_dir.name,
            "rows": result.rows,
            "manifest": read_manifest(str(result.manifest)),
        }
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


# ============================================================
# Ruta: GET /api/experiments/download/{run}/{filename}
# ------------------------------------------------------------
# Devuelve un archivo de una corrida guardada en el directorio
# de resultados. 404 si no existe, 400 si la ruta escapa.
# ============================================================
@router.get("/download/{run}/{filename:path}")
def download_route(run: str, filename: str):
    try:
        path = resolve_result_file(get_settings().results_root(), run, filename)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    if path is None:
        raise HTTPException(status_code=404, detail="Archivo no encontrado")
    return FileResponse(path, filename=path.name)
