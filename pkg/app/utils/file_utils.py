# ============================================================
# app/utils/file_utils.py — Utilidades de archivos de resultados
# ============================================================
# Este módulo concentra toda la escritura en disco del harness:
#   - Directorio de salida de cada corrida.
#   - CSV de resultados (bytes deterministas) y de tiempos.
#   - Manifiesto JSON (configuración, versión, semilla, fecha).
#   - Volcado de patrones de signos empaquetados.
#   - Redes (Net) en CSV con cabecera.
# ============================================================

import csv
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.config import get_settings
from app.onebit.errors import InvalidParameterError
from app.onebit.recovery.hamming import Net

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
RESULTS_NAME = "results.csv"
TIMINGS_NAME = "timings.csv"
FLOAT_FORMAT = "%.12g"


def ensure_output_dir(path: str) -> Path:
    """Crea el directorio de salida si no existe y lo devuelve como Path."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ============================================================
# Función: write_rows_csv()
# ------------------------------------------------------------
# Escribe filas (dicts) con columnas en el orden dado. Usa un formato
# de flotantes fijo para que dos corridas idénticas den los mismos bytes.
# ============================================================
def write_rows_csv(path: Path, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> Path:
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Archivo guardado en: %s (%d filas)", path, len(frame))
    return path


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info("Archivo guardado en: %s", path)
    return path


# ============================================================
# Manifiesto
# ============================================================
def write_manifest(out_dir: Path, config: Dict[str, Any], version: str, master_seed: int,
                   files: Iterable[str]) -> Path:
    manifest = {
        "version": version,
        "master_seed": int(master_seed),
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "files": sorted(files),
    }
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, ensure_ascii=False)
    logger.info("Manifiesto guardado en: %s", path)
    return path


def read_manifest(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if "config" not in manifest:
        raise InvalidParameterError(f"{path} no es un manifiesto (falta 'config').")
    return manifest


def is_manifest(path: str) -> bool:
    return str(path).endswith(".json")


# ============================================================
# Volcado de signos: un archivo binario por ensayo
# ============================================================
def write_sign_dump(out_dir: Path, name: str, blob: bytes) -> Path:
    path = out_dir / "signs" / f"{name}.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(blob)
    return path


# ============================================================
# Redes: CSV con una línea de cabecera `# n,count,r,radius_empirical`
# seguida de un punto por fila.
# ============================================================
def save_net(path: str, net: Net) -> Path:
    points = np.atleast_2d(net.points)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# {points.shape[1]},{points.shape[0]},{net.radius_target!r},{net.radius_empirical!r}\n")
        writer = csv.writer(f, lineterminator="\n")
        for row in points:
            writer.writerow([repr(float(v)) for v in row])
    logger.info("Red guardada en: %s (%d puntos)", path, points.shape[0])
    return path


def load_net(path: str) -> Net:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        if not header.startswith("#"):
            raise InvalidParameterError(f"{path}: falta la cabecera de la red.")
        n, count, r, radius = header[1:].strip().split(",")
        rows: List[List[float]] = [[float(v) for v in row] for row in csv.reader(f) if row]
    points = np.asarray(rows, dtype=float).reshape(-1, int(n))
    if points.shape[0] != int(count):
        raise InvalidParameterError(f"{path}: se esperaban {count} puntos y hay {points.shape[0]}.")
    return Net(points, float(r), float(radius))


# ============================================================
# Función: resolve_result_file()
# ------------------------------------------------------------
# Ruta de un archivo de resultados dentro de base_dir/run. Rechaza
# cualquier ruta que escape de base_dir; devuelve None si no existe.
# ============================================================
def resolve_result_file(base_dir: str, run: str, filename: str) -> Optional[Path]:
    base = Path(base_dir).resolve()
    candidate = (base / run / filename).resolve()
    if base not in candidate.parents:
        raise InvalidParameterError("Ruta fuera del directorio de resultados.")
    if not candidate.is_file():
        logger.warning("Archivo no encontrado: %s", candidate)
        return None
    return candidate


def output_dir_for(configured: Optional[str], run_name: str) -> str:
    """Directorio efectivo: ONEBIT_OUTPUT_DIR > configuración > data/results/<run_name>."""
    return get_settings().resolve_output_dir(configured, run_name)


def relative_files(out_dir: Path) -> List[str]:
    return [str(p.relative_to(out_dir)).replace(os.sep, "/") for p in out_dir.rglob("*")
            if p.is_file() and p.name != MANIFEST_NAME]
