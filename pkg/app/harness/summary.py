# ============================================================
# app/harness/summary.py — Resumen por celda de un results.csv
# ============================================================
# Por celda: número de ensayos con error, mediana, cuartiles y tasa
# de éxito (fracción de ensayos con error ≤ ρ). Las celdas sin
# ningún error registrado se omiten con una advertencia.
# ============================================================

import logging
from typing import Optional, Sequence

import pandas as pd

from app.harness.trials import BASE_COLUMNS, SCHEMA_VERSION
from app.onebit.errors import SchemaError

logger = logging.getLogger(__name__)

DEFAULT_GROUP_BY = ("experiment", "law", "m", "beta", "sigma", "solver", "param")
SUMMARY_COLUMNS = ("count", "median", "q1", "q3", "success_rate")


def read_results(path: str) -> pd.DataFrame:
    """Lee el CSV y verifica columnas y versión del esquema."""
    frame = pd.read_csv(path, keep_default_na=True)
    missing = [c for c in BASE_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: faltan columnas {missing}.")
    versions = set(frame["schema_version"].dropna().astype(int).unique())
    if versions - {SCHEMA_VERSION}:
        raise SchemaError(f"{path}: versión de esquema {sorted(versions)} no soportada (se espera {SCHEMA_VERSION}).")
    return frame


def summarize_frame(frame: pd.DataFrame, group_by: Sequence[str] = DEFAULT_GROUP_BY,
                    rho: Optional[float] = None) -> pd.DataFrame:
    unknown = [c for c in group_by if c not in frame.columns]
    if unknown:
        raise SchemaError(f"Columnas de agrupación desconocidas: {unknown}.")
    keys = list(group_by)
    records = []
    for cell, group in frame.groupby(keys, dropna=False, sort=True):
        cell = cell if isinstance(cell, tuple) else (cell,)
        errors = group["error"].dropna()
        if errors.empty:
            logger.warning("Celda sin errores registrados, se omite: %s", dict(zip(keys, cell)))
            continue
        threshold = rho if rho is not None else float(group["rho"].iloc[0])
        records.append({
            **dict(zip(keys, cell)),
            "count": int(errors.size),
            "median": float(errors.median()),
            "q1": float(errors.quantile(0.25)),
            "q3": float(errors.quantile(0.75)),
            "success_rate": float((errors <= threshold).mean()),
        })
    return pd.DataFrame(records, columns=keys + list(SUMMARY_COLUMNS))


def summarize(csv_path: str, group_by: Sequence[str] = DEFAULT_GROUP_BY,
              rho: Optional[float] = None) -> pd.DataFrame:
    """Tabla resumen por celda; ρ por defecto es el registrado en cada fila."""
    summary = summarize_frame(read_results(csv_path), group_by, rho)
    logger.info("Resumen de %s: %d celdas", csv_path, len(summary))
    return summary
