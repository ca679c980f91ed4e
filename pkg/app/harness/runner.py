# ============================================================
# app/harness/runner.py — Ejecución de experimentos
# ============================================================
# Flujo de run_experiment():
#   1️ Expande la grilla en tareas (celda, ensayo).
#   2️ Ejecuta las tareas en serie o en un ProcessPoolExecutor;
#      `map` conserva el orden (celda, ensayo) sin importar cuál
#      termina primero.
#   3️ Escribe results.csv (bytes deterministas), timings.csv,
#      adjuntos por ensayo, volcados de signos opcionales y por
#      último manifest.json.
# ============================================================

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from app import config as app_config
from app.harness.experiment_config import ExperimentConfig, parse_config
from app.harness.trials import TrialOutput, build_tasks, columns_for, run_trial
from app.onebit import __version__
from app.utils.file_utils import (
    RESULTS_NAME,
    TIMINGS_NAME,
    ensure_output_dir,
    output_dir_for,
    read_manifest,
    relative_files,
    write_manifest,
    write_rows_csv,
    write_sign_dump,
    write_text,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunResult:
    output_dir: Path
    results_csv: Path
    manifest: Path
    rows: int


def _execute(config: ExperimentConfig, workers: int) -> List[TrialOutput]:
    tasks = build_tasks(config)
    logger.info("Experimento %s: %d tareas con %d worker(s)", config.experiment.value, len(tasks), workers)
    if workers <= 1 or len(tasks) <= 1:
        outputs = []
        for k, task in enumerate(tasks, start=1):
            outputs.append(run_trial(task))
            if k % max(1, config.trials) == 0:
                logger.info("Celda %d completada (%d/%d tareas)", task.cell_index, k, len(tasks))
        return outputs
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_experiment(config: ExperimentConfig, output_dir: Optional[str] = None,
                   workers: Optional[int] = None) -> RunResult:
    settings = app_config.get_settings()
    workers = workers or settings.workers or config.workers
    out_dir = ensure_output_dir(output_dir or output_dir_for(config.output, config.experiment.value))

    outputs = _execute(config, int(workers))

    results = write_rows_csv(out_dir / RESULTS_NAME, [o.row for o in outputs], columns_for(config.experiment))
    write_rows_csv(
        out_dir / TIMINGS_NAME,
        [{"cell": o.cell_index, "trial": o.trial, "seconds": o.seconds} for o in outputs],
        ("cell", "trial", "seconds"),
    )
    for o in outputs:
        if o.attachment is not None:
            name, text = o.attachment
            write_text(out_dir / name, text)
        if o.signs is not None:
            write_sign_dump(out_dir, f"cell{o.cell_index:03d}_trial{o.trial:04d}", o.signs)

    manifest = write_manifest(out_dir, config.raw, __version__, config.seed, relative_files(out_dir))
    logger.info("Experimento %s terminado: %d filas en %s", config.experiment.value, len(outputs), out_dir)
    return RunResult(out_dir, results, manifest, len(outputs))


def run_from_manifest(path: str, output_dir: Optional[str] = None, workers: Optional[int] = None) -> RunResult:
    """Repite una corrida a partir de su manifest.json."""
    manifest = read_manifest(path)
    if manifest.get("version") != __version__:
        logger.warning("El manifiesto es de la versión %s (actual %s)", manifest.get("version"), __version__)
    config = parse_config(manifest["config"])
    return run_experiment(config, output_dir=output_dir, workers=workers)
