# ============================================================
# app/harness/trials.py — Celdas y ensayos de cada tipo de experimento
# ============================================================
# Una celda es un punto de la grilla (ley × m × ruido × β, o el
# parámetro propio del experimento). Cada ensayo es una función pura
# de (configuración, celda, índice de ensayo): el resultado no depende
# del orden de ejecución ni del número de workers.
#
# La semilla de un ensayo es SeedPlan(master).child_seed(trial); se
# comparte entre celdas para que los barridos usen números aleatorios
# comunes (la misma señal x en todos los m de un mismo ensayo).
# ============================================================

import logging
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.harness.experiment_config import ExperimentConfig, ExperimentKind, LawSpec, SolverName
from app.onebit.complexity import empirical_width, gaussian_mean_width
from app.onebit.errors import ConvergenceError
from app.onebit.quantize import (
    corrupt_bits,
    empirical_quantizer_mean,
    one_bit_measure,
    pack_signs,
    quantizer_mean,
)
from app.onebit.recovery.convex import convex_recover
from app.onebit.recovery.hamming import Net, build_net, hamming_recover_local, hamming_recover_net
from app.onebit.sampling import (
    sample_dither,
    sample_matrix,
    sample_noise,
    sample_signal,
    sample_signals,
)
from app.onebit.tessellation import bernoulli_hyperplanes, separation_count, tessellation_audit
from app.onebit.types import NoiseModel, RowLaw, SeedPlan, SignalSetDescriptor, Stream

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BASE_COLUMNS = (
    "schema_version", "experiment", "law", "m", "beta", "sigma", "solver", "param",
    "trial", "seed", "rho", "error", "objective",
)
EXTRA_COLUMNS = {
    ExperimentKind.RECOVERY_SWEEP: ("lambda", "flips", "iterations", "converged"),
    ExperimentKind.TESSELLATION_AUDIT: ("lambda", "pairs", "ratio_min", "ratio_max", "rank_correlation"),
    ExperimentKind.QUANTIZER_MEAN_CHECK: ("lambda", "z", "empirical", "exact"),
    ExperimentKind.BERNOULLI_FAILURE_DEMO: ("lambda", "distance", "hamming_fraction"),
    ExperimentKind.WIDTH_TABLE: ("s", "n", "width", "standard_error", "reference", "ratio"),
}

# Par que ningún hiperplano de Bernoulli sin dither separa en n = 2.
BERNOULLI_PAIR = (np.array([1.0, 0.0]), np.array([1.0, -0.5]) / math.sqrt(1.25))


def columns_for(kind: ExperimentKind) -> Tuple[str, ...]:
    return BASE_COLUMNS + EXTRA_COLUMNS[kind]


@dataclass(frozen=True)
class Cell:
    law: Optional[LawSpec] = None
    m: Optional[int] = None
    noise: NoiseModel = NoiseModel()
    beta: float = 0.0
    param: str = ""
    values: Tuple[float, ...] = ()


@dataclass(frozen=True)
class TrialTask:
    config: ExperimentConfig
    cell_index: int
    cell: Cell
    trial: int


@dataclass
class TrialOutput:
    row: Dict[str, Any]
    seconds: float
    signs: Optional[bytes] = None
    attachment: Optional[Tuple[str, str]] = None
    cell_index: int = 0
    trial: int = 0


# ============================================================
# Función: build_cells()
# ------------------------------------------------------------
# Expande la grilla en orden determinista según el experimento.
# ============================================================
def build_cells(config: ExperimentConfig) -> List[Cell]:
    kind = config.experiment
    if kind is ExperimentKind.RECOVERY_SWEEP:
        return [Cell(law=law, m=m, noise=noise, beta=beta)
                for law, m, noise, beta in product(config.laws, config.m_values, config.noise, config.beta)]
    if kind is ExperimentKind.TESSELLATION_AUDIT:
        return [Cell(law=law, m=m) for law, m in product(config.laws, config.m_values)]
    if kind is ExperimentKind.QUANTIZER_MEAN_CHECK:
        return [Cell(param=f"z={z:g}", values=(z,)) for z in config.quantizer.z]
    if kind is ExperimentKind.BERNOULLI_FAILURE_DEMO:
        cells = [Cell(law=LawSpec(RowLaw.RADEMACHER), m=4, param="undithered")]
        cells += [Cell(law=LawSpec(RowLaw.RADEMACHER), m=m, param="dithered") for m in config.m_values]
        return cells
    return [Cell(law=law, m=config.m_values[0], param=f"s={s},n={n}", values=(s, n))
            for law, (s, n) in product(config.laws, config.width.sizes)]


def build_tasks(config: ExperimentConfig) -> List[TrialTask]:
    return [TrialTask(config, c, cell, t)
            for c, cell in enumerate(build_cells(config)) for t in range(config.trials)]


def _base_row(task: TrialTask, seed: int) -> Dict[str, Any]:
    cell = task.cell
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": task.config.experiment.value,
        "law": cell.law.label if cell.law is not None else "",
        "m": cell.m if cell.m is not None else "",
        "beta": cell.beta,
        "sigma": cell.noise.l2_norm,
        "solver": "",
        "param": cell.param,
        "trial": task.trial,
        "seed": seed,
        "rho": task.config.rho,
        "error": float("nan"),
        "objective": float("nan"),
    }


# ============================================================
# Función: run_trial()
# ------------------------------------------------------------
# Punto de entrada de cada worker (debe ser importable y picklable).
# ============================================================
def run_trial(task: TrialTask) -> TrialOutput:
    seed = SeedPlan(task.config.seed).child_seed(task.trial)
    plan = SeedPlan(seed)
    row = _base_row(task, seed)
    runner = _RUNNERS[task.config.experiment]
    start = time.perf_counter()
    output = runner(task, plan, row)
    output.seconds = time.perf_counter() - start
    output.cell_index, output.trial = task.cell_index, task.trial
    return output


# ============================================================
# Barrido de recuperación
# ------------------------------------------------------------
# Flujo:
#   1️ x ∈ T, A, τ y ν con flujos independientes del plan del ensayo.
#   2️ q = sign(Ax + ν + τ) y corrupción de ⌊βm⌋ bits.
#   3️ Solver configurado; error = ‖x# − x‖₂. Si las proyecciones no
#      convergen, el ensayo queda con error NaN y converged = False.
# ============================================================
@lru_cache(maxsize=8)
def _cached_net(descriptor: SignalSetDescriptor, r: float, probe_count: int, master_seed: int) -> Net:
    return build_net(descriptor, r, probe_count=probe_count, seed=SeedPlan(master_seed))


def _recovery_trial(task: TrialTask, plan: SeedPlan, row: Dict[str, Any]) -> TrialOutput:
    config, cell = task.config, task.cell
    descriptor = config.descriptor
    lam = config.lam_for(cell.noise)
    ensemble = cell.law.ensemble(descriptor.n, cell.m, lam)

    x = sample_signal(descriptor, plan)
    A = sample_matrix(ensemble, plan)
    dither = sample_dither(cell.m, lam, plan)
    noise = sample_noise(cell.noise, cell.m, plan)
    obs = corrupt_bits(one_bit_measure(A, x, dither, noise), cell.beta, config.corruption, seed=plan)

    solver = config.solver
    try:
        if solver.name is SolverName.HAMMING_LOCAL:
            result = hamming_recover_local(A, dither, obs.q, descriptor, restarts=solver.restarts,
                                           iters=solver.iters, seed=plan, lam=lam)
        elif solver.name is SolverName.HAMMING_NET:
            net = _cached_net(descriptor, solver.net_radius, solver.probe_count, config.seed)
            result = hamming_recover_net(A, dither, obs.q, net)
        else:
            result = convex_recover(A, obs.q, lam, descriptor, certify=solver.certify > 0,
                                    n_certify=solver.certify, seed=plan)
    except ConvergenceError as exc:
        logger.warning("Ensayo %d (m=%d, β=%g) sin convergencia, se registra como fallido: %s (residuo %.3g)",
                       task.trial, cell.m, cell.beta, exc, exc.residual)
        result = None

    row.update({
        "solver": solver.name.value,
        "error": float(np.linalg.norm(result.x_hat - x)) if result is not None else float("nan"),
        "objective": result.objective if result is not None else float("nan"),
        "lambda": lam,
        "flips": int(obs.corruption_mask.sum()),
        "iterations": result.iterations if result is not None else 0,
        "converged": bool(result.converged) if result is not None else False,
    })
    return TrialOutput(row=row, seconds=0.0, signs=pack_signs(obs.q) if config.dump_signs else None)


# ============================================================
# Auditoría de teselación
# ------------------------------------------------------------
# Pares de T con ‖x − y‖₂ ≥ ρ (muestreo con rechazo); el informe por
# pares se adjunta como CSV propio de la celda y el ensayo.
# ============================================================
def _sample_far_pairs(descriptor: SignalSetDescriptor, count: int, rho: float, plan: SeedPlan):
    rng = plan.generator(0, Stream.SIGNAL)
    pairs: List[Tuple[np.ndarray, np.ndarray]] = []
    for _ in range(100):
        xs = sample_signals(descriptor, count, rng)
        ys = sample_signals(descriptor, count, rng)
        keep = np.linalg.norm(xs - ys, axis=1) >= rho
        pairs.extend(zip(xs[keep], ys[keep]))
        if len(pairs) >= count:
            return pairs[:count]
    logger.warning("Solo se encontraron %d pares con distancia ≥ ρ", len(pairs))
    return pairs


def _audit_trial(task: TrialTask, plan: SeedPlan, row: Dict[str, Any]) -> TrialOutput:
    config, cell = task.config, task.cell
    descriptor = config.descriptor
    lam = config.lam_for(NoiseModel())
    ensemble = cell.law.ensemble(descriptor.n, cell.m, lam)
    A = sample_matrix(ensemble, plan)
    dither = sample_dither(cell.m, lam, plan)
    pairs = _sample_far_pairs(descriptor, config.audit.pairs, config.rho, plan)
    report = tessellation_audit(A, dither, pairs, config.rho, config.theta, lam=lam)

    row.update({
        "lambda": lam,
        "pairs": len(report.pairs),
        "ratio_min": report.ratio_min,
        "ratio_max": report.ratio_max,
        "rank_correlation": report.rank_correlation,
    })
    name = f"audit/cell{task.cell_index:03d}_trial{task.trial:04d}.csv"
    return TrialOutput(row=row, seconds=0.0, attachment=(name, report.to_csv()))


def _quantizer_trial(task: TrialTask, plan: SeedPlan, row: Dict[str, Any]) -> TrialOutput:
    spec = task.config.quantizer
    z = task.cell.values[0]
    empirical = empirical_quantizer_mean(z, spec.lam, spec.dithers, plan)
    exact = float(quantizer_mean(z, spec.lam))
    row.update({"error": abs(empirical - exact), "lambda": spec.lam, "z": z,
                "empirical": empirical, "exact": exact})
    return TrialOutput(row=row, seconds=0.0)


# ============================================================
# Demostración de Bernoulli
# ------------------------------------------------------------
#   - undithered: los 4 hiperplanos (±1, ±1) sin umbral → d(x, y) = 0.
#   - dithered:   m filas Rademacher con τ ~ U[−λ, λ] → d(x, y) > 0.
# ============================================================
def _bernoulli_trial(task: TrialTask, plan: SeedPlan, row: Dict[str, Any]) -> TrialOutput:
    x, y = BERNOULLI_PAIR
    cell = task.cell
    if cell.param == "undithered":
        A = bernoulli_hyperplanes(2)
        dither = np.zeros(A.shape[0])
        lam = 0.0
    else:
        lam = task.config.lam if task.config.lam is not None else 2.0
        A = sample_matrix(cell.law.ensemble(2, cell.m, lam), plan)
        dither = sample_dither(cell.m, lam, plan)
    fraction = separation_count(A, dither, x, y) / A.shape[0]
    row.update({"lambda": lam, "distance": float(np.linalg.norm(x - y)), "hamming_fraction": fraction,
                "objective": fraction})
    return TrialOutput(row=row, seconds=0.0)


def _width_trial(task: TrialTask, plan: SeedPlan, row: Dict[str, Any]) -> TrialOutput:
    s, n = (int(v) for v in task.cell.values)
    descriptor = SignalSetDescriptor.sparse_ball(s, n, 1.0)
    n_mc = task.config.width.n_mc
    law = task.cell.law
    if law.law is RowLaw.GAUSSIAN:
        estimate = gaussian_mean_width(descriptor, n_mc, plan)
    else:
        estimate = empirical_width(descriptor, law.ensemble(n, task.cell.m, 1.0), n_mc, plan)
    reference = math.sqrt(s * math.log(math.e * n / s))
    row.update({"s": s, "n": n, "width": estimate.value, "standard_error": estimate.standard_error,
                "reference": reference, "ratio": estimate.value / reference, "objective": estimate.value})
    return TrialOutput(row=row, seconds=0.0)


_RUNNERS = {
    ExperimentKind.RECOVERY_SWEEP: _recovery_trial,
    ExperimentKind.TESSELLATION_AUDIT: _audit_trial,
    ExperimentKind.QUANTIZER_MEAN_CHECK: _quantizer_trial,
    ExperimentKind.BERNOULLI_FAILURE_DEMO: _bernoulli_trial,
    ExperimentKind.WIDTH_TABLE: _width_trial,
}
