# ============================================================
# app/onebit/recovery/convex.py — Programa convexo de correlación
# regularizada
# ============================================================
#   φ(z) = (1/m)⟨q_corr, Az⟩ − ‖z‖₂²/(2λ)
# Completando el cuadrado, φ(z) = (⟨w, z⟩ − ‖z‖²/2)/λ con
# w = (λ/m)Aᵀq_corr, así que el maximizador sobre conv(T) es la
# proyección euclídea de w sobre conv(T).
# ============================================================

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.onebit.errors import DimensionMismatchError, InvalidParameterError
from app.onebit.quantize import quantizer_mean
from app.onebit.recovery.projections import project_onto
from app.onebit.sampling import draw_rows, sample_noise, sample_signals
from app.onebit.types import MeasurementEnsemble, NoiseModel, SeedPlan, SetKind, SignalSetDescriptor, Stream

logger = logging.getLogger(__name__)

CERTIFY_SLACK = 1e-9


@dataclass(frozen=True)
class RecoveryResult:
    x_hat: np.ndarray
    objective: float
    iterations: int = 0
    restarts: int = 0
    converged: bool = True
    solver: str = ""


def _check(A: np.ndarray, q_corr: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    q = np.asarray(q_corr, dtype=float)
    if q.shape != (A.shape[0],):
        raise DimensionMismatchError(f"q tiene forma {q.shape}, la matriz tiene {A.shape[0]} filas.")
    return A, q


def phi(A: np.ndarray, q_corr: np.ndarray, lam: float, z: np.ndarray):
    """φ(z); acepta un vector (n,) o un lote (k, n)."""
    if not lam > 0:
        raise InvalidParameterError(f"λ debe ser positivo (λ={lam}).")
    A, q = _check(A, q_corr)
    z = np.asarray(z, dtype=float)
    correlation = (z @ (A.T @ q)) / A.shape[0]
    value = correlation - np.sum(z * z, axis=-1) / (2.0 * lam)
    return float(value) if np.ndim(value) == 0 else value


def _hull_samples(descriptor: SignalSetDescriptor, count: int, rng: np.random.Generator) -> np.ndarray:
    hull = descriptor.convex_hull()
    if hull.kind is SetKind.FINITE_SET:
        weights = rng.dirichlet(np.ones(len(hull.points)), size=count)
        return weights @ hull.points_array
    return sample_signals(hull, count, rng)


# ============================================================
# Función: convex_recover()
# ------------------------------------------------------------
# Flujo:
#   1️ w = (λ/m)Aᵀq_corr.
#   2️ x# = Proj_{conv(T)}(w).
#   3️ Certificado (opcional): sobre n_certify puntos z de conv(T)
#      se exige φ(x#) ≥ φ(z) − 1e−9 y ⟨w − x#, z − x#⟩ ≤ 1e−9.
# ============================================================
def convex_recover(A: np.ndarray, q_corr: np.ndarray, lam: float, descriptor: SignalSetDescriptor,
                   certify: bool = True, n_certify: int = 10_000, seed: Optional[SeedPlan] = None,
                   trial: int = 0) -> RecoveryResult:
    if not lam > 0:
        raise InvalidParameterError(f"λ debe ser positivo (λ={lam}).")
    A, q = _check(A, q_corr)
    if A.shape[1] != descriptor.n:
        raise DimensionMismatchError(f"La matriz tiene n={A.shape[1]} y el descriptor n={descriptor.n}.")

    w = (lam / A.shape[0]) * (A.T @ q)
    x_hat = project_onto(descriptor, w)
    objective = phi(A, q, lam, x_hat)

    if certify and n_certify > 0:
        rng = (seed or SeedPlan()).generator(trial, Stream.PROBE)
        Z = _hull_samples(descriptor, int(n_certify), rng)
        best = float(np.max(phi(A, q, lam, Z)))
        if objective < best - CERTIFY_SLACK:
            raise AssertionError(f"φ(x#)={objective:.12g} por debajo de un punto factible ({best:.12g}).")
        # ⟨w − x#, z − x#⟩ escala con ‖w‖; se compara en unidades de φ (÷λ).
        if np.max((Z - x_hat) @ (w - x_hat)) / lam > CERTIFY_SLACK:
            raise AssertionError("x# no satisface la desigualdad variacional de la proyección.")

    logger.debug("convex_recover: ‖w‖=%.4g, ‖x#‖=%.4g, φ=%.6g", np.linalg.norm(w), np.linalg.norm(x_hat), objective)
    return RecoveryResult(x_hat=x_hat, objective=objective, solver="convex")


# ============================================================
# Función: expected_correlation()
# ------------------------------------------------------------
# (1/m)𝔼⟨sign(Ax + ν + τ), A(z − x)⟩ = 𝔼[clip((⟨X,x⟩ + ν)/λ) ⟨X, z − x⟩]:
# el dither se integra exactamente y X, ν se promedian por Monte Carlo.
# ============================================================
def expected_correlation(ensemble: MeasurementEnsemble, noise: Optional[NoiseModel], x: np.ndarray,
                         z: np.ndarray, lam: float, n_mc: int, seed: SeedPlan,
                         trial: int = 0) -> Tuple[float, float]:
    if n_mc < 2:
        raise InvalidParameterError(f"n_mc debe ser ≥ 2 (n_mc={n_mc}).")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    X = draw_rows(ensemble, int(n_mc), seed.generator(trial, Stream.ESTIMATOR))
    analog = X @ x
    if noise is not None:
        analog = analog + sample_noise(noise, int(n_mc), seed, trial)
    terms = quantizer_mean(analog, lam) * (X @ (z - x))
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(terms.size))


@dataclass(frozen=True)
class ExcessDecomposition:
    corruption: float
    empirical_process: float
    expectation: float

    @property
    def total(self) -> float:
        return self.corruption + self.empirical_process + self.expectation


def excess_decomposition(A: np.ndarray, q_corr: np.ndarray, q_clean: np.ndarray, x: np.ndarray,
                         z: np.ndarray, lam: float, expectation: float) -> ExcessDecomposition:
    """Separa φ(z) − φ(x) en término de corrupción, de proceso empírico y de esperanza."""
    A, qc = _check(A, q_corr)
    _, q0 = _check(A, q_clean)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    m = A.shape[0]
    Ad = A @ (z - x)
    return ExcessDecomposition(
        corruption=float((qc - q0) @ Ad) / m,
        empirical_process=float(q0 @ Ad) / m - expectation,
        expectation=expectation - float(z @ z) / (2.0 * lam) + float(x @ x) / (2.0 * lam),
    )
