# ============================================================
# app/onebit/sampling.py — Muestreo determinista de matrices,
# dithers, ruido y señales de prueba
# ============================================================
# Todas las funciones son puras: dependen solo de (configuración,
# SeedPlan, índice de ensayo). Cada tipo de muestra usa su propio
# flujo (Stream) para que matriz, dither y ruido sean independientes.
# ============================================================

import logging
import math
from typing import Optional

import numpy as np
from scipy import special
from scipy.spatial import distance

from app.onebit.errors import DimensionMismatchError, InvalidParameterError
from app.onebit.recovery.projections import project_l1
from app.onebit.types import (
    MeasurementEnsemble,
    NoiseLaw,
    NoiseModel,
    RowLaw,
    SeedPlan,
    SetKind,
    SignalSetDescriptor,
    Stream,
)

logger = logging.getLogger(__name__)


# ============================================================
# Función: draw_rows()
# ------------------------------------------------------------
# Genera `count` filas i.i.d. de la ley del ensamble con un generador
# dado. Cada ley se reescala a varianza unitaria por coordenada:
#   - Student-t:   × √((df − 2)/df).
#   - CoordHeavy:  ξ = ε·E^α con E ~ Exp(1), ε Rademacher;
#                  𝔼ξ² = Γ(2α + 1), así que se divide por √Γ(2α + 1).
#                  ‖ξ‖_{L^p} = Γ(αp + 1)^{1/p} crece como p^α.
# ============================================================
def draw_rows(ensemble: MeasurementEnsemble, count: int, rng: np.random.Generator) -> np.ndarray:
    shape = (int(count), ensemble.n)
    law = ensemble.row_law
    if law is RowLaw.GAUSSIAN:
        return rng.standard_normal(shape)
    if law is RowLaw.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0
    if law is RowLaw.STUDENT_T:
        df = float(ensemble.df)
        return rng.standard_t(df, size=shape) * math.sqrt((df - 2.0) / df)
    if law is RowLaw.COORD_HEAVY:
        alpha = float(ensemble.alpha)
        signs = 2.0 * rng.integers(0, 2, size=shape) - 1.0
        magnitude = rng.standard_exponential(shape) ** alpha
        return signs * magnitude / math.sqrt(special.gamma(2.0 * alpha + 1.0))
    raise InvalidParameterError(f"Ley de filas desconocida: {law}")


def sample_matrix(ensemble: MeasurementEnsemble, seed: SeedPlan, trial: int = 0) -> np.ndarray:
    """Matriz m×n con filas i.i.d. de `ensemble.row_law`."""
    return draw_rows(ensemble, ensemble.m, seed.generator(trial, Stream.MATRIX))


def sample_dither(m: int, lam: float, seed: SeedPlan, trial: int = 0) -> np.ndarray:
    """Umbrales τ_i i.i.d. uniformes en [−λ, λ]."""
    if not lam > 0:
        raise InvalidParameterError(f"La amplitud del dither λ debe ser positiva (λ={lam}).")
    if m < 1:
        raise InvalidParameterError(f"m debe ser ≥ 1 (m={m}).")
    return seed.generator(trial, Stream.DITHER).uniform(-lam, lam, size=int(m))


def sample_noise(noise: NoiseModel, m: int, seed: SeedPlan, trial: int = 0) -> np.ndarray:
    """Ruido analógico ν (m valores) según el modelo."""
    rng = seed.generator(trial, Stream.NOISE)
    if noise.law is NoiseLaw.NONE:
        return np.zeros(int(m))
    if noise.law is NoiseLaw.GAUSSIAN:
        return noise.sigma * rng.standard_normal(int(m))
    if noise.law is NoiseLaw.STUDENT_T:
        df = float(noise.df)
        return noise.sigma * rng.standard_t(df, size=int(m)) * math.sqrt((df - 2.0) / df)
    return np.full(int(m), float(noise.mu))


def default_dither_amplitude(radius: float, sigma: float = 0.0, rho: float = 0.0) -> float:
    """λ = 2(R + σ) + ρ, valor por defecto cuando la configuración no fija λ."""
    return 2.0 * (radius + sigma) + rho


# ============================================================
# Función: sample_signal()
# ------------------------------------------------------------
# Señal de prueba x ∈ T:
#   - SparseBall: soporte uniforme de tamaño s, dirección uniforme en la
#     esfera de ese soporte, radio uniforme en (0, R].
#   - L1L2Ball:   dirección gaussiana densa con radio uniforme en (0, R],
#     proyectada sobre la bola ℓ1 de radio R√s (el umbral suave solo
#     reduce la norma ℓ2, así que la ℓ2 sigue cumpliéndose).
#   - FiniteSet:  elección uniforme entre los puntos.
# La pertenencia se verifica siempre antes de devolver.
# ============================================================
def sample_signal(descriptor: SignalSetDescriptor, seed: SeedPlan, trial: int = 0,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    rng = rng if rng is not None else seed.generator(trial, Stream.SIGNAL)
    x = _draw_signal(descriptor, rng)
    if not membership(descriptor, x, tol=1e-9):
        raise AssertionError(f"La señal muestreada no pertenece a {descriptor.describe()}.")
    return x


def sample_signals(descriptor: SignalSetDescriptor, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` señales de T apiladas por filas (mismas reglas que sample_signal)."""
    if not count:
        return np.zeros((0, descriptor.n))
    X = np.vstack([_draw_signal(descriptor, rng) for _ in range(int(count))])
    outside = np.flatnonzero(~membership_rows(descriptor, X, tol=1e-9))
    if outside.size:
        raise AssertionError(f"{outside.size} señales muestreadas no pertenecen a {descriptor.describe()} "
                             f"(primera fila: {int(outside[0])}).")
    return X


def _draw_signal(descriptor: SignalSetDescriptor, rng: np.random.Generator) -> np.ndarray:
    n = descriptor.n
    if descriptor.kind is SetKind.FINITE_SET:
        pts = descriptor.points_array
        return pts[rng.integers(0, pts.shape[0])].copy()
    radius = descriptor.radius * (1.0 - rng.random())
    if descriptor.kind is SetKind.SPARSE_BALL:
        s = descriptor.sparsity
        support = rng.choice(n, size=s, replace=False)
        direction = rng.standard_normal(s)
        x = np.zeros(n)
        x[support] = radius * direction / np.linalg.norm(direction)
        return x
    direction = rng.standard_normal(n)
    x = radius * direction / np.linalg.norm(direction)
    return project_l1(x, descriptor.l1_radius)


# ============================================================
# Función: membership()
# ------------------------------------------------------------
# x ∈ T con tolerancia aditiva `tol` en cada restricción de norma.
# Para la dispersión se cuentan coordenadas con |x_i| > tol.
# ============================================================
def membership(descriptor: SignalSetDescriptor, x: np.ndarray, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (descriptor.n,):
        raise DimensionMismatchError(f"x tiene forma {x.shape}, se esperaba ({descriptor.n},).")
    return bool(membership_rows(descriptor, x[None, :], tol)[0])


def membership_rows(descriptor: SignalSetDescriptor, X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Pertenencia fila a fila de una matriz k×n (mismas reglas que membership)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != descriptor.n:
        raise DimensionMismatchError(f"X tiene forma {X.shape}, se esperaba (k, {descriptor.n}).")
    if descriptor.kind is SetKind.FINITE_SET:
        return distance.cdist(X, descriptor.points_array).min(axis=1) <= tol
    inside = np.linalg.norm(X, axis=1) <= descriptor.radius + tol
    if descriptor.kind is SetKind.SPARSE_BALL:
        return inside & (np.count_nonzero(np.abs(X) > tol, axis=1) <= descriptor.sparsity)
    return inside & (np.abs(X).sum(axis=1) <= descriptor.l1_radius + tol)
