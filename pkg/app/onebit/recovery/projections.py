# ============================================================
# app/onebit/recovery/projections.py — Proyecciones euclídeas exactas
# ============================================================
# Bloques básicos de los solvers convexos:
#   - project_l2():           bola ℓ2 de radio R (reescalado).
#   - project_l1():           bola ℓ1 por ordenamiento y umbral (soft-threshold).
#   - project_simplex():      símplex {α ≥ 0, Σα = radio}.
#   - project_intersection(): {‖z‖₁ ≤ a} ∩ {‖z‖₂ ≤ b} con el esquema de
#                             proyecciones alternadas con corrección (Dykstra).
#   - project_onto():         conv(T) según el descriptor.
# ============================================================

import logging
import math

import numpy as np

from app.onebit.errors import (
    ConvergenceError,
    InvalidParameterError,
    UnsupportedDescriptorError,
)
from app.onebit.types import SetKind, SignalSetDescriptor

logger = logging.getLogger(__name__)

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITER = 10_000


def project_l2(v: np.ndarray, radius: float) -> np.ndarray:
    """v si ‖v‖₂ ≤ R; si no, v·R/‖v‖₂."""
    if not radius > 0:
        raise InvalidParameterError(f"El radio debe ser positivo (R={radius}).")
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= radius:
        return v.copy()
    return v * (radius / norm)


# ============================================================
# Función: project_l1()
# ------------------------------------------------------------
# Busca θ ≥ 0 con Σ max(|v_i| − θ, 0) = radio ordenando |v| de mayor
# a menor y acumulando; la salida es sign(v)·max(|v| − θ, 0).
# Si v ya es factible, θ = 0 y se devuelve v.
# ============================================================
def project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Proyección euclídea exacta sobre la bola ℓ1 de radio `radius`."""
    if not radius > 0:
        raise InvalidParameterError(f"El radio ℓ1 debe ser positivo ({radius}).")
    v = np.asarray(v, dtype=float)
    u = np.abs(v)
    if u.sum() <= radius:
        return v.copy()
    return np.sign(v) * np.maximum(u - _l1_threshold(u, radius), 0.0)


def _l1_threshold(u: np.ndarray, radius: float) -> float:
    mu = np.sort(u)[::-1]
    cssv = np.cumsum(mu) - radius
    ind = np.arange(1, u.size + 1)
    rho = np.nonzero(mu - cssv / ind > 0)[0][-1]
    return float(cssv[rho] / (rho + 1.0))


def project_simplex(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Proyección sobre {α ≥ 0, Σα = radius}."""
    v = np.asarray(v, dtype=float)
    mu = np.sort(v)[::-1]
    cssv = np.cumsum(mu) - radius
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(mu - cssv / ind > 0)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


# ============================================================
# Función: project_intersection()
# ------------------------------------------------------------
# Proyección sobre {‖z‖₁ ≤ l1_radius} ∩ {‖z‖₂ ≤ l2_radius}.
#
# Flujo:
#   1️ Casos de contención: si la bola ℓ1 contiene a la ℓ2, o si la
#      proyección sobre un solo conjunto ya cae en el otro, esa es la
#      respuesta exacta.
#   2️ Dykstra: y = P₂(x + p); p ← x + p − y; x' = P₁(y + q); q ← y + q − x'.
#      Se detiene cuando ‖x' − x‖₂ < tol.
#   3️ Factibilidad final: x' cumple ℓ1 exactamente; si la ℓ2 queda
#      violada por el residuo se reescala (no rompe la ℓ1).
# ============================================================
def project_intersection(
    v: np.ndarray,
    l1_radius: float,
    l2_radius: float,
    tol: float = DYKSTRA_TOL,
    max_iter: int = DYKSTRA_MAX_ITER,
) -> np.ndarray:
    if not (l1_radius > 0 and l2_radius > 0):
        raise InvalidParameterError("Los radios ℓ1 y ℓ2 deben ser positivos.")
    if not tol > 0:
        raise InvalidParameterError(f"La tolerancia debe ser positiva (tol={tol}).")
    v = np.asarray(v, dtype=float)

    # 1️ Contenciones
    if l1_radius >= math.sqrt(v.size) * l2_radius:
        return project_l2(v, l2_radius)
    on_l2 = project_l2(v, l2_radius)
    if np.abs(on_l2).sum() <= l1_radius:
        return on_l2
    on_l1 = project_l1(v, l1_radius)
    if np.linalg.norm(on_l1) <= l2_radius:
        return on_l1

    # 2️ Dykstra
    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    residual = math.inf
    for it in range(1, max_iter + 1):
        y = project_l2(x + p, l2_radius)
        p = x + p - y
        x_new = project_l1(y + q, l1_radius)
        q = y + q - x_new
        residual = float(np.linalg.norm(x_new - x))
        x = x_new
        if residual < tol:
            logger.debug("Dykstra convergió en %d iteraciones (residuo %.2e)", it, residual)
            break
    else:
        raise ConvergenceError(
            f"Dykstra no convergió en {max_iter} iteraciones (residuo {residual:.3e}).",
            last_iterate=x,
            residual=residual,
        )

    # 3️ Factibilidad exacta
    norm = np.linalg.norm(x)
    if norm > l2_radius:
        x = x * (l2_radius / norm)
    return x


# ============================================================
# Función auxiliar: _project_hull_of_points()
# ------------------------------------------------------------
# conv de un conjunto finito (solo n ≤ 3): gradiente proyectado
# acelerado sobre los pesos del símplex, min ‖Pᵀα − v‖².
# ============================================================
def _project_hull_of_points(points: np.ndarray, v: np.ndarray, tol: float = 1e-12, max_iter: int = 20_000) -> np.ndarray:
    k = points.shape[0]
    if k == 1:
        return points[0].copy()
    gram = points @ points.T
    step = 1.0 / max(np.linalg.eigvalsh(gram)[-1], 1e-15)
    pv = points @ v
    alpha = np.full(k, 1.0 / k)
    y = alpha.copy()
    t = 1.0
    for _ in range(max_iter):
        alpha_new = project_simplex(y - step * (gram @ y - pv))
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        y = alpha_new + ((t - 1) / t_new) * (alpha_new - alpha)
        if np.linalg.norm(alpha_new - alpha) < tol:
            alpha = alpha_new
            break
        alpha, t = alpha_new, t_new
    return points.T @ alpha


def project_onto(descriptor: SignalSetDescriptor, v: np.ndarray, tol: float = DYKSTRA_TOL,
                 max_iter: int = DYKSTRA_MAX_ITER) -> np.ndarray:
    """Proyección euclídea sobre conv(T)."""
    hull = descriptor.convex_hull()
    if hull.kind is SetKind.L1L2_BALL:
        return project_intersection(v, hull.l1_radius, hull.radius, tol=tol, max_iter=max_iter)
    if hull.kind is SetKind.FINITE_SET and hull.n <= 3:
        return _project_hull_of_points(hull.points_array, np.asarray(v, dtype=float))
    raise UnsupportedDescriptorError(
        f"No hay proyección sobre conv(T) para {descriptor.describe()} (FiniteSet solo con n ≤ 3)."
    )
