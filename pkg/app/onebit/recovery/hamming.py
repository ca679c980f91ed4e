# ============================================================
# app/onebit/recovery/hamming.py — Programa de Hamming
# ============================================================
#   min_{z ∈ T} d_H(q_corr, sign(Az + τ))
# Dos solvers:
#   - hamming_recover_net():   argmin exacto sobre una red finita de T.
#   - hamming_recover_local(): búsqueda local multi-arranque para
#                              SparseBall (intercambios de soporte y
#                              minimización exacta por coordenada).
# ============================================================

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional

import numpy as np

from app.onebit.errors import (
    BudgetExceededError,
    DimensionMismatchError,
    InvalidParameterError,
    UnsupportedDescriptorError,
)
from app.onebit.quantize import signs
from app.onebit.recovery.convex import RecoveryResult
from app.onebit.recovery.projections import project_l2
from app.onebit.sampling import sample_signals
from app.onebit.types import SeedPlan, SetKind, SignalSetDescriptor, Stream

logger = logging.getLogger(__name__)

NET_BUDGET = 5000
POOL_SIZE = 4000
CERTIFY_ROUNDS = 12
DISTANCE_CHUNK = 1024


@dataclass(frozen=True)
class Net:
    points: np.ndarray
    radius_target: float
    radius_empirical: float

    def __len__(self) -> int:
        return int(self.points.shape[0])


def covering_radius(points: np.ndarray, probes: np.ndarray) -> float:
    """max_{p ∈ probes} min_{z ∈ points} ‖p − z‖₂, por bloques."""
    worst = 0.0
    sq_points = np.sum(points * points, axis=1)
    for start in range(0, probes.shape[0], DISTANCE_CHUNK):
        block = probes[start:start + DISTANCE_CHUNK]
        d2 = np.sum(block * block, axis=1)[:, None] - 2.0 * block @ points.T + sq_points[None, :]
        worst = max(worst, float(np.sqrt(max(np.min(d2, axis=1).max(), 0.0))))
    return worst


def _greedy(pool: np.ndarray, r: float, net: List[np.ndarray], budget: int) -> List[np.ndarray]:
    """Añade el punto más lejano del pool hasta que todos queden a distancia ≤ r."""
    nearest = np.full(pool.shape[0], np.inf)
    for z in net:
        nearest = np.minimum(nearest, np.linalg.norm(pool - z, axis=1))
    while True:
        far = int(np.argmax(nearest))
        if nearest[far] <= r:
            return net
        if len(net) >= budget:
            raise BudgetExceededError(
                f"La red supera {budget} puntos con r={r:g}; use un radio mayor."
            )
        net.append(pool[far].copy())
        nearest = np.minimum(nearest, np.linalg.norm(pool - pool[far], axis=1))


def _certified_net(descriptor: SignalSetDescriptor, r: float, probe_count: int, seed: SeedPlan,
                   budget: int) -> Net:
    """Red voraz sobre muestras de T, certificada con sondas nuevas en cada ronda."""
    pool_rng = seed.generator(0, Stream.SOLVER)
    net: List[np.ndarray] = [np.zeros(descriptor.n)]
    pool = sample_signals(descriptor, POOL_SIZE, pool_rng)
    radius = math.inf
    for round_ in range(CERTIFY_ROUNDS):
        net = _greedy(pool, r, net, budget)
        probes = sample_signals(descriptor, probe_count, seed.generator(round_, Stream.PROBE))
        radius = covering_radius(np.asarray(net), probes)
        logger.debug("Red: ronda %d, %d puntos, radio sondeado %.4g", round_, len(net), radius)
        if radius <= r:
            break
        pool = np.vstack([pool, probes])
    else:
        raise BudgetExceededError(
            f"No se certificó el radio {r:g} tras {CERTIFY_ROUNDS} rondas (radio {radius:.4g}); use un radio mayor."
        )
    return Net(np.asarray(net), float(r), float(radius))


# ============================================================
# Función: build_net()
# ------------------------------------------------------------
#   - FiniteSet:  el propio conjunto, radio 0.
#   - r ≥ R:      {0} (todo T está en R·B₂).
#   - SparseBall: si C(n, s) soportes caben en el presupuesto, se
#                 construye una red de la bola s-dimensional y se copia
#                 en cada soporte; si no, red voraz sobre T.
#   - resto:      red voraz certificada con sondas.
# ============================================================
def build_net(descriptor: SignalSetDescriptor, r: float, probe_count: int = 10_000,
              seed: Optional[SeedPlan] = None, budget: int = NET_BUDGET) -> Net:
    if not r > 0:
        raise InvalidParameterError(f"r debe ser positivo (r={r}).")
    seed = seed or SeedPlan()
    if descriptor.kind is SetKind.FINITE_SET:
        return Net(descriptor.points_array, float(r), 0.0)
    if r >= descriptor.radius:
        return Net(np.zeros((1, descriptor.n)), float(r), float(descriptor.radius))

    if descriptor.kind is SetKind.SPARSE_BALL:
        s, n = descriptor.sparsity, descriptor.n
        supports = math.comb(n, s)
        if s < n and supports <= budget:
            ball = SignalSetDescriptor.sparse_ball(s, s, descriptor.radius)
            local = _certified_net(ball, r, probe_count, seed, budget)
            if supports * len(local) > budget:
                raise BudgetExceededError(
                    f"La red compuesta tendría {supports * len(local)} puntos (> {budget}); use un radio mayor."
                )
            points = np.zeros((supports, len(local), n))
            for k, support in enumerate(combinations(range(n), s)):
                points[k][:, list(support)] = local.points
            points = np.unique(points.reshape(-1, n), axis=0)
            return Net(points, float(r), local.radius_empirical)

    return _certified_net(descriptor, r, probe_count, seed, budget)


# ============================================================
# Función: hamming_objective()
# ------------------------------------------------------------
# d_H(q_corr, sign(Az + τ)) para un punto (n,) o un lote (k, n).
# ============================================================
def hamming_objective(A: np.ndarray, dither: np.ndarray, q_corr: np.ndarray, z: np.ndarray):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    q = np.asarray(q_corr)
    dither = np.asarray(dither, dtype=float)
    if q.shape != (A.shape[0],) or dither.shape != (A.shape[0],):
        raise DimensionMismatchError(f"q y el dither deben tener {A.shape[0]} valores.")
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        return int(np.count_nonzero(signs(A @ z + dither) != q))
    out = np.empty(z.shape[0], dtype=np.int64)
    for start in range(0, z.shape[0], DISTANCE_CHUNK):
        block = z[start:start + DISTANCE_CHUNK]
        out[start:start + block.shape[0]] = np.count_nonzero(signs(block @ A.T + dither) != q, axis=1)
    return out


def hamming_recover_net(A: np.ndarray, dither: np.ndarray, q_corr: np.ndarray, net: Net) -> RecoveryResult:
    """Argmin exacto sobre la red; empates por menor ‖z‖₂ y luego orden lexicográfico."""
    points = np.atleast_2d(np.asarray(net.points, dtype=float))
    if points.shape[0] == 0:
        raise InvalidParameterError("La red está vacía.")
    objectives = hamming_objective(A, dither, q_corr, points)
    norms = np.linalg.norm(points, axis=1)
    keys = tuple(points[:, j] for j in reversed(range(points.shape[1]))) + (norms, objectives)
    best = int(np.lexsort(keys)[0])
    return RecoveryResult(x_hat=points[best].copy(), objective=float(objectives[best]),
                          iterations=int(points.shape[0]), solver="hamming_net")


# ============================================================
# Búsqueda local sobre R·Σ_{s,n}
# ============================================================
def _line_minimize(base: np.ndarray, column: np.ndarray, q: np.ndarray, t_lo: float, t_hi: float):
    """
    Minimiza t ↦ #{i : sign(base_i + column_i·t) ≠ q_i} en [t_lo, t_hi].
    La función es constante a trozos con quiebres b_i = −base_i/column_i;
    al cruzar b_i en sentido creciente el conteo cambia en −q_i·sign(column_i).
    Devuelve (valor, t) con t en el punto medio del mejor intervalo
    (empates: el intervalo más largo).
    """
    active = column != 0
    breaks = -base[active] / column[active]
    deltas = -q[active] * np.sign(column[active])
    inside = (breaks > t_lo) & (breaks < t_hi)
    order = np.argsort(breaks[inside], kind="stable")
    b = breaks[inside][order]
    d = deltas[inside][order]

    edges = np.concatenate(([t_lo], b, [t_hi]))
    t0 = 0.5 * (edges[0] + edges[1])
    start = int(np.count_nonzero(signs(base + column * t0) != q))
    values = start + np.concatenate(([0.0], np.cumsum(d)))
    lengths = np.diff(edges)
    valid = lengths > 1e-15
    if not np.any(valid):
        return start, t0
    # Mínimo valor y, entre empates, el intervalo más largo.
    candidates = np.flatnonzero(valid)
    best = candidates[np.lexsort((-lengths[candidates], values[candidates]))[0]]
    return int(round(values[best])), 0.5 * (edges[best] + edges[best + 1])


def _feasible_range(z: np.ndarray, j: int, radius: float):
    rest = max(radius * radius - (float(z @ z) - z[j] * z[j]), 0.0)
    half = math.sqrt(rest) * (1.0 - 1e-12)
    return -half - z[j], half - z[j]


def _try_coordinate(A, analog, q, z, j, radius):
    """Mejor valor de z_j con los demás fijos: (objetivo, nuevo z)."""
    lo, hi = _feasible_range(z, j, radius)
    value, t = _line_minimize(analog, A[:, j], q, lo, hi)
    candidate = z.copy()
    candidate[j] = z[j] + t
    return value, candidate


def _local_search(A, dither, q, z, s, radius, iters):
    z = project_l2(z, radius)
    current = hamming_objective(A, dither, q, z)
    sweeps = 0
    converged = iters == 0
    for _ in range(iters):
        sweeps += 1
        improved = False
        analog = A @ z + dither

        # 1️ Refinamiento continuo dentro del soporte (y altas si sobra dispersión)
        support = list(np.flatnonzero(z))
        coords = support if len(support) >= s else range(z.size)
        for j in coords:
            _, candidate = _try_coordinate(A, analog, q, z, j, radius)
            if np.count_nonzero(candidate) > s:
                continue
            value = hamming_objective(A, dither, q, candidate)
            if value < current:
                z, current, improved = candidate, value, True
                analog = A @ z + dither

        # 2️ Intercambios de soporte: se apaga i y se busca el mejor j inactivo
        best_swap = None
        for i in np.flatnonzero(z):
            reduced = z.copy()
            reduced[i] = 0.0
            reduced_analog = analog - A[:, i] * z[i]
            for j in np.flatnonzero(reduced == 0):
                if j == i:
                    continue
                _, candidate = _try_coordinate(A, reduced_analog, q, reduced, j, radius)
                value = hamming_objective(A, dither, q, candidate)
                if value < current and (best_swap is None or value < best_swap[0]):
                    best_swap = (value, candidate)
        if best_swap is not None:
            current, z = best_swap
            improved = True

        if not improved:
            converged = True
            break
    return z, int(current), sweeps, converged


def _warm_start(A, q, s, radius, lam):
    w = (lam / A.shape[0]) * (A.T @ q)
    keep = np.argsort(-np.abs(w), kind="stable")[:s]
    z = np.zeros_like(w)
    z[keep] = w[keep]
    return project_l2(z, radius)


# ============================================================
# Función: hamming_recover_local()
# ------------------------------------------------------------
# Flujo:
#   1️ Arranque en caliente: los s mayores de (λ/m)Aᵀq, acotado a R·B₂
#      (o `warm_start` si se pasa).
#   2️ `restarts` arranques adicionales aleatorios en T.
#   3️ En cada arranque, hasta `iters` barridos de búsqueda local que
#      solo aceptan descensos estrictos del objetivo.
#   4️ Se devuelve el mejor iterado (menor objetivo; empate: primero).
# ============================================================
def hamming_recover_local(A: np.ndarray, dither: np.ndarray, q_corr: np.ndarray,
                          descriptor: SignalSetDescriptor, restarts: int = 4, iters: int = 50,
                          seed: Optional[SeedPlan] = None, trial: int = 0,
                          warm_start: Optional[np.ndarray] = None,
                          lam: Optional[float] = None) -> RecoveryResult:
    if descriptor.kind is not SetKind.SPARSE_BALL:
        raise UnsupportedDescriptorError("hamming_recover_local solo admite SparseBall.")
    if restarts < 0 or iters < 0:
        raise InvalidParameterError("restarts e iters deben ser ≥ 0.")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dither = np.asarray(dither, dtype=float)
    q = np.asarray(q_corr, dtype=float)
    if A.shape[1] != descriptor.n:
        raise DimensionMismatchError(f"La matriz tiene n={A.shape[1]} y el descriptor n={descriptor.n}.")
    s, radius = descriptor.sparsity, descriptor.radius

    if warm_start is not None:
        starts = [np.asarray(warm_start, dtype=float)]
    else:
        scale = lam if lam is not None else float(np.max(np.abs(dither))) or 1.0
        starts = [_warm_start(A, q, s, radius, scale)]
    if restarts:
        rng = (seed or SeedPlan()).generator(trial, Stream.SOLVER)
        starts.extend(sample_signals(descriptor, restarts, rng))

    best = None
    total_sweeps = 0
    all_converged = True
    for z0 in starts:
        z, value, sweeps, converged = _local_search(A, dither, q, z0, s, radius, iters)
        total_sweeps += sweeps
        all_converged &= converged
        if best is None or value < best[1]:
            best = (z, value)

    logger.debug("Búsqueda local: objetivo %d tras %d barridos", best[1], total_sweeps)
    return RecoveryResult(x_hat=best[0], objective=float(best[1]), iterations=total_sweeps,
                          restarts=int(restarts), converged=all_converged, solver="hamming_local")
