# ============================================================
# app/onebit/tessellation.py — Análisis de teselaciones por hiperplanos
# ============================================================
# Cada fila X_i de A y umbral τ_i definen el hiperplano
#   H_i = {z : ⟨X_i, z⟩ + τ_i = 0}.
# Dos puntos quedan separados por H_i si sus signos difieren.
# Este módulo cuenta separaciones, calcula conjuntos de separación con
# margen, estima la probabilidad de separación, construye cadenas
# métricas y audita la teselación sobre pares de puntos.
# ============================================================

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.onebit.errors import DimensionMismatchError, InvalidParameterError
from app.onebit.quantize import signs
from app.onebit.sampling import draw_rows, membership
from app.onebit.types import MeasurementEnsemble, SeedPlan, SetKind, SignalSetDescriptor, Stream

logger = logging.getLogger(__name__)

DEFAULT_THETAS = (0.05, 0.1, 0.2)


@dataclass(frozen=True)
class MarginSeparationSet:
    indices: Tuple[int, ...]
    theta: float

    def __len__(self) -> int:
        return len(self.indices)


def _check(A: np.ndarray, dither: np.ndarray, *points: np.ndarray):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dither = np.asarray(dither, dtype=float)
    m, n = A.shape
    if dither.shape != (m,):
        raise DimensionMismatchError(f"El dither tiene forma {dither.shape}, se esperaban {m} valores.")
    arrays = []
    for p in points:
        p = np.asarray(p, dtype=float)
        if p.shape != (n,):
            raise DimensionMismatchError(f"Punto de forma {p.shape}, la matriz es {m}×{n}.")
        arrays.append(p)
    return A, dither, arrays


# ============================================================
# Separación simple: índices i con sign(⟨X_i,x⟩+τ_i) ≠ sign(⟨X_i,y⟩+τ_i)
# ============================================================
def separation_indices(A: np.ndarray, dither: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    A, dither, (x, y) = _check(A, dither, x, y)
    return np.flatnonzero(signs(A @ x + dither) != signs(A @ y + dither))


def separation_count(A: np.ndarray, dither: np.ndarray, x: np.ndarray, y: np.ndarray) -> int:
    return int(separation_indices(A, dither, x, y).size)


# ============================================================
# Función: margin_separation_set()
# ------------------------------------------------------------
# H_i separa x e y con margen θ cuando:
#   1️ los signos de ⟨X_i,x⟩+τ_i y ⟨X_i,y⟩+τ_i difieren,
#   2️ |⟨X_i,x⟩+τ_i| ≥ θ‖x−y‖₂,
#   3️ |⟨X_i,y⟩+τ_i| ≥ θ‖x−y‖₂.
# La variante ruidosa suma ν_i solo del lado de x.
# ============================================================
def margin_separation_set(A: np.ndarray, dither: np.ndarray, x: np.ndarray, y: np.ndarray,
                          theta: float) -> MarginSeparationSet:
    A, dither, (x, y) = _check(A, dither, x, y)
    return _margin_set(A @ x + dither, A @ y + dither, float(np.linalg.norm(x - y)), theta)


def noisy_margin_separation_set(A: np.ndarray, dither: np.ndarray, noise: np.ndarray, x: np.ndarray,
                                y: np.ndarray, theta: float) -> MarginSeparationSet:
    A, dither, (x, y) = _check(A, dither, x, y)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != dither.shape:
        raise DimensionMismatchError(f"El ruido tiene forma {noise.shape}, se esperaban {dither.size} valores.")
    return _margin_set(A @ x + noise + dither, A @ y + dither, float(np.linalg.norm(x - y)), theta)


def _margin_set(ux: np.ndarray, uy: np.ndarray, dist: float, theta: float) -> MarginSeparationSet:
    if theta < 0:
        raise InvalidParameterError(f"theta debe ser ≥ 0 (theta={theta}).")
    margin = theta * dist
    ok = (signs(ux) != signs(uy)) & (np.abs(ux) >= margin) & (np.abs(uy) >= margin)
    return MarginSeparationSet(indices=tuple(int(i) for i in np.flatnonzero(ok)), theta=float(theta))


# ============================================================
# Núcleo exacto en el dither
# ------------------------------------------------------------
# Con τ ~ U[−λ, λ], ℙ(min(a,b) ≤ τ < max(a,b)) es la longitud de
# [min, max) ∩ [−λ, λ] dividida por 2λ. Para X fijo, x e y quedan
# separados exactamente cuando τ cae entre −⟨X,x⟩ y −⟨X,y⟩.
# ============================================================
def dither_interval_probability(a, b, lam: float):
    if not lam > 0:
        raise InvalidParameterError(f"λ debe ser positivo (λ={lam}).")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.clip(np.minimum(a, b), -lam, lam)
    hi = np.clip(np.maximum(a, b), -lam, lam)
    return (hi - lo) / (2.0 * lam)


def dither_small_ball(z, lam: float, eps: float):
    """ℙ(|z + τ| ≤ ε) exacto; nunca supera ε/λ."""
    if eps < 0:
        raise InvalidParameterError(f"ε debe ser ≥ 0 (ε={eps}).")
    z = np.asarray(z, dtype=float)
    return dither_interval_probability(-z - eps, -z + eps, lam)


def separation_probability(ensemble: MeasurementEnsemble, x: np.ndarray, y: np.ndarray, n_mc: int,
                           seed: SeedPlan, trial: int = 0) -> Tuple[float, float]:
    """Estimación Rao-Blackwellizada: se integra τ exactamente para cada X muestreado."""
    if n_mc < 1:
        raise InvalidParameterError(f"n_mc debe ser ≥ 1 (n_mc={n_mc}).")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (ensemble.n,) or y.shape != (ensemble.n,):
        raise DimensionMismatchError(f"x e y deben tener dimensión n={ensemble.n}.")
    X = draw_rows(ensemble, n_mc, seed.generator(trial, Stream.ESTIMATOR))
    terms = dither_interval_probability(-(X @ x), -(X @ y), ensemble.lam)
    return _mean_se(terms)


def naive_separation_probability(ensemble: MeasurementEnsemble, x: np.ndarray, y: np.ndarray, n_mc: int,
                                 seed: SeedPlan, trial: int = 0) -> Tuple[float, float]:
    """Monte Carlo de dos niveles: se muestrean X y τ y se cuentan separaciones."""
    if n_mc < 1:
        raise InvalidParameterError(f"n_mc debe ser ≥ 1 (n_mc={n_mc}).")
    rng = seed.generator(trial, Stream.PROBE)
    X = draw_rows(ensemble, n_mc, rng)
    tau = rng.uniform(-ensemble.lam, ensemble.lam, size=n_mc)
    hits = (signs(X @ np.asarray(x, dtype=float) + tau) != signs(X @ np.asarray(y, dtype=float) + tau))
    return _mean_se(hits.astype(float))


def _mean_se(terms: np.ndarray) -> Tuple[float, float]:
    if terms.size == 1:
        return float(terms[0]), 0.0
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(terms.size))


# ============================================================
# Cadenas métricas
# ------------------------------------------------------------
# Subdivisión del segmento [x, y] en k = ⌈‖x−y‖₂/r⌉ pasos iguales.
# Cada paso mide d/k ∈ [r/2, r] cuando d > r, así que γ logrado ≥ 1/2
# y la suma de pasos es exactamente ‖x−y‖₂. Para SparseBall los puntos
# intermedios viven en la bola 2s-dispersa.
# ============================================================
def metric_chain(x: np.ndarray, y: np.ndarray, r: float,
                 descriptor: Optional[SignalSetDescriptor] = None) -> List[np.ndarray]:
    if not r > 0:
        raise InvalidParameterError(f"r debe ser positivo (r={r}).")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"x e y tienen formas distintas: {x.shape} vs {y.shape}.")
    dist = float(np.linalg.norm(x - y))
    if dist <= r:
        return []
    k = math.ceil(dist / r)
    chain = [x + (j / k) * (y - x) for j in range(1, k)]

    if descriptor is not None and descriptor.kind is SetKind.SPARSE_BALL:
        superset = SignalSetDescriptor.sparse_ball(min(2 * descriptor.sparsity, descriptor.n),
                                                   descriptor.n, descriptor.radius)
        for z in chain:
            if not membership(superset, z, tol=1e-9):
                raise AssertionError("Un punto de la cadena salió de la bola 2s-dispersa.")
    return chain


def _steps(x: np.ndarray, y: np.ndarray, chain: Sequence[np.ndarray]) -> np.ndarray:
    nodes = [np.asarray(x, dtype=float), *[np.asarray(z, dtype=float) for z in chain], np.asarray(y, dtype=float)]
    return np.array([np.linalg.norm(b - a) for a, b in zip(nodes[:-1], nodes[1:])])


def chain_gamma(x: np.ndarray, y: np.ndarray, chain: Sequence[np.ndarray], r: float) -> float:
    """γ logrado = (paso mínimo)/r; una cadena vacía no impone cota inferior."""
    if not chain:
        return 1.0
    return float(_steps(x, y, chain).min() / r)


def chain_is_valid(x: np.ndarray, y: np.ndarray, chain: Sequence[np.ndarray], r: float, gamma: float,
                   tol: float = 1e-9) -> bool:
    steps = _steps(x, y, chain)
    if np.any(steps > r + tol):
        return False
    if chain and np.any(steps < gamma * r - tol):
        return False
    return bool(steps.sum() <= np.linalg.norm(np.asarray(x) - np.asarray(y)) / gamma + tol)


# ============================================================
# Función: stability_predicate()
# ------------------------------------------------------------
# Si H = {⟨X,·⟩ + τ = 0} separa v y w con margen θ y los puntos x, y
# están cerca de v, w en la dirección X (|⟨X,x−v⟩| ≤ θr′/3 y
# |⟨X,y−w⟩| ≤ θr′/3), entonces H también separa x e y.
# Devuelve si las hipótesis se cumplen y verifica la conclusión.
# ============================================================
def stability_predicate(X: np.ndarray, tau: float, v: np.ndarray, w: np.ndarray, x: np.ndarray,
                        y: np.ndarray, theta: float, r_prime: float) -> bool:
    X, v, w, x, y = (np.asarray(a, dtype=float) for a in (X, v, w, x, y))
    dist_vw = float(np.linalg.norm(w - v))
    if dist_vw < r_prime:
        raise InvalidParameterError(f"Se requiere ‖w−v‖₂ ≥ r′ ({dist_vw:.4g} < {r_prime:.4g}).")
    uv = float(X @ v + tau)
    uw = float(X @ w + tau)
    margin = theta * dist_vw
    well_separated = (uv >= 0) != (uw >= 0) and abs(uv) >= margin and abs(uw) >= margin
    slack = theta * r_prime / 3.0
    close = abs(float(X @ (x - v))) <= slack and abs(float(X @ (y - w))) <= slack
    if not (well_separated and close):
        return False
    if (X @ x + tau >= 0) == (X @ y + tau >= 0):
        raise AssertionError("Hipótesis de estabilidad cumplidas pero x e y no quedaron separados.")
    return True


# ============================================================
# Auditoría de la teselación
# ============================================================
@dataclass(frozen=True)
class PairRecord:
    pair_id: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    distance: float
    hamming_fraction: float
    margin_counts: Tuple[int, ...]


@dataclass
class TessellationReport:
    pairs: List[PairRecord]
    thetas: Tuple[float, ...]
    rho: float
    lam: Optional[float]
    ratio_min: Optional[float] = None
    ratio_max: Optional[float] = None
    rank_correlation: Optional[float] = None

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["pair_id", "distance", "hamming_fraction",
                         *[f"margin_count_theta_{t:g}" for t in self.thetas]])
        for p in self.pairs:
            writer.writerow([p.pair_id, f"{p.distance:.12g}", f"{p.hamming_fraction:.12g}", *p.margin_counts])
        writer.writerow(["summary", f"ratio_min={_fmt(self.ratio_min)}", f"ratio_max={_fmt(self.ratio_max)}",
                         f"rank_correlation={_fmt(self.rank_correlation)}", f"rho={self.rho:g}"])
        return buffer.getvalue()


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6g}"


def estimate_dither_amplitude(dither: np.ndarray) -> float:
    """Estimador insesgado de λ para τ ~ U[−λ, λ]: (m+1)/m · max|τᵢ|."""
    dither = np.asarray(dither, dtype=float)
    if dither.size == 0:
        return 0.0
    return float(np.max(np.abs(dither))) * (dither.size + 1) / dither.size


# ============================================================
# Función: tessellation_audit()
# ------------------------------------------------------------
# Flujo:
#   1️ Por cada par: distancia, fracción de Hamming y conteos con margen
#      para cada θ.
#   2️ Cociente d(x,y)/(‖x−y‖₂/λ) solo sobre pares con ‖x−y‖₂ ≥ ρ
#      (sin cociente si no hay dither, λ = 0). Sin λ explícito se estima
#      desde los umbrales y se emite un WARNING.
#   3️ Correlación de rangos (Spearman) entre d y la distancia.
# ============================================================
def tessellation_audit(A: np.ndarray, dither: np.ndarray, pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
                       rho: float, theta_list: Sequence[float] = DEFAULT_THETAS,
                       lam: Optional[float] = None) -> TessellationReport:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dither = np.asarray(dither, dtype=float)
    m = A.shape[0]
    if lam is None:
        lam = estimate_dither_amplitude(dither)
        logger.warning("Auditoría sin λ explícito: se estima λ = %.6g a partir de %d umbrales", lam, dither.size)

    records: List[PairRecord] = []
    for pid, (x, y) in enumerate(pairs):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        count = separation_count(A, dither, x, y)
        margins = tuple(len(margin_separation_set(A, dither, x, y, t)) for t in theta_list)
        records.append(PairRecord(pid, x, y, float(np.linalg.norm(x - y)), count / m, margins))

    report = TessellationReport(pairs=records, thetas=tuple(float(t) for t in theta_list), rho=float(rho),
                                lam=lam if lam > 0 else None)
    far = [p for p in records if p.distance >= rho and p.distance > 0]
    if far and lam > 0:
        ratios = [p.hamming_fraction * lam / p.distance for p in far]
        report.ratio_min, report.ratio_max = float(min(ratios)), float(max(ratios))

    distances = np.array([p.distance for p in records])
    fractions = np.array([p.hamming_fraction for p in records])
    if len(records) >= 3 and np.ptp(distances) > 0 and np.ptp(fractions) > 0:
        correlation, _ = stats.spearmanr(distances, fractions)
        report.rank_correlation = float(correlation)
    logger.info("Auditoría: %d pares, %d con distancia ≥ ρ", len(records), len(far))
    return report


def bernoulli_hyperplanes(n: int) -> np.ndarray:
    """Las 2ⁿ normales de Bernoulli (±1)ⁿ, en orden lexicográfico."""
    if n < 1:
        raise InvalidParameterError(f"n debe ser ≥ 1 (n={n}).")
    return np.array(list(itertools.product((-1.0, 1.0), repeat=int(n))))
