# ============================================================
# app/onebit/complexity.py — Medidas de complejidad geométrica y
# calculadoras de tamaño de muestra
# ============================================================
# Contenido:
#   - support_function():       h_T(g) = sup_{x∈T} ⟨g, x⟩ exacta.
#   - gaussian_mean_width():    ℓ_*(T) por Monte Carlo.
#   - empirical_width():        E(T) con el vector (1/√m) Σ ε_i X_i.
#   - covering_bound():         cotas superiores de log N(T, r).
#   - sufficient_m():           m suficiente para cada resultado.
#   - admissible_levels():      niveles de ruido / corrupción tolerados.
#
# Las constantes c₀..c₅ valen 1 por defecto: los resultados son guías
# de escala, no garantías numéricas.
# ============================================================

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, Optional

import numpy as np
from scipy import optimize

from app.onebit.errors import DimensionMismatchError, InvalidParameterError
from app.onebit.sampling import draw_rows, sample_noise
from app.onebit.types import (
    MeasurementEnsemble,
    NoiseModel,
    SeedPlan,
    SetKind,
    SignalSetDescriptor,
    Stream,
)

logger = logging.getLogger(__name__)

REFINE_XATOL = 1e-10
ROW_CHUNK = 8192
MAX_DOUBLING_M = 2**30


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    standard_error: float
    n_mc: int


@dataclass(frozen=True)
class TheoremConstants:
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    c5: float = 1.0
    kappa: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        for name in ("c0", "c1", "c2", "c3", "c4", "c5", "kappa", "delta"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"La constante {name} debe ser positiva.")

    @staticmethod
    def c_tau(lam: float) -> float:
        """Constante inferior de pequeña bola del dither: 1/(2λ)."""
        return 1.0 / (2.0 * lam)

    @staticmethod
    def C_tau(lam: float) -> float:
        """Constante superior de pequeña bola del dither: 1/λ."""
        return 1.0 / lam


DEFAULT_CONSTANTS = TheoremConstants()


# ============================================================
# Función: support_function()
# ------------------------------------------------------------
#   - SparseBall:  R·√(suma de los s mayores g_i²).
#   - L1L2Ball:    R·min_{t ≥ 0} (√s·t + ‖S_t(g)‖₂), con S_t el umbral
#                  suave. f es convexa en t: se evalúa en los puntos
#                  de quiebre {|g_i|} ∪ {0} y se refina en el intervalo
#                  que rodea al mejor.
#   - FiniteSet:   máximo sobre los puntos.
# ============================================================
def support_function(descriptor: SignalSetDescriptor, g: np.ndarray) -> float:
    g = np.asarray(g, dtype=float)
    if g.shape != (descriptor.n,):
        raise DimensionMismatchError(f"g tiene forma {g.shape}, se esperaba ({descriptor.n},).")
    if descriptor.kind is SetKind.FINITE_SET:
        return float(np.max(descriptor.points_array @ g))
    if descriptor.kind is SetKind.SPARSE_BALL:
        top = np.sort(g * g)[::-1][: descriptor.sparsity]
        return descriptor.radius * math.sqrt(float(top.sum()))
    return descriptor.radius * _l1l2_inf_convolution(np.abs(g), math.sqrt(descriptor.s))


def _l1l2_inf_convolution(a: np.ndarray, sqrt_s: float) -> float:
    desc = np.sort(a)[::-1]
    n = desc.size
    p1 = np.concatenate(([0.0], np.cumsum(desc)))
    p2 = np.concatenate(([0.0], np.cumsum(desc * desc)))

    # Quiebres t_k = desc[k] (k = 0..n−1) y t = 0 (k = n); por encima de
    # t_k solo contribuyen los k primeros elementos.
    ts = np.concatenate((desc, [0.0]))
    ks = np.arange(n + 1)
    tail = np.maximum(p2[ks] - 2.0 * ts * p1[ks] + ks * ts * ts, 0.0)
    values = sqrt_s * ts + np.sqrt(tail)
    best = int(np.argmin(values))
    best_value = float(values[best])

    lo = ts[min(best + 1, n)]
    hi = ts[max(best - 1, 0)]
    if hi > lo:
        def f(t: float) -> float:
            return sqrt_s * t + float(np.linalg.norm(np.maximum(a - t, 0.0)))

        refined = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                           options={"xatol": REFINE_XATOL})
        best_value = min(best_value, float(refined.fun))
    return best_value


def sparse_maximizer(descriptor: SignalSetDescriptor, g: np.ndarray) -> np.ndarray:
    """Punto de R·Σ_{s,n} que alcanza h(g): los s mayores |g_i| normalizados."""
    if descriptor.kind is not SetKind.SPARSE_BALL:
        raise InvalidParameterError("sparse_maximizer solo aplica a SparseBall.")
    g = np.asarray(g, dtype=float)
    if g.shape != (descriptor.n,):
        raise DimensionMismatchError(f"g tiene forma {g.shape}, se esperaba ({descriptor.n},).")
    support = np.argsort(-np.abs(g), kind="stable")[: descriptor.sparsity]
    x = np.zeros_like(g)
    norm = np.linalg.norm(g[support])
    if norm > 0:
        x[support] = descriptor.radius * g[support] / norm
    return x


# ============================================================
# Anchos gaussiano y empírico
# ============================================================
def _symmetric_support(descriptor: SignalSetDescriptor, g: np.ndarray) -> float:
    return max(support_function(descriptor, g), support_function(descriptor, -g))


def _estimate(values: np.ndarray) -> WidthEstimate:
    return WidthEstimate(
        value=max(float(values.mean()), 0.0),
        standard_error=float(values.std(ddof=1) / math.sqrt(values.size)),
        n_mc=int(values.size),
    )


def gaussian_mean_width(descriptor: SignalSetDescriptor, n_mc: int, seed: SeedPlan, trial: int = 0) -> WidthEstimate:
    """ℓ_*(T) = 𝔼 sup_{x∈T} |⟨G, x⟩| por Monte Carlo."""
    if n_mc < 2:
        raise InvalidParameterError(f"n_mc debe ser ≥ 2 (n_mc={n_mc}).")
    rng = seed.generator(trial, Stream.ESTIMATOR)
    draws = rng.standard_normal((int(n_mc), descriptor.n))
    return _estimate(np.array([_symmetric_support(descriptor, g) for g in draws]))


def empirical_width(descriptor: SignalSetDescriptor, ensemble: MeasurementEnsemble, n_mc: int,
                    seed: SeedPlan, trial: int = 0) -> WidthEstimate:
    """E(T): soporte en ±(1/√m) Σ ε_i X_i con signos ε_i independientes."""
    if n_mc < 2:
        raise InvalidParameterError(f"n_mc debe ser ≥ 2 (n_mc={n_mc}).")
    if descriptor.n != ensemble.n:
        raise DimensionMismatchError(f"El descriptor tiene n={descriptor.n} y el ensamble n={ensemble.n}.")
    rng = seed.generator(trial, Stream.ESTIMATOR)
    values = np.empty(int(n_mc))
    for k in range(int(n_mc)):
        total = np.zeros(ensemble.n)
        remaining = ensemble.m
        while remaining > 0:
            chunk = min(remaining, ROW_CHUNK)
            rows = draw_rows(ensemble, chunk, rng)
            eps = 2.0 * rng.integers(0, 2, size=chunk) - 1.0
            total += eps @ rows
            remaining -= chunk
        values[k] = _symmetric_support(descriptor, total / math.sqrt(ensemble.m))
    return _estimate(values)


@lru_cache(maxsize=128)
def _cached_width(descriptor: SignalSetDescriptor, n_mc: int, master_seed: int) -> float:
    return gaussian_mean_width(descriptor, n_mc, SeedPlan(master_seed)).value


# ============================================================
# Función: covering_bound()
# ------------------------------------------------------------
# Cota superior de log N(T, r):
#   - SparseBall:  c·s·log(en / (s·min(r/R, 1))).
#   - FiniteSet:   log k (los propios puntos cubren T).
#   - resto, o conv(T) si convexify:  c·ℓ_*²(T)/r² (Sudakov).
# ============================================================
def covering_bound(descriptor: SignalSetDescriptor, r: float, constants: TheoremConstants = DEFAULT_CONSTANTS,
                   convexify: bool = False, n_mc: int = 200, seed: int = 0) -> float:
    if not r > 0:
        raise InvalidParameterError(f"r debe ser positivo (r={r}).")
    c = constants.c5
    if not convexify and descriptor.kind is SetKind.SPARSE_BALL:
        s, n = descriptor.sparsity, descriptor.n
        scale = min(r / descriptor.radius, 1.0)
        return c * s * math.log(math.e * n / (s * scale))
    if not convexify and descriptor.kind is SetKind.FINITE_SET:
        return math.log(len(descriptor.points))
    width = _cached_width(descriptor.convex_hull(), int(n_mc), int(seed))
    return c * width * width / (r * r)


# ============================================================
# Función: local_descriptor()
# ------------------------------------------------------------
# Descriptor que contiene a T_r = (T − T) ∩ rB₂ (o a U_r con
# U = conv(T) si convexify):
#   - SparseBall(s):  r'·Σ_{2s,n}, o su envolvente L1L2Ball(2s) con r' = min(r, 2R).
#   - L1L2Ball(s):    T − T ⊂ 2R(√s B₁ ∩ B₂); al cortar con r'B₂ queda
#                     L1L2Ball(s', r') con s' = 4R²s/r'² (acotado a [1, n]).
#   - FiniteSet:      diferencias de norma ≤ r; con convexify todas las
#                     diferencias (su ancho acota el de U − U).
# ============================================================
def local_descriptor(descriptor: SignalSetDescriptor, r: float, convexify: bool = False) -> SignalSetDescriptor:
    if not r > 0:
        raise InvalidParameterError(f"r debe ser positivo (r={r}).")
    n, R = descriptor.n, descriptor.radius
    radius = min(r, 2.0 * R)
    if descriptor.kind is SetKind.SPARSE_BALL:
        s2 = min(2 * descriptor.sparsity, n)
        if convexify:
            return SignalSetDescriptor.l1l2_ball(s2, n, radius)
        return SignalSetDescriptor.sparse_ball(s2, n, radius)
    if descriptor.kind is SetKind.L1L2_BALL:
        s_eff = min(float(n), max(1.0, 4.0 * R * R * descriptor.s / (radius * radius)))
        return SignalSetDescriptor.l1l2_ball(s_eff, n, radius)

    pts = descriptor.points_array
    diffs = (pts[:, None, :] - pts[None, :, :]).reshape(-1, n)
    if not convexify:
        diffs = diffs[np.linalg.norm(diffs, axis=1) <= r + 1e-12]
    diffs = np.unique(np.round(diffs, 12), axis=0)
    return SignalSetDescriptor.finite_set(diffs)


# ============================================================
# Calculadoras de tamaño de muestra
# ============================================================
class Theorem(str, Enum):
    TESS_SUBGAUSSIAN = "tess_subgaussian"
    TESS_HEAVY = "tess_heavy"
    RECOVER_SUBGAUSSIAN = "recover_subgaussian"
    RECOVER_HEAVY = "recover_heavy"
    CONVEX = "convex"


@dataclass(frozen=True)
class TheoremParams:
    R: float
    rho: float
    lam: Optional[float] = None
    sigma: float = 0.0
    mu: float = 0.0
    beta: float = 0.0
    descriptor: Optional[SignalSetDescriptor] = None
    ensemble: Optional[MeasurementEnsemble] = None
    width: Optional[float] = None
    local_width: Optional[float] = None
    empirical_width: Optional[float] = None
    log_covering: Optional[float] = None
    n_mc: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (self.R > 0 and self.rho > 0):
            raise InvalidParameterError(f"R y ρ deben ser positivos (R={self.R}, ρ={self.rho}).")
        if self.lam is not None and not self.lam > 0:
            raise InvalidParameterError(f"λ debe ser positivo (λ={self.lam}).")
        if self.sigma < 0 or not 0 <= self.beta <= 1:
            raise InvalidParameterError("Se requiere σ ≥ 0 y β ∈ [0, 1].")


@dataclass(frozen=True)
class SampleSizeResult:
    m: int
    r: Optional[float]
    lam: Optional[float]
    terms: Dict[str, float] = field(default_factory=dict)


def _ceil(value: float) -> int:
    return max(1, math.ceil(value - 1e-9))


def _require(params: TheoremParams, name: str):
    if getattr(params, name) is None and params.descriptor is None:
        raise InvalidParameterError(f"Falta '{name}' y no hay descriptor para estimarlo.")


def _width_of(descriptor: SignalSetDescriptor, params: TheoremParams) -> float:
    return _cached_width(descriptor, int(params.n_mc), int(params.seed))


def _resolve_lam(theorem: "Theorem", params: TheoremParams, constants: TheoremConstants) -> float:
    if params.lam is not None:
        return float(params.lam)
    return float(admissible_levels(theorem, params, constants)["lam_min"])


# ============================================================
# Función: sufficient_m()
# ------------------------------------------------------------
#   TESS_SUBGAUSSIAN:     c₁ R log(eR/ρ)/ρ³ · ℓ_*²(T)                (ρ < R)
#   TESS_HEAVY:           r = c₁ρ²/R;  c₂((R E(U_r)/ρ²)² + R log N(U,r)/ρ)
#   RECOVER_SUBGAUSSIAN:  r = c₁ρ/√log(eλ/ρ);  c₂λ(ℓ_*²(T_r)/ρ³ + log N(T,r)/ρ)
#   RECOVER_HEAVY:        r = c₁ρ²/λ;  c₂((λ E(T_r)/ρ²)² + λ log N(T,r)/ρ)
#   CONVEX:               r = c₁ρ/log(eλ/ρ);  c₂((λ ℓ_*(U_ρ)/ρ²)² + λ² log N(T,r)/ρ²)
# Cuando E(·) no se suministra depende de m: se resuelve m ≥ f(E(m))
# duplicando m y luego bisecando.
# ============================================================
def sufficient_m(theorem: Theorem, params: TheoremParams,
                 constants: TheoremConstants = DEFAULT_CONSTANTS) -> SampleSizeResult:
    theorem = Theorem(theorem)
    c1, c2 = constants.c1, constants.c2
    R, rho = float(params.R), float(params.rho)

    if theorem is Theorem.TESS_SUBGAUSSIAN:
        if rho >= R:
            raise InvalidParameterError(f"Se requiere 0 < ρ < R (ρ={rho}, R={R}).")
        _require(params, "width")
        width = params.width if params.width is not None else _width_of(params.descriptor, params)
        value = c1 * R * math.log(math.e * R / rho) / rho**3 * width**2
        return SampleSizeResult(_ceil(value), None, None, {"width": width, "value": value})

    if theorem is Theorem.TESS_HEAVY:
        if rho >= R:
            raise InvalidParameterError(f"Se requiere 0 < ρ < R (ρ={rho}, R={R}).")
        r = c1 * rho**2 / R
        log_n = _log_covering(params, r, constants, convexify=True)

        def required(E: float) -> float:
            return c2 * ((R * E / rho**2) ** 2 + R * log_n / rho)

        return _solve(required, params, r, None, log_n, convexify=True, scale=R)

    lam = _resolve_lam(theorem, params, constants)
    if lam <= rho / math.e:
        raise InvalidParameterError(f"λ debe superar ρ/e (λ={lam}, ρ={rho}).")

    if theorem is Theorem.RECOVER_SUBGAUSSIAN:
        r = c1 * rho / math.sqrt(math.log(math.e * lam / rho))
        log_n = _log_covering(params, r, constants)
        if params.local_width is not None:
            width = params.local_width
        else:
            _require(params, "local_width")
            width = _width_of(local_descriptor(params.descriptor, r), params)
        value = c2 * lam * (width**2 / rho**3 + log_n / rho)
        return SampleSizeResult(_ceil(value), r, lam, {"local_width": width, "log_covering": log_n, "value": value})

    if theorem is Theorem.RECOVER_HEAVY:
        r = c1 * rho**2 / lam
        log_n = _log_covering(params, r, constants)

        def required(E: float) -> float:
            return c2 * ((lam * E / rho**2) ** 2 + lam * log_n / rho)

        return _solve(required, params, r, lam, log_n, convexify=False, scale=lam)

    r = c1 * rho / math.log(math.e * lam / rho)
    log_n = _log_covering(params, r, constants)
    if params.local_width is not None:
        width = params.local_width
    else:
        _require(params, "local_width")
        width = _width_of(local_descriptor(params.descriptor, rho, convexify=True), params)
    value = c2 * ((lam * width / rho**2) ** 2 + lam**2 * log_n / rho**2)
    return SampleSizeResult(_ceil(value), r, lam, {"local_width": width, "log_covering": log_n, "value": value})


def _log_covering(params: TheoremParams, r: float, constants: TheoremConstants, convexify: bool = False) -> float:
    if params.log_covering is not None:
        return float(params.log_covering)
    _require(params, "log_covering")
    return covering_bound(params.descriptor, r, constants, convexify=convexify,
                          n_mc=params.n_mc, seed=params.seed)


def _solve(required, params: TheoremParams, r: float, lam: Optional[float], log_n: float,
           convexify: bool, scale: float) -> SampleSizeResult:
    if params.empirical_width is not None:
        E = float(params.empirical_width)
        value = required(E)
        return SampleSizeResult(_ceil(value), r, lam, {"empirical_width": E, "log_covering": log_n, "value": value})

    if params.descriptor is None or params.ensemble is None:
        raise InvalidParameterError("Sin 'empirical_width' se necesitan descriptor y ensamble para estimar E.")
    local = local_descriptor(params.descriptor, r, convexify=convexify)
    base = params.ensemble
    seed = SeedPlan(params.seed)
    cache: Dict[int, float] = {}

    def width_at(m: int) -> float:
        if m not in cache:
            ensemble = MeasurementEnsemble(base.row_law, base.n, m, base.lam, base.df, base.alpha, base.L)
            cache[m] = empirical_width(local, ensemble, max(2, params.n_mc), seed).value
        return cache[m]

    def feasible(m: int) -> bool:
        return required(width_at(m)) <= m

    # 1️ Duplicación hasta encontrar un m factible
    hi = 1
    while not feasible(hi):
        hi *= 2
        if hi > MAX_DOUBLING_M:
            raise InvalidParameterError(f"No se encontró m ≤ {MAX_DOUBLING_M} que cumpla la condición.")
    # 2️ Bisección en (hi/2, hi]
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    E = width_at(hi)
    logger.info("m suficiente por duplicación: m=%d (E=%.4g)", hi, E)
    return SampleSizeResult(hi, r, lam, {"empirical_width": E, "log_covering": log_n, "value": required(E)})


# ============================================================
# Función: admissible_levels()
# ------------------------------------------------------------
# Condiciones de ruido y corrupción de los resultados de recuperación:
#   - λ mínimo:  c₀(R + ‖ν‖_{L²}) + ρ  (Hamming),  c₀(σ + R)√log(c₀/ρ) (convexo),
#                c₀R (teselaciones).
#   - |𝔼ν| ≤ c₃ρ;  σ ≤ c₃ρ/√log(eλ/ρ) (subgaussiano) o c₃ρ^{3/2}/√λ (colas pesadas).
#   - β ≤ c₃ρ/λ; para el programa convexo β resuelve β√log(e/β) = c₃ρ/λ.
# ============================================================
def admissible_levels(theorem: Theorem, params: TheoremParams,
                      constants: TheoremConstants = DEFAULT_CONSTANTS) -> Dict[str, Optional[float]]:
    theorem = Theorem(theorem)
    c0, c3 = constants.c0, constants.c3
    R, rho = float(params.R), float(params.rho)
    noise_l2 = math.hypot(params.sigma, params.mu)

    if theorem in (Theorem.TESS_SUBGAUSSIAN, Theorem.TESS_HEAVY):
        return {"lam_min": c0 * R, "bias_max": None, "sigma_max": None, "beta_max": None}

    if theorem is Theorem.CONVEX:
        # log(c₀/ρ) se acota por abajo en 1 para que λ mínimo sea positivo con ρ ≥ c₀/e.
        lam_min = c0 * (params.sigma + R) * math.sqrt(max(math.log(c0 / rho), 1.0))
        lam = float(params.lam) if params.lam is not None else lam_min
        return {"lam_min": lam_min, "bias_max": 0.0, "sigma_max": None,
                "beta_max": _convex_beta(c3 * rho / lam)}

    lam_min = c0 * (R + noise_l2) + rho
    lam = float(params.lam) if params.lam is not None else lam_min
    if theorem is Theorem.RECOVER_SUBGAUSSIAN:
        sigma_max = c3 * rho / math.sqrt(math.log(math.e * lam / rho))
    else:
        sigma_max = c3 * rho**1.5 / math.sqrt(lam)
    return {"lam_min": lam_min, "bias_max": c3 * rho, "sigma_max": sigma_max, "beta_max": c3 * rho / lam}


def _convex_beta(target: float) -> float:
    """β ∈ (0, 1] con β√log(e/β) = target; la función es creciente y vale 1 en β = 1."""
    if target >= 1.0:
        return 1.0

    def gap(beta: float) -> float:
        return beta * math.sqrt(math.log(math.e / beta)) - target

    return float(optimize.brentq(gap, 1e-300, 1.0, xtol=1e-14))


def sparse_sample_size(s: int, n: int, rho: float, constants: TheoremConstants = DEFAULT_CONSTANTS) -> int:
    """⌈c₂ ρ⁻¹ s log(en/(sρ))⌉, escala del programa de Hamming para vectores s-dispersos."""
    if not (1 <= s <= n) or not rho > 0:
        raise InvalidParameterError(f"Se requiere 1 ≤ s ≤ n y ρ > 0 (s={s}, n={n}, ρ={rho}).")
    return _ceil(constants.c2 * s * math.log(math.e * n / (s * rho)) / rho)


@dataclass(frozen=True)
class NormEquivalence:
    l1: float
    l2: float
    L: float


def estimate_norm_equivalence(ensemble: MeasurementEnsemble, direction: np.ndarray,
                              noise: Optional[NoiseModel] = None, n_mc: int = 100_000,
                              seed: SeedPlan = SeedPlan(), trial: int = 0) -> NormEquivalence:
    """Estima ‖Z‖_{L¹}, ‖Z‖_{L²} y L = ‖Z‖_{L²}/‖Z‖_{L¹} para Z = ⟨X, u⟩ + ν."""
    u = np.asarray(direction, dtype=float)
    if u.shape != (ensemble.n,):
        raise DimensionMismatchError(f"La dirección tiene forma {u.shape}, se esperaba ({ensemble.n},).")
    if n_mc < 2:
        raise InvalidParameterError(f"n_mc debe ser ≥ 2 (n_mc={n_mc}).")
    rng = seed.generator(trial, Stream.ESTIMATOR)
    z = np.empty(int(n_mc))
    done = 0
    while done < n_mc:
        chunk = min(int(n_mc) - done, ROW_CHUNK)
        z[done:done + chunk] = draw_rows(ensemble, chunk, rng) @ u
        done += chunk
    if noise is not None:
        z += sample_noise(noise, int(n_mc), seed, trial)
    l1 = float(np.abs(z).mean())
    l2 = float(math.sqrt(np.mean(z * z)))
    return NormEquivalence(l1=l1, l2=l2, L=l2 / l1 if l1 > 0 else math.inf)
