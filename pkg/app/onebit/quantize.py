# ============================================================
# app/onebit/quantize.py — Cuantizador one-bit con dither
# ============================================================
# Pipeline de medición:
#   1️ analógico = Ax + ν + τ
#   2️ q = sign(analógico), con la convención sign(0) := +1
#   3️ corrupción posterior: exactamente ⌊βm⌋ bits invertidos
# También incluye la distancia de Hamming entre patrones de signos,
# la media exacta del cuantizador y el empaquetado de bits.
# ============================================================

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from app.onebit.errors import DimensionMismatchError, InvalidParameterError
from app.onebit.types import SeedPlan, Stream

logger = logging.getLogger(__name__)


class CorruptionStrategy(str, Enum):
    RANDOM_FLIP = "random_flip"
    ADVERSARIAL_LARGEST_MARGIN = "adversarial_largest_margin"
    ADVERSARIAL_SMALLEST_MARGIN = "adversarial_smallest_margin"


@dataclass(frozen=True)
class QuantizedObservation:
    q: np.ndarray
    analog: np.ndarray
    corruption_mask: np.ndarray
    beta_actual: float = 0.0

    @property
    def m(self) -> int:
        return int(self.q.size)


def signs(values: np.ndarray) -> np.ndarray:
    """sign() elemento a elemento con sign(0) = +1, en int8."""
    return np.where(np.asarray(values) >= 0, 1, -1).astype(np.int8)


# ============================================================
# Función: one_bit_measure()
# ------------------------------------------------------------
# q = sign(Ax + ν + τ). El ruido es opcional (None ≡ 0).
# ============================================================
def one_bit_measure(A: np.ndarray, x: np.ndarray, dither: np.ndarray,
                    noise: Optional[np.ndarray] = None) -> QuantizedObservation:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = np.asarray(x, dtype=float)
    dither = np.asarray(dither, dtype=float)
    m, n = A.shape
    if x.shape != (n,):
        raise DimensionMismatchError(f"x tiene forma {x.shape}, la matriz es {m}×{n}.")
    if dither.shape != (m,):
        raise DimensionMismatchError(f"El dither tiene forma {dither.shape}, se esperaban {m} valores.")
    if noise is None:
        noise = np.zeros(m)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (m,):
        raise DimensionMismatchError(f"El ruido tiene forma {noise.shape}, se esperaban {m} valores.")

    analog = A @ x + noise + dither
    return QuantizedObservation(
        q=signs(analog),
        analog=analog,
        corruption_mask=np.zeros(m, dtype=bool),
        beta_actual=0.0,
    )


def flip_count(beta: float, m: int) -> int:
    """⌊βm⌋; el 1e−9 absorbe productos como 0.29·100 = 28.999…"""
    return int(math.floor(beta * m + 1e-9))


# ============================================================
# Función: corrupt_bits()
# ------------------------------------------------------------
# Invierte exactamente ⌊βm⌋ bits:
#   - RANDOM_FLIP:                 subconjunto uniforme (requiere seed).
#   - ADVERSARIAL_LARGEST_MARGIN:  los |analog_i| más grandes
#                                  (contradice las medidas más confiables).
#   - ADVERSARIAL_SMALLEST_MARGIN: los |analog_i| más pequeños.
# Solo se eligen bits aún no corrompidos: aplicar β dos veces acumula
# inversiones sin deshacer las anteriores. Los empates se resuelven por
# índice (orden estable).
# ============================================================
def corrupt_bits(
    obs: QuantizedObservation,
    beta: float,
    strategy: CorruptionStrategy = CorruptionStrategy.ADVERSARIAL_LARGEST_MARGIN,
    seed: Optional[SeedPlan] = None,
    trial: int = 0,
) -> QuantizedObservation:
    if not 0.0 <= beta <= 1.0:
        raise InvalidParameterError(f"beta debe estar en [0, 1] (beta={beta}).")
    strategy = CorruptionStrategy(strategy)
    m = obs.m
    k = flip_count(beta, m)
    if k == 0:
        return obs

    available = np.flatnonzero(~obs.corruption_mask)
    k = min(k, available.size)
    if strategy is CorruptionStrategy.RANDOM_FLIP:
        rng = (seed or SeedPlan()).generator(trial, Stream.CORRUPTION)
        chosen = rng.choice(available, size=k, replace=False)
    elif strategy is CorruptionStrategy.ADVERSARIAL_LARGEST_MARGIN:
        chosen = available[np.argsort(-np.abs(obs.analog[available]), kind="stable")[:k]]
    else:
        chosen = available[np.argsort(np.abs(obs.analog[available]), kind="stable")[:k]]

    flip = np.zeros(m, dtype=bool)
    flip[chosen] = True
    mask = obs.corruption_mask | flip
    q = np.where(flip, -obs.q, obs.q).astype(np.int8)
    logger.debug("Corrupción %s: %d de %d bits invertidos", strategy.value, k, m)
    return replace(obs, q=q, corruption_mask=mask, beta_actual=float(mask.sum()) / m)


def sign_pattern_distance(q1: np.ndarray, q2: np.ndarray) -> Tuple[int, float]:
    """(número de posiciones distintas, fracción) entre dos patrones de signos."""
    q1 = np.asarray(q1)
    q2 = np.asarray(q2)
    if q1.shape != q2.shape or q1.ndim != 1:
        raise DimensionMismatchError(f"Longitudes distintas: {q1.shape} vs {q2.shape}.")
    count = int(np.count_nonzero(q1 != q2))
    return count, count / q1.size if q1.size else 0.0


# ============================================================
# Media del cuantizador: 𝔼 sign(z + τ) con τ ~ U[−λ, λ]
# ------------------------------------------------------------
# Vale z/λ dentro de [−λ, λ] y ±1 fuera: clip(z/λ, −1, 1).
# ============================================================
def quantizer_mean(z, lam: float):
    if not lam > 0:
        raise InvalidParameterError(f"λ debe ser positivo (λ={lam}).")
    return np.clip(np.asarray(z, dtype=float) / lam, -1.0, 1.0)


def empirical_quantizer_mean(z: float, lam: float, n_dithers: int, seed: SeedPlan, trial: int = 0) -> float:
    """Media Monte Carlo de sign(z + τ) sobre `n_dithers` umbrales."""
    if not lam > 0:
        raise InvalidParameterError(f"λ debe ser positivo (λ={lam}).")
    tau = seed.generator(trial, Stream.DITHER).uniform(-lam, lam, size=int(n_dithers))
    return float(signs(z + tau).mean(dtype=float))


# ============================================================
# Empaquetado de patrones: cabecera de 8 bytes (m, little-endian)
# seguida de los bits con LSB = índice 0 (+1 ↦ 1, −1 ↦ 0).
# ============================================================
def pack_signs(q: np.ndarray) -> bytes:
    q = np.asarray(q)
    header = np.array([q.size], dtype="<u8").tobytes()
    return header + np.packbits(q > 0, bitorder="little").tobytes()


def unpack_signs(blob: bytes) -> np.ndarray:
    if len(blob) < 8:
        raise InvalidParameterError("Bloque de signos sin cabecera.")
    m = int(np.frombuffer(blob[:8], dtype="<u8")[0])
    payload = np.frombuffer(blob[8:], dtype=np.uint8)
    if payload.size < (m + 7) // 8:
        raise InvalidParameterError(f"Bloque truncado: {8 * payload.size} de {m} bits.")
    bits = np.unpackbits(payload, count=m, bitorder="little")
    return np.where(bits == 1, 1, -1).astype(np.int8)
