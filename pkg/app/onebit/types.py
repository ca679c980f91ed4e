# ============================================================
# app/onebit/types.py — Tipos del dominio: conjuntos de señales,
# ensambles de medición, modelos de ruido y plan de semillas
# ============================================================
# Estas clases son inmutables (dataclasses congeladas) y validan sus
# invariantes al construirse. Los muestreadores de sampling.py son
# funciones puras de (tipo, SeedPlan, índice de ensayo).
# ============================================================

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Sequence, Tuple

import numpy as np

from app.onebit.errors import InvalidEnsembleError, InvalidParameterError


class SetKind(str, Enum):
    SPARSE_BALL = "sparse_ball"
    L1L2_BALL = "l1l2_ball"
    FINITE_SET = "finite_set"


class RowLaw(str, Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    STUDENT_T = "student_t"
    COORD_HEAVY = "coord_heavy"


class NoiseLaw(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    CONSTANT_BIAS = "constant_bias"


# ============================================================
# Clase: SignalSetDescriptor
# ------------------------------------------------------------
# Descripción simbólica del conjunto de señales T ⊂ R·B₂ⁿ:
#   - SPARSE_BALL(s, n): R·Σ_{s,n}, vectores s-dispersos de norma ≤ R.
#   - L1L2_BALL(s, n):   R·(√s B₁ⁿ ∩ B₂ⁿ); s puede ser real (dispersión efectiva).
#   - FINITE_SET:        lista explícita de puntos de norma ≤ R.
# ============================================================
@dataclass(frozen=True)
class SignalSetDescriptor:
    kind: SetKind
    n: int
    s: float = 1
    radius: float = 1.0
    points: Tuple[Tuple[float, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"La dimensión n debe ser ≥ 1 (n={self.n}).")
        if not self.radius > 0:
            raise InvalidParameterError(f"El radio R debe ser positivo (R={self.radius}).")
        if self.kind is SetKind.FINITE_SET:
            if not self.points:
                raise InvalidParameterError("Un FiniteSet necesita al menos un punto.")
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != self.n:
                raise InvalidParameterError(f"Los puntos deben tener dimensión n={self.n}.")
            if np.max(np.linalg.norm(pts, axis=1)) > self.radius * (1 + 1e-12):
                raise InvalidParameterError("Hay puntos del FiniteSet fuera de la bola de radio R.")
            return
        if not 1 <= self.s <= self.n:
            raise InvalidParameterError(f"Se requiere 1 ≤ s ≤ n (s={self.s}, n={self.n}).")
        if self.kind is SetKind.SPARSE_BALL and int(self.s) != self.s:
            raise InvalidParameterError(f"La dispersión de un SparseBall debe ser entera (s={self.s}).")

    # --- Constructores ------------------------------------------------
    @classmethod
    def sparse_ball(cls, s: int, n: int, radius: float = 1.0) -> "SignalSetDescriptor":
        return cls(SetKind.SPARSE_BALL, n=int(n), s=int(s), radius=float(radius))

    @classmethod
    def l1l2_ball(cls, s: float, n: int, radius: float = 1.0) -> "SignalSetDescriptor":
        return cls(SetKind.L1L2_BALL, n=int(n), s=float(s), radius=float(radius))

    @classmethod
    def finite_set(cls, points: Sequence[Sequence[float]], radius: Optional[float] = None) -> "SignalSetDescriptor":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if radius is None:
            top = float(np.max(np.linalg.norm(pts, axis=1)))
            radius = top if top > 0 else 1.0
        return cls(
            SetKind.FINITE_SET,
            n=int(pts.shape[1]),
            radius=float(radius),
            points=tuple(tuple(float(v) for v in row) for row in pts),
        )

    # --- Propiedades ---------------------------------------------------
    @property
    def sparsity(self) -> int:
        return int(self.s)

    @property
    def l1_radius(self) -> float:
        """Radio ℓ1 de R·(√s B₁ ∩ B₂)."""
        return self.radius * math.sqrt(self.s)

    @property
    def points_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    @property
    def is_convex(self) -> bool:
        return self.kind is SetKind.L1L2_BALL

    def convex_hull(self) -> "SignalSetDescriptor":
        """conv(T): para R·Σ_{s,n} se usa R·(√s B₁ ∩ B₂); un FiniteSet se devuelve tal cual."""
        if self.kind is SetKind.SPARSE_BALL:
            return SignalSetDescriptor.l1l2_ball(self.s, self.n, self.radius)
        return self

    def describe(self) -> str:
        if self.kind is SetKind.FINITE_SET:
            return f"finite_set(k={len(self.points)},n={self.n},R={self.radius:g})"
        return f"{self.kind.value}(s={self.s:g},n={self.n},R={self.radius:g})"


# ============================================================
# Clase: MeasurementEnsemble
# ------------------------------------------------------------
# Ley de las filas X_i (coordenadas i.i.d., simétricas y de varianza
# unitaria tras el reescalado interno), dimensiones (m, n), amplitud
# del dither λ y la constante de equivalencia de normas L (metadato).
# ============================================================
@dataclass(frozen=True)
class MeasurementEnsemble:
    row_law: RowLaw
    n: int
    m: int
    lam: float
    df: Optional[float] = None
    alpha: Optional[float] = None
    L: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvalidEnsembleError(f"Se requiere m ≥ 1 y n ≥ 1 (m={self.m}, n={self.n}).")
        if not self.lam > 0:
            raise InvalidEnsembleError(f"La amplitud del dither λ debe ser positiva (λ={self.lam}).")
        if self.row_law is RowLaw.STUDENT_T and (self.df is None or self.df <= 2):
            raise InvalidEnsembleError(
                f"Student-t requiere df > 2 para tener varianza finita (df={self.df})."
            )
        if self.row_law is RowLaw.COORD_HEAVY and (self.alpha is None or self.alpha <= 0):
            raise InvalidEnsembleError(f"CoordHeavy requiere alpha > 0 (alpha={self.alpha}).")

    def describe(self) -> str:
        if self.row_law is RowLaw.STUDENT_T:
            return f"student_t(df={self.df:g})"
        if self.row_law is RowLaw.COORD_HEAVY:
            return f"coord_heavy(alpha={self.alpha:g})"
        return self.row_law.value


# ============================================================
# Clase: NoiseModel — ruido analógico previo a la cuantización
# ============================================================
@dataclass(frozen=True)
class NoiseModel:
    law: NoiseLaw = NoiseLaw.NONE
    sigma: float = 0.0
    df: Optional[float] = None
    mu: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidParameterError(f"sigma debe ser ≥ 0 (sigma={self.sigma}).")
        if self.law is NoiseLaw.STUDENT_T and (self.df is None or self.df <= 2):
            raise InvalidParameterError(f"Ruido Student-t requiere df > 2 (df={self.df}).")

    @property
    def std(self) -> float:
        return self.sigma if self.law in (NoiseLaw.GAUSSIAN, NoiseLaw.STUDENT_T) else 0.0

    @property
    def bias(self) -> float:
        """Componente adversarial |𝔼ν|."""
        return abs(self.mu) if self.law is NoiseLaw.CONSTANT_BIAS else 0.0

    @property
    def l2_norm(self) -> float:
        """‖ν‖_{L²} = √(σ² + (𝔼ν)²)."""
        return math.hypot(self.std, self.bias)

    def describe(self) -> str:
        if self.law is NoiseLaw.CONSTANT_BIAS:
            return f"bias(mu={self.mu:g})"
        if self.law is NoiseLaw.NONE:
            return "none"
        return f"{self.law.value}(sigma={self.sigma:g})"


# ============================================================
# Plan de semillas — derivación por contador
# ------------------------------------------------------------
# Cada (semilla maestra, ensayo, flujo) produce un generador
# independiente vía SeedSequence.spawn_key: los ensayos se pueden
# ejecutar en cualquier orden y en paralelo con resultados idénticos.
# ============================================================
class Stream(IntEnum):
    MATRIX = 0
    DITHER = 1
    NOISE = 2
    SIGNAL = 3
    CORRUPTION = 4
    SOLVER = 5
    ESTIMATOR = 6
    PROBE = 7


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidParameterError(f"La semilla maestra debe caber en 64 bits ({self.master_seed}).")

    def sequence(self, trial: int, stream: Stream) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=(int(trial), int(stream)))

    def generator(self, trial: int, stream: Stream) -> np.random.Generator:
        return np.random.default_rng(self.sequence(trial, stream))

    def child_seed(self, trial: int) -> int:
        """Identificador reproducible del ensayo (se escribe en el CSV)."""
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(trial),))
        return int(seq.generate_state(1, dtype=np.uint64)[0])
