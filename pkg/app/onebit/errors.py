# ============================================================
# app/onebit/errors.py — Errores del dominio one-bit
# ============================================================
# Todas las excepciones heredan de ValueError para que las rutas
# (except ValueError → HTTP 400) y la CLI las traten igual que
# los errores de validación del resto del backend.
# ============================================================

from typing import Optional

import numpy as np


class OneBitError(ValueError):
    """Error base del paquete onebit."""


class InvalidParameterError(OneBitError):
    """Parámetro fuera de rango (λ ≤ 0, β ∉ [0,1], r ≤ 0, ...)."""


class InvalidEnsembleError(InvalidParameterError):
    """Ensamble de medición inválido (por ejemplo Student-t con df ≤ 2)."""


class DimensionMismatchError(OneBitError):
    """Las dimensiones de matriz, señal, dither o ruido no coinciden."""


class UnsupportedDescriptorError(OneBitError):
    """El descriptor no admite la operación pedida (p. ej. conv(T) de un FiniteSet en n > 3)."""


class BudgetExceededError(OneBitError):
    """La red supera el presupuesto de puntos; hay que usar un radio r mayor."""


class SchemaError(OneBitError):
    """El CSV no respeta el esquema versionado de TrialResult."""


class ConvergenceError(OneBitError):
    """Las proyecciones alternadas no convergieron dentro de max_iter."""

    def __init__(self, message: str, last_iterate: np.ndarray, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class ConfigError(OneBitError):
    """Configuración de experimento inválida; key_path señala la clave culpable."""

    def __init__(self, message: str, key_path: Optional[str] = None):
        super().__init__(f"{key_path}: {message}" if key_path else message)
        self.key_path = key_path
