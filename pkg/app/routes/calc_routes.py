# ============================================================
# app/routes/calc_routes.py — Calculadoras de complejidad vía HTTP
# ============================================================
# Se registra en `main.py` con el prefijo `/api/calc`:
#   - GET  /api/calc/ping
#   - POST /api/calc/sufficient-m   → m suficiente + niveles admisibles
#   - POST /api/calc/width          → ancho gaussiano o empírico
# ============================================================

import math
from typing import List, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from app.onebit.complexity import (
    Theorem,
    TheoremConstants,
    TheoremParams,
    admissible_levels,
    empirical_width,
    gaussian_mean_width,
    sufficient_m,
)
from app.onebit.types import MeasurementEnsemble, RowLaw, SeedPlan, SignalSetDescriptor

router = APIRouter()


class DescriptorBody(BaseModel):
    kind: str = "sparse_ball"
    s: Optional[float] = None
    n: Optional[int] = None
    radius: Optional[float] = None
    points: Optional[List[List[float]]] = None

    def build(self) -> SignalSetDescriptor:
        if self.kind == "finite_set":
            if not self.points:
                raise ValueError("finite_set requiere 'points'.")
            return SignalSetDescriptor.finite_set(self.points, self.radius)
        if self.s is None or self.n is None:
            raise ValueError(f"{self.kind} requiere 's' y 'n'.")
        if self.kind == "sparse_ball":
            return SignalSetDescriptor.sparse_ball(int(self.s), self.n, self.radius or 1.0)
        if self.kind == "l1l2_ball":
            return SignalSetDescriptor.l1l2_ball(self.s, self.n, self.radius or 1.0)
        raise ValueError(f"Tipo de conjunto desconocido: {self.kind}")


class LawBody(BaseModel):
    law: str = "gaussian"
    df: Optional[float] = None
    alpha: Optional[float] = None
    m: int = 1000

    def ensemble(self, n: int) -> MeasurementEnsemble:
        return MeasurementEnsemble(RowLaw(self.law), n=n, m=self.m, lam=1.0, df=self.df, alpha=self.alpha)


class SufficientMRequest(BaseModel):
    theorem: Theorem
    R: float = 1.0
    rho: float
    lam: Optional[float] = None
    sigma: float = 0.0
    mu: float = 0.0
    beta: float = 0.0
    descriptor: Optional[DescriptorBody] = None
    law: Optional[LawBody] = None
    width: Optional[float] = None
    local_width: Optional[float] = None
    empirical_width: Optional[float] = None
    log_covering: Optional[float] = None
    n_mc: int = 200
    seed: int = 0
    constants: TheoremConstants = Field(default_factory=TheoremConstants)


class WidthRequest(BaseModel):
    descriptor: DescriptorBody
    law: LawBody = Field(default_factory=LawBody)
    n_mc: int = 200
    seed: int = 0


def _finite(terms: dict) -> dict:
    return {k: (v if not (isinstance(v, float) and not math.isfinite(v)) else None) for k, v in terms.items()}


@router.get("/ping")
def ping():
    """Verifica el estado del servicio."""
    return {"status": "ok"}


# ============================================================
# Ruta: POST /api/calc/sufficient-m
# ------------------------------------------------------------
# Flujo:
#   1️ Construye descriptor y ensamble opcionales.
#   2️ Calcula m suficiente y los niveles admisibles de ruido y β.
#   3️ Devuelve m, r, λ, los términos y los niveles.
# ============================================================
@router.post("/sufficient-m")
def sufficient_m_route(body: SufficientMRequest):
    try:
        descriptor = body.descriptor.build() if body.descriptor else None
        ensemble = body.law.ensemble(descriptor.n) if body.law and descriptor is not None else None
        params = TheoremParams(
            R=body.R, rho=body.rho, lam=body.lam, sigma=body.sigma, mu=body.mu, beta=body.beta,
            descriptor=descriptor, ensemble=ensemble, width=body.width, local_width=body.local_width,
            empirical_width=body.empirical_width, log_covering=body.log_covering,
            n_mc=body.n_mc, seed=body.seed,
        )
        result = sufficient_m(body.theorem, params, body.constants)
        return {
            "theorem": body.theorem.value,
            "m": result.m,
            "r": result.r,
            "lambda": result.lam,
            "terms": _finite(result.terms),
            "admissible": _finite(admissible_levels(body.theorem, params, body.constants)),
        }
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


# ============================================================
# Ruta: POST /api/calc/width
# ------------------------------------------------------------
# Ley gaussiana → ancho gaussiano medio; otras leyes → ancho
# empírico con m filas.
# ============================================================
@router.post("/width")
def width_route(body: WidthRequest):
    try:
        descriptor = body.descriptor.build()
        plan = SeedPlan(body.seed)
        if RowLaw(body.law.law) is RowLaw.GAUSSIAN:
            estimate = gaussian_mean_width(descriptor, body.n_mc, plan)
            quantity = "gaussian_mean_width"
        else:
            estimate = empirical_width(descriptor, body.law.ensemble(descriptor.n), body.n_mc, plan)
            quantity = "empirical_width"
        return {
            "descriptor": descriptor.describe(),
            "quantity": quantity,
            "value": estimate.value,
            "standard_error": estimate.standard_error,
        }
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
