# ============================================================
# app/main.py — Punto de entrada principal de la API
# ============================================================
# Inicializa la aplicación FastAPI, configura logging, registra las
# rutas y arranca el servidor cuando se ejecuta directamente.
# ============================================================

import os

from fastapi import FastAPI

from app.config import configure_logging, create_app
from app.onebit import __version__
from app.routes.calc_routes import router as calc_router
from app.routes.experiment_routes import router as experiment_router

configure_logging()

app: FastAPI = create_app()


# ============================================================
#  Registro de rutas principales (Routers)
# ------------------------------------------------------------
#   - /api/calc        → calculadoras de m suficiente y anchos
#   - /api/experiments → corridas del arnés y descargas
# ============================================================
app.include_router(calc_router, prefix="/api/calc", tags=["Calc"])
app.include_router(experiment_router, prefix="/api/experiments", tags=["Experiments"])


@app.get("/")
def root():
    return {"message": "One-bit Tessellation API running", "version": __version__}


if __name__ == "__main__":
    import uvicorn

    port = int(os.getenv("PORT", 8000))
    uvicorn.run("app.main:app", host="0.0.0.0", port=port)
