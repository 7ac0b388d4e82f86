from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .config import configure_logging, settings
from .routers import checks


configure_logging()

app = FastAPI(title="Pseudohermitian Geometry Toolkit")

# browser front ends are opt-in through PH_CORS_ORIGINS
if settings.CORS_ORIGINS:
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(settings.CORS_ORIGINS),
        allow_methods=["GET", "POST"],
        allow_headers=["Content-Type"],
    )

app.include_router(checks.router)


@app.get("/")
def home():
    return {"message": "Pseudohermitian geometry toolkit is running"}


@app.get("/settings")
def show_settings():
    return {
        "jet_order": settings.JET_ORDER,
        "mass_schedule": list(settings.MASS_SCHEDULE),
        "szego_epsilons": list(settings.SZEGO_EPSILONS),
        "seed": settings.SEED,
    }
