import logging
import os

from dotenv import load_dotenv

load_dotenv()


class Settings:
    # jet / differentiation
    JET_ORDER = int(os.getenv("PH_JET_ORDER", "4"))
    CHUNK_SIZE = int(os.getenv("PH_CHUNK_SIZE", "20000"))
    MEMO_SIZE = int(os.getenv("PH_MEMO_SIZE", "4096"))

    # residual tolerances
    RESIDUAL_TOL = float(os.getenv("PH_RESIDUAL_TOL", "1e-8"))
    STRUCTURE_TOL = float(os.getenv("PH_STRUCTURE_TOL", "1e-9"))

    # surface quadrature on {rho = Lambda}
    SURFACE_N_PHI = int(os.getenv("PH_SURFACE_N_PHI", "64"))
    SURFACE_N_THETA = int(os.getenv("PH_SURFACE_N_THETA", "48"))
    MASS_SCHEDULE = tuple(float(v) for v in os.getenv("PH_MASS_SCHEDULE", "10,20,40").split(","))

    # volume quadrature over the Heisenberg group
    VOLUME_N_PHI = int(os.getenv("PH_VOLUME_N_PHI", "16"))
    VOLUME_N_THETA = int(os.getenv("PH_VOLUME_N_THETA", "24"))
    VOLUME_N_RADIAL = int(os.getenv("PH_VOLUME_N_RADIAL", "12"))
    VOLUME_PANEL = float(os.getenv("PH_VOLUME_PANEL", "0.5"))

    # Szego / Kohn convolutions
    SZEGO_EPSILONS = tuple(float(v) for v in os.getenv("PH_SZEGO_EPSILONS", "0.2,0.1,0.05").split(","))
    NEAR_FRACTION = float(os.getenv("PH_NEAR_FRACTION", "0.5"))

    SEED = int(os.getenv("PH_SEED", "20240917"))
    LOG_LEVEL = os.getenv("PH_LOG_LEVEL", "WARNING")
    CORS_ORIGINS = tuple(o.strip() for o in os.getenv("PH_CORS_ORIGINS", "").split(",") if o.strip())


settings = Settings()


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
