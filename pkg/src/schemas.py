import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, Literal, List, Dict, Any


Command = Literal["mass", "flux", "identities", "kohn", "bubble", "quotient", "variation", "examples", "suite"]
Provenance = Literal["REFERENCE", "TRIVIAL", "DERIVED"]

SCHEMA_VERSION = 1


# ==========================================================
# 1️⃣ RUN CONFIGURATION
# ==========================================================

class QuadratureSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    surface_n_phi: int = Field(64, ge=8)
    surface_n_theta: int = Field(48, ge=8)
    volume_n_phi: int = Field(16, ge=4)
    volume_n_theta: int = Field(24, ge=4)
    volume_n_radial: int = Field(12, ge=2)


class RunConfig(BaseModel):
    """Everything one run of a suite depends on; unknown keys are rejected."""

    command: Command
    A: float = 1.0
    lam: float = Field(1000.0, gt=0, alias="lambda")
    rho0: float = Field(1.0, gt=0)
    Atilde: float = 1.0
    schedule: List[float] = Field(default_factory=lambda: [10.0, 20.0, 40.0])
    grid: List[float] = Field(default_factory=lambda: [300.0, 1000.0, 3000.0])
    jet_order: int = Field(4, ge=2, le=8)
    tol: Optional[float] = Field(None, gt=0)
    seed: int = 20240917
    out: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @field_validator("schedule")
    @classmethod
    def schedule_increasing(cls, v: List[float]) -> List[float]:
        if len(v) < 2 or any(b <= a for a, b in zip(v, v[1:])) or v[0] <= 0:
            raise ValueError("schedule must list at least two increasing positive radii")
        return v

    @field_validator("grid")
    @classmethod
    def grid_positive(cls, v: List[float]) -> List[float]:
        if not v or any(x <= 0 for x in v):
            raise ValueError("grid must list positive values of lambda")
        return v

    @model_validator(mode="after")
    def scales(self) -> "RunConfig":
        if self.command == "quotient" and min(self.grid) * self.rho0 < 10:
            raise ValueError("every grid value must satisfy lambda * rho0 >= 10")
        return self

    def parameters(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True, exclude={"out", "format"})


# ==========================================================
# 2️⃣ REPORTS
# ==========================================================

class CheckRecord(BaseModel):
    name: str
    value: Optional[float]
    reference: Optional[float] = None
    provenance: Provenance
    tolerance: Optional[float] = None
    passed: bool = Field(alias="pass")
    note: str = ""

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("value", "reference")
    @classmethod
    def finite_or_null(cls, v: Optional[float]) -> Optional[float]:
        # JSON has no NaN or infinity
        return v if v is None or math.isfinite(v) else None


class Report(BaseModel):
    schema_: int = Field(SCHEMA_VERSION, alias="schema")
    command: Command
    parameters: Dict[str, Any]
    checks: List[CheckRecord]
    timing: Dict[str, float] = Field(default_factory=dict)
    rows: List[Dict[str, float]] = Field(default_factory=list)

    model_config = ConfigDict(populate_by_name=True)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


class ExampleSummary(BaseModel):
    name: str
    description: str
    rho_min: float
    rho_max: float
