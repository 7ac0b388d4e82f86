from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from ..checks import SUITES, run_report
from ..model_examples import EXAMPLES
from ..schemas import ExampleSummary, Report, RunConfig
from ..utils import GeometryError

router = APIRouter(
    prefix="/checks",
    tags=["Verification suites"]
)


@router.get("/suites")
def list_suites():
    return {"suites": list(SUITES) + ["suite"]}


@router.get("/examples", response_model=list[ExampleSummary])
def list_examples():
    return [
        ExampleSummary(name=e.name, description=e.description, rho_min=e.rho_range[0], rho_max=e.rho_range[1])
        for e in EXAMPLES.values()
    ]


@router.post("/run", response_model=Report, response_model_by_alias=True)
def run_checks(payload: dict):
    try:
        cfg = RunConfig.model_validate(payload)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False))

    try:
        return run_report(cfg)
    except GeometryError as e:
        raise HTTPException(status_code=500, detail=f"Suite failed: {e}")
