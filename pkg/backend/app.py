"""FastAPI application for the Nelson workbench."""
import logging
from typing import Optional

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from nelson_workbench import __version__
from nelson_workbench.config import Budget, Suite
from nelson_workbench.errors import EXIT_BUDGET, BudgetExceeded, StructureError, WorkbenchError
from nelson_workbench.report import Report
from nelson_workbench.specfile import LoadedSpec, loads
from nelson_workbench.suites import run_check, run_enumerate, run_validate

logger = logging.getLogger("nelson_workbench.app")

app = FastAPI(
    title="Nelson Workbench",
    description="Check Nelson's axioms on finite presheaf toposes.",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

MAX_SPEC_BYTES = 1 << 20


async def _read_spec(file: UploadFile, budget: Optional[int]) -> LoadedSpec:
    if budget is not None and budget < 1:
        raise HTTPException(status_code=400, detail="budget must be a positive integer")
    content = await file.read()
    if len(content) == 0:
        raise HTTPException(status_code=400, detail="Empty file")
    if len(content) > MAX_SPEC_BYTES:
        raise HTTPException(status_code=413, detail="Spec file too large")
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="Spec must be UTF-8 JSON")
    name = file.filename.rsplit(".", 1)[0] if file.filename else "spec"
    return loads(text, Budget.from_env().with_override(budget), name=name)


def _respond(report: Report) -> JSONResponse:
    status = 413 if report.exit_code() == EXIT_BUDGET else 200
    return JSONResponse({"ok": report.passed, "report": report.to_dict()}, status_code=status)


def _failure(e: Exception) -> JSONResponse:
    if isinstance(e, HTTPException):
        raise e
    if isinstance(e, BudgetExceeded):
        raise HTTPException(status_code=413, detail=str(e))
    if isinstance(e, StructureError):
        return JSONResponse({"ok": False, "error": str(e)}, status_code=422)
    if isinstance(e, WorkbenchError):
        raise HTTPException(status_code=400, detail=str(e))
    logger.exception("request failed")
    return JSONResponse({"ok": False, "error": str(e)}, status_code=500)


@app.post("/validate")
async def validate(
    file: UploadFile = File(...),
    budget: Optional[int] = Form(None),
) -> JSONResponse:
    """Validate every item declared in an uploaded spec."""
    try:
        spec = await _read_spec(file, budget)
        return _respond(run_validate(spec))
    except Exception as e:
        return _failure(e)


@app.post("/enumerate")
async def enumerate_ultrafilters(
    file: UploadFile = File(...),
    object_name: Optional[str] = Form(None, alias="object"),
    budget: Optional[int] = Form(None),
) -> JSONResponse:
    """List the internal ultrafilters on one presheaf of an uploaded spec."""
    try:
        spec = await _read_spec(file, budget)
        return _respond(run_enumerate(spec, object_name or None))
    except Exception as e:
        return _failure(e)


@app.post("/check")
async def check(
    file: UploadFile = File(...),
    suite: str = Form(Suite.all.value),
    budget: Optional[int] = Form(None),
    family: Optional[str] = Form(None),
) -> JSONResponse:
    """
    Run a check suite against the structure an uploaded spec declares.

    Args:
        file: Topos spec (JSON)
        suite: transfer, standardisation, idealisation, soundness, doctrine or all
        budget: Bound on constructed carrier sizes and enumerations
        family: Comma-separated presheaf names to run over

    Returns:
        JSON with ``ok`` and the structured report
    """
    try:
        if suite not in {s.value for s in Suite}:
            raise HTTPException(
                status_code=400,
                detail=f"suite must be one of {', '.join(s.value for s in Suite)}",
            )
        names = [n.strip() for n in family.split(",") if n.strip()] if family else None
        spec = await _read_spec(file, budget)
        return _respond(run_check(spec, Suite(suite), names))
    except Exception as e:
        return _failure(e)


@app.get("/health")
async def health() -> dict:
    return {"ok": True, "version": __version__}
