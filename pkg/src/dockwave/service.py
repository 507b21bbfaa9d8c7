"""HTTP service wrapping the simulator and verification harnesses.

Runs execute synchronously in the request (desk-scale scenarios). Error
classes map onto the same exit codes the CLI uses: 2 for configuration
problems, 3 for solver aborts, 4 for violated invariants.
"""

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import runner, schemas
from .config import apply_overrides, parse_config, parse_config_text
from .errors import ConfigError, DockwaveError, InvariantViolation, SolverAbort

app = FastAPI(title="dockwave", version=runner.CODE_VERSION)


def _load_config(payload):
    if payload.config_text is not None:
        cfg = parse_config_text(payload.config_text)
    elif payload.config_path is not None:
        cfg = parse_config(payload.config_path)
    else:
        raise ConfigError(["provide config_text or config_path"])
    if payload.overrides:
        cfg = apply_overrides(cfg, payload.overrides)
    return cfg


def _error_response(exc):
    if isinstance(exc, ConfigError):
        return JSONResponse(status_code=400, content=schemas.ErrorResponse(
            exit_code=2, status="config_error", detail=exc.violations).model_dump())
    if isinstance(exc, SolverAbort):
        return JSONResponse(status_code=409, content=schemas.ErrorResponse(
            exit_code=3, status="solver_abort", detail=[str(exc)]).model_dump())
    if isinstance(exc, InvariantViolation):
        return JSONResponse(status_code=409, content=schemas.ErrorResponse(
            exit_code=4, status="invariant_violation", detail=[str(exc)]).model_dump())
    if isinstance(exc, DockwaveError):
        return JSONResponse(status_code=400, content=schemas.ErrorResponse(
            exit_code=4, status="error", detail=[str(exc)]).model_dump())
    raise exc


@app.get("/health")
def health():
    return {"status": "ok", "version": runner.CODE_VERSION}


@app.post("/run", response_model=schemas.RunResponse)
def run_endpoint(req: schemas.RunRequest):
    try:
        cfg = _load_config(req)
        result = runner.run_scenario(cfg, outdir=req.outdir)
    except DockwaveError as exc:
        return _error_response(exc)
    return schemas.RunResponse(
        exit_code=result.exit_code,
        status=result.manifest.get("status", "ok"),
        outdir=result.outdir,
        manifest={k: str(v) for k, v in result.manifest.items()})


@app.post("/check-compat", response_model=schemas.CheckCompatResponse)
def check_compat_endpoint(req: schemas.CheckCompatRequest):
    try:
        cfg = _load_config(req)
        report = runner.check_compat(cfg, max_order=req.max_order)
    except DockwaveError as exc:
        return _error_response(exc)
    return schemas.CheckCompatResponse(exit_code=report["exit_code"],
                                       tol=report["tol"], rows=report["rows"])


@app.post("/dtn-selftest", response_model=schemas.DtnSelftestResponse)
def dtn_selftest_endpoint(req: schemas.DtnSelftestRequest):
    try:
        report = runner.dtn_selftest(n_s=req.n_s, n_rho=req.n_rho,
                                     backends=tuple(req.backends),
                                     dump_path=req.dump_path,
                                     n_random=req.n_random)
    except DockwaveError as exc:
        return _error_response(exc)
    return schemas.DtnSelftestResponse(**report)


@app.post("/probe", response_model=schemas.ProbeResponse)
def probe_endpoint(req: schemas.ProbeRequest):
    try:
        report = runner.probe_run(req.run_dir)
    except FileNotFoundError as exc:
        return _error_response(ConfigError([str(exc)]))
    except DockwaveError as exc:
        return _error_response(exc)
    return schemas.ProbeResponse(exit_code=0, **report)


@app.post("/converge", response_model=schemas.ConvergeResponse)
def converge_endpoint(req: schemas.ConvergeRequest):
    try:
        cfg = _load_config(req)
        table = runner.converge(cfg, levels=req.levels)
    except DockwaveError as exc:
        return _error_response(exc)
    return schemas.ConvergeResponse(exit_code=0, **table)
