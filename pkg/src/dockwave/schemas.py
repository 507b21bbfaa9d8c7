"""Pydantic request/response models for the service endpoints."""

from typing import Optional

from pydantic import BaseModel, Field


class ConfigPayload(BaseModel):
    config_text: Optional[str] = None
    config_path: Optional[str] = None
    overrides: dict[str, str] = Field(default_factory=dict)


class RunRequest(ConfigPayload):
    outdir: Optional[str] = None


class RunResponse(BaseModel):
    exit_code: int
    status: str
    outdir: str
    manifest: dict[str, str]


class CheckCompatRequest(ConfigPayload):
    max_order: int = 2


class CompatRow(BaseModel):
    order: int
    l2: float
    h_m_half: float
    tol: float
    passed: bool


class CheckCompatResponse(BaseModel):
    exit_code: int
    tol: float
    rows: list[CompatRow]


class DtnSelftestRequest(BaseModel):
    n_s: int = 256
    n_rho: int = 64
    backends: list[str] = Field(default_factory=lambda: ["spectral", "fd"])
    dump_path: Optional[str] = None
    n_random: int = 100


class DtnModeRow(BaseModel):
    backend: str
    mode: int
    rel_l2_error: float


class DtnSelftestResponse(BaseModel):
    exit_code: int
    n_s: int
    rows: list[DtnModeRow]
    properties: dict[str, dict[str, float]]
    dump: Optional[str] = None


class ProbeRequest(BaseModel):
    run_dir: str


class ProbeResponse(BaseModel):
    exit_code: int
    snapshots: int
    boundary_form_integral: float
    energy_identity_defect: float
    b1_term: float
    b1_dissipative_sign: bool
    e_int_rate_first: float
    e_int_rate_last: float


class ConvergeRequest(ConfigPayload):
    levels: int = 3


class ConvergeLevel(BaseModel):
    level: int
    n_r: int
    n_s: int
    drift: float
    max_vort: float
    compat0: float


class ConvergeResponse(BaseModel):
    exit_code: int
    levels: list[ConvergeLevel]
    solution_diffs_l1: list[float]
    solution_order: str | float
    drift_order: str | float
    vorticity_order: str | float
    compat_order: str | float


class ErrorResponse(BaseModel):
    exit_code: int
    status: str
    detail: list[str]
