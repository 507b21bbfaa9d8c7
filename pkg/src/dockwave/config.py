"""Flat key = value run configuration.

One typed value per line, ``#`` comments, strict unknown-key rejection,
and every violation reported at once. The emitted canonical text parses
back to an identical configuration, which makes run manifests diffable
and replayable.
"""

import os
from dataclasses import dataclass, fields

from .errors import ConfigError

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass
class ScenarioConfig:
    # geometry
    curve: str = "circle"
    radius: float = 1.0
    a: float = 2.0
    b: float = 1.0
    curve_file: str = ""
    n_s: int = 256
    n_r: int = 128
    r_out: float = 8.0
    # physics
    g: float = 1.0
    H0: float = 1.0
    rho: float = 1000.0
    # interior column
    h_i: str = "constant"
    h_i_value: float = 1.0
    h_i_poly: str = ""
    dtn_backend: str = "auto"
    dtn_n_rho: int = 48
    # initial data
    init: str = "rest"
    amp: float = 0.05
    sigma: float = 1.0
    center_x: float = 2.5
    center_y: float = 0.0
    potential_id: str = ""
    psi0: float = 0.0
    project_order0: bool = False
    # solver
    cfl: float = 0.45
    order: int = 2
    limiter: str = "minmod"
    outer: str = "wall"
    eps: float = 0.0
    h_min: float = 1e-6
    c0_floor: float = 1e-8
    t_end: float = 1.0
    snap_every: float = 0.0
    diag_every: int = 1
    compat_tol: float = 0.0
    jet_order: int = 2
    seed: int = 0
    bc_flux_offset: float = 0.0
    linearized: bool = False
    deterministic: bool = True
    # output
    outdir: str = "runs/out"


_FIELDS = {f.name: (f.type if isinstance(f.type, str) else f.type.__name__)
           for f in fields(ScenarioConfig)}


def _parse_value(key, text, typ, problems):
    text = text.strip()
    if typ == "str":
        return text
    if typ == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        problems.append(f"{key}: expected a boolean, got {text!r}")
        return None
    try:
        if typ == "int":
            return int(text)
        return float(text)
    except ValueError:
        problems.append(f"{key}: expected {typ}, got {text!r}")
        return None


def parse_config_text(text, source="<config>"):
    problems = []
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: not a key = value line: {raw.strip()!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        parsed = _parse_value(key, val, _FIELDS[key], problems)
        if parsed is not None:
            values[key] = parsed
    # run semantic validation on whatever parsed so one pass reports
    # every violation, syntactic and semantic alike
    cfg = ScenarioConfig(**values)
    problems += validation_problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc}"])
    return parse_config_text(text, source=str(path))


def validate(cfg):
    problems = validation_problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def validation_problems(cfg):
    problems = []
    if cfg.curve not in ("circle", "ellipse", "tabulated"):
        problems.append(f"curve must be circle|ellipse|tabulated, got {cfg.curve!r}")
    if cfg.curve == "tabulated":
        if not cfg.curve_file:
            problems.append("curve = tabulated needs curve_file")
        elif not os.path.exists(cfg.curve_file):
            problems.append(f"curve_file does not exist: {cfg.curve_file}")
    if cfg.n_s < 8 or (cfg.n_s & (cfg.n_s - 1)) != 0:
        problems.append(f"n_s must be a power of two >= 8, got {cfg.n_s}")
    if cfg.n_r < 4:
        problems.append(f"n_r must be >= 4, got {cfg.n_r}")
    for key in ("radius", "a", "b", "r_out", "g", "H0", "rho", "h_i_value",
                "sigma", "t_end"):
        if getattr(cfg, key) <= 0:
            problems.append(f"{key} must be positive, got {getattr(cfg, key)}")
    if not 0.0 < cfg.cfl <= 1.0:
        problems.append(f"cfl must be in (0, 1], got {cfg.cfl}")
    if cfg.order not in (1, 2):
        problems.append(f"order must be 1 or 2, got {cfg.order}")
    if cfg.limiter not in ("minmod", "none"):
        problems.append(f"limiter must be minmod|none, got {cfg.limiter!r}")
    if cfg.outer not in ("wall", "nonreflecting"):
        problems.append(f"outer must be wall|nonreflecting, got {cfg.outer!r}")
    if cfg.eps < 0:
        problems.append(f"eps must be >= 0, got {cfg.eps}")
    if cfg.h_i not in ("constant", "radial"):
        problems.append(f"h_i must be constant|radial, got {cfg.h_i!r}")
    if cfg.h_i == "radial" and not cfg.h_i_poly:
        problems.append("h_i = radial needs h_i_poly coefficients")
    if cfg.h_i_poly:
        try:
            [float(x) for x in cfg.h_i_poly.split(",")]
        except ValueError:
            problems.append(f"h_i_poly must be comma-separated numbers, got {cfg.h_i_poly!r}")
    if cfg.dtn_backend not in ("auto", "spectral", "fd"):
        problems.append(f"dtn_backend must be auto|spectral|fd, got {cfg.dtn_backend!r}")
    if cfg.dtn_n_rho < 8:
        problems.append(f"dtn_n_rho must be >= 8, got {cfg.dtn_n_rho}")
    if cfg.init not in ("rest", "gaussian_zeta", "potential"):
        problems.append(f"init must be rest|gaussian_zeta|potential, got {cfg.init!r}")
    if cfg.init == "potential" and not cfg.potential_id:
        problems.append("init = potential needs potential_id")
    if not 0 <= cfg.jet_order <= 3:
        problems.append(f"jet_order must be in 0..3, got {cfg.jet_order}")
    if cfg.diag_every < 1:
        problems.append(f"diag_every must be >= 1, got {cfg.diag_every}")
    return problems


def apply_overrides(cfg, overrides):
    """New config with string-typed overrides applied and revalidated."""
    problems = []
    values = dict(cfg.__dict__)
    for key, text in overrides.items():
        if key not in _FIELDS:
            problems.append(f"unknown key {key!r}")
            continue
        parsed = _parse_value(key, str(text), _FIELDS[key], problems)
        if parsed is not None:
            values[key] = parsed
    if problems:
        raise ConfigError(problems)
    out = ScenarioConfig(**values)
    validate(out)
    return out


def _format_value(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def emit(cfg):
    """Canonical text; parse(emit(cfg)) reproduces cfg exactly."""
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}"
             for f in fields(ScenarioConfig)]
    return "\n".join(lines) + "\n"
