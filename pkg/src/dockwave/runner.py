"""Run orchestration: scene assembly, time loop, artifacts, harnesses.

A run emits three kinds of artifact into its output directory: binary
field snapshots, a diagnostics CSV, and a plain-text manifest (the exact
config echo plus run facts), all written atomically so an interrupted run
never leaves truncated files.
"""

import os
import struct
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import compat, diagnostics, geometry
from .config import ScenarioConfig, emit, parse_config_text
from .dtn import InteriorBathymetry, assemble_dtn
from .errors import ConfigError, DockwaveError, InvariantViolation, SolverAbort
from .mesh import build_mesh
from .solver import ExteriorField, SimState, SolverConfig, TimeStepper
from .swe import PhysParams
from .trace import TraceField, l2_norm, random_smooth

CODE_VERSION = "dockwave-0.1.0"

SNAP_MAGIC = b"DWV1"
SNAP_VERSION = 1


def atomic_write(path, data):
    """Write bytes (or text) via a temp file and rename."""
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(path, state):
    f = state.field
    n_r, n_s = f.zeta.shape
    hv = f.hv
    payload = [SNAP_MAGIC,
               struct.pack("<I", SNAP_VERSION),
               struct.pack("<QQ", n_r, n_s),
               struct.pack("<d", state.t),
               f.zeta.astype("<f8").tobytes(order="C"),
               hv[0].astype("<f8").tobytes(order="C"),
               hv[1].astype("<f8").tobytes(order="C"),
               np.asarray(state.psi).astype("<f8").tobytes(order="C")]
    atomic_write(path, b"".join(payload))


def read_snapshot(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAP_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SNAP_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        n_r, n_s = struct.unpack("<QQ", fh.read(16))
        (t,) = struct.unpack("<d", fh.read(8))
        grid = n_r * n_s

        def arr(count):
            return np.frombuffer(fh.read(8 * count), dtype="<f8").copy()

        zeta = arr(grid).reshape(n_r, n_s)
        hv1 = arr(grid).reshape(n_r, n_s)
        hv2 = arr(grid).reshape(n_r, n_s)
        psi = arr(n_s)
    return {"t": t, "zeta": zeta, "hv": np.stack([hv1, hv2]), "psi": psi}


def snapshot_to_state(snap, mesh, params):
    h = params.depth_ref + snap["zeta"]
    vel = snap["hv"] / h[None]
    return SimState(field=ExteriorField(mesh, snap["zeta"].copy(), vel, params),
                    psi=snap["psi"].copy(), t=snap["t"])


# -- scene assembly ----------------------------------------------------------

POTENTIALS = {
    "linear_x": lambda x, y, cfg: x,
    "sincos": lambda x, y, cfg: np.sin(x) * np.cos(y),
    "radial_bump": lambda x, y, cfg: cfg.amp * np.exp(
        -((np.hypot(x, y) - np.hypot(cfg.center_x, cfg.center_y)) ** 2)
        / (2 * cfg.sigma ** 2)),
}


@dataclass
class Scene:
    cfg: ScenarioConfig
    curve: object
    mesh: object
    params: PhysParams
    bathy: InteriorBathymetry
    dtn_op: object
    stepper: TimeStepper
    state0: SimState
    jet: object = None


def curve_spec(cfg):
    if cfg.curve == "circle":
        return geometry.circle(cfg.radius)
    if cfg.curve == "ellipse":
        return geometry.ellipse(cfg.a, cfg.b)
    return geometry.load_tabulated(cfg.curve_file)


def bathymetry(cfg):
    if cfg.h_i == "constant":
        return InteriorBathymetry.constant(cfg.h_i_value)
    coeffs = [float(x) for x in cfg.h_i_poly.split(",")]
    return InteriorBathymetry.radial_poly(coeffs)


def initial_data(cfg, mesh, params, dtn_op):
    n_r, n_s = mesh.n_r, mesh.n_s
    x = mesh.centers[..., 0]
    y = mesh.centers[..., 1]
    psi = np.full(n_s, cfg.psi0)
    if cfg.init == "rest":
        zeta = np.zeros((n_r, n_s))
        vel = np.zeros((2, n_r, n_s))
    elif cfg.init == "gaussian_zeta":
        zeta = cfg.amp * np.exp(-((x - cfg.center_x) ** 2 + (y - cfg.center_y) ** 2)
                                / (2 * cfg.sigma ** 2))
        vel = np.zeros((2, n_r, n_s))
    else:
        if cfg.potential_id not in POTENTIALS:
            raise ConfigError([f"unknown potential_id {cfg.potential_id!r}"])
        phi = POTENTIALS[cfg.potential_id](x, y, cfg)
        zeta = np.zeros((n_r, n_s))
        if cfg.project_order0:
            phi, _ = compat.collar_projection(mesh, zeta, phi, dtn_op, params)
        zeta, vel, psi = compat.init_from_potential(mesh, zeta, phi, params,
                                                    trace_order=cfg.order)
    return zeta, vel, psi


def build_scene(cfg):
    curve = geometry.build_curve(curve_spec(cfg), cfg.n_s)
    mesh = build_mesh(curve, cfg.n_r, cfg.r_out)
    params = PhysParams(gravity=cfg.g, depth_ref=cfg.H0, density=cfg.rho)
    bathy = bathymetry(cfg)
    dtn_op = assemble_dtn(bathy, curve, solver=cfg.dtn_backend, n_rho=cfg.dtn_n_rho)
    zeta, vel, psi = initial_data(cfg, mesh, params, dtn_op)
    solver_cfg = SolverConfig(cfl=cfg.cfl, order=cfg.order, limiter=cfg.limiter,
                              outer=cfg.outer, eps=cfg.eps, h_min=cfg.h_min,
                              c0_floor=cfg.c0_floor, t_end=cfg.t_end,
                              snap_every=cfg.snap_every, diag_every=cfg.diag_every,
                              bc_flux_offset=cfg.bc_flux_offset,
                              linearized=cfg.linearized,
                              deterministic=cfg.deterministic)
    jet = None
    if cfg.eps > 0.0 or cfg.jet_order > 0:
        jet = compat.build_jet(mesh, zeta, vel, psi, min(cfg.jet_order, 3), params,
                               trace_order=cfg.order)
    stepper = TimeStepper(mesh, params, solver_cfg, dtn_op, jet=jet)
    state0 = SimState(field=ExteriorField(mesh, zeta, vel, params), psi=psi)
    return Scene(cfg=cfg, curve=curve, mesh=mesh, params=params, bathy=bathy,
                 dtn_op=dtn_op, stepper=stepper, state0=state0, jet=jet)


def compat_tolerance(cfg, mesh):
    """Default acceptance tolerance: ten times a crude discretization
    error estimate for the data in play."""
    if cfg.compat_tol > 0.0:
        return cfg.compat_tol
    dx = max(mesh.dr, mesh.curve.ds)
    scale = max(cfg.g, cfg.g * cfg.H0, 1.0)
    return 10.0 * scale * dx ** 2


# -- run loop ----------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    manifest: dict
    outdir: str
    records: list = None
    final_state: object = None


def _manifest_text(cfg, extras):
    lines = ["# config echo", emit(cfg).rstrip(), "", "# run facts"]
    lines += [f"run.{k} = {v}" for k, v in extras.items()]
    return "\n".join(lines) + "\n"


def run_scenario(cfg, outdir=None):
    outdir = outdir or cfg.outdir
    started = time.time()
    extras = {"code_version": CODE_VERSION, "status": "ok"}
    records = []
    state = None
    exit_code = 0
    try:
        scene = build_scene(cfg)
        stepper = scene.stepper
        state = scene.state0
        records.append(diagnostics.record(state, scene.dtn_op, stepper=stepper))
        snap_idx = 0
        next_snap = cfg.snap_every if cfg.snap_every > 0 else np.inf
        if cfg.snap_every > 0:
            write_snapshot(os.path.join(outdir, f"snap_{snap_idx:06d}.dwv"), state)
            snap_idx += 1
        influx_total = 0.0
        while state.t < cfg.t_end - 1e-14:
            dt = stepper.cfl_dt(state)
            dt = min(dt, cfg.t_end - state.t, next_snap - state.t)
            state = stepper.step(state, dt)
            influx_total += state.gamma_mass_influx
            if state.step_index % cfg.diag_every == 0:
                records.append(diagnostics.record(state, scene.dtn_op))
            if state.t >= next_snap - 1e-12:
                write_snapshot(os.path.join(outdir, f"snap_{snap_idx:06d}.dwv"), state)
                snap_idx += 1
                next_snap += cfg.snap_every
        if records[-1].t < state.t:
            records.append(diagnostics.record(state, scene.dtn_op))
        write_snapshot(os.path.join(outdir, "final.dwv"), state)
        extras.update({
            "steps": state.step_index,
            "t_final": repr(state.t),
            "snapshots": snap_idx,
            "mass_influx": repr(influx_total),
            "final_max_zeta": repr(float(np.max(np.abs(state.field.zeta)))),
            "final_max_v": repr(float(np.max(np.abs(state.field.vel)))),
            "final_max_psi": repr(float(np.max(np.abs(state.psi)))),
            "energy_initial": repr(records[0].E_total),
            "energy_final": repr(records[-1].E_total),
            "nv_sign_flip_steps": state.nv_sign_flips,
        })
    except SolverAbort as exc:
        exit_code = 3
        extras.update({"status": "abort", "abort": exc.reason,
                       "abort_step": exc.step, "abort_cell": exc.location})
    except ConfigError:
        raise
    except InvariantViolation as exc:
        exit_code = 4
        extras.update({"status": "invariant_violation", "error": str(exc)})
    except DockwaveError as exc:
        exit_code = 4
        extras.update({"status": "error", "error": str(exc)})
    extras["wall_time_s"] = f"{time.time() - started:.3f}"
    if records:
        rows = [",".join(diagnostics.CSV_HEADER)]
        rows += [",".join(rec.csv_row()) for rec in records]
        atomic_write(os.path.join(outdir, "diagnostics.csv"), "\n".join(rows) + "\n")
    atomic_write(os.path.join(outdir, "manifest.txt"), _manifest_text(cfg, extras))
    return RunResult(exit_code=exit_code, manifest=extras, outdir=outdir,
                     records=records, final_state=state)


def load_manifest_config(run_dir):
    with open(os.path.join(run_dir, "manifest.txt")) as fh:
        text = fh.read()
    cfg_lines = [ln for ln in text.splitlines() if not ln.startswith("run.")]
    return parse_config_text("\n".join(cfg_lines), source="manifest")


# -- verification harnesses --------------------------------------------------

def check_compat(cfg, max_order=2):
    scene = build_scene(cfg)
    jet = scene.jet or compat.build_jet(scene.mesh, scene.state0.field.zeta,
                                        scene.state0.field.vel, scene.state0.psi,
                                        max(1, min(max_order, 3)), scene.params,
                                        trace_order=cfg.order)
    max_order = min(max_order, len(jet.psi_levels) - 1)
    tol = compat_tolerance(cfg, scene.mesh)
    rows = []
    for rep in compat.compatibility_table(jet, scene.dtn_op, max_order, cfg.order):
        rows.append({"order": rep["order"], "l2": rep["l2"],
                     "h_m_half": rep["h_m_half"], "tol": tol,
                     "passed": bool(rep["l2"] <= tol)})
    exit_code = 0 if all(r["passed"] for r in rows) else 4
    return {"rows": rows, "tol": tol, "exit_code": exit_code}


def dtn_selftest(n_s=256, n_rho=64, backends=("spectral", "fd"), dump_path=None,
                 n_random=100, seed=0):
    """Disk oracle battery and operator property defects."""
    curve = geometry.build_curve(geometry.circle(1.0), n_s)
    bathy = InteriorBathymetry.constant(1.0)
    out = {"n_s": n_s, "rows": [], "properties": {}, "exit_code": 0}
    rng = np.random.default_rng(seed)
    for backend in backends:
        op = assemble_dtn(bathy, curve, solver=backend, n_rho=n_rho)
        for k in range(1, 9):
            psi = TraceField(curve, np.cos(2 * np.pi * k * curve.s_nodes / curve.length))
            lam = op.apply(psi)
            err = l2_norm(TraceField(curve, lam.values - k * psi.values)) \
                / (k * l2_norm(psi))
            out["rows"].append({"backend": backend, "mode": k, "rel_l2_error": err})
        checks = op.check(raise_on_fail=False)
        sym_max = 0.0
        psd_min = 0.0
        for _ in range(n_random):
            p1 = random_smooth(curve, rng)
            p2 = random_smooth(curve, rng)
            sym = abs(op.inner(op.apply(p1), p2) - op.inner(op.apply(p2), p1))
            sym_max = max(sym_max, sym / max(1.0, l2_norm(p1) * l2_norm(p2)))
            psd_min = min(psd_min, op.inner(op.apply(p1), p1))
        out["properties"][backend] = {
            "presym_defect": op.presym_defect,
            "matrix_symmetry": checks["symmetry"],
            "const_defect": checks["const"],
            "min_eig_rel": checks["min_eig"],
            "random_symmetry_defect": sym_max,
            "random_min_quadratic": psd_min,
        }
        if sym_max > 1e-10 or psd_min < -1e-12 or checks["const"] > 1e-10:
            out["exit_code"] = 4
        if dump_path and backend == backends[0]:
            op.dump(dump_path)
            out["dump"] = str(dump_path)
    return out


def probe_run(run_dir):
    """Replay stored snapshots and emit the weak-dissipativity report."""
    cfg = load_manifest_config(run_dir)
    scene = build_scene(cfg)
    snaps = sorted(f for f in os.listdir(run_dir)
                   if f.startswith("snap_") and f.endswith(".dwv"))
    if len(snaps) < 3:
        raise DockwaveError("probe needs at least three stored snapshots "
                            "(set snap_every > 0)")
    states = [snapshot_to_state(read_snapshot(os.path.join(run_dir, f)),
                                scene.mesh, scene.params) for f in snaps]
    report = diagnostics.weak_dissipativity_probe(states, scene.dtn_op, scene.params)
    return {
        "snapshots": len(states),
        "boundary_form_integral": report["boundary_form_integral"],
        "energy_identity_defect": report["energy_identity_defect"],
        "b1_term": report["b1_term"],
        "b1_dissipative_sign": report["b1_dissipative_sign"],
        "e_int_rate_first": float(report["e_int_rate_series"][0]),
        "e_int_rate_last": float(report["e_int_rate_series"][-1]),
    }


def _restrict(field_vals, times):
    """Volume-consistent factor-two coarsening on the solver lattice.

    Radial cells are nested (plain pair averaging); in the periodic
    direction the cell centers sit on the trace nodes at every level, so a
    coarse cell overlaps fine cells (2j-1, 2j, 2j+1) with weights
    (1/4, 1/2, 1/4).
    """
    out = np.asarray(field_vals)
    for _ in range(times):
        out = 0.5 * (out[0::2] + out[1::2])
        out = 0.25 * np.roll(out, 1, axis=1)[:, ::2] + 0.5 * out[:, ::2] \
            + 0.25 * np.roll(out, -1, axis=1)[:, ::2]
    return out


def converge(cfg, levels=3):
    """Self-convergence study over factor-two refinements.

    Runs the scenario at ``levels`` grids, reports successive-difference
    L1 norms of the surface, per-level energy drift, final max vorticity,
    and order-zero compatibility residuals, with fitted orders.
    """
    if levels < 3:
        raise ConfigError(["converge needs at least 3 levels"])
    results = []
    for lev in range(levels):
        scaled = ScenarioConfig(**{**cfg.__dict__,
                                   "n_r": cfg.n_r * 2 ** lev,
                                   "n_s": cfg.n_s * 2 ** lev,
                                   "snap_every": 0.0})
        scene = build_scene(scaled)
        stepper = scene.stepper
        state = scene.state0
        rec0 = diagnostics.record(state, scene.dtn_op, stepper=stepper)
        while state.t < scaled.t_end - 1e-14:
            dt = min(stepper.cfl_dt(state), scaled.t_end - state.t)
            state = stepper.step(state, dt)
        rec1 = diagnostics.record(state, scene.dtn_op)
        jet = scene.jet or compat.build_jet(scene.mesh, scene.state0.field.zeta,
                                            scene.state0.field.vel, scene.state0.psi,
                                            1, scene.params)
        creport = compat.check_compatibility(jet, scene.dtn_op, 0)
        results.append({
            "level": lev,
            "n_r": scaled.n_r,
            "n_s": scaled.n_s,
            "zeta": state.field.zeta,
            "area": scene.mesh.area,
            "drift": abs(rec1.E_total - rec0.E_total) / max(abs(rec0.E_total), 1e-300),
            "max_vort": rec1.max_vort,
            "compat0": creport["l2"],
        })
    diffs = []
    for lev in range(levels - 1):
        fine = _restrict(results[lev + 1]["zeta"], 1)
        diffs.append(float(np.sum(np.abs(fine - results[lev]["zeta"])
                                  * results[lev]["area"])))

    def fitted(vals):
        vals = np.asarray(vals, dtype=float)
        vals = np.maximum(vals, 1e-300)
        if np.all(vals < 1e-13):
            return "exact"
        return float(np.mean(np.log2(vals[:-1] / vals[1:])))

    table = {
        "levels": [{k: r[k] for k in ("level", "n_r", "n_s", "drift",
                                      "max_vort", "compat0")} for r in results],
        "solution_diffs_l1": diffs,
        "solution_order": fitted(diffs) if max(diffs) > 1e-13 else "exact",
        "drift_order": fitted([r["drift"] for r in results]),
        "vorticity_order": fitted([r["max_vort"] for r in results]),
        "compat_order": fitted([r["compat0"] for r in results]),
    }
    return table
