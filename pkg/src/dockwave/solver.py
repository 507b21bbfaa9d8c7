"""Finite-volume time integration of the coupled exterior problem.

State: cell averages of the water surface and velocity on the annular
mesh, plus the boundary potential trace advanced by its forced ODE

    d psi / dt = -(g zeta + |v|^2 / 2) on the curve,

with the single scalar boundary condition N . (h v) = Lambda psi enforced
through ghost states at the innermost faces: the interface mass flux of
the Rusanov solver equals the boundary-operator value exactly, while the
surface elevation and the tangential velocity are extrapolated from the
interior along outgoing characteristics. The outer truncation boundary is
either a reflecting wall (exact zero mass flux, used for conservation
audits) or a characteristic non-reflecting state.

The optional regularization adds a first-order upwinded collar transport
eps * chi(r) d(u - u0(t))/dr and filters the boundary coupling through the
smoothing multiplier on both sides of the boundary operator; u0(t) is the
time-Taylor polynomial built from the initial jet. With eps = 0 the code
path is identical to the plain scheme.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dtn import smoothed_dtn_matrix
from .errors import ConfigError, SolverAbort
from .swe import PhysParams


@dataclass
class SolverConfig:
    cfl: float = 0.45
    order: int = 2                 # reconstruction order, 1 or 2
    limiter: str = "minmod"        # "minmod" | "none" (central slopes)
    outer: str = "wall"            # "wall" | "nonreflecting"
    eps: float = 0.0               # collar regularization strength
    h_min: float = 1e-6
    c0_floor: float = 1e-8         # abort when g h - |v|^2 drops below this
    t_end: float = 1.0
    snap_every: float = 0.0        # physical time between snapshots, 0 = off
    diag_every: int = 1            # steps between diagnostics records
    bc_flux_offset: float = 0.0    # verification knob: bias on the flux target
    linearized: bool = False       # freeze fluxes at the rest state (oracle mode)
    deterministic: bool = True

    def __post_init__(self):
        problems = []
        if not 0.0 < self.cfl <= 1.0:
            problems.append(f"cfl must be in (0, 1], got {self.cfl}")
        if self.order not in (1, 2):
            problems.append(f"order must be 1 or 2, got {self.order}")
        if self.eps < 0.0:
            problems.append(f"eps must be >= 0, got {self.eps}")
        if self.outer not in ("wall", "nonreflecting"):
            problems.append(f"unknown outer boundary {self.outer!r}")
        if self.limiter not in ("minmod", "none"):
            problems.append(f"unknown limiter {self.limiter!r}")
        if problems:
            raise ConfigError(problems)


@dataclass
class ExteriorField:
    """Cell averages of the conserved unknowns on the annular mesh.

    The scheme evolves (zeta, v) in the conservative flux form; the mass
    flux variables h v used by the wire formats are derived on demand.
    """

    mesh: object
    zeta: np.ndarray           # (n_r, n_s)
    vel: np.ndarray            # (2, n_r, n_s)
    params: PhysParams

    @property
    def h(self):
        return self.params.depth_ref + self.zeta

    @property
    def hv(self):
        return self.h[None, :, :] * self.vel

    def copy(self):
        return ExteriorField(self.mesh, self.zeta.copy(), self.vel.copy(), self.params)


@dataclass
class SimState:
    field: ExteriorField
    psi: np.ndarray            # (n_s,)
    t: float = 0.0
    step_index: int = 0
    # filled by the stepper for diagnostics
    gamma_mass_flux: np.ndarray = None       # (n_s,) realized N.(h v) per node
    gamma_mass_influx: float = 0.0           # time-integrated inflow of the last step
    trace_head: np.ndarray = None            # (n_s,) g zeta + |v|^2/2 at the curve
    trace_state: tuple = None                # (zeta_tr, v_tr) at the curve
    nv_sign_flips: int = 0                   # cumulative steps with mixed N.v sign

    def copy(self):
        return replace(self, field=self.field.copy(), psi=self.psi.copy())


def _minmod(a, b):
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def _slopes(u, limiter):
    """Limited slopes along axis 1 (radial) of a (3, n_r, n_s) array."""
    fwd = np.empty_like(u)
    bwd = np.empty_like(u)
    fwd[:, :-1] = u[:, 1:] - u[:, :-1]
    fwd[:, -1] = fwd[:, -2]
    bwd[:, 1:] = u[:, 1:] - u[:, :-1]
    bwd[:, 0] = bwd[:, 1]
    if limiter == "minmod":
        sl = _minmod(fwd, bwd)
    else:
        sl = 0.5 * (fwd + bwd)
    # boundary-adjacent cells fall back to the one-sided difference
    sl[:, 0] = u[:, 1] - u[:, 0]
    sl[:, -1] = u[:, -1] - u[:, -2]
    return sl


def _slopes_periodic(u, limiter):
    fwd = np.roll(u, -1, axis=2) - u
    bwd = u - np.roll(u, 1, axis=2)
    if limiter == "minmod":
        return _minmod(fwd, bwd)
    return 0.5 * (fwd + bwd)


class TimeStepper:
    """Holds the static data of a run: mesh, physics, boundary operator."""

    def __init__(self, mesh, params, config, dtn_op, jet=None):
        self.mesh = mesh
        self.params = params
        self.config = config
        self.dtn_op = dtn_op
        self.dtn_matrix = (smoothed_dtn_matrix(dtn_op, config.eps)
                           if config.eps > 0.0 else dtn_op.matrix)
        self.gamma_nhat = mesh.gamma_face_unit_normals()      # (n_s, 2)
        self.outer_nhat = mesh.outer_face_unit_normals()
        self._reg = None
        if config.eps > 0.0:
            self._reg = self._build_regularization(jet)

    def _build_regularization(self, jet):
        mesh = self.mesh
        chi = mesh.chi.copy()
        chi[-1] = 0.0
        dr = mesh.dr
        levels = []
        if jet is not None:
            for j in range(len(jet.zeta_levels)):
                u_level = np.concatenate([jet.zeta_levels[j][None], jet.v_levels[j]])
                dnor = np.zeros_like(u_level)
                dnor[:, :-1] = (u_level[:, 1:] - u_level[:, :-1]) / dr
                levels.append(dnor)
        return {"chi": chi, "levels": levels, "dr": dr}

    def _taylor_dnor(self, t):
        levels = self._reg["levels"]
        if not levels:
            return 0.0
        out = np.zeros_like(levels[0])
        fact = 1.0
        for j, lev in enumerate(levels):
            if j > 0:
                fact *= j
            out += (t ** j / fact) * lev
        return out

    # -- state checks ---------------------------------------------------

    def _guard(self, zeta, vel, step_index):
        h = self.params.depth_ref + zeta
        if not np.all(np.isfinite(zeta)) or not np.all(np.isfinite(vel)):
            bad = np.argwhere(~np.isfinite(zeta) | ~np.isfinite(vel).all(axis=0))
            loc = tuple(bad[0]) if bad.size else None
            raise SolverAbort("nan", step=step_index, location=loc)
        if np.min(h) < self.config.h_min:
            loc = tuple(np.argwhere(h < self.config.h_min)[0])
            raise SolverAbort("wet_dry", step=step_index, location=loc,
                              detail=f"h = {float(h[loc]):.3e}")
        margin = self.params.gravity * h - np.sum(vel ** 2, axis=0)
        if np.min(margin) < self.config.c0_floor:
            loc = tuple(np.argwhere(margin < self.config.c0_floor)[0])
            raise SolverAbort("subcritical", step=step_index, location=loc,
                              detail=f"margin = {float(margin[loc]):.3e}")

    # -- traces and ghosts ------------------------------------------------

    def _trace(self, u, side):
        """Limited extrapolation of cell data to the inner or outer boundary."""
        if side == "gamma":
            u0, u1 = u[:, 0], u[:, 1]
        else:
            u0, u1 = u[:, -1], u[:, -2]
        if self.config.order == 1:
            return u0.copy()
        tr = 1.5 * u0 - 0.5 * u1
        h_tr = self.params.depth_ref + tr[0]
        margin = self.params.gravity * h_tr - np.sum(tr[1:] ** 2, axis=0)
        bad = (h_tr < self.config.h_min) | (margin <= 0.0)
        return np.where(bad[None, :], u0, tr)

    def _normal_flux(self, zeta, vel, nhat):
        """Physical flux dotted with a unit normal; states as (3, ...) stacks."""
        g = self.params.gravity
        vn = vel[0] * nhat[..., 0] + vel[1] * nhat[..., 1]
        if self.config.linearized:
            h = self.params.depth_ref
            head = g * zeta
        else:
            h = self.params.depth_ref + zeta
            head = g * zeta + 0.5 * (vel[0] ** 2 + vel[1] ** 2)
        return np.stack([h * vn, head * nhat[..., 0], head * nhat[..., 1]])

    def _rusanov(self, u_l, u_r, nhat):
        """Local Lax-Friedrichs flux through faces with unit normal nhat.

        The tangential velocity has identically zero flux through a face
        (the boundary matrix annihilates (0, perp(N))), so the upwind
        dissipation acts on the genuinely propagating pair (zeta, v . n):
        the momentum flux stays a single-valued face head times the normal,
        which keeps the velocity update a discrete gradient and preserves
        irrotationality to the scheme's order.
        """
        g = self.params.gravity
        z_l, v_l = u_l[0], u_l[1:]
        z_r, v_r = u_r[0], u_r[1:]
        f_l = self._normal_flux(z_l, v_l, nhat)
        f_r = self._normal_flux(z_r, v_r, nhat)
        vn_l = v_l[0] * nhat[..., 0] + v_l[1] * nhat[..., 1]
        vn_r = v_r[0] * nhat[..., 0] + v_r[1] * nhat[..., 1]
        if self.config.linearized:
            a = np.sqrt(g * self.params.depth_ref)
        else:
            c_l = np.sqrt(g * np.maximum(self.params.depth_ref + z_l, 0.0))
            c_r = np.sqrt(g * np.maximum(self.params.depth_ref + z_r, 0.0))
            a = np.maximum(np.abs(vn_l) + c_l, np.abs(vn_r) + c_r)
        flux = 0.5 * (f_l + f_r)
        flux[0] -= 0.5 * a * (z_r - z_l)
        dvn = vn_r - vn_l
        flux[1] -= 0.5 * a * dvn * nhat[..., 0]
        flux[2] -= 0.5 * a * dvn * nhat[..., 1]
        return flux

    def gamma_flux_target(self, psi):
        """Per-node target of N.(h v) on the curve: the boundary operator
        applied to the trace (smoothed coupling when regularized)."""
        return self.dtn_matrix @ psi + self.config.bc_flux_offset

    def apply_boundary(self, u_trace, psi):
        """Ghost states on the curve faces for an interior trace.

        Returns (ghost, target): the mirror-in-head states whose Rusanov
        pairing with the trace realizes the face mass flux target exactly,
        and the per-node flux target itself.
        """
        target = self.gamma_flux_target(psi)
        return self._gamma_ghost(np.asarray(u_trace, dtype=float), target), target

    def _gamma_ghost(self, u_tr, target):
        if self.config.linearized:
            h_tr = np.full(u_tr.shape[1], self.params.depth_ref)
        else:
            h_tr = self.params.depth_ref + u_tr[0]
        nhat = self.gamma_nhat
        vn_tr = u_tr[1] * nhat[:, 0] + u_tr[2] * nhat[:, 1]
        vn_ghost = 2.0 * target / h_tr - vn_tr
        ghost = u_tr.copy()
        ghost[1] += (vn_ghost - vn_tr) * nhat[:, 0]
        ghost[2] += (vn_ghost - vn_tr) * nhat[:, 1]
        margin = self.params.gravity * h_tr - vn_tr ** 2 - (
            u_tr[1] * -nhat[:, 1] + u_tr[2] * nhat[:, 0]) ** 2
        if np.min(margin) <= 0.0:
            loc = int(np.argmin(margin))
            raise SolverAbort("supercritical_trace", location=(0, loc))
        return ghost

    def _outer_ghost(self, u_tr):
        nhat = self.outer_nhat
        vn = u_tr[1] * nhat[:, 0] + u_tr[2] * nhat[:, 1]
        ghost = u_tr.copy()
        if self.config.outer == "wall":
            ghost[1] -= 2.0 * vn * nhat[:, 0]
            ghost[2] -= 2.0 * vn * nhat[:, 1]
            return ghost
        # characteristic far field: outgoing invariant from inside, incoming
        # invariant from the rest state
        g = self.params.gravity
        c_in = np.sqrt(g * np.maximum(self.params.depth_ref + u_tr[0], 1e-14))
        c_rest = np.sqrt(g * self.params.depth_ref)
        r_out = vn + 2.0 * c_in
        r_in = -2.0 * c_rest
        vn_g = 0.5 * (r_out + r_in)
        c_g = 0.25 * (r_out - r_in)
        ghost[0] = c_g ** 2 / g - self.params.depth_ref
        ghost[1] += (vn_g - vn) * nhat[:, 0]
        ghost[2] += (vn_g - vn) * nhat[:, 1]
        return ghost

    # -- semidiscrete right-hand side --------------------------------------

    def rhs(self, zeta, vel, psi, t, step_index=0):
        """Time derivatives of (zeta, vel, psi) plus boundary diagnostics."""
        mesh = self.mesh
        cfg = self.config
        self._guard(zeta, vel, step_index)
        u = np.concatenate([zeta[None], vel])   # (3, n_r, n_s)

        if cfg.order == 2:
            sl_r = _slopes(u, cfg.limiter)
            sl_s = _slopes_periodic(u, cfg.limiter)
        else:
            sl_r = np.zeros_like(u)
            sl_s = np.zeros_like(u)

        # interior radial faces i = 1 .. n_r - 1
        left = u[:, :-1] + 0.5 * sl_r[:, :-1]
        right = u[:, 1:] - 0.5 * sl_r[:, 1:]
        nhat_r = mesh.rface_nvec[1:-1] / mesh.rface_len[1:-1][..., None]
        flux_r_inner = self._rusanov(left, right, nhat_r) * mesh.rface_len[1:-1]

        # curve faces: interior trace against the mass-flux ghost
        u_gam = self._trace(u, "gamma")
        ghost_gam, target = self.apply_boundary(u_gam, psi)
        flux_gamma = self._rusanov(ghost_gam, u_gam, self.gamma_nhat) * mesh.rface_len[0]

        # outer faces
        u_out = self._trace(u, "outer")
        ghost_out = self._outer_ghost(u_out)
        flux_outer = self._rusanov(u_out, ghost_out, self.outer_nhat) * mesh.rface_len[-1]

        flux_r = np.concatenate([flux_gamma[:, None], flux_r_inner,
                                 flux_outer[:, None]], axis=1)

        # periodic s faces: face j sits between cells j-1 and j
        left_s = np.roll(u + 0.5 * sl_s, 1, axis=2)
        right_s = u - 0.5 * sl_s
        nhat_s = mesh.sface_nvec / mesh.sface_len[..., None]
        flux_s = self._rusanov(left_s, right_s, nhat_s) * mesh.sface_len

        div = (flux_r[:, 1:] - flux_r[:, :-1]
               + np.roll(flux_s, -1, axis=2) - flux_s)
        dudt = -div / mesh.area

        if cfg.eps > 0.0:
            reg = self._reg
            dnor = np.zeros_like(u)
            dnor[:, :-1] = (u[:, 1:] - u[:, :-1]) / reg["dr"]
            dnor -= self._taylor_dnor(t)
            dudt += cfg.eps * reg["chi"][None, :, None] * dnor

        if cfg.linearized:
            head_tr = self.params.gravity * u_gam[0]
        else:
            head_tr = (self.params.gravity * u_gam[0]
                       + 0.5 * (u_gam[1] ** 2 + u_gam[2] ** 2))
        dpsi = -head_tr

        diag = {
            "gamma_mass_flux": flux_gamma[0] / mesh.rface_len[0],
            "trace_head": head_tr,
            "trace_state": (u_gam[0].copy(), u_gam[1:].copy()),
            "target": target,
        }
        return dudt[0], dudt[1:], dpsi, diag

    # -- time stepping ------------------------------------------------------

    def cfl_dt(self, state):
        f = state.field
        g = self.params.gravity
        if self.config.linearized:
            speed = np.full_like(f.zeta, np.sqrt(g * self.params.depth_ref))
        else:
            h = np.maximum(self.params.depth_ref + f.zeta, self.config.h_min)
            speed = np.sqrt(f.vel[0] ** 2 + f.vel[1] ** 2) + np.sqrt(g * h)
        if self.config.eps > 0.0:
            speed = speed + self.config.eps * self.mesh.chi[:, None]
        width = np.minimum(self.mesh.width_r, self.mesh.width_s)
        return self.config.cfl * float(np.min(width / speed))

    def step(self, state, dt):
        """One SSP Runge-Kutta step (Heun for order 2, Euler for order 1)."""
        f = state.field
        z0, v0, p0 = f.zeta, f.vel, state.psi
        dz1, dv1, dp1, diag1 = self.rhs(z0, v0, p0, state.t, state.step_index)
        z1 = z0 + dt * dz1
        v1 = v0 + dt * dv1
        p1 = p0 + dt * dp1
        if self.config.order == 1:
            z_new, v_new, p_new = z1, v1, p1
            influx = dt * float(np.sum(diag1["gamma_mass_flux"] * self.mesh.rface_len[0]))
            diag = diag1
        else:
            dz2, dv2, dp2, diag2 = self.rhs(z1, v1, p1, state.t + dt, state.step_index)
            z_new = 0.5 * (z0 + z1 + dt * dz2)
            v_new = 0.5 * (v0 + v1 + dt * dv2)
            p_new = 0.5 * (p0 + p1 + dt * dp2)
            influx = 0.5 * dt * float(
                np.sum((diag1["gamma_mass_flux"] + diag2["gamma_mass_flux"])
                       * self.mesh.rface_len[0]))
            diag = diag2
        nv_trace = (diag["trace_state"][1][0] * self.gamma_nhat[:, 0]
                    + diag["trace_state"][1][1] * self.gamma_nhat[:, 1])
        flips = state.nv_sign_flips
        if np.min(nv_trace) < -1e-14 and np.max(nv_trace) > 1e-14:
            flips += 1
        new_field = ExteriorField(f.mesh, z_new, v_new, self.params)
        return SimState(field=new_field, psi=p_new, t=state.t + dt,
                        step_index=state.step_index + 1,
                        gamma_mass_flux=diag["gamma_mass_flux"],
                        gamma_mass_influx=influx,
                        trace_head=diag["trace_head"],
                        trace_state=diag["trace_state"],
                        nv_sign_flips=flips)


def cfl_dt(state, stepper):
    return stepper.cfl_dt(state)


def step(state, dt, stepper):
    """Advance one step with the plain scheme (stepper with eps = 0)."""
    return stepper.step(state, dt)


def regularized_step(state, dt, stepper):
    """Advance one step of the regularized scheme; with eps = 0 the stepper
    runs the identical code path as the plain step."""
    return stepper.step(state, dt)
