"""Independent 1D radial solver for radially symmetric scenarios.

With a circular obstacle, radially symmetric depth under it, and radially
symmetric data, the trace of the boundary potential is constant along the
curve, the boundary operator annihilates it, and the coupled problem
collapses to the shallow water system in the radius:

    d zeta / dt + (1/rho) d(rho h u)/d rho = 0,
    d u / dt + d(g zeta + u^2 / 2)/d rho = 0,

on [R, R + width] with zero mass flux at the inner face and a wall or
characteristic state outside, plus the scalar ODE for the trace value.
The discretization mirrors the 2D scheme (Rusanov flux with dissipation on
the propagating pair, minmod MUSCL, Heun stages, identical trace
extrapolation) but is an independent one-dimensional code path in exact
cylindrical geometry, giving a matched-resolution oracle for the 2D
curvilinear kernels.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class RadialState:
    zeta: np.ndarray
    u: np.ndarray
    psi: float
    t: float


class RadialSolver:
    def __init__(self, r_inner, width, n, gravity=1.0, depth_ref=1.0,
                 cfl=0.45, order=2, outer="wall"):
        self.g = gravity
        self.H0 = depth_ref
        self.cfl = cfl
        self.order = order
        self.outer = outer
        self.edges = r_inner + np.linspace(0.0, width, n + 1)
        self.centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        self.dr = self.edges[1] - self.edges[0]
        self.vol = 0.5 * (self.edges[1:] ** 2 - self.edges[:-1] ** 2)

    def _minmod(self, a, b):
        return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))

    def _faces(self, q):
        """Left/right face states of a cell field q, interior faces only."""
        if self.order == 1:
            return q[:-1], q[1:]
        sl = np.zeros_like(q)
        sl[1:-1] = self._minmod(q[2:] - q[1:-1], q[1:-1] - q[:-2])
        sl[0] = q[1] - q[0]
        sl[-1] = q[-1] - q[-2]
        return q[:-1] + 0.5 * sl[:-1], q[1:] - 0.5 * sl[1:]

    def _trace(self, q, side):
        if self.order == 1:
            return q[0] if side == "inner" else q[-1]
        if side == "inner":
            return 1.5 * q[0] - 0.5 * q[1]
        return 1.5 * q[-1] - 0.5 * q[-2]

    def _rusanov_pair(self, zl, ul, zr, ur):
        hl = self.H0 + zl
        hr = self.H0 + zr
        a = np.maximum(np.abs(ul) + np.sqrt(self.g * hl),
                       np.abs(ur) + np.sqrt(self.g * hr))
        f_mass = 0.5 * (hl * ul + hr * ur) - 0.5 * a * (zr - zl)
        head_l = self.g * zl + 0.5 * ul ** 2
        head_r = self.g * zr + 0.5 * ur ** 2
        f_head = 0.5 * (head_l + head_r) - 0.5 * a * (ur - ul)
        return f_mass, f_head

    def rhs(self, zeta, u):
        zl, zr = self._faces(zeta)
        ul, ur = self._faces(u)
        f_mass = np.empty(zeta.size + 1)
        f_head = np.empty(zeta.size + 1)
        f_mass[1:-1], f_head[1:-1] = self._rusanov_pair(zl, ul, zr, ur)
        # inner face: zero mass flux (constant trace is annihilated)
        z_tr = self._trace(zeta, "inner")
        u_tr = self._trace(u, "inner")
        f_mass[0], f_head[0] = self._rusanov_pair(z_tr, -u_tr, z_tr, u_tr)
        # outer face
        z_out = self._trace(zeta, "outer")
        u_out = self._trace(u, "outer")
        if self.outer == "wall":
            f_mass[-1], f_head[-1] = self._rusanov_pair(z_out, u_out, z_out, -u_out)
        else:
            c_in = np.sqrt(self.g * max(self.H0 + z_out, 1e-14))
            c_rest = np.sqrt(self.g * self.H0)
            r_plus = u_out + 2.0 * c_in
            r_minus = -2.0 * c_rest
            u_g = 0.5 * (r_plus + r_minus)
            c_g = 0.25 * (r_plus - r_minus)
            z_g = c_g ** 2 / self.g - self.H0
            f_mass[-1], f_head[-1] = self._rusanov_pair(z_out, u_out, z_g, u_g)
        dzeta = -(self.edges[1:] * f_mass[1:] - self.edges[:-1] * f_mass[:-1]) / self.vol
        du = -(f_head[1:] - f_head[:-1]) / self.dr
        dpsi = -(self.g * z_tr + 0.5 * u_tr ** 2)
        return dzeta, du, dpsi

    def cfl_dt(self, state):
        speed = np.abs(state.u) + np.sqrt(self.g * (self.H0 + state.zeta))
        return self.cfl * float(np.min(self.dr / speed))

    def step(self, state, dt):
        dz1, du1, dp1 = self.rhs(state.zeta, state.u)
        z1 = state.zeta + dt * dz1
        u1 = state.u + dt * du1
        p1 = state.psi + dt * dp1
        if self.order == 1:
            return RadialState(z1, u1, p1, state.t + dt)
        dz2, du2, dp2 = self.rhs(z1, u1)
        return RadialState(0.5 * (state.zeta + z1 + dt * dz2),
                           0.5 * (state.u + u1 + dt * du2),
                           0.5 * (state.psi + p1 + dt * dp2),
                           state.t + dt)

    def run(self, zeta0, u0, t_end, psi0=0.0):
        state = RadialState(np.asarray(zeta0, dtype=float).copy(),
                            np.asarray(u0, dtype=float).copy(), psi0, 0.0)
        while state.t < t_end - 1e-14:
            dt = min(self.cfl_dt(state), t_end - state.t)
            state = self.step(state, dt)
        return state
