"""Interior elliptic solvers and the Dirichlet-to-Neumann operator.

The water column trapped under the obstacle carries a potential that
satisfies div(h_i grad(phi)) = 0 with Dirichlet data on the contact curve.
The boundary operator taking the Dirichlet trace to the conormal flux
N . (h_i grad(phi)) closes the exterior problem. Because h_i is time
independent the operator is a fixed linear map and is assembled once per
run as a dense matrix on the curve nodes.

Two interior backends are provided:

* a spectral solver (Fourier in the angle, Chebyshev collocation in the
  radius) restricted to circular curves with radially symmetric depth,
  used as the oracle-grade reference;
* a second-order finite-element solver on a star-shaped mapped grid for
  general smooth curves and depth profiles, with the boundary flux
  extracted by a one-sided fourth-order stencil along the radial mesh
  direction.

The assembled matrix is symmetrized in the weighted sense after assembly;
the pre-symmetrization defect is recorded on the operator, not hidden.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import GeometryError, InvariantViolation
from .grids import MappedGrid
from .trace import TraceField, d_tan, jeps_multiplier

_FLUX_STENCIL = np.array([25.0, -48.0, 36.0, -16.0, 3.0]) / 12.0


class InteriorBathymetry:
    """Depth of the water column under the obstacle, h_i = H0 + zeta_w.

    Must stay above a positive floor c0 everywhere; violation is detected
    when the field is sampled on a solver mesh.
    """

    def __init__(self, func, c0=1e-8, radial_profile=None, name="h_i"):
        self.func = func
        self.c0 = float(c0)
        self.radial_profile = radial_profile  # (value(rho), derivative(rho)) or None
        self.name = name

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(self.func(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:-1])
        return vals

    def validate_on(self, points):
        vals = self(points)
        if np.min(vals) < self.c0:
            raise InvariantViolation("interior depth positivity h_i >= c0",
                                     float(np.min(vals)), self.c0)
        return vals

    @classmethod
    def constant(cls, value, c0=None):
        value = float(value)
        prof = (lambda rho: np.full_like(np.asarray(rho, dtype=float), value),
                lambda rho: np.zeros_like(np.asarray(rho, dtype=float)))
        return cls(lambda pts: np.full(pts.shape[0], value), c0=c0 or 0.5 * value,
                   radial_profile=prof, name=f"h_i={value}")

    @classmethod
    def radial_poly(cls, coeffs, center=(0.0, 0.0), c0=1e-8):
        """Polynomial in rho: coeffs are (c_0, c_1, c_2, ...) for sum c_m rho^m."""
        coeffs = np.asarray(coeffs, dtype=float)
        cx, cy = center
        dcoeffs = coeffs[1:] * np.arange(1, coeffs.size) if coeffs.size > 1 else np.zeros(1)

        def prof(rho):
            return np.polyval(coeffs[::-1], np.asarray(rho, dtype=float))

        def dprof(rho):
            return np.polyval(dcoeffs[::-1], np.asarray(rho, dtype=float))

        def func(pts):
            rho = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
            return prof(rho)

        return cls(func, c0=c0, radial_profile=(prof, dprof),
                   name="h_i=poly(" + ",".join(f"{c:g}" for c in coeffs) + ")")


@dataclass
class InteriorSolution:
    """Discrete interior potential with its linear-system residual."""

    points: np.ndarray    # (n_rho, n_s, 2) ring nodes, outermost ring on the curve
    phi: np.ndarray       # (n_rho, n_s)
    residual: float
    center_point: np.ndarray = None
    center_value: float = 0.0


def _chebyshev_nodes_and_diff(n, length):
    """Chebyshev points on [0, length] (descending) and differentiation matrix."""
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    big_x = np.tile(x, (n + 1, 1)).T
    dx = big_x - big_x.T + np.eye(n + 1)
    d_mat = np.outer(c, 1.0 / c) / dx
    d_mat -= np.diag(d_mat.sum(axis=1))
    # map [-1, 1] -> [0, length], keeping node 0 at rho = length
    rho = 0.5 * length * (x + 1.0)
    return rho, d_mat * (2.0 / length)


def disk_geometry(curve, rtol=1e-8):
    """Center and radius when the curve is a circle, else None."""
    center = curve.gamma.mean(axis=0)
    radii = np.linalg.norm(curve.gamma - center, axis=1)
    r_mean = float(radii.mean())
    if np.max(np.abs(radii - r_mean)) > rtol * r_mean:
        return None
    return center, r_mean


class DiskSpectralInterior:
    """Fourier-in-angle times Chebyshev-in-radius solver on a disk.

    Requires a circular curve and radially symmetric depth. Per angular
    mode n >= 1 the radial factor is written as rho^n chi(rho) with chi
    smooth; chi solves

        h rho chi'' + (h' rho + (2n+1) h) chi' + n h' chi = 0,  chi(R) = 1,

    which is regular down to rho = 0, and the mode symbol of the boundary
    operator is h(R) (n / R + chi'(R)).
    """

    backend = "spectral"

    def __init__(self, curve, bathy, n_cheb=64):
        geo = disk_geometry(curve)
        if geo is None:
            raise GeometryError("spectral interior backend needs a circular curve")
        if bathy.radial_profile is None:
            raise GeometryError("spectral interior backend needs a radial depth profile")
        self.curve = curve
        self.bathy = bathy
        self.center, self.radius = geo
        self.n_cheb = n_cheb
        self.rho, self.diff = _chebyshev_nodes_and_diff(n_cheb, self.radius)
        prof, dprof = bathy.radial_profile
        self.h_vals = np.asarray(prof(self.rho), dtype=float)
        self.dh_vals = np.asarray(dprof(self.rho), dtype=float)
        if np.min(self.h_vals) < bathy.c0:
            raise InvariantViolation("interior depth positivity h_i >= c0",
                                     float(np.min(self.h_vals)), bathy.c0)
        self._chi_cache = {}

    def _chi(self, n):
        if n in self._chi_cache:
            return self._chi_cache[n]
        d1 = self.diff
        d2 = d1 @ d1
        a = (np.diag(self.h_vals * self.rho) @ d2
             + np.diag(self.dh_vals * self.rho + (2 * n + 1) * self.h_vals) @ d1
             + n * np.diag(self.dh_vals))
        rhs = np.zeros(self.n_cheb + 1)
        a[0, :] = 0.0
        a[0, 0] = 1.0
        rhs[0] = 1.0
        chi = np.linalg.solve(a, rhs)
        res = float(np.max(np.abs(a @ chi - rhs)))
        self._chi_cache[n] = (chi, res)
        return chi, res

    def symbol(self, n):
        """Boundary-operator symbol for angular mode n (arc-length mode n)."""
        n = abs(int(n))
        if n == 0:
            return 0.0
        chi, _ = self._chi(n)
        dchi_r = float((self.diff @ chi)[0])
        return float(self.h_vals[0] * (n / self.radius + dchi_r))

    def symbols(self):
        return np.array([self.symbol(n) for n in range(self.curve.n_s // 2 + 1)])

    def flux(self, psi_values):
        mult = self.symbols()
        return np.fft.irfft(np.fft.rfft(psi_values) * mult, n=self.curve.n_s)

    def solve(self, psi_values):
        n_s = self.curve.n_s
        coeff = np.fft.rfft(psi_values)
        profiles = np.zeros((n_s // 2 + 1, self.n_cheb + 1))
        res = 0.0
        with np.errstate(under="ignore"):
            for n in range(n_s // 2 + 1):
                if n == 0:
                    profiles[0] = 1.0
                    continue
                chi, r = self._chi(n)
                profiles[n] = (self.rho / self.radius) ** n * chi
                res = max(res, r)
        # synthesize on the polar tensor grid (rho nodes x curve nodes)
        phi = np.fft.irfft(coeff[None, :] * profiles.T, n=n_s, axis=1)
        theta = np.arctan2(self.curve.gamma[:, 1] - self.center[1],
                           self.curve.gamma[:, 0] - self.center[0])
        pts = (self.center[None, None, :]
               + self.rho[:, None, None] * np.stack([np.cos(theta), np.sin(theta)],
                                                    axis=-1)[None, :, :])
        # order rings from the center outwards, boundary ring last
        order = np.argsort(self.rho)
        sol = InteriorSolution(points=pts[order][1:], phi=phi[order][1:],
                               residual=res,
                               center_point=self.center.copy(),
                               center_value=float(phi[order][0].mean()))
        return sol


def _tri_stiffness(p0, p1, p2, h_c):
    x = np.stack([p0[:, 0], p1[:, 0], p2[:, 0]], axis=1)
    y = np.stack([p0[:, 1], p1[:, 1], p2[:, 1]], axis=1)
    area2 = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
             - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    scale = h_c / (2.0 * area2)
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) * scale[:, None, None]
    return ke


_Q1_GP = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) / np.sqrt(3.0)


def _quad_stiffness(pts, h_fn):
    """Stiffness of isoparametric Q1 quads, pts shape (ne, 4, 2)."""
    ne = pts.shape[0]
    ke = np.zeros((ne, 4, 4))
    for gx, gy in _Q1_GP:
        dshape = 0.25 * np.array([
            [-(1 - gy), -(1 - gx)],
            [(1 - gy), -(1 + gx)],
            [(1 + gy), (1 + gx)],
            [-(1 + gy), (1 - gx)],
        ])  # (4, 2) d(N_a)/d(xi, eta)
        jac = np.einsum("eak,al->ekl", pts, dshape)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv /= det[:, None, None]
        grads = np.einsum("al,elk->eak", dshape, inv)
        xgp = 0.25 * ((1 - gx) * (1 - gy) * pts[:, 0] + (1 + gx) * (1 - gy) * pts[:, 1]
                      + (1 + gx) * (1 + gy) * pts[:, 2] + (1 - gx) * (1 + gy) * pts[:, 3])
        hv = h_fn(xgp)
        ke += np.einsum("eak,ebk->eab", grads, grads) * (hv * det)[:, None, None]
    return ke


class StarFemInterior:
    """P1/Q1 finite elements on a star-shaped mapped polar grid.

    Rays run from the curve centroid to the boundary nodes; ring i sits at
    fraction i / n_rho along each ray, the innermost ring collapsing to a
    single center node fanned by triangles. Restricted to star-shaped
    curves; the spectral backend covers the oracle cases.
    """

    backend = "fd"

    def __init__(self, curve, bathy, n_rho=48):
        if n_rho < 8:
            raise GeometryError("interior mesh needs n_rho >= 8")
        self.curve = curve
        self.bathy = bathy
        self.n_rho = n_rho
        n_s = curve.n_s
        center = curve.gamma.mean(axis=0)
        rays = curve.gamma - center
        if np.min(np.sum(rays * curve.normal, axis=1)) <= 0.0:
            raise GeometryError("curve is not star shaped with respect to its centroid")
        self.center = center
        frac = np.arange(1, n_rho + 1)[:, None, None] / n_rho
        self.ring_points = center[None, None, :] + frac * rays[None, :, :]  # (n_rho, n_s, 2)
        bathy.validate_on(self.ring_points.reshape(-1, 2))
        bathy.validate_on(center[None, :])

        self._assemble()

    def _node_id(self, ring, k):
        # ring in 1..n_rho (ring_points index ring-1), center node is 0
        return 1 + (ring - 1) * self.curve.n_s + (k % self.curve.n_s)

    def _assemble(self):
        n_s = self.curve.n_s
        n_rho = self.n_rho
        n_nodes = 1 + n_rho * n_s
        rows, cols, vals = [], [], []

        k_idx = np.arange(n_s)
        kp = (k_idx + 1) % n_s
        # center fan triangles
        p0 = np.tile(self.center, (n_s, 1))
        p1 = self.ring_points[0, k_idx]
        p2 = self.ring_points[0, kp]
        h_c = self.bathy((p0 + p1 + p2) / 3.0)
        ke = _tri_stiffness(p0, p1, p2, h_c)
        conn = np.stack([np.zeros(n_s, dtype=int),
                         self._node_id(1, k_idx), self._node_id(1, kp)], axis=1)
        for a in range(3):
            for b in range(3):
                rows.append(conn[:, a])
                cols.append(conn[:, b])
                vals.append(ke[:, a, b])

        # quad rings
        for ring in range(1, n_rho):
            pa = self.ring_points[ring - 1, k_idx]
            pb = self.ring_points[ring, k_idx]
            pc = self.ring_points[ring, kp]
            pd = self.ring_points[ring - 1, kp]
            pts = np.stack([pa, pb, pc, pd], axis=1)
            ke = _quad_stiffness(pts, self.bathy)
            conn = np.stack([self._node_id(ring, k_idx), self._node_id(ring + 1, k_idx),
                             self._node_id(ring + 1, kp), self._node_id(ring, kp)], axis=1)
            for a in range(4):
                for b in range(4):
                    rows.append(conn[:, a])
                    cols.append(conn[:, b])
                    vals.append(ke[:, a, b])

        k_mat = sp.coo_matrix((np.concatenate(vals),
                               (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n_nodes, n_nodes)).tocsc()
        boundary = np.array([self._node_id(n_rho, k) for k in range(n_s)])
        interior = np.setdiff1d(np.arange(n_nodes), boundary)
        self._boundary = boundary
        self._interior = interior
        self._k_full = k_mat
        self._k_ii_mat = k_mat[interior][:, interior].tocsc()
        self._k_ib = k_mat[interior][:, boundary].tocsc()
        self._k_ii = splu(self._k_ii_mat)

    def _interior_phi(self, psi_values):
        return self._k_ii.solve(-(self._k_ib @ psi_values))

    def _full_vector(self, psi_values, phi_i=None):
        if phi_i is None:
            phi_i = self._interior_phi(psi_values)
        full = np.empty(1 + self.n_rho * self.curve.n_s)
        full[self._interior] = phi_i
        full[self._boundary] = psi_values
        return full

    def energy_form(self, psi1, psi2):
        """FEM quadrature of integral h_i grad(phi1) . grad(phi2)."""
        f1 = self._full_vector(np.asarray(psi1, dtype=float))
        f2 = self._full_vector(np.asarray(psi2, dtype=float))
        return float(f1 @ (self._k_full @ f2))

    def solve(self, psi_values):
        psi_values = np.asarray(psi_values, dtype=float)
        phi_i = self._interior_phi(psi_values)
        res = float(np.max(np.abs(self._k_ii_mat @ phi_i + self._k_ib @ psi_values)))
        n_s = self.curve.n_s
        phi = np.empty((self.n_rho, n_s))
        phi[-1] = psi_values
        phi[:-1] = phi_i[1:].reshape(self.n_rho - 1, n_s)
        return InteriorSolution(points=self.ring_points, phi=phi, residual=res,
                                center_point=self.center.copy(),
                                center_value=float(phi_i[0]))

    def flux(self, psi_values, phi_full=None):
        """Conormal flux at the boundary nodes via the one-sided stencil.

        The radial derivative uses the five outermost rings along each ray
        (fourth order); the angular derivative of the trace is spectral.
        The Cartesian gradient follows from the ray-map Jacobian.
        """
        psi_values = np.asarray(psi_values, dtype=float)
        if phi_full is None:
            phi_full = self.solve(psi_values).phi
        n_s = self.curve.n_s
        drho = 1.0 / self.n_rho
        layers = np.stack([phi_full[-1 - m] for m in range(5)], axis=0)  # (5, n_s)
        dphi_drho = _FLUX_STENCIL @ layers / drho
        dpsi_ds = d_tan(TraceField(self.curve, psi_values)).values
        rays = self.curve.gamma - self.center[None, :]
        tan = self.curve.tangent
        det = rays[:, 0] * tan[:, 1] - rays[:, 1] * tan[:, 0]
        grad_x = (tan[:, 1] * dphi_drho - rays[:, 1] * dpsi_ds) / det
        grad_y = (-tan[:, 0] * dphi_drho + rays[:, 0] * dpsi_ds) / det
        h_b = self.bathy(self.curve.gamma)
        return h_b * (self.curve.normal[:, 0] * grad_x + self.curve.normal[:, 1] * grad_y)


@dataclass
class DtNOperator:
    """Dense realization of the boundary flux map on the curve nodes.

    The pairing is nodal values against trapezoid weights. Invariants
    (weighted symmetry, positive semidefiniteness with constants in the
    kernel) are enforced at assembly; ``presym_defect`` records how far the
    raw columns were from symmetric before the weighted symmetrization.
    """

    curve: object
    matrix: np.ndarray
    weights: np.ndarray
    backend: str = "unknown"
    presym_defect: float = 0.0
    meta: dict = field(default_factory=dict)

    def apply(self, psi):
        if isinstance(psi, TraceField):
            return TraceField(self.curve, self.matrix @ psi.values)
        return self.matrix @ np.asarray(psi, dtype=float)

    def inner(self, f, g):
        fv = f.values if isinstance(f, TraceField) else np.asarray(f)
        gv = g.values if isinstance(g, TraceField) else np.asarray(g)
        return float(np.sum(self.weights * fv * gv))

    def energy(self, psi):
        """Boundary energy 0.5 <psi, Lambda psi>."""
        lam = self.apply(psi)
        return 0.5 * self.inner(psi, lam)

    def check(self, tol_sym=1e-10, tol_psd=1e-12, tol_const=1e-10, raise_on_fail=True):
        w = self.weights
        wm = w[:, None] * self.matrix
        sym = float(np.max(np.abs(wm - wm.T))) / max(float(np.max(np.abs(wm))), 1e-300)
        const = np.ones(self.curve.n_s)
        const_defect = float(np.max(np.abs(self.matrix @ const)))
        eigs = np.linalg.eigvalsh(0.5 * (wm + wm.T))
        min_eig = float(eigs.min()) / max(float(eigs.max()), 1e-300)
        report = {"symmetry": sym, "const": const_defect, "min_eig": min_eig}
        if raise_on_fail:
            if sym > tol_sym:
                raise InvariantViolation("DtN weighted symmetry", sym, tol_sym)
            if const_defect > tol_const:
                raise InvariantViolation("DtN on constants", const_defect, tol_const)
            if min_eig < -tol_psd:
                raise InvariantViolation("DtN positive semidefiniteness", -min_eig, tol_psd)
        return report

    def dump(self, path):
        n_s = self.curve.n_s
        with open(path, "wb") as fh:
            fh.write(b"DTN1")
            fh.write(struct.pack("<Q", n_s))
            fh.write(self.matrix.astype("<f8").tobytes(order="C"))

    @staticmethod
    def load(path, curve=None):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != b"DTN1":
                raise ValueError(f"bad magic {magic!r}, expected DTN1")
            (n_s,) = struct.unpack("<Q", fh.read(8))
            data = np.frombuffer(fh.read(8 * n_s * n_s), dtype="<f8").reshape(n_s, n_s)
        if curve is not None and curve.n_s != n_s:
            raise ValueError("curve size does not match stored operator")
        weights = None if curve is None else np.full(n_s, curve.ds)
        return DtNOperator(curve=curve, matrix=data.copy(), weights=weights,
                           backend="file")


def dtn_apply(op, psi):
    return op.apply(psi)


def make_interior_solver(curve, bathy, backend="auto", n_rho=48, n_cheb=64):
    if backend == "auto":
        backend = ("spectral"
                   if disk_geometry(curve) is not None and bathy.radial_profile is not None
                   else "fd")
    if backend == "spectral":
        return DiskSpectralInterior(curve, bathy, n_cheb=n_cheb)
    if backend == "fd":
        return StarFemInterior(curve, bathy, n_rho=n_rho)
    raise ValueError(f"unknown interior backend {backend!r}")


def solve_interior(bathy, psi, backend="auto", n_rho=48, solver=None):
    """Solve the interior Dirichlet problem for one trace."""
    solver = solver or make_interior_solver(psi.curve, bathy, backend=backend, n_rho=n_rho)
    return solver.solve(psi.values), solver


def assemble_dtn(bathy, curve, solver="auto", n_rho=48, n_cheb=64, check=True):
    """Build the dense boundary operator by applying the flux map to the
    nodal basis. Assembly is rejected when the measured structural defects
    exceed tolerance."""
    interior = make_interior_solver(curve, bathy, backend=solver, n_rho=n_rho, n_cheb=n_cheb)
    n_s = curve.n_s
    weights = np.full(n_s, curve.ds)

    if interior.backend == "spectral":
        mult = interior.symbols()
        eye = np.eye(n_s)
        mat = np.fft.irfft(np.fft.rfft(eye, axis=0) * mult[:, None], n=n_s, axis=0)
        presym = float(np.max(np.abs(mat - mat.T))) / max(float(np.max(np.abs(mat))), 1e-300)
        mat = 0.5 * (mat + mat.T)
    else:
        rhs = -interior._k_ib.toarray()
        phi_cols = interior._k_ii.solve(rhs)  # (n_interior, n_s)
        mat = np.empty((n_s, n_s))
        n_body = interior.n_rho - 1
        for j in range(n_s):
            basis = np.zeros(n_s)
            basis[j] = 1.0
            phi = np.empty((interior.n_rho, n_s))
            phi[-1] = basis
            phi[:-1] = phi_cols[1:, j].reshape(n_body, n_s)
            mat[:, j] = interior.flux(basis, phi_full=phi)
        presym = float(np.max(np.abs(mat - mat.T))) / max(float(np.max(np.abs(mat))), 1e-300)
        # uniform trapezoid weights make weighted symmetrization the plain one
        mat = 0.5 * (mat + mat.T)
        # project out the constant mode exactly (kernel of the continuous map)
        proj = np.eye(n_s) - np.outer(np.ones(n_s), weights) / weights.sum()
        mat = proj @ mat @ proj

    op = DtNOperator(curve=curve, matrix=mat, weights=weights,
                     backend=interior.backend, presym_defect=presym,
                     meta={"bathy": bathy.name, "n_rho": getattr(interior, "n_rho", None)})
    if check:
        op.check()
    return op


def recover_interior(interior_solver, psi, psi_t, zeta_w, p_atm, rho, gravity):
    """Interior velocity and surface pressure from the boundary trace.

    The velocity is the gradient of the solved potential; the pressure uses
    the unsteady Bernoulli relation with d(phi)/dt given by the harmonic
    extension of the trace rate (h_i is time independent, so extension and
    time derivative commute).
    """
    sol = interior_solver.solve(np.asarray(psi.values if isinstance(psi, TraceField) else psi,
                                           dtype=float))
    sol_t = interior_solver.solve(np.asarray(psi_t.values if isinstance(psi_t, TraceField)
                                             else psi_t, dtype=float))
    grid = MappedGrid(sol.points, periodic_axes=(False, True))
    vx, vy = grid.gradient(sol.phi)
    speed2 = vx ** 2 + vy ** 2
    zw = np.asarray(zeta_w, dtype=float)
    pressure = p_atm - rho * (sol_t.phi + 0.5 * speed2 + gravity * zw)
    return {"points": sol.points, "velocity": np.stack([vx, vy], axis=0),
            "pressure": pressure, "phi": sol.phi, "phi_t": sol_t.phi,
            "grid": grid, "solution": sol}


def dirichlet_energy(interior_solver, psi1, psi2):
    """Quadrature value of integral h_i grad(phi1) . grad(phi2) over the
    interior, for the energy identity against <Lambda psi1, psi2>.

    The FEM backend evaluates its own stiffness form (exact for the
    discrete solutions); the spectral backend integrates the reconstructed
    gradients on its polar grid, whose Chebyshev clustering makes the
    uncovered center patch negligible.
    """
    v1 = psi1.values if isinstance(psi1, TraceField) else np.asarray(psi1)
    v2 = psi2.values if isinstance(psi2, TraceField) else np.asarray(psi2)
    if hasattr(interior_solver, "energy_form"):
        return interior_solver.energy_form(v1, v2)
    s1 = interior_solver.solve(v1)
    s2 = interior_solver.solve(v2)
    grid = MappedGrid(s1.points, periodic_axes=(False, True))
    g1x, g1y = grid.gradient(s1.phi)
    g2x, g2y = grid.gradient(s2.phi)
    h_vals = interior_solver.bathy(s1.points)
    # Riemann sum over index cells; Jacobian is area per unit index square
    area = np.abs(grid.jac_det)
    integrand = h_vals * (g1x * g2x + g1y * g2y)
    return float(np.sum(integrand * area))


def smoothed_dtn_matrix(op, eps):
    """Dense matrix of J_eps Lambda J_eps for the regularized coupling."""
    if eps == 0.0:
        return op.matrix
    mult = jeps_multiplier(op.curve, eps)
    n_s = op.curve.n_s

    def smooth(mat_side):
        return np.fft.irfft(np.fft.rfft(mat_side, axis=0) * mult[:, None], n=n_s, axis=0)

    return smooth(smooth(op.matrix.T).T)
