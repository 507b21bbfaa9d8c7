"""Initial-data construction and compatibility checking.

Smooth solutions require the time-derivative jets of the data to satisfy
algebraic constraints on the curve at t = 0: the j-th order condition is

    sum_k C(j, k) N . (h_{j-k} v_k) = Lambda psi_j on the curve,

where the jet levels follow from differentiating the equations in time,

    zeta_{j+1} = -div( sum_k C(j, k) h_{j-k} v_k ),
    v_{j+1}    = -grad( g zeta_j + (1/2) sum_k C(j, k) v_{j-k} . v_k ),
    psi_{j+1}  = -( g zeta_j + (1/2) sum_k C(j, k) v_{j-k} . v_k )|_curve,

with h_0 = H0 + zeta_0 and h_j = zeta_j for j >= 1. The module also
carries the exact algebra of the constant boundary matrix G_nor used both
here and by the regularized-data correction: G_nor W = F is solvable iff
F . (0, perp(N)) = 0, in which case W = G_nor F + alpha (0, perp(N)), and
a supplied SPD matrix with one scalar pins alpha.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from . import trace as tr
from .swe import g_nor, perp


@dataclass
class InitialJet:
    """Time-derivative arrays of the data at t = 0, levels 0..order."""

    order: int
    zeta_levels: list       # each (n_r, n_s)
    v_levels: list          # each (2, n_r, n_s)
    psi_levels: list        # each (n_s,)
    params: object
    mesh: object


def _trace_to_curve(mesh, f, order=2):
    """Extrapolate a cell field to the curve nodes (matching the solver)."""
    if order == 1:
        return f[0].copy()
    return 1.5 * f[0] - 0.5 * f[1]


def init_from_potential(mesh, zeta_in, phi_in, params, trace_order=2):
    """Velocity and boundary trace from a sampled potential.

    v = grad(phi) by the mesh gradient (discretely irrotational to the
    scheme's order), psi = trace of phi extracted with the same
    extrapolation the solver uses.
    """
    gx, gy = mesh.center_grid.gradient(phi_in)
    vel = np.stack([gx, gy])
    psi = _trace_to_curve(mesh, phi_in, order=trace_order)
    return np.asarray(zeta_in, dtype=float), vel, psi


def build_jet(mesh, zeta_in, v_in, psi_in, order, params, trace_order=2):
    """Jet levels by the literal time-derivative recursion, with the mesh
    gradient/divergence and binomial product sums. Capped at order 3."""
    if order > 3:
        raise ValueError("jet order capped at 3")
    grid = mesh.center_grid
    g = params.gravity
    zetas = [np.asarray(zeta_in, dtype=float)]
    vels = [np.asarray(v_in, dtype=float)]
    psis = [np.asarray(psi_in, dtype=float)]

    def h_level(j):
        if j == 0:
            return params.depth_ref + zetas[0]
        return zetas[j]

    for j in range(order):
        flux_x = np.zeros_like(zetas[0])
        flux_y = np.zeros_like(zetas[0])
        head = g * zetas[j]
        for k in range(j + 1):
            c = comb(j, k)
            flux_x += c * h_level(j - k) * vels[k][0]
            flux_y += c * h_level(j - k) * vels[k][1]
            head = head + 0.5 * c * (vels[j - k][0] * vels[k][0]
                                     + vels[j - k][1] * vels[k][1])
        zetas.append(-grid.divergence(flux_x, flux_y))
        hx, hy = grid.gradient(head)
        vels.append(-np.stack([hx, hy]))
        psis.append(-_trace_to_curve(mesh, head, order=trace_order))
    return InitialJet(order=order, zeta_levels=zetas, v_levels=vels,
                      psi_levels=psis, params=params, mesh=mesh)


def check_compatibility(jet, dtn_op, order, trace_order=2):
    """Residual of the order-j condition in the L2 and H^{-1/2} norms."""
    if order >= len(jet.psi_levels):
        raise ValueError(f"jet carries levels up to {len(jet.psi_levels) - 1}")
    mesh = jet.mesh
    curve = mesh.curve
    nhat = curve.normal

    def h_level(j):
        if j == 0:
            return jet.params.depth_ref + jet.zeta_levels[0]
        return jet.zeta_levels[j]

    total = np.zeros(curve.n_s)
    for k in range(order + 1):
        c = comb(order, k)
        hv_x = h_level(order - k) * jet.v_levels[k][0]
        hv_y = h_level(order - k) * jet.v_levels[k][1]
        total += c * (nhat[:, 0] * _trace_to_curve(mesh, hv_x, trace_order)
                      + nhat[:, 1] * _trace_to_curve(mesh, hv_y, trace_order))
    residual = total - dtn_op.apply(jet.psi_levels[order])
    res_field = tr.TraceField(curve, residual)
    return {
        "order": order,
        "l2": tr.sobolev_norm(res_field, 0.0),
        "h_m_half": tr.sobolev_norm(res_field, -0.5),
        "residual": residual,
    }


def compatibility_table(jet, dtn_op, max_order=None, trace_order=2):
    max_order = len(jet.psi_levels) - 1 if max_order is None else max_order
    return [check_compatibility(jet, dtn_op, j, trace_order) for j in range(max_order + 1)]


@dataclass
class GnorSystem:
    """One instance of the boundary-matrix algebra: solve G_nor W = F,
    optionally pinned by S0 (0, perp(N)) . W = f_tilde."""

    nvec: np.ndarray
    f_vec: np.ndarray
    s0: np.ndarray = None
    f_tilde: float = None


def solve_gnor_system(sys, tol=1e-12):
    """Exact solution of the algebraic boundary system.

    Returns (solvable, W, alpha, defect): unsolvable exactly when the
    compatibility scalar F . (0, perp(N)) exceeds tol in magnitude; with no
    pinning data alpha is reported as 0.
    """
    nvec = np.asarray(sys.nvec, dtype=float)
    f_vec = np.asarray(sys.f_vec, dtype=float)
    e_perp = np.concatenate([[0.0], perp(nvec)])
    defect = float(f_vec @ e_perp)
    if abs(defect) > tol:
        return False, None, None, defect
    gn = g_nor(nvec)
    w0 = gn @ f_vec
    if sys.s0 is None:
        alpha = 0.0
    else:
        s0 = np.asarray(sys.s0, dtype=float)
        denom = float(e_perp @ s0 @ e_perp)
        alpha = (float(sys.f_tilde) - float(s0 @ e_perp @ w0)) / denom
    w = w0 + alpha * e_perp
    return True, w, alpha, defect


def order0_trace_correction(jet, dtn_op, eps):
    """Boundary trace of the order-zero data correction for the regularized
    scheme: the normal mass-flux defect (J_eps Lambda J_eps - Lambda) psi_0
    lifted through the boundary-matrix algebra with the side conditions
    w[0] = 0 and (0, perp(N)) . w = 0."""
    curve = jet.mesh.curve
    psi0 = tr.TraceField(curve, jet.psi_levels[0])
    if eps == 0.0:
        gap = np.zeros(curve.n_s)
    else:
        smoothed = tr.smooth_jeps(
            tr.TraceField(curve, dtn_op.apply(tr.smooth_jeps(psi0, eps).values)), eps)
        gap = smoothed.values - dtn_op.apply(psi0.values)
    w = np.zeros((curve.n_s, 3))
    for k in range(curve.n_s):
        ok, wk, _, _ = solve_gnor_system(
            GnorSystem(nvec=curve.normal[k], f_vec=np.array([gap[k], 0.0, 0.0]),
                       s0=np.eye(3), f_tilde=0.0))
        assert ok
        w[k] = wk
    norm = tr.sobolev_norm(tr.TraceField(curve, gap), 0.0)
    return {"trace": w, "normal_defect": gap, "norm": norm}


def rate_unknowns_check(jet, dtn_op):
    """Discrete residuals of the first-order equivalence conditions.

    With sig = Sigma(u0) u1 (the transformed rate at t = 0), a jet built
    from compatible data satisfies S(u0) sig + div F(u0) = 0 identically by
    construction of the recursion, and the trace-rate slot must equal the
    level-1 trace. Returns the field residual and the psi identity defect.
    """
    mesh = jet.mesh
    params = jet.params
    g = params.gravity
    z0 = jet.zeta_levels[0]
    v0 = jet.v_levels[0]
    h0 = params.depth_ref + z0
    grid = mesh.center_grid
    # div F(u0) componentwise
    div_mass = grid.divergence(h0 * v0[0], h0 * v0[1])
    head = g * z0 + 0.5 * (v0[0] ** 2 + v0[1] ** 2)
    hx, hy = grid.gradient(head)
    # S(u) (Sigma(u) u1) = u1, so the residual is u1 + div F(u0)
    res0 = jet.zeta_levels[1] + div_mass
    res1 = jet.v_levels[1][0] + hx
    res2 = jet.v_levels[1][1] + hy
    psi_defect = jet.psi_levels[1] + _trace_to_curve(mesh, head)
    return {"field_residual": float(max(np.max(np.abs(res0)), np.max(np.abs(res1)),
                                        np.max(np.abs(res2)))),
            "psi_rate_defect": float(np.max(np.abs(psi_defect)))}


def collar_projection(mesh, zeta_in, phi_in, dtn_op, params, trace_order=2):
    """Correct a raw potential in a boundary collar so the order-zero
    condition holds at the discrete level.

    The normal-flux defect q(s) = Lambda psi - N . (h grad phi) on the
    curve is lifted into the collar as phi += q(s) r chi(r) / h(s), which
    changes the normal derivative on the curve by q / h and leaves the
    trace psi untouched.
    """
    chart = mesh.chart
    zeta_in = np.asarray(zeta_in, dtype=float)
    phi = np.asarray(phi_in, dtype=float).copy()
    _, vel, psi = init_from_potential(mesh, zeta_in, phi, params, trace_order)
    h_tr = params.depth_ref + _trace_to_curve(mesh, zeta_in, trace_order)
    nhat = mesh.curve.normal
    flux_tr = h_tr * (nhat[:, 0] * _trace_to_curve(mesh, vel[0], trace_order)
                      + nhat[:, 1] * _trace_to_curve(mesh, vel[1], trace_order))
    q = dtn_op.apply(psi) - flux_tr
    # collar profile: r chi(r) with chi = 1 at the curve
    r = mesh.r_centers
    profile = r * mesh.chi
    phi += profile[:, None] * (q / h_tr)[None, :]
    return phi, q
