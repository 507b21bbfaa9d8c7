"""Pointwise shallow-water algebra.

Conservative fluxes of the irrotational form of the equations, the
quasilinear matrix family built from two constant symmetric structure
matrices, the Friedrichs symmetrizer, boundary eigenstructure, Bernoulli
head, and the small linear-algebra kernels used by the compatibility and
regularization machinery. Everything here is pure and pointwise; grid
concerns live in the mesh and solver modules.

Conventions: the state is u = (zeta, v1, v2), h = H0 + zeta, and the flow
is subcritical when g h - |v|^2 > 0. For a 3-vector w we call w[0] the
height slot and w[1:] the velocity slot; perp(v) = (-v2, v1).
"""

from dataclasses import dataclass

import numpy as np

from .errors import SolverAbort

G1 = np.array([[0.0, 1.0, 0.0],
               [1.0, 0.0, 0.0],
               [0.0, 0.0, 0.0]])
G2 = np.array([[0.0, 0.0, 1.0],
               [0.0, 0.0, 0.0],
               [1.0, 0.0, 0.0]])


def g_nor(nvec):
    """Constant-coefficient boundary matrix N1 G1 + N2 G2."""
    return nvec[0] * G1 + nvec[1] * G2


def perp(v):
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass(frozen=True)
class PhysParams:
    gravity: float = 1.0
    depth_ref: float = 1.0   # H0
    density: float = 1000.0  # rho


@dataclass
class FlowState:
    """Surface elevation and velocity at a point (or arrays of points)."""

    zeta: np.ndarray
    v: np.ndarray          # (..., 2)
    params: PhysParams

    @property
    def h(self):
        return self.params.depth_ref + np.asarray(self.zeta)

    @property
    def subcritical_margin(self):
        v = np.asarray(self.v)
        return self.params.gravity * self.h - np.sum(v * v, axis=-1)


def flux(u):
    """Conservative fluxes F1, F2 of the irrotational system.

    F_j = (h v_j, (g zeta + |v|^2 / 2) e_j); raises on non-positive depth.
    """
    h = u.h
    if np.any(h <= 0.0):
        raise SolverAbort("wet_dry", detail="flux evaluated at non-positive depth")
    g = u.params.gravity
    zeta = np.asarray(u.zeta, dtype=float)
    v = np.asarray(u.v, dtype=float)
    head = g * zeta + 0.5 * np.sum(v * v, axis=-1)
    f1 = np.stack([h * v[..., 0], head, np.zeros_like(head)], axis=-1)
    f2 = np.stack([h * v[..., 1], np.zeros_like(head), head], axis=-1)
    return f1, f2


def bernoulli(u):
    """Bernoulli pressure rho (g zeta + |v|^2 / 2)."""
    v = np.asarray(u.v, dtype=float)
    return u.params.density * (u.params.gravity * np.asarray(u.zeta)
                               + 0.5 * np.sum(v * v, axis=-1))


def sigma_matrix(u):
    """Symmetric matrix [[g, v^T], [v, h I]]; positive definite iff subcritical."""
    g = u.params.gravity
    h = float(u.h)
    v = np.asarray(u.v, dtype=float)
    return np.array([[g, v[0], v[1]],
                     [v[0], h, 0.0],
                     [v[1], 0.0, h]])


def symmetrizer(u):
    """Closed-form inverse of sigma_matrix: the Friedrichs symmetrizer.

    S = (g h - |v|^2)^{-1} [[h, -v^T], [-v, g I - perp(v) perp(v)^T / h]].
    """
    g = u.params.gravity
    h = float(u.h)
    v = np.asarray(u.v, dtype=float)
    margin = g * h - v @ v
    if margin <= 0.0:
        raise SolverAbort("subcritical", detail="symmetrizer needs g h - |v|^2 > 0")
    vp = perp(v)
    block = g * np.eye(2) - np.outer(vp, vp) / h
    s_mat = np.empty((3, 3))
    s_mat[0, 0] = h
    s_mat[0, 1:] = -v
    s_mat[1:, 0] = -v
    s_mat[1:, 1:] = block
    return s_mat / margin


@dataclass
class QuasilinearPack:
    """Matrix family at one state: Sigma, S = Sigma^{-1}, A_j = G_j Sigma."""

    sigma: np.ndarray
    s_mat: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray


def quasilinear_pack(u):
    if np.ndim(u.zeta) != 0:
        raise ValueError("quasilinear_pack is pointwise; pass a scalar state")
    if float(u.subcritical_margin) <= 0.0:
        raise SolverAbort("subcritical", detail="quasilinear pack needs a subcritical state")
    sig = sigma_matrix(u)
    s_mat = symmetrizer(u)
    return QuasilinearPack(sigma=sig, s_mat=s_mat,
                           a1=G1 @ sig, a2=G2 @ sig, g1=G1, g2=G2)


def boundary_matrix(u, nvec):
    """Quasilinear boundary matrix of the original system at a unit normal."""
    g = u.params.gravity
    h = float(u.h)
    v = np.asarray(u.v, dtype=float)
    nv = float(v @ nvec)
    top = np.concatenate([[nv], h * nvec])
    mid = np.concatenate([[g * nvec[0]], [nv, 0.0]])
    bot = np.concatenate([[g * nvec[1]], [0.0, nv]])
    return np.stack([top, mid, bot])


def boundary_eigenstructure(u, nvec):
    """Eigenvalues and left eigenvectors of the boundary matrix.

    Eigenvalues are (N.v, N.v + c, N.v - c) with c = sqrt(g h); the left
    eigenvectors are proportional to (0, perp(N)) and (+-c, h N). They are
    returned unit length with the sign fixed by the first nonzero entry.
    """
    if float(u.subcritical_margin) <= 0.0:
        raise SolverAbort("subcritical", detail="eigenstructure needs a subcritical state")
    g = u.params.gravity
    h = float(u.h)
    v = np.asarray(u.v, dtype=float)
    nvec = np.asarray(nvec, dtype=float)
    c = np.sqrt(g * h)
    nv = float(v @ nvec)
    lams = np.array([nv, nv + c, nv - c])
    np_vec = perp(nvec)
    lefts = np.stack([
        np.concatenate([[0.0], np_vec]),
        np.concatenate([[c], h * nvec]),
        np.concatenate([[-c], h * nvec]),
    ])
    for i in range(3):
        lefts[i] /= np.linalg.norm(lefts[i])
        first = lefts[i][np.nonzero(np.abs(lefts[i]) > 1e-14)[0][0]]
        if first < 0:
            lefts[i] = -lefts[i]
    return lams, lefts, boundary_matrix(u, nvec)


def vorticity(v1, v2, grid):
    """Discrete curl of a sampled velocity field on a mapped grid."""
    return grid.curl(v1, v2)


@dataclass
class RegularizedEigenReport:
    eps_list: np.ndarray
    eigenvalues: np.ndarray      # (n_eps, 3), ascending per row
    zero_branch: np.ndarray      # (n_eps,)
    fitted_slope: float
    predicted_slope: float
    sign_counts: np.ndarray      # (n_eps, 2): (positives, negatives)


def zero_branch_slope(s_mat, nvec):
    """First-order rate of the near-zero eigenvalue: -(0, perp(N)) . S (0, perp(N))."""
    e = np.concatenate([[0.0], perp(np.asarray(nvec, dtype=float))])
    return float(-e @ s_mat @ e)


def regularized_boundary_eigen(s_mat, nvec, eps_list):
    """Spectrum of G_nor - eps S across a list of eps values.

    For symmetric positive definite S and small eps > 0 the spectrum splits
    into one positive and two negative eigenvalues, and the branch passing
    through zero leaves the origin with slope -(0, perp(N)) . S (0, perp(N)).
    The fitted slope comes from a least-squares fit of b*eps + c*eps^2.
    """
    s_mat = np.asarray(s_mat, dtype=float)
    if np.max(np.abs(s_mat - s_mat.T)) > 1e-12 * max(1.0, np.max(np.abs(s_mat))):
        raise ValueError("S must be symmetric")
    nvec = np.asarray(nvec, dtype=float)
    gn = g_nor(nvec)
    eps_list = np.asarray(eps_list, dtype=float)
    eigs = np.empty((eps_list.size, 3))
    zero_branch = np.empty(eps_list.size)
    signs = np.empty((eps_list.size, 2), dtype=int)
    for i, eps in enumerate(eps_list):
        lam = np.linalg.eigvalsh(gn - eps * s_mat)
        eigs[i] = lam
        zero_branch[i] = lam[np.argmin(np.abs(lam))]
        signs[i] = [(lam > 0).sum(), (lam < 0).sum()]
    design = np.stack([eps_list, eps_list ** 2], axis=1)
    coef, *_ = np.linalg.lstsq(design, zero_branch, rcond=None)
    return RegularizedEigenReport(eps_list=eps_list, eigenvalues=eigs,
                                  zero_branch=zero_branch,
                                  fitted_slope=float(coef[0]),
                                  predicted_slope=zero_branch_slope(s_mat, nvec),
                                  sign_counts=signs)


def recover_normal_derivative(u, du_dt, du_dtan, nvec, tvec, omega_in,
                              det_floor=1e-10):
    """Normal derivative of the state at a boundary-chart point.

    Inputs are the state u, its time derivative, its tangential derivative
    (all 3-vectors, with du_* = (d zeta, d v1, d v2)), the chart normal N
    and unscaled tangent T (|T| = Jacobian), and the conserved vorticity
    value. The interior equations give A_nor d_nor u = -(d_t u + A_tan
    d_tan u); the height/normal-velocity pair follows from a 2x2 solve with
    matrix [[N.v, h], [g, N.v]] whose determinant (N.v)^2 - g h stays away
    from zero for subcritical states, while the tangential velocity slot is
    supplied by the transported vorticity.
    """
    g = u.params.gravity
    h = float(u.h)
    v = np.asarray(u.v, dtype=float)
    nvec = np.asarray(nvec, dtype=float)
    tvec = np.asarray(tvec, dtype=float)
    t_norm2 = float(tvec @ tvec)
    a_nor = nvec[0] * _a_j(u, 0) + nvec[1] * _a_j(u, 1)
    a_tan = (tvec[0] * _a_j(u, 0) + tvec[1] * _a_j(u, 1)) / t_norm2
    rhs3 = -(np.asarray(du_dt, dtype=float) + a_tan @ np.asarray(du_dtan, dtype=float))

    dtan_v = np.asarray(du_dtan, dtype=float)[1:]
    np_vec = perp(nvec)
    tp_vec = perp(tvec)
    dnor_v_perp = float(omega_in) - float(tp_vec @ dtan_v) / t_norm2

    nv = float(v @ nvec)
    det = nv * nv - g * h
    if abs(det) < det_floor:
        raise SolverAbort("subcritical", detail="normal-derivative system singular")
    b1 = rhs3[0]
    b2 = float(nvec @ rhs3[1:]) - float(np_vec @ v) * dnor_v_perp
    dnor_zeta = (nv * b1 - h * b2) / det
    dnor_v_nor = (-g * b1 + nv * b2) / det
    dnor_v = dnor_v_nor * nvec + dnor_v_perp * np_vec
    return dnor_zeta, dnor_v


def _a_j(u, j):
    """Quasilinear matrix of the conservative flux, A_j = G_j Sigma."""
    return (G1 if j == 0 else G2) @ sigma_matrix(u)


def symmetrizer_spectral_bounds(params, c0, zeta_max, v_max):
    """Eigenvalue bracket [alpha0, beta0] for S over states with margin
    >= c0, |zeta| <= zeta_max, |v| <= v_max; from the bracket on Sigma."""
    g = params.gravity
    h_min = params.depth_ref - zeta_max
    h_max = params.depth_ref + zeta_max
    if h_min <= 0:
        raise ValueError("zeta_max exceeds the reference depth")
    sigma_max = max(h_max, g) + v_max
    # smallest eigenvalue of the 2x2 [[g, |v|], [|v|, h]] block is
    # det / trace >= c0 / (g + h_max); the third eigenvalue is h
    sigma_min = min(h_min, c0 / (g + h_max))
    return 1.0 / sigma_max, 1.0 / sigma_min


def boundary_quadratic_form(w, nvec):
    """G_nor w . w, equal to 2 w[0] (N . w[1:]) identically."""
    w = np.asarray(w, dtype=float)
    return float(w @ g_nor(np.asarray(nvec, dtype=float)) @ w)
